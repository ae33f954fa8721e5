"""Monodromy of linear systems dY/dz = Q(z) Y by transport along polyline loops."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from config import INTEGRATOR_RTOL, LOOP_SEGMENTS, SEPARATION_THRESHOLD, THREADS
from errors import InputValidationError, LoopTooCloseError, StepSizeUnderflowError
from models.types import MonodromyResult, RationalPotential, RepTuple, as_square

from .loop_geometry import (choose_basepoint, circle, min_gap, segment_distance,
                            spoke_end)

logger = logging.getLogger(__name__)

# global transport error per unit of integrator tolerance
_TRANSPORT_ERROR = 100.0


@dataclass(frozen=True, eq=False)
class CompanionSystem:
    """dY/dz = [[0, 1], [p(z), 0]] Y for a rational potential p."""
    potential: RationalPotential

    def matrix(self, z):
        return np.array([[0.0, 1.0], [self.potential(z), 0.0]], dtype=complex)

    def singularities(self):
        _, points = self.potential.phase.special_points()
        return points

    @property
    def size(self):
        return 2


@dataclass(frozen=True, eq=False)
class EulerSystem:
    """dY/dz = (C / z) Y."""
    C: np.ndarray

    def matrix(self, z):
        return self.C / z

    def singularities(self):
        return np.zeros(1, dtype=complex)

    @property
    def size(self):
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class FuchsianSystem:
    """dY/dz = sum_j R_j / (z - p_j) Y."""
    residues: tuple
    poles: np.ndarray

    def __post_init__(self):
        residues = tuple(as_square(R) for R in self.residues)
        poles = np.asarray(self.poles, dtype=complex).reshape(-1)
        if len(residues) != poles.size:
            raise InputValidationError('one residue per pole is required')
        object.__setattr__(self, 'residues', residues)
        object.__setattr__(self, 'poles', poles)

    def matrix(self, z):
        return sum(R / (z - p) for R, p in zip(self.residues, self.poles))

    def singularities(self):
        return self.poles

    @property
    def size(self):
        return self.residues[0].shape[0]


class MonodromyService:
    """Adaptive transport of fundamental solutions around loops in the z-plane."""

    def __init__(self, rtol=INTEGRATOR_RTOL, separation=SEPARATION_THRESHOLD,
                 segments=LOOP_SEGMENTS, threads=THREADS):
        """
        Args:
            rtol (float): Relative tolerance of the integrator
            separation (float): Minimal distance between a loop and a singular point
            segments (int): Polyline segments per circle
            threads (int): Loops transported in parallel
        """
        self.rtol = rtol
        self.separation = separation
        self.segments = segments
        self.threads = threads

    # --------------------------------------------------------------- transport

    def _check_clearance(self, system, loop):
        points = system.singularities()
        for a, b in zip(loop[:-1], loop[1:]):
            for p in points:
                distance = segment_distance(p, a, b)
                if distance < self.separation:
                    raise LoopTooCloseError(f'loop passes {distance:.3e} from the singular point {p}',
                                            {'point': complex(p), 'distance': distance})

    def transport(self, system, loop):
        """Matrix Phi with Y(end) = Phi Y(start) along the polyline ``loop``."""
        loop = [complex(z) for z in loop]
        self._check_clearance(system, loop)
        m = system.size
        y = np.eye(m, dtype=complex).reshape(-1)
        for a, b in zip(loop[:-1], loop[1:]):
            if a == b:
                continue
            step = b - a

            def rhs(s, y, a=a, step=step):
                Q = system.matrix(a + s * step)
                return step * (Q @ y.reshape(m, m)).reshape(-1)

            solution = solve_ivp(rhs, (0.0, 1.0), y, method='RK45', rtol=self.rtol, atol=self.rtol * 1e-2)
            if solution.status != 0:
                raise StepSizeUnderflowError(f'transport failed between {a} and {b}: {solution.message}')
            y = solution.y[:, -1]
        return y.reshape(m, m)

    def fuchsian_monodromy(self, system, loops):
        """Transport matrices of ``loops`` (all based at one point), in input order."""
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            matrices = list(pool.map(lambda loop: self.transport(system, loop), loops))
        logger.debug(f"Transported {len(loops)} loops for a rank-{system.size} system")
        return RepTuple(tuple(matrices), accuracy=_TRANSPORT_ERROR * self.rtol)

    # ------------------------------------------------------------------ loops

    def circle(self, center, radius, start_angle=0.0, clockwise=False):
        return circle(center, radius, self.segments, start_angle, clockwise)

    def generator_loops(self, poles, avoid=(), basepoint=None):
        """
        Standard generators around ``poles`` based at a point outside them.

        Returns:
            (loops, order, basepoint, infinity_loop): loop j encircles poles[order[j]]
            counter-clockwise; concatenating the loops in list order is homotopic to a
            large counter-clockwise circle, the inverse of ``infinity_loop``.
        """
        poles = np.asarray(poles, dtype=complex).reshape(-1)
        singular = np.concatenate([poles, np.asarray(avoid, dtype=complex).reshape(-1)])
        radius = 0.5 * min_gap(singular) if singular.size > 1 else 0.5
        if basepoint is None:
            basepoint, _ = choose_basepoint(singular, radius)
        basepoint = complex(basepoint)
        center = np.mean(singular)
        if abs(basepoint - center) <= float(np.max(np.abs(singular - center))):
            raise InputValidationError('the basepoint must lie outside the singular points')
        direction = (center - basepoint) / abs(center - basepoint)
        order = sorted(range(poles.size), key=lambda j: np.angle((poles[j] - basepoint) / direction))

        loops = []
        for j in order:
            p = poles[j]
            start_angle = float(np.angle(spoke_end(p, radius, basepoint) - p))
            loops.append([basepoint] + self.circle(p, radius, start_angle) + [basepoint])
        big = abs(basepoint - center)
        infinity = self.circle(center, big, float(np.angle(basepoint - center)), clockwise=True)
        infinity[0] = infinity[-1] = basepoint
        return loops, order, basepoint, infinity

    def monodromy_around(self, system, poles, labels, avoid=(), basepoint=None):
        """
        Monodromy tuple (M_k, ..., M_1, M_inf) for generator loops gamma_1..gamma_k.

        With every singular point among ``poles`` the ordered product is the identity.
        The tuple's accuracy is the larger of the integrator error estimate and the
        distance of that product from a scalar matrix.
        """
        loops, order, basepoint, infinity = self.generator_loops(poles, avoid, basepoint)
        rep = self.fuchsian_monodromy(system, loops + [infinity])
        mats = list(rep.matrices)
        ordered = RepTuple(tuple(mats[:-1][::-1] + [mats[-1]]))
        accuracy = max(_TRANSPORT_ERROR * self.rtol, ordered.scalar_defect())
        names = tuple(labels[j] for j in order[::-1]) + ('inf',)
        logger.debug(f"Monodromy tuple accurate to {accuracy:.1e}")
        return MonodromyResult(tuple=RepTuple(ordered.matrices, accuracy=accuracy),
                               labels=names, basepoint=basepoint)

    def garnier_monodromy(self, potential, include_lambda=False, basepoint=None):
        """Monodromy of the companion system of a Garnier potential around t_i, 0, 1 (and lambda_i)."""
        phase = potential.phase
        labels, points = phase.special_points()
        count = phase.N + 2 + (phase.N if include_lambda else 0)
        avoid = points[count:]
        result = self.monodromy_around(CompanionSystem(potential), points[:count], labels[:count],
                                       avoid=avoid, basepoint=basepoint)
        logger.info(f"Garnier monodromy over {count} poles based at {result.basepoint:.4f}")
        return result
