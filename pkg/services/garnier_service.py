"""Garnier system: potentials, Hamiltonians, isomonodromic flow and branch probing."""
import itertools
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import sympy as sp
from cachetools import LRUCache, cached
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp

from config import (BRANCH_CAP, BRANCH_DEPTH, BRANCH_TOLERANCE, CACHE_MAX_SIZE,
                    INTEGRATOR_RTOL, LOOP_SEGMENTS, SEPARATION_THRESHOLD,
                    THREADS, TOLERANCE)
from errors import (DegeneracyError, IllConditionedError, InconsistencyError,
                    InputValidationError, PreconditionError,
                    StepSizeUnderflowError)
from models.types import (BranchVerdict, ExtractedCoefficients,
                          FlowTrajectory, PhasePoint,
                          RationalPotential, RationalTriple, UReading,
                          garnier_coefficients)

from .cache_service import CacheService
from .loop_geometry import choose_basepoint, circle, min_gap, segment_distance, spoke_end

logger = logging.getLogger(__name__)

# largest condition number accepted for an interpolation system
_MAX_CONDITION = 1e12


def _hamiltonian_terms(t, lam, nu, a, reading):
    """
    L_1..L_N from the coefficient families M_i, M^{k,i}, M^{k,i,0}, U_k.

    Written with plain arithmetic so that it evaluates both on complex numbers
    and on sympy symbols.  Indices N+1, N+2 of the poles stand for 0 and 1.
    """
    N = len(t)
    poles = list(t) + [0, 1]
    L = []
    for i in range(N):
        M_i = -math.prod(t[i] - l for l in lam) / math.prod(t[i] - poles[m] for m in range(N + 2) if m != i)
        skip = i if reading == UReading.SKIP_I else None
        total = 0
        for k in range(N):
            psi_prime = math.prod(lam[k] - lam[m] for m in range(N) if m != k)
            M_ki = math.prod(lam[k] - poles[m] for m in range(N + 2) if m != i) / psi_prime
            M_ki0 = M_ki * (sum(1 / (lam[k] - poles[m]) for m in range(N + 2) if m != i)
                            - sum(1 / (lam[k] - lam[m]) for m in range(N) if m != k))
            U_k = (a[N + 2] / (lam[k] * (lam[k] - 1))
                   + sum(a[m] / (lam[k] - poles[m]) ** 2 for m in range(N + 2) if m != skip)
                   + sum(3 / (4 * (lam[k] - lam[m]) ** 2) for m in range(N) if m != k))
            total = total + M_ki * nu[k] ** 2 - M_ki0 * nu[k] - M_ki * U_k
        L.append(M_i * total)
    return L


@cached(cache=LRUCache(maxsize=16), lock=threading.Lock())
def _compiled_gradients(N, reading):
    """Lambdified (dL/dlambda, dL/dnu, dL/dt) as N x N arrays, rows indexed by i."""
    t = sp.symbols(f't1:{N + 1}')
    lam = sp.symbols(f'l1:{N + 1}')
    nu = sp.symbols(f'n1:{N + 1}')
    a = sp.symbols(f'a1:{N + 4}')
    L = sp.Matrix(_hamiltonian_terms(t, lam, nu, a, reading))
    d_lam = L.jacobian(lam)
    d_nu = L.jacobian(nu)
    d_t = L.jacobian(t)
    logger.debug(f"Compiled Hamiltonian gradients for N={N}, reading={reading.value}")
    args = (t, lam, nu, a)
    return (sp.lambdify(args, d_lam, modules='numpy', cse=True),
            sp.lambdify(args, d_nu, modules='numpy', cse=True),
            sp.lambdify(args, d_t, modules='numpy', cse=True))


def _closest_pair(labels, points):
    points = np.asarray(points, dtype=complex)
    dist = np.abs(points[:, None] - points[None, :])
    np.fill_diagonal(dist, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return float(dist[i, j]), (labels[min(i, j)], labels[max(i, j)])


class GarnierService:
    """Numerical Garnier system in the normalization t_{N+1} = 0, t_{N+2} = 1."""

    def __init__(self, reading=UReading.FULL_SUM, separation=SEPARATION_THRESHOLD,
                 rtol=INTEGRATOR_RTOL, segments=LOOP_SEGMENTS, branch_tol=BRANCH_TOLERANCE,
                 threads=THREADS, cache_size=CACHE_MAX_SIZE):
        """
        Initialize the Garnier service.

        Args:
            reading (UReading): Summation range used for U_k
            separation (float): Minimal distance kept between 0, 1, t_i and lambda_i
            rtol (float): Relative tolerance of the adaptive integrator
            segments (int): Polyline segments per circular loop
            branch_tol (float): Relative tolerance identifying continued branches
            threads (int): Worker threads for independent continuations
            cache_size (int): Capacity of the continuation memo
        """
        self.reading = UReading(reading)
        self.separation = separation
        self.rtol = rtol
        self.segments = segments
        self.branch_tol = branch_tol
        self.threads = threads
        self.endpoints = CacheService(max_size=cache_size, name='continuations')

    # ------------------------------------------------------------ exponents

    @staticmethod
    def theta_to_coeffs(theta):
        return garnier_coefficients(theta)

    @staticmethod
    def coeffs_to_theta_n(a):
        """Both exponents at infinity compatible with a_1..a_{N+3}; they sum to 2."""
        a = np.asarray(a, dtype=complex)
        N = a.size - 3
        if N < 1:
            raise InputValidationError(f'need at least 4 coefficients, got {a.size}')
        base = (1 - N) / 2 - np.sum(a[:N + 2] + 0.25)
        root = np.sqrt(1 + 4 * (a[N + 2] - base) + 0j)
        return complex(1 + root), complex(1 - root)

    # --------------------------------------------------------- Hamiltonians

    def _check_separation(self, phase, error=IllConditionedError):
        labels, points = phase.special_points()
        distance, pair = _closest_pair(labels, points)
        if distance < self.separation:
            raise error(f'points {pair[0]} and {pair[1]} are {distance:.3e} apart',
                        {'pair': pair, 'distance': distance})
        return distance

    def hamiltonians(self, config, phase, reading=None):
        """
        Hamiltonians of the Garnier system at a phase point.

        Args:
            config (GarnierConfig): Local exponents
            phase (PhasePoint): Times and canonical coordinates
            reading (UReading): Summation range of the U_k term; defaults to the service setting

        Returns:
            np.ndarray: One complex value per time

        Raises:
            InputValidationError: If config and phase disagree on N
            IllConditionedError: If two special points are closer than the separation
        """
        if config.N != phase.N:
            raise InputValidationError(f'config has N={config.N}, phase has N={phase.N}')
        self._check_separation(phase)
        reading = UReading(reading or self.reading)
        L = _hamiltonian_terms([complex(x) for x in phase.t], [complex(x) for x in phase.lam],
                               [complex(x) for x in phase.nu], [complex(x) for x in config.a], reading)
        return np.array(L, dtype=complex)

    def hamiltonian_gradient(self, config, t, lam, nu, reading=None):
        """(dL_i/dlambda_k, dL_i/dnu_k, dL_i/dt_k) as three N x N arrays."""
        reading = UReading(reading or self.reading)
        N = len(t)
        args = (tuple(t), tuple(lam), tuple(nu), tuple(config.a))
        return tuple(np.asarray(f(*args), dtype=complex).reshape(N, N)
                     for f in _compiled_gradients(N, reading))

    def apparency_defect(self, config, phase, L):
        """
        s_k - r_k^2 at each lambda_k, where p = 3/(4x^2) + r_k/x + s_k + O(x).

        Vanishes exactly when the companion equation has no logarithm at lambda_k.
        """
        a, N = config.a, config.N
        t, lam, nu = phase.t, phase.lam, phase.nu
        L = np.asarray(L, dtype=complex)
        poles = phase.poles()
        defects = []
        for k in range(N):
            x = lam[k]
            xx1 = x * (x - 1)
            s = a[N + 2] / xx1 + np.sum(a[:N + 2] / (x - poles) ** 2)
            s += sum(0.75 / (x - lam[m]) ** 2 for m in range(N) if m != k)
            s += np.sum(t * (t - 1) * L / (xx1 * (x - t)))
            s -= sum(lam[m] * (lam[m] - 1) * nu[m] / (xx1 * (x - lam[m])) for m in range(N) if m != k)
            s += nu[k] * (2 * x - 1) / xx1
            defects.append(s - nu[k] ** 2)
        return np.array(defects, dtype=complex)

    def potential(self, config, phase, L=None):
        """Potential p(z, t) at a phase point; ``L`` are precomputed Hamiltonians if given."""
        if L is None:
            L = self.hamiltonians(config, phase)
        return RationalPotential(config=config, phase=phase, L=L)

    # ------------------------------------------------------------------ flow

    def _check_path(self, path):
        """Reject legs along which two of t_1..t_N, 0, 1 come closer than the separation."""
        for leg, (start, stop) in enumerate(zip(path[:-1], path[1:])):
            fixed = list(zip(start, stop)) + [(0.0, 0.0), (1.0, 1.0)]
            for (a0, a1), (b0, b1) in itertools.combinations(fixed, 2):
                distance = segment_distance(0.0, a0 - b0, a1 - b1)
                if distance < self.separation:
                    raise PreconditionError(f'leg {leg + 1} of the path meets the discriminant')

    def _integrate_leg(self, config, y0, start, stop):
        N = config.N
        delta = stop - start
        poles01 = np.array([0.0, 1.0], dtype=complex)
        grad_lam, grad_nu, _ = _compiled_gradients(N, self.reading)
        a = tuple(config.a)

        def rhs(s, y):
            args = (tuple(start + s * delta), tuple(y[:N]), tuple(y[N:]), a)
            d_lam = np.asarray(grad_lam(*args), dtype=complex).reshape(N, N)
            d_nu = np.asarray(grad_nu(*args), dtype=complex).reshape(N, N)
            return np.concatenate([delta @ d_nu, -(delta @ d_lam)])

        def collision(s, y):
            points = np.concatenate([start + s * delta, poles01, y[:N]])
            dist = np.abs(points[:, None] - points[None, :])
            np.fill_diagonal(dist, np.inf)
            return float(dist.min()) - self.separation
        collision.terminal = True

        solution = solve_ivp(rhs, (0.0, 1.0), y0, method='RK45', rtol=self.rtol,
                             atol=self.rtol * 1e-2, events=collision)
        if solution.status == -1:
            raise StepSizeUnderflowError(f'integrator failed: {solution.message}')
        if solution.status == 1:
            s = float(solution.t_events[0][0])
            y = solution.y_events[0][0]
            t = start + s * delta
            labels = [f't{i + 1}' for i in range(N)] + ['0', '1'] + [f'lambda{i + 1}' for i in range(N)]
            _, pair = _closest_pair(labels, np.concatenate([t, poles01, y[:N]]))
            raise DegeneracyError(f'{pair[0]} and {pair[1]} collided along the flow',
                                  {'t': t.tolist(), 'pair': pair})
        return solution

    def trace_flow(self, config, phase0, path):
        """
        Integrate the Garnier system along a polyline in t-space.

        Args:
            config (GarnierConfig): Local exponents
            phase0 (PhasePoint): Initial phase; its t must equal the first waypoint
            path: Sequence of t-vectors

        Returns:
            FlowTrajectory with the accepted integrator steps
        """
        path = [np.asarray(w, dtype=complex).reshape(-1) for w in path]
        if not path:
            return FlowTrajectory(arclength=np.zeros(1), points=(phase0,))
        if any(w.size != phase0.N for w in path):
            raise InputValidationError('path waypoints must have N coordinates')
        if np.max(np.abs(path[0] - phase0.t)) > TOLERANCE * max(1.0, np.max(np.abs(phase0.t))):
            raise PreconditionError('path must start at the t of the initial phase')
        self._check_separation(phase0, error=PreconditionError)
        self._check_path(path)

        N = phase0.N
        y = phase0.as_vector()
        points = [phase0]
        arclength = [0.0]
        offset = 0.0
        for start, stop in zip(path[:-1], path[1:]):
            length = float(np.linalg.norm(stop - start))
            if length == 0.0:
                continue
            solution = self._integrate_leg(config, y, start, stop)
            for s, ys in zip(solution.t[1:], solution.y.T[1:]):
                points.append(PhasePoint(start + s * (stop - start), ys[:N], ys[N:]))
                arclength.append(offset + length * s)
            offset += length
            y = solution.y[:, -1]
            logger.debug(f"Flow leg of length {length:.3e} in {len(solution.t) - 1} steps")
        return FlowTrajectory(arclength=np.array(arclength), points=tuple(points))

    def flow(self, config, phase0, path):
        """
        Endpoint of the flow along a path of times.

        Args:
            config (GarnierConfig): System parameters
            phase0 (PhasePoint): Initial data at ``path[0]``
            path (list): Waypoints in time space

        Returns:
            PhasePoint: Phase point at the last waypoint
        """
        return self.trace_flow(config, phase0, path).endpoint

    # ------------------------------------------------------- normalized form

    @staticmethod
    def _phi(phase):
        return Polynomial.fromroots(np.concatenate([[0.0, 1.0], phase.t]))

    @staticmethod
    def _psi(phase):
        return Polynomial.fromroots(phase.lam)

    @staticmethod
    def _interpolate(nodes, values, what):
        V = np.vander(nodes, len(nodes), increasing=True)
        condition = np.linalg.cond(V)
        if not np.isfinite(condition) or condition > _MAX_CONDITION:
            raise IllConditionedError(f'{what} interpolation has condition number {condition:.3e}',
                                      {'condition': float(condition)})
        return np.linalg.solve(V, values)

    def normalized_form(self, config, phase, theta_n=None):
        """The triple (a, b, c) with c = psi/phi reproducing the coefficients of the phase."""
        if config.N != phase.N:
            raise InputValidationError(f'config has N={config.N}, phase has N={phase.N}')
        self._check_separation(phase)
        theta_n = config.theta_n if theta_n is None else complex(theta_n)
        roots = self.coeffs_to_theta_n(config.a)
        if min(abs(theta_n - r) for r in roots) > 1e-8 * max(1.0, abs(theta_n)):
            raise InputValidationError(f'theta_n={theta_n} is not compatible with the coefficients {roots}')

        N = phase.N
        lam = phase.lam
        poles = phase.poles()
        phi, psi = self._phi(phase), self._psi(phase)
        dphi = phi.deriv()
        phi_1 = phi.coef[N + 1]

        # b: residues -nu_i at lambda_i and -theta_n/xi at infinity
        h = np.array([sum(1 / (lam[i] - lam[k]) for k in range(N) if k != i) - dphi(lam[i]) / phi(lam[i])
                      for i in range(N)])
        leading = theta_n * (lam ** (N + 1) + phi_1 * lam ** N)
        r = self._interpolate(lam, phi(lam) * (-2 * phase.nu - h) - leading, 'residue')
        q_b = Polynomial(np.concatenate([r, [theta_n * phi_1, theta_n]]))

        # a: principal parts a_m / (z - t_m)^2 at t_1..t_N, 0, 1
        beta = q_b(poles) / dphi(poles)
        targets = dphi(poles) ** 2 * (beta ** 2 / 4 - 0.25 - config.a[:N + 2]) / psi(poles)
        q_a = Polynomial(self._interpolate(poles, targets, 'principal part'))
        return RationalTriple(q_a=q_a, q_b=q_b, psi=psi, phi=phi, theta_n=theta_n)

    # ----------------------------------------------------- companion extract

    @staticmethod
    def companion_numerator(triple):
        """Numerator P of p = P / (phi psi)^2 for the companion potential of (a, b, c)."""
        psi, phi, q_a, q_b = triple.psi, triple.phi, triple.q_a, triple.q_b
        D = psi * phi
        W = psi.deriv() * phi - phi.deriv() * psi
        P = (0.25 * W * W - 0.5 * W.deriv() * D + 0.5 * W * D.deriv()
             - 0.5 * (q_b.deriv() * phi - q_b * phi.deriv()) * psi * psi
             + 0.5 * q_b * W * psi + 0.25 * q_b * q_b * psi * psi - q_a * psi * psi * psi)
        return P

    @staticmethod
    def basis_numerator(a, phase, L):
        """Numerator over (phi psi)^2 of the potential with coefficients (a, L, nu of the phase)."""
        N = phase.N
        t, lam, nu = phase.t, phase.lam, phase.nu
        poles = phase.poles()
        a = np.asarray(a, dtype=complex)
        L = np.asarray(L, dtype=complex)
        phi = Polynomial.fromroots(poles)
        psi = Polynomial.fromroots(lam)
        T = Polynomial.fromroots(t)

        def drop(roots, index):
            return Polynomial.fromroots(np.delete(roots, index))

        P = a[N + 2] * T * phi * psi * psi
        for m in range(N + 2):
            P = P + a[m] * drop(poles, m) ** 2 * psi * psi
        for i in range(N):
            psi_i = drop(lam, i)
            P = P + 0.75 * phi * phi * psi_i * psi_i
            P = P - lam[i] * (lam[i] - 1) * nu[i] * T * phi * psi * psi_i
            P = P + t[i] * (t[i] - 1) * L[i] * drop(t, i) * phi * psi * psi
        return P

    def extract_coefficients(self, P, phase):
        """Coefficients of p = P / (phi psi)^2 in the partial fraction basis."""
        N = phase.N
        t, lam = phase.t, phase.lam
        poles = phase.poles()
        phi = Polynomial.fromroots(poles)
        psi = Polynomial.fromroots(lam)
        D = psi * phi

        scale = max(1.0, float(np.abs(P.coef).max()))
        if P.coef.size > 4 * N + 3 and np.abs(P.coef[4 * N + 3:]).max() > 1e-9 * scale:
            raise InconsistencyError(f'numerator has degree above {4 * N + 2}')

        def double_pole(z0):
            E, _ = divmod(D, Polynomial([-z0, 1.0]))
            return P(z0) / E(z0) ** 2

        def residue(z0):
            E, _ = divmod(D, Polynomial([-z0, 1.0]))
            return (P.deriv()(z0) * E(z0) - 2 * P(z0) * E.deriv()(z0)) / E(z0) ** 3

        a = np.zeros(N + 3, dtype=complex)
        for m in range(N + 2):
            a[m] = double_pole(poles[m])
        lambda_double = np.array([double_pole(x) for x in lam])
        nu = np.array([-residue(x) for x in lam])
        L = np.array([residue(x) for x in t])
        a[N + 2] = -residue(0.0) + np.sum((t - 1) * L) - np.sum((lam - 1) * nu)

        if np.max(np.abs(lambda_double - 0.75)) > 1e-6:
            raise InconsistencyError(f'double pole coefficients at lambda are {lambda_double.tolist()}, expected 3/4')

        rebuilt = self.basis_numerator(a, PhasePoint(t, lam, nu), L)
        size = max(P.coef.size, rebuilt.coef.size)
        gap = np.pad(P.coef, (0, size - P.coef.size)) - np.pad(rebuilt.coef, (0, size - rebuilt.coef.size))
        deviation = float(np.abs(gap).max()) / scale
        if deviation > 1e-6:
            raise InconsistencyError(f'partial fraction expansion misses the potential by {deviation:.3e}')
        return ExtractedCoefficients(a=a, L=L, nu=nu, lambda_double=lambda_double)

    def companion_extract(self, triple, phase):
        """
        Read the phase coordinates back off a companion triple.

        Args:
            triple (RationalTriple): Output of ``normalized_form``
            phase (PhasePoint): Supplies the times and N

        Returns:
            PhasePoint: Recovered coordinates

        Raises:
            InconsistencyError: If the polynomial degrees do not match the phase
        """
        if triple.phi.degree() != phase.N + 2 or triple.psi.degree() != phase.N:
            raise InconsistencyError('triple does not match the phase dimensions')
        return self.extract_coefficients(self.companion_numerator(triple), phase)

    # --------------------------------------------------------- branch probe

    def elementary_loops(self, t0, avoid=()):
        """
        Keyhole loops in t-space: t_i leaves t0 for a basepoint outside the other
        special points, runs down a spoke to q in {0, 1, t_j}, circles q once
        counter-clockwise and retraces its way; the other coordinates stay frozen.

        Args:
            t0 (np.ndarray): Starting times t_1..t_N
            avoid (np.ndarray): Points the route keeps clear of as well (typically lambda)

        Returns:
            list of (label, waypoints) with labels 't{i}~{q}'
        """
        t0 = np.asarray(t0, dtype=complex)
        avoid = np.asarray(avoid, dtype=complex).reshape(-1)
        N = t0.size
        loops = []
        for i in range(N):
            labels = ['0', '1'] + [f't{j + 1}' for j in range(N) if j != i]
            targets = np.array([0.0, 1.0] + [t0[j] for j in range(N) if j != i], dtype=complex)
            points = np.concatenate([targets, avoid])
            radius = 0.5 * min(min_gap(points), float(np.min(np.abs(points - t0[i]))))
            basepoint, clearance = choose_basepoint(points, radius, origin=t0[i], encircled=targets.size)
            if clearance < self.separation:
                raise PreconditionError(f'no clear route for t{i + 1} around the other special points')

            def waypoint(z, i=i):
                w = t0.copy()
                w[i] = z
                return w

            for label, q in zip(labels, targets):
                end = spoke_end(q, radius, basepoint)
                ring = circle(q, radius, self.segments, float(np.angle(end - q)))
                route = [t0[i], basepoint] + ring + [basepoint, t0[i]]
                loops.append((f't{i + 1}~{label}', [waypoint(z) for z in route]))
        return loops

    def _same_branch(self, p, q):
        N = p.N
        for perm in itertools.permutations(range(N)):
            lam = q.lam[list(perm)]
            nu = q.nu[list(perm)]
            values = np.concatenate([p.lam, p.nu])
            others = np.concatenate([lam, nu])
            scale = np.maximum(1.0, np.maximum(np.abs(values), np.abs(others)))
            if np.all(np.abs(values - others) <= self.branch_tol * scale):
                return True
        return False

    def _continue(self, config, phase, loop_index, loop):
        key = (tuple(config.theta.tolist()), loop_index, tuple(np.round(phase.as_vector(), 8).tolist()))
        return self.endpoints.get_or_compute(key, lambda: self.flow(config, phase, loop))

    def branch_probe(self, config, phase0, depth=BRANCH_DEPTH, cap=BRANCH_CAP):
        """
        Analytic continuation of a phase along words in the elementary loops.

        Returns:
            BranchVerdict 'branches' when no new branch appears within ``depth``
            rounds, otherwise 'exceeded_cap'
        """
        if depth < 0 or cap < 1:
            raise InputValidationError('depth must be non-negative and cap positive')
        loops = self.elementary_loops(phase0.t, avoid=phase0.lam)
        branches = [phase0]
        frontier = [0]
        rounds = 0
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            while frontier and rounds < depth:
                rounds += 1
                jobs = [(idx, k) for idx in frontier for k in range(len(loops))]
                endpoints = list(pool.map(
                    lambda job: self._continue(config, branches[job[0]], job[1], loops[job[1]][1]), jobs))
                frontier = []
                for endpoint in endpoints:
                    if any(self._same_branch(b, endpoint) for b in branches):
                        continue
                    branches.append(endpoint)
                    frontier.append(len(branches) - 1)
                    if len(branches) > cap:
                        logger.info(f"Branch probe exceeded cap {cap} after {rounds} rounds")
                        return BranchVerdict(kind='exceeded_cap', visited=len(branches), depth_reached=rounds)
                logger.debug(f"Branch probe round {rounds}: {len(branches)} branches")
        if frontier:
            logger.info(f"Branch probe found new branches in the last of {rounds} rounds")
            return BranchVerdict(kind='exceeded_cap', visited=len(branches), depth_reached=rounds)
        logger.info(f"Branch probe closed with {len(branches)} branches")
        return BranchVerdict(kind='branches', count=len(branches), branches=tuple(branches),
                             visited=len(branches), depth_reached=rounds)
