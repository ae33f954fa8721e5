"""Immutable value types passed between the services."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from config import (BRANCH_TOLERANCE, CLUSTER_TOLERANCE, INTEGRATOR_RTOL,
                    SEPARATION_THRESHOLD, SINGULAR_THRESHOLD, TOLERANCE)
from errors import InputValidationError


def frozen_array(values, ndim=None):
    """Return a read-only complex copy of ``values``."""
    arr = np.array(values, dtype=complex)
    if ndim is not None and arr.ndim != ndim:
        raise InputValidationError(f'expected a {ndim}-dimensional array, got shape {arr.shape}')
    arr.setflags(write=False)
    return arr


def as_square(values):
    arr = np.asarray(values, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputValidationError(f'expected a square matrix, got shape {arr.shape}')
    return arr


@dataclass(frozen=True)
class Tolerances:
    """Tolerances in effect for one computation; echoed in every result."""
    tol: float = TOLERANCE
    cluster_tol: float = CLUSTER_TOLERANCE
    singular: float = SINGULAR_THRESHOLD
    rtol: float = INTEGRATOR_RTOL
    separation: float = SEPARATION_THRESHOLD
    branch_tol: float = BRANCH_TOLERANCE

    def as_dict(self):
        return {
            'tol': self.tol,
            'cluster_tol': self.cluster_tol,
            'singular': self.singular,
            'rtol': self.rtol,
            'separation': self.separation,
            'branch_tol': self.branch_tol,
        }


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: tuple  # ((value, multiplicity), ...)
    basis_change: np.ndarray

    @property
    def values(self):
        return [value for value, _ in self.eigenvalues]

    @property
    def multiplicities(self):
        return [mult for _, mult in self.eigenvalues]


# ---------------------------------------------------------------- braid orbits

@dataclass(frozen=True, eq=False)
class RepTuple:
    """
    Monodromy tuple (M_1, ..., M_n) of invertible m x m matrices, n >= 3.

    ``accuracy`` is the relative error the entries are known to (0 for exact input);
    tuples produced by transport carry the error estimate of the integrator.
    """
    matrices: tuple
    product_constraint: bool = False
    accuracy: float = 0.0

    def __post_init__(self):
        mats = tuple(frozen_array(M, ndim=2) for M in self.matrices)
        if len(mats) < 3:
            raise InputValidationError(f'a tuple needs at least three matrices, got {len(mats)}')
        if not self.accuracy >= 0.0:
            raise InputValidationError(f'accuracy must be non-negative, got {self.accuracy}')
        m = mats[0].shape[0]
        for j, M in enumerate(mats):
            if M.shape != (m, m):
                raise InputValidationError(f'matrix {j + 1} has shape {M.shape}, expected {(m, m)}')
            if m and abs(np.linalg.det(M)) <= SINGULAR_THRESHOLD:
                raise InputValidationError(f'matrix {j + 1} is not invertible')
        object.__setattr__(self, 'matrices', mats)
        object.__setattr__(self, 'accuracy', float(self.accuracy))
        if self.product_constraint and m:
            scale = max(1.0, max(np.linalg.norm(M) for M in mats) ** len(mats))
            if np.linalg.norm(self.product() - np.eye(m)) > max(TOLERANCE, self.accuracy) * scale:
                raise InputValidationError('ordered product of the tuple is not the identity')

    @property
    def n(self):
        return len(self.matrices)

    @property
    def m(self):
        return self.matrices[0].shape[0]

    def product(self):
        if self.m == 0:
            return np.zeros((0, 0), dtype=complex)
        result = np.eye(self.m, dtype=complex)
        for M in self.matrices:
            result = result @ M
        return result

    def traces(self):
        return [complex(np.trace(M)) for M in self.matrices]

    def scalar_defect(self):
        """Relative distance of the ordered product from the nearest scalar matrix."""
        if self.m == 0:
            return 0.0
        P = self.product()
        scalar = np.trace(P) / self.m
        return float(np.linalg.norm(P - scalar * np.eye(self.m)) / max(1.0, np.linalg.norm(P)))

    def replace(self, matrices):
        """Same constraint flag and accuracy, new matrices (validation re-runs)."""
        return RepTuple(tuple(matrices), self.product_constraint, self.accuracy)


@dataclass(frozen=True)
class BraidWord:
    """Word in the Artin generators; letters are (i, +1) or (i, -1), 1-based."""
    letters: tuple = ()

    def __post_init__(self):
        letters = tuple((int(i), int(s)) for i, s in self.letters)
        for i, s in letters:
            if i < 1 or s not in (1, -1):
                raise InputValidationError(f'invalid braid letter {(i, s)}')
        object.__setattr__(self, 'letters', letters)

    def __len__(self):
        return len(self.letters)

    def __add__(self, other):
        return BraidWord(self.letters + other.letters)

    def inverse(self):
        return BraidWord(tuple((i, -s) for i, s in reversed(self.letters)))

    def free_reduce(self):
        stack = []
        for letter in self.letters:
            if stack and stack[-1] == (letter[0], -letter[1]):
                stack.pop()
            else:
                stack.append(letter)
        return BraidWord(tuple(stack))

    def max_index(self):
        return max((i for i, _ in self.letters), default=0)

    def label(self):
        if not self.letters:
            return 'e'
        return ' '.join(f's{i}' if s == 1 else f's{i}^-1' for i, s in self.letters)


@dataclass(frozen=True, eq=False)
class OrbitVerdict:
    kind: str  # 'finite' or 'exceeded_cap'
    size: Optional[int] = None
    fingerprints: tuple = ()
    visited: int = 0
    generator_images: dict = field(default_factory=dict)

    @property
    def is_finite(self):
        return self.kind == 'finite'


# ---------------------------------------------------------- log connections

@dataclass(frozen=True, eq=False)
class GermConnection:
    """Germ dY - A(w) (dw/w) Y with A(w) = sum_k A_k w^k."""
    coeffs: np.ndarray

    def __post_init__(self):
        arr = frozen_array(self.coeffs)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] == 0:
            raise InputValidationError(f'germ coefficients must have shape (d+1, m, m), got {arr.shape}')
        object.__setattr__(self, 'coeffs', arr)

    @property
    def m(self):
        return self.coeffs.shape[1]

    @property
    def degree(self):
        return self.coeffs.shape[0] - 1

    def at(self, w):
        return sum(A * w ** k for k, A in enumerate(self.coeffs))

    def as_laurent(self):
        return LaurentMatrix(self.coeffs, 0)


@dataclass(frozen=True, eq=False)
class LaurentMatrix:
    """Matrix Laurent polynomial sum_{k >= k0} G_k w^k; used for gauge transforms."""
    coeffs: np.ndarray
    k0: int = 0

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise InputValidationError(f'Laurent coefficients must have shape (K, m, m), got {arr.shape}')
        arr.setflags(write=False)
        object.__setattr__(self, 'coeffs', arr)
        object.__setattr__(self, 'k0', int(self.k0))

    @classmethod
    def constant(cls, M):
        return cls(np.asarray(M, dtype=complex)[None], 0)

    @property
    def m(self):
        return self.coeffs.shape[1]

    @property
    def top(self):
        return self.k0 + self.coeffs.shape[0] - 1

    def coefficient(self, k):
        idx = k - self.k0
        if 0 <= idx < self.coeffs.shape[0]:
            return self.coeffs[idx]
        return np.zeros((self.m, self.m), dtype=complex)

    def trimmed(self, atol=0.0):
        norms = np.array([np.abs(c).max() if c.size else 0.0 for c in self.coeffs])
        keep = np.nonzero(norms > atol)[0]
        if keep.size == 0:
            return LaurentMatrix(np.zeros((1, self.m, self.m)), 0)
        return LaurentMatrix(self.coeffs[keep[0]:keep[-1] + 1], self.k0 + int(keep[0]))

    def __add__(self, other):
        lo = min(self.k0, other.k0)
        hi = max(self.top, other.top)
        return LaurentMatrix([self.coefficient(k) + other.coefficient(k) for k in range(lo, hi + 1)], lo)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return LaurentMatrix(self.coeffs * c, self.k0)

    def __matmul__(self, other):
        out = np.zeros((self.coeffs.shape[0] + other.coeffs.shape[0] - 1, self.m, self.m), dtype=complex)
        for i, X in enumerate(self.coeffs):
            for j, Y in enumerate(other.coeffs):
                out[i + j] += X @ Y
        return LaurentMatrix(out, self.k0 + other.k0)

    def truncate(self, max_degree):
        """Drop every term of degree above ``max_degree``."""
        if self.top <= max_degree:
            return self
        keep = max_degree - self.k0 + 1
        if keep <= 0:
            return LaurentMatrix(np.zeros((1, self.m, self.m)), 0)
        return LaurentMatrix(self.coeffs[:keep], self.k0)

    def euler_derivative(self):
        """w * dG/dw."""
        ks = np.arange(self.k0, self.top + 1)
        return LaurentMatrix(self.coeffs * ks[:, None, None], self.k0)

    def at(self, w):
        return sum(C * w ** (self.k0 + i) for i, C in enumerate(self.coeffs))

    def max_abs(self):
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def is_holomorphic(self, atol=1e-12):
        g = self.trimmed(atol)
        if g.k0 < 0:
            return False
        G0 = g.coefficient(0)
        return abs(np.linalg.det(G0)) > SINGULAR_THRESHOLD


@dataclass(frozen=True, eq=False)
class ReducedBlock:
    start: int
    stop: int
    gamma: np.ndarray  # leading constant (Jordan form)


@dataclass(frozen=True, eq=False)
class ReducedConnection:
    germ: GermConnection
    blocks: tuple
    lambda_diag: np.ndarray

    @property
    def m(self):
        return self.germ.m


@dataclass(frozen=True)
class ReductionReport:
    ok: bool
    condition: Optional[int] = None
    message: str = ''


@dataclass(frozen=True, eq=False)
class MildVerdict:
    mild: bool
    witness: Optional[LaurentMatrix] = None
    entry: Optional[tuple] = None
    exponent_gap: Optional[int] = None
    report: str = ''


# ------------------------------------------------------------------ garnier

class UReading(str, enum.Enum):
    """Summation range of the U_k term in the Garnier Hamiltonians."""
    FULL_SUM = 'full_sum'  # m runs over all of 1..N+2
    SKIP_I = 'skip_i'      # m != i excluded


def garnier_coefficients(theta):
    """a_1..a_{N+3} from the local exponents theta_1..theta_n."""
    theta = np.asarray(theta, dtype=complex)
    n = theta.size
    if n < 4:
        raise InputValidationError(f'need at least 4 local exponents, got {n}')
    N = n - 3
    finite = theta[:N + 2]
    a = list((finite ** 2 - 1) / 4)
    half = theta[-1] / 2
    a.append((1 - N) / 2 - np.sum(finite ** 2) / 4 + half * (half - 1))
    return np.array(a, dtype=complex)


@dataclass(frozen=True, eq=False)
class GarnierConfig:
    """Local exponents at t_1..t_N, 0, 1, infinity."""
    theta: np.ndarray

    def __post_init__(self):
        theta = frozen_array(self.theta, ndim=1)
        if theta.size < 4:
            raise InputValidationError(f'need at least 4 local exponents, got {theta.size}')
        object.__setattr__(self, 'theta', theta)
        a = garnier_coefficients(theta)
        a.setflags(write=False)
        object.__setattr__(self, 'a', a)

    @property
    def N(self):
        return self.theta.size - 3

    @property
    def theta_n(self):
        return complex(self.theta[-1])


@dataclass(frozen=True, eq=False)
class PhasePoint:
    t: np.ndarray
    lam: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        t = frozen_array(self.t, ndim=1)
        lam = frozen_array(self.lam, ndim=1)
        nu = frozen_array(self.nu, ndim=1)
        if not (t.size == lam.size == nu.size) or t.size == 0:
            raise InputValidationError(f'phase point needs N >= 1 entries in t, lambda, nu; got {t.size}, {lam.size}, {nu.size}')
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'lam', lam)
        object.__setattr__(self, 'nu', nu)

    @property
    def N(self):
        return self.t.size

    def poles(self):
        """t_1..t_N, 0, 1."""
        return np.concatenate([self.t, [0.0, 1.0]]).astype(complex)

    def special_points(self):
        """Labelled list of the 2N+2 points that must stay apart."""
        labels = [f't{i + 1}' for i in range(self.N)] + ['0', '1'] + [f'lambda{i + 1}' for i in range(self.N)]
        return labels, np.concatenate([self.poles(), self.lam])

    def as_vector(self):
        return np.concatenate([self.lam, self.nu])


@dataclass(frozen=True, eq=False)
class RationalPotential:
    """p(z, t) assembled from its basis coefficients."""
    config: GarnierConfig
    phase: PhasePoint
    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'L', frozen_array(self.L, ndim=1))

    def __call__(self, z):
        a, N = self.config.a, self.config.N
        t, lam, nu = self.phase.t, self.phase.lam, self.phase.nu
        z = np.asarray(z, dtype=complex)
        zz1 = z * (z - 1)
        p = a[N + 2] / zz1 + a[N] / z ** 2 + a[N + 1] / (z - 1) ** 2
        for i in range(N):
            p = p + a[i] / (z - t[i]) ** 2
            p = p + 0.75 / (z - lam[i]) ** 2
            p = p - lam[i] * (lam[i] - 1) * nu[i] / (zz1 * (z - lam[i]))
            p = p + t[i] * (t[i] - 1) * self.L[i] / (zz1 * (z - t[i]))
        return p


@dataclass(frozen=True, eq=False)
class RationalTriple:
    """(a, b, c) with a = q_a/phi, b = q_b/phi, c = psi/phi."""
    q_a: Polynomial
    q_b: Polynomial
    psi: Polynomial
    phi: Polynomial
    theta_n: complex

    def a(self, z):
        return self.q_a(z) / self.phi(z)

    def b(self, z):
        return self.q_b(z) / self.phi(z)

    def c(self, z):
        return self.psi(z) / self.phi(z)

    def b_expansion_at_infinity(self):
        """(coefficient of dxi/xi, constant coefficient) of b dz with xi = 1/z."""
        n_phi = self.phi.degree()
        qb = np.zeros(n_phi + 1, dtype=complex)
        qb[:len(self.q_b.coef)] = self.q_b.coef
        beta0 = qb[n_phi - 1]
        beta1 = qb[n_phi - 2] - beta0 * self.phi.coef[n_phi - 1]
        return -beta0, -beta1


@dataclass(frozen=True, eq=False)
class ExtractedCoefficients:
    a: np.ndarray
    L: np.ndarray
    nu: np.ndarray
    lambda_double: np.ndarray  # double-pole coefficients at the lambda_i, 3/4 each


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    arclength: np.ndarray
    points: tuple  # PhasePoint samples

    @property
    def endpoint(self):
        return self.points[-1]


@dataclass(frozen=True, eq=False)
class BranchVerdict:
    kind: str  # 'branches' or 'exceeded_cap'
    count: int = 0
    branches: tuple = ()
    visited: int = 0
    depth_reached: int = 0

    @property
    def is_finite(self):
        return self.kind == 'branches'


@dataclass(frozen=True, eq=False)
class MonodromyResult:
    tuple: RepTuple
    labels: tuple
    basepoint: complex
