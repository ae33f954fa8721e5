"""Linear algebra service: spectra, normalized logarithms, conjugators and commutants."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from config import (BRANCH_CUT_SNAP, CLUSTER_TOLERANCE, CONJUGATOR_ATTEMPTS,
                    DEFAULT_SEED, DEFECT_TOLERANCE, SINGULAR_THRESHOLD,
                    TOLERANCE)
from errors import (IllConditionedError, InputValidationError,
                    IntertwinerNotConjugatorError, SingularMatrixError)
from models.types import RepTuple, Spectrum, as_square

logger = logging.getLogger(__name__)

# smallest/largest singular value ratio accepted for a sampled conjugator
_INVERTIBLE_RATIO = 1e-8


class _SingularCombination(Exception):
    pass


@dataclass
class SpectralBlock:
    """Diagonal block of a block-diagonalized matrix: rows/cols ``start:stop``."""
    start: int
    stop: int
    value: complex  # cluster representative (mean eigenvalue)
    matrix: np.ndarray  # upper triangular block

    @property
    def size(self):
        return self.stop - self.start


class LinalgService:
    """Complex double precision primitives shared by every other service."""

    def __init__(self, tol=TOLERANCE, cluster_tol=CLUSTER_TOLERANCE,
                 defect_tol=DEFECT_TOLERANCE,
                 singular_threshold=SINGULAR_THRESHOLD, snap=BRANCH_CUT_SNAP,
                 attempts=CONJUGATOR_ATTEMPTS, seed=DEFAULT_SEED):
        """
        Initialize the linear algebra service.

        Args:
            tol (float): Relative equality tolerance
            cluster_tol (float): Tolerance for equal eigenvalues and integer differences
            defect_tol (float): Looser equality for eigenvalues split by a Jordan block
            singular_threshold (float): Minimal |det| of an invertible matrix
            snap (float): Arguments closer than this to the positive real axis are snapped onto it
            attempts (int): Random combinations tried when extracting a conjugator
            seed (int): Seed of the random combinations
        """
        self.tol = tol
        self.cluster_tol = cluster_tol
        self.defect_tol = defect_tol
        self.singular_threshold = singular_threshold
        self.snap = snap
        self.attempts = attempts
        self.seed = seed

    # ------------------------------------------------------------ clustering

    def same_value(self, a, b):
        """
        Equality of two eigenvalues up to the clustering tolerance.

        Args:
            a (complex): First value
            b (complex): Second value

        Returns:
            bool: True when |a - b| <= cluster_tol * max(1, |a|, |b|)
        """
        return abs(a - b) <= self.cluster_tol * max(1.0, abs(a), abs(b))

    def same_defective_value(self, a, b):
        """Equality loose enough to keep the split eigenvalues of a Jordan block together."""
        return abs(a - b) <= self.defect_tol * max(1.0, abs(a), abs(b))

    def integer_offset(self, a, b):
        """Return k if a - b is within tolerance of the integer k, else None."""
        diff = complex(a - b)
        k = round(diff.real)
        if abs(diff - k) <= self.cluster_tol * max(1.0, abs(a), abs(b)):
            return int(k)
        return None

    def near_integer_boundary(self, a, b):
        """True when a - b is close to an integer but outside the clustering tolerance."""
        diff = complex(a - b)
        gap = abs(diff - round(diff.real))
        scale = max(1.0, abs(a), abs(b))
        return self.cluster_tol * scale < gap <= 10 * self.cluster_tol * scale

    def cluster_values(self, values, relation=None):
        """Group indices of ``values`` into classes of the (transitively closed) relation."""
        relation = relation or self.same_value
        size = len(values)
        adjacency = np.zeros((size, size), dtype=bool)
        for i in range(size):
            for j in range(i + 1, size):
                adjacency[i, j] = relation(values[i], values[j])
        _, labels = csgraph.connected_components(sparse.csr_matrix(adjacency), directed=False)
        groups = {}
        for i, label in enumerate(labels):
            groups.setdefault(label, []).append(i)
        return sorted(groups.values(), key=lambda g: g[0])

    # --------------------------------------------------------------- spectra

    def is_invertible(self, M):
        """
        Args:
            M: square matrix

        Returns:
            bool: |det M| above the singular threshold (the empty matrix counts as invertible)
        """
        M = as_square(M)
        return M.shape[0] == 0 or abs(np.linalg.det(M)) > self.singular_threshold

    def eigen_spectrum(self, M, relation=None):
        """Clustered eigenvalues of M plus a unitary basis change to upper-triangular form."""
        M = as_square(M)
        T, Z = linalg.schur(M, output='complex')
        diag = np.diag(T)
        clusters = self.cluster_values(list(diag), relation)
        eigenvalues = tuple((complex(np.mean(diag[c])), len(c)) for c in clusters)
        return Spectrum(eigenvalues=eigenvalues, basis_change=Z)

    def spectral_blocks(self, M, arrange=None, relation=None):
        """
        Block-diagonalize M along clusters of equal eigenvalues.

        Args:
            M: square matrix
            arrange: optional callable mapping the list of cluster values to the
                order in which the clusters should appear
            relation: optional equality of eigenvalues (default ``same_value``)

        Returns:
            (S, blocks) with S^-1 M S = blockdiag(block.matrix for block in blocks),
            every block upper triangular.
        """
        M = as_square(M)
        relation = relation or self.same_value
        size = M.shape[0]
        T, Z = linalg.schur(M, output='complex')
        diag = np.diag(T)
        clusters = self.cluster_values(list(diag), relation)
        values = [complex(np.mean(diag[c])) for c in clusters]
        order = list(arrange(values)) if arrange else list(range(len(clusters)))

        # reorder the Schur form cluster by cluster
        T = T.copy()
        Z = Z.copy()
        offset = 0
        spans = []
        for idx in order:
            target = values[idx]
            members = diag[clusters[idx]]
            count = len(members)
            if offset + count < size:
                T2, Z2, sdim = linalg.schur(T[offset:, offset:], output='complex',
                                            sort=lambda x, ms=members: any(relation(x, v) for v in ms))
                if sdim != count:
                    raise IllConditionedError(
                        f'eigenvalue cluster at {target} could not be separated (found {sdim}, expected {count})',
                        {'value': target})
                T[offset:, offset:] = T2
                T[:offset, offset:] = T[:offset, offset:] @ Z2
                Z[:, offset:] = Z[:, offset:] @ Z2
            spans.append((offset, offset + count, target))
            offset += count

        # decouple the clusters with Sylvester solves
        Y = np.eye(size, dtype=complex)
        for start, stop, _ in spans[:-1]:
            T11 = T[start:stop, start:stop]
            T12 = T[start:stop, stop:]
            T22 = T[stop:, stop:]
            X = linalg.solve_sylvester(T11, -T22, -T12)
            step = np.eye(size, dtype=complex)
            step[start:stop, stop:] = X
            Y = Y @ step
            T[start:stop, stop:] = 0.0
        S = Z @ Y
        blocks = [SpectralBlock(start, stop, value, T[start:stop, start:stop].copy())
                  for start, stop, value in spans]
        return S, blocks

    # ------------------------------------------------------------- logarithm

    def matrix_log_normalized(self, M):
        """The unique R with exp(2 pi i R) = M and Re spec(R) in [0, 1)."""
        M = as_square(M)
        if not self.is_invertible(M):
            raise SingularMatrixError(f'matrix is singular (|det| <= {self.singular_threshold})')
        size = M.shape[0]
        S, blocks = self.spectral_blocks(M)
        R_diag = np.zeros((size, size), dtype=complex)
        for block in blocks:
            z = block.value
            frac = (np.angle(z) / (2 * np.pi)) % 1.0
            dist = min(frac, 1.0 - frac)
            if dist <= self.snap:
                frac = 0.0
            elif dist < self.tol:
                raise IllConditionedError(
                    f'eigenvalue {z} lies within {self.tol} of the branch cut of the normalized logarithm',
                    {'eigenvalue': z})
            scalar = (np.log(abs(z)) + 2j * np.pi * frac) / (2j * np.pi)
            nilpotent_part = linalg.logm(block.matrix / z) / (2j * np.pi)
            R_diag[block.start:block.stop, block.start:block.stop] = scalar * np.eye(block.size) + nilpotent_part
        R = S @ R_diag @ np.linalg.inv(S)
        logger.debug(f"Normalized logarithm of {size}x{size} matrix over {len(blocks)} clusters")
        return R

    # ------------------------------------------------------------ conjugators

    def _commutation_system(self, left, right):
        """Stacked linear system for M right_j = left_j M (column-major vec)."""
        m = left[0].shape[0]
        eye = np.eye(m, dtype=complex)
        rows = [np.kron(R.T, eye) - np.kron(eye, L) for L, R in zip(left, right)]
        return np.vstack(rows)

    def _null_matrices(self, system, m, rcond):
        basis = linalg.null_space(system, rcond=rcond)
        return [basis[:, k].reshape((m, m), order='F') for k in range(basis.shape[1])]

    @staticmethod
    def _matrices_of(obj):
        if isinstance(obj, RepTuple):
            return [np.asarray(M) for M in obj.matrices]
        if isinstance(obj, np.ndarray) and obj.ndim == 2:
            return [as_square(obj)]
        return [as_square(M) for M in obj]

    def commutant_basis(self, obj, tol=None):
        """Basis of {g : g X = X g for every X in the input}."""
        mats = self._matrices_of(obj)
        m = mats[0].shape[0]
        if any(X.shape != (m, m) for X in mats):
            raise InputValidationError('commutant needs matrices of equal size')
        system = self._commutation_system(mats, mats)
        return self._null_matrices(system, m, tol or self.tol)

    def solve_conjugator(self, src, dst, tol=None):
        """
        Find g with g^-1 src_j g = dst_j for all j.

        Returns:
            The conjugator normalized to unit Frobenius norm, or None when only the
            zero intertwiner exists.

        Raises:
            IntertwinerNotConjugatorError: nonzero intertwiners exist but none is invertible
        """
        if src.n != dst.n or src.m != dst.m:
            raise InputValidationError(f'tuples differ in shape: ({src.n}, {src.m}) vs ({dst.n}, {dst.m})')
        tol = tol or self.tol
        m = src.m
        system = self._commutation_system(src.matrices, dst.matrices)
        basis = self._null_matrices(system, m, tol)
        if not basis:
            return None

        rng = np.random.default_rng(self.seed)
        try:
            for attempt in Retrying(stop=stop_after_attempt(self.attempts),
                                    retry=retry_if_exception_type(_SingularCombination),
                                    reraise=True):
                with attempt:
                    if len(basis) == 1:
                        g = basis[0]
                    else:
                        c = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
                        g = sum(ck * Nk for ck, Nk in zip(c, basis))
                    s = linalg.svdvals(g)
                    if s[-1] <= _INVERTIBLE_RATIO * s[0]:
                        raise _SingularCombination()
        except _SingularCombination:
            raise IntertwinerNotConjugatorError(
                f'{len(basis)}-dimensional intertwiner space without invertible element after {self.attempts} attempts')

        g = g / np.linalg.norm(g)
        pivot = g.flat[np.argmax(np.abs(g))]
        g = g * (abs(pivot) / pivot)
        g_inv = np.linalg.inv(g)
        for S, D in zip(src.matrices, dst.matrices):
            scale = max(1.0, np.linalg.norm(S), np.linalg.norm(D))
            if np.linalg.norm(g_inv @ S @ g - D) > tol * scale * np.linalg.cond(g):
                logger.debug("Null space of the conjugation system is spurious; tuples are not conjugate")
                return None
        return g

    # ---------------------------------------------------------- Jordan chains

    def _rank(self, X, scale):
        if X.size == 0:
            return 0
        s = linalg.svdvals(X)
        return int(np.sum(s > self.cluster_tol * scale))

    def jordan_basis(self, N):
        """
        Basis J with J^-1 N J in Jordan form for a nilpotent N.

        Chains are ordered by decreasing length; within a chain the columns run
        from the eigenvector up to the chain top, so ones sit on the superdiagonal.
        """
        N = as_square(N)
        s = N.shape[0]
        if s == 0:
            return np.eye(0, dtype=complex)
        scale = max(1.0, np.linalg.norm(N))
        powers = [np.eye(s, dtype=complex)]
        while self._rank(powers[-1], scale ** (len(powers) - 1)) > 0 and len(powers) <= s:
            powers.append(powers[-1] @ N)
        p = len(powers) - 1
        kernel_dims = [s - self._rank(powers[j], scale ** j) for j in range(p + 1)]
        kernels = [linalg.null_space(powers[j], rcond=self.cluster_tol) if j else np.zeros((s, 0))
                   for j in range(p + 1)]
        kernels[p] = np.eye(s, dtype=complex)
        kernel_dims[p] = s

        chains = []  # (top vector, length)
        for j in range(p, 0, -1):
            existing = [np.linalg.matrix_power(N, length - j) @ top for top, length in chains]
            new_count = (kernel_dims[j] - kernel_dims[j - 1]) - len(existing)
            if new_count <= 0:
                continue
            W = np.column_stack([kernels[j - 1]] + existing)
            K = kernels[j]
            if W.shape[1]:
                Q = linalg.orth(W)
                K = K - Q @ (Q.conj().T @ K)
            U, _, _ = linalg.svd(K, full_matrices=False)
            for k in range(new_count):
                chains.append((U[:, k], j))

        columns = []
        for top, length in sorted(chains, key=lambda c: -c[1]):
            columns.extend(np.linalg.matrix_power(N, length - 1 - k) @ top for k in range(length))
        return np.column_stack(columns)
