"""Local theory of logarithmic connection germs: reduced forms, eul, mildness, local RH."""
import logging

import numpy as np
from scipy import linalg

from config import GAUGE_RESIDUAL_BOUND
from errors import (IllConditionedError, InputValidationError,
                    InsufficientDegreeError, PreconditionError)
from models.types import (GermConnection, LaurentMatrix, MildVerdict,
                          ReducedBlock, ReducedConnection, ReductionReport,
                          as_square)

from .linalg_service import LinalgService

logger = logging.getLogger(__name__)


class ConnectionService:
    """Normal forms and automorphisms of germs dY - A(w) (dw/w) Y."""

    def __init__(self, linalg_service=None, residual_bound=GAUGE_RESIDUAL_BOUND):
        """
        Args:
            linalg_service (LinalgService): Spectral and commutant backend
            residual_bound (float): Largest accepted gauge residual, relative to the germ
        """
        self.linalg = linalg_service or LinalgService()
        self.residual_bound = residual_bound

    # ------------------------------------------------------------ helpers

    def _entry_tol(self, germ):
        return self.linalg.cluster_tol * max(1.0, float(np.abs(germ.coeffs).max()))

    def _coset_runs(self, diag):
        """Maximal runs of consecutive indices whose diagonal values differ by integers."""
        runs = []
        start = 0
        for u in range(1, len(diag) + 1):
            if u == len(diag) or self.linalg.integer_offset(diag[u], diag[start]) is None:
                runs.append((start, u))
                start = u
        return runs

    def gauge_residual(self, A, G, A_new, degree=None):
        """Size of A G - G A_new - w G' (terms above ``degree`` ignored)."""
        A = A.as_laurent() if isinstance(A, GermConnection) else A
        A_new = A_new.as_laurent() if isinstance(A_new, GermConnection) else A_new
        residual = A @ G - G @ A_new - G.euler_derivative()
        if degree is not None:
            residual = residual.truncate(degree)
        return residual.max_abs()

    # ------------------------------------------------------- reducedness

    def check_reduced(self, germ):
        """Check the five conditions of a reduced germ; report the first violation."""
        A = germ.coeffs
        m, d = germ.m, germ.degree
        atol = self._entry_tol(germ)
        diag = np.diag(A[0])
        runs = self._coset_runs(diag)
        block_of = np.empty(m, dtype=int)
        for b, (start, stop) in enumerate(runs):
            block_of[start:stop] = b

        for u in range(m):
            for v in range(u + 1, m):
                if self.linalg.near_integer_boundary(diag[u], diag[v]):
                    logger.warning(f"Exponents {diag[u]} and {diag[v]} are close to an integer difference")

        # (1) block diagonal, upper triangular blocks, Jordan leading term
        for k in range(d + 1):
            for u in range(m):
                for v in range(m):
                    if abs(A[k, u, v]) <= atol or (k == 0 and u == v):
                        continue
                    if block_of[u] != block_of[v]:
                        return ReductionReport(False, 1, f'condition 1: entry ({u + 1},{v + 1}) of A_{k} lies outside the diagonal blocks')
                    if u > v:
                        return ReductionReport(False, 1, f'condition 1: entry ({u + 1},{v + 1}) of A_{k} is below the diagonal')
        for u in range(m):
            for v in range(u + 1, m):
                x = A[0, u, v]
                if abs(x) <= atol:
                    continue
                if v != u + 1 or abs(x - 1) > atol or not self.linalg.same_value(diag[u], diag[v]):
                    return ReductionReport(False, 1, f'condition 1: leading term is not in Jordan form at ({u + 1},{v + 1})')

        # (2) distinct blocks carry distinct classes modulo Z
        for b1 in range(len(runs)):
            for b2 in range(b1 + 1, len(runs)):
                if self.linalg.integer_offset(diag[runs[b1][0]], diag[runs[b2][0]]) is not None:
                    return ReductionReport(False, 2, f'condition 2: blocks {b1 + 1} and {b2 + 1} have eigenvalues differing by an integer')

        # (3) holds by construction of the runs; (4) decreasing real parts
        for start, stop in runs:
            for u in range(start, stop - 1):
                if diag[u].real < diag[u + 1].real - atol:
                    return ReductionReport(False, 4, f'condition 4: real parts increase at position {u + 1}')

        # (5) monomial entries of the prescribed degree
        for start, stop in runs:
            for u in range(start, stop):
                for v in range(start, stop):
                    required = self.linalg.integer_offset(diag[u], diag[v])
                    for k in range(d + 1):
                        if abs(A[k, u, v]) > atol and k != required and not (k == 0 and u == v):
                            return ReductionReport(False, 5, f'condition 5: entry ({u + 1},{v + 1}) must be c*w^{required}, found degree {k}')
                    if u == v and any(abs(A[k, u, u]) > atol for k in range(1, d + 1)):
                        return ReductionReport(False, 5, f'condition 5: diagonal entry {u + 1} is not constant')
        return ReductionReport(True, None, 'reduced')

    def as_reduced(self, germ):
        report = self.check_reduced(germ)
        if not report.ok:
            raise InputValidationError(f'germ is not reduced: {report.message}')
        diag = np.diag(germ.coeffs[0]).copy()
        blocks = tuple(ReducedBlock(start, stop, germ.coeffs[0, start:stop, start:stop].copy())
                       for start, stop in self._coset_runs(diag))
        return ReducedConnection(germ=germ, blocks=blocks, lambda_diag=diag)

    # ------------------------------------------------------------- PDL

    def _arrangement(self, values):
        """Clusters grouped by class modulo Z, decreasing real part inside a class."""
        cosets = self.linalg.cluster_values(values, lambda a, b: self.linalg.integer_offset(a, b) is not None)
        order = []
        for coset in cosets:
            order.extend(sorted(coset, key=lambda i: (-values[i].real, i)))
        return order, cosets

    def required_degree(self, A0):
        spectrum = self.linalg.eigen_spectrum(A0, relation=self.linalg.same_defective_value)
        values = spectrum.values
        _, cosets = self._arrangement(values)
        spread = 0
        for coset in cosets:
            reals = [values[i].real for i in coset]
            spread = max(spread, int(round(max(reals) - min(reals))))
        return spread

    def _apply_gauge(self, A, G, G_inv, degree):
        return (G_inv @ (A @ G - G.euler_derivative())).truncate(degree)

    def pdl_reduce(self, germ):
        """
        Holomorphic gauge reduction to a reduced germ.

        Returns:
            (ReducedConnection, LaurentMatrix) with the reduced coefficients and the
            holomorphic gauge G such that G^-1 A G - w G^-1 G' is the reduced germ
            up to the truncation degree.
        """
        m, d = germ.m, germ.degree
        A0 = np.array(germ.coeffs[0])
        required = self.required_degree(A0)
        if d < required:
            raise InsufficientDegreeError(required, d)

        S, blocks = self.linalg.spectral_blocks(A0, arrange=lambda vals: self._arrangement(vals)[0],
                                                relation=self.linalg.same_defective_value)

        # exact representatives: integer shifts of the first cluster of each class
        reps = [b.value for b in blocks]
        for i, b in enumerate(blocks):
            for j in range(i):
                k = self.linalg.integer_offset(reps[i], reps[j])
                if k is not None:
                    reps[i] = reps[j] + k
                    break

        # Jordan form inside each cluster; the diagonal split of a defective block
        # stays in the nilpotent part
        J = np.zeros((m, m), dtype=complex)
        leading = np.zeros((m, m), dtype=complex)
        for b, rep in zip(blocks, reps):
            nil = b.matrix - rep * np.eye(b.size)
            Jb = self.linalg.jordan_basis(nil)
            J[b.start:b.stop, b.start:b.stop] = Jb
            jordan = np.linalg.solve(Jb, nil @ Jb)
            ones = np.round(np.diag(jordan, 1).real) if b.size > 1 else np.zeros(0)
            leading[b.start:b.stop, b.start:b.stop] = rep * np.eye(b.size) + np.diag(ones, 1)
        S = S @ J
        S_inv = np.linalg.inv(S)

        current = LaurentMatrix(np.array([S_inv @ Ak @ S for Ak in germ.coeffs]), 0)
        coeffs = np.array(current.coeffs)
        coeffs[0] = leading
        current = LaurentMatrix(coeffs, 0)
        gauge = LaurentMatrix.constant(S)

        def resonant(a, b, k):
            return self.linalg.integer_offset(reps[a], reps[b]) == k

        for k in range(1, d + 1):
            Ak = current.coefficient(k)
            P = np.zeros((m, m), dtype=complex)
            for a, ba in enumerate(blocks):
                for b, bb in enumerate(blocks):
                    if resonant(a, b, k):
                        continue
                    rows, cols = slice(ba.start, ba.stop), slice(bb.start, bb.stop)
                    P[rows, cols] = linalg.solve_sylvester(leading[rows, rows] - k * np.eye(ba.size),
                                                           -leading[cols, cols], -Ak[rows, cols])
            if not np.any(P):
                continue
            step = LaurentMatrix([np.eye(m)] + [np.zeros((m, m))] * (k - 1) + [P], 0)
            inverse_terms = [np.eye(m, dtype=complex)]
            for _ in range(d // k):
                inverse_terms.append(-inverse_terms[-1] @ P)
            step_inv = LaurentMatrix(np.array([inverse_terms[j // k] if j % k == 0 else np.zeros((m, m))
                                               for j in range(k * (d // k) + 1)]), 0)
            current = self._apply_gauge(current, step, step_inv, d)
            gauge = (gauge @ step).truncate(d)

        # drop rounding noise outside the resonant blocks
        coeffs = np.zeros((d + 1, m, m), dtype=complex)
        coeffs[0] = leading
        for k in range(1, d + 1):
            Ak = current.coefficient(k)
            for a, ba in enumerate(blocks):
                for b, bb in enumerate(blocks):
                    if resonant(a, b, k):
                        coeffs[k, ba.start:ba.stop, bb.start:bb.stop] = Ak[ba.start:ba.stop, bb.start:bb.stop]
        reduced_germ = GermConnection(coeffs)
        residual = self.gauge_residual(germ, gauge, reduced_germ, d)
        bound = self.residual_bound * max(1.0, float(np.abs(germ.coeffs).max()))
        if residual > bound:
            raise IllConditionedError(f'gauge residual {residual:.2e} exceeds {bound:.2e}',
                                      {'residual': float(residual), 'bound': bound})
        logger.info(f"Reduced rank-{m} germ of degree {d}; gauge residual {residual:.2e}")
        return self.as_reduced(reduced_germ), gauge

    # ---------------------------------------------------------------- eul

    def floor_exponents(self, reduced):
        """L_uu = floor(Re Lambda_uu), values within tolerance below an integer rounded up."""
        return np.floor(reduced.lambda_diag.real + self.linalg.cluster_tol).astype(int)

    def eul(self, reduced):
        """C = A(1) - L; its eigenvalues have real parts in [0, 1)."""
        L = self.floor_exponents(reduced)
        return reduced.germ.at(1.0) - np.diag(L).astype(complex)

    def euler_gauge(self, reduced):
        """The meromorphic gauge w^L taking the reduced germ to dZ - C (dw/w) Z."""
        L = self.floor_exponents(reduced)
        k0, top = int(L.min()), int(L.max())
        coeffs = np.zeros((top - k0 + 1, reduced.m, reduced.m), dtype=complex)
        for u, k in enumerate(L):
            coeffs[k - k0, u, u] = 1.0
        return LaurentMatrix(coeffs, k0)

    # ------------------------------------------------------- automorphisms

    def conjugated_by_exponents(self, reduced, g):
        """w^Lambda g w^-Lambda as a Laurent matrix (entries across classes must vanish)."""
        lam = reduced.lambda_diag
        m = reduced.m
        atol = self.linalg.cluster_tol * max(1.0, float(np.abs(g).max()))
        terms = {}
        for u in range(m):
            for v in range(m):
                if abs(g[u, v]) <= atol:
                    continue
                k = self.linalg.integer_offset(lam[u], lam[v])
                if k is None:
                    raise IllConditionedError(f'commutant element couples exponents {lam[u]} and {lam[v]}')
                terms.setdefault(k, np.zeros((m, m), dtype=complex))[u, v] = g[u, v]
        k0, top = min(terms), max(terms)
        return LaurentMatrix(np.array([terms.get(k, np.zeros((m, m))) for k in range(k0, top + 1)]), k0)

    def automorphisms(self, reduced):
        """Basis of self-gauge transformations, each with its holomorphy flag."""
        C = self.eul(reduced)
        return [(G, G.is_holomorphic()) for G in
                (self.conjugated_by_exponents(reduced, g) for g in self.linalg.commutant_basis(C))]

    def is_mild(self, reduced):
        """
        Decide whether every meromorphic automorphism is holomorphic.

        Checking a basis of the commutant of C suffices: if a basis element g has a
        forbidden entry then I + t g, for t small enough to stay invertible, is a
        commutant element with the same forbidden entry.
        """
        C = self.eul(reduced)
        lam = reduced.lambda_diag
        m = reduced.m
        for g in self.linalg.commutant_basis(C):
            atol = self.linalg.cluster_tol * float(np.abs(g).max())
            for u in range(m):
                for v in range(m):
                    if abs(g[u, v]) <= atol:
                        continue
                    gap = self.linalg.integer_offset(lam[v], lam[u])
                    if gap is not None and gap >= 1:
                        t = 1.0 / (2.0 * np.linalg.norm(g, 2))
                        witness = self.conjugated_by_exponents(reduced, np.eye(m) + t * g)
                        report = (f'automorphism with entry ({u + 1},{v + 1}) of order w^-{gap} '
                                  f'is not holomorphic')
                        logger.info(f"Germ is not mild: {report}")
                        return MildVerdict(mild=False, witness=witness, entry=(u + 1, v + 1),
                                           exponent_gap=gap, report=report)
        return MildVerdict(mild=True, report='every automorphism is holomorphic')

    # ------------------------------------------------------------ local RH

    def local_rh_residues(self, monodromies):
        """Commuting residues R_j with exp(2 pi i R_j) = M_j and Re spec(R_j) in [0, 1)."""
        mats = [as_square(M) for M in monodromies]
        m = mats[0].shape[0]
        if any(M.shape != (m, m) for M in mats):
            raise InputValidationError('monodromies must share one size')
        tol = self.linalg.tol
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                scale = max(1.0, np.linalg.norm(mats[i]) * np.linalg.norm(mats[j]))
                if np.linalg.norm(mats[i] @ mats[j] - mats[j] @ mats[i]) > tol * scale:
                    raise PreconditionError(f'monodromies {i + 1} and {j + 1} do not commute')
        residues = [self.linalg.matrix_log_normalized(M) for M in mats]
        for i in range(len(residues)):
            for j in range(i + 1, len(residues)):
                scale = max(1.0, np.linalg.norm(residues[i]) * np.linalg.norm(residues[j]))
                if np.linalg.norm(residues[i] @ residues[j] - residues[j] @ residues[i]) > 1e-8 * scale:
                    raise IllConditionedError(f'residues {i + 1} and {j + 1} fail to commute')
        return residues
