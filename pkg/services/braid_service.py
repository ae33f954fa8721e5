"""Braid group action on monodromy tuples and orbit enumeration modulo conjugation."""
import hashlib
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import linalg

from config import ACCURACY_FACTOR, FINGERPRINT_DIGITS, ORBIT_CAP, THREADS
from errors import InputValidationError, IntertwinerNotConjugatorError
from models.types import BraidWord, OrbitVerdict, RepTuple

from .linalg_service import LinalgService

logger = logging.getLogger(__name__)


def artin_generator(i, sign=1):
    return BraidWord(((i, sign),))


class BraidService:
    """Hurwitz action of the braid group and breadth-first orbit closure."""

    def __init__(self, linalg_service=None, digits=FINGERPRINT_DIGITS, threads=THREADS):
        """
        Initialize the braid service.

        Args:
            linalg_service (LinalgService): Conjugator / commutant backend
            digits (int): Decimal digits kept in fingerprints
            threads (int): Worker threads used to expand an orbit frontier
        """
        self.linalg = linalg_service or LinalgService()
        self.digits = digits
        self.threads = threads

    # ---------------------------------------------------------------- action

    def apply_braid(self, word, rep):
        """
        Act with ``word`` on ``rep``, letters applied left to right.

        sigma_i replaces (A_i, A_{i+1}) by (A_i A_{i+1} A_i^-1, A_i); its inverse
        replaces (A, B) by (B, B^-1 A B).
        """
        if word.max_index() >= rep.n:
            raise InputValidationError(f'generator index {word.max_index()} out of range for n={rep.n}')
        mats = [np.array(M) for M in rep.matrices]
        for i, sign in word.letters:
            A, B = mats[i - 1], mats[i]
            if sign == 1:
                mats[i - 1], mats[i] = A @ B @ np.linalg.inv(A), A
            else:
                mats[i - 1], mats[i] = B, np.linalg.inv(B) @ A @ B
        return rep.replace(mats)

    def pure_braid_generators(self, n):
        """A_ij = (s_{j-1} ... s_{i+1}) s_i^2 (s_{j-1} ... s_{i+1})^-1 for 1 <= i < j <= n."""
        if n < 3:
            raise InputValidationError(f'pure braid generators need n >= 3, got {n}')
        words = []
        for i in range(1, n):
            for j in range(i + 1, n + 1):
                prefix = BraidWord(tuple((k, 1) for k in range(j - 1, i, -1)))
                words.append(prefix + BraidWord(((i, 1), (i, 1))) + prefix.inverse())
        return words

    # ------------------------------------------------------------ structure

    def direct_sum(self, a, b):
        """
        Blockwise direct sum (A_j (+) B_j) of two tuples with the same n.

        Args:
            a (RepTuple): Upper-left summand
            b (RepTuple): Lower-right summand

        Returns:
            RepTuple: constrained when both summands are, as accurate as the worse summand
        """
        if a.n != b.n:
            raise InputValidationError(f'direct sum needs equal n, got {a.n} and {b.n}')
        mats = [linalg.block_diag(A, B) if A.size or B.size else np.zeros((0, 0))
                for A, B in zip(a.matrices, b.matrices)]
        return RepTuple(tuple(mats), a.product_constraint and b.product_constraint,
                        max(a.accuracy, b.accuracy))

    def conjugate(self, rep, h):
        """The tuple (h^-1 M_j h)_j."""
        h_inv = np.linalg.inv(h)
        return rep.replace([h_inv @ M @ h for M in rep.matrices])

    def scalar_twist(self, rep, scalars):
        """Multiply M_j by scalars[j] (a rank-one scalar representation)."""
        flag = rep.product_constraint and abs(np.prod(scalars) - 1) < self.linalg.tol
        return RepTuple(tuple(c * M for c, M in zip(scalars, rep.matrices)), flag, rep.accuracy)

    def is_irreducible(self, rep):
        """
        Args:
            rep (RepTuple): Tuple to test

        Returns:
            bool: True when only scalars commute with every M_j
        """
        return len(self.linalg.commutant_basis(rep)) == 1

    def identification_tol(self, rep):
        """Conjugacy tolerance for ``rep``: the configured one, widened to the accuracy of the input."""
        return max(self.linalg.tol, ACCURACY_FACTOR * rep.accuracy)

    # ----------------------------------------------------------- fingerprints

    def trace_coordinates(self, rep):
        """Traces of M_i, M_i M_j (i<j) and M_i M_j M_k (i<j<k)."""
        mats = rep.matrices
        values = []
        for size in (1, 2, 3):
            for combo in itertools.combinations(range(rep.n), size):
                product = mats[combo[0]]
                for k in combo[1:]:
                    product = product @ mats[k]
                values.append(np.trace(product))
        return np.array(values, dtype=complex)

    def grid_digits(self, tol):
        """Fingerprint digits coarse enough that errors of size ``tol`` stay within a cell."""
        return max(1, min(self.digits, int(np.floor(-np.log10(tol))) - 1))

    @staticmethod
    def _grid_keys(coords, digits):
        scaled = np.concatenate([coords.real, coords.imag]) * 10 ** digits
        return tuple(np.round(scaled).tolist()), tuple(np.floor(scaled).tolist())

    def fingerprint(self, rep):
        coords = np.round(self.trace_coordinates(rep), self.digits)
        text = ','.join(f'{v.real:.{self.digits}f}{v.imag:+.{self.digits}f}j' for v in coords + 0.0)
        return hashlib.sha1(text.encode()).hexdigest()

    # ------------------------------------------------------------------ orbit

    def _same_class(self, a, b, tol):
        try:
            return self.linalg.solve_conjugator(a, b, tol=tol)
        except IntertwinerNotConjugatorError:
            return None

    def orbit_bfs(self, rep, cap=ORBIT_CAP, tol=None, record_conjugators=False):
        """
        Closure of the conjugacy class of ``rep`` under the pure braid generators.

        Fingerprints only bucket candidates; two tuples are identified only when a
        conjugator between them is found.  Two rounding grids offset by half a cell
        are used so that rounding noise cannot split a class.  Without ``tol`` the
        identification tolerance follows ``identification_tol``.
        """
        if cap < 1:
            raise InputValidationError(f'cap must be positive, got {cap}')
        tol = tol or self.identification_tol(rep)
        digits = self.grid_digits(tol)
        logger.debug(f"Identifying classes at tol {tol:.1e} on a {digits}-digit grid")
        generators = self.pure_braid_generators(rep.n)
        elements = [rep]
        buckets = {}
        images = {}

        def register(index, element):
            for grid, key in enumerate(self._grid_keys(self.trace_coordinates(element), digits)):
                buckets.setdefault((grid, key), []).append(index)

        def lookup(element):
            seen = set()
            for grid, key in enumerate(self._grid_keys(self.trace_coordinates(element), digits)):
                for index in buckets.get((grid, key), []):
                    if index in seen:
                        continue
                    seen.add(index)
                    g = self._same_class(elements[index], element, tol)
                    if g is not None:
                        return index, g
            return None, None

        def expand(element):
            return [self.apply_braid(word, element) for word in generators]

        register(0, rep)
        frontier = [0]
        depth = 0
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            while frontier:
                depth += 1
                expansions = list(pool.map(lambda idx: expand(elements[idx]), frontier))
                next_frontier = []
                for idx, children in zip(frontier, expansions):
                    for gen_index, child in enumerate(children):
                        found, g = lookup(child)
                        if found is None:
                            elements.append(child)
                            found = len(elements) - 1
                            register(found, child)
                            next_frontier.append(found)
                            if len(elements) > cap:
                                logger.info(f"Orbit exceeded cap {cap} at depth {depth}")
                                return OrbitVerdict(kind='exceeded_cap', visited=len(elements))
                        elif record_conjugators:
                            images[f'{idx}:{generators[gen_index].label()}'] = g
                frontier = next_frontier
                logger.debug(f"Orbit depth {depth}: {len(elements)} classes, frontier {len(frontier)}")

        fingerprints = tuple(sorted(self.fingerprint(e) for e in elements))
        logger.info(f"Orbit closed with {len(elements)} classes")
        return OrbitVerdict(kind='finite', size=len(elements), fingerprints=fingerprints,
                            visited=len(elements), generator_images=images)
