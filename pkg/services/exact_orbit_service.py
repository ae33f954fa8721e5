"""Exact orbit enumeration over Gaussian-integer tuples (reference for the numeric engine)."""
import itertools
import logging

import numpy as np
import sympy as sp

from config import CACHE_MAX_SIZE, ORBIT_CAP
from errors import InputValidationError
from models.types import OrbitVerdict

from .cache_service import CacheService

logger = logging.getLogger(__name__)


def _gaussian(value):
    value = complex(value)
    re, im = round(value.real), round(value.imag)
    if abs(value.real - re) > 1e-12 or abs(value.imag - im) > 1e-12:
        raise InputValidationError(f'entry {value} is not a Gaussian integer')
    return sp.Integer(re) + sp.I * sp.Integer(im)


class ExactOrbitOracle:
    """Pure braid orbit of a tuple with Gaussian-integer entries, in exact arithmetic."""

    def __init__(self, braid_service, cache_size=CACHE_MAX_SIZE):
        """
        Args:
            braid_service (BraidService): Supplies the pure braid generator words
            cache_size (int): Capacity of the conjugacy decision memo
        """
        self.braid = braid_service
        self.decisions = CacheService(max_size=cache_size, name='conjugacy')

    def to_exact(self, rep):
        """
        Exact copy of a tuple with Gaussian-integer entries.

        Args:
            rep (RepTuple): Tuple whose entries lie within 1e-12 of Gaussian integers

        Returns:
            tuple: ``sympy.ImmutableMatrix`` per matrix

        Raises:
            InputValidationError: If an entry is not a Gaussian integer
        """
        return tuple(sp.ImmutableMatrix([[_gaussian(x) for x in row] for row in np.asarray(M)])
                     for M in rep.matrices)

    @staticmethod
    def apply_braid(word, mats):
        mats = list(mats)
        for i, sign in word.letters:
            A, B = mats[i - 1], mats[i]
            if sign == 1:
                mats[i - 1], mats[i] = sp.ImmutableMatrix(sp.expand(A * B * A.inv())), A
            else:
                mats[i - 1], mats[i] = B, sp.ImmutableMatrix(sp.expand(B.inv() * A * B))
        return tuple(mats)

    @staticmethod
    def invariants(mats):
        """Exact traces of the same products used by the numeric fingerprint."""
        values = []
        for size in (1, 2, 3):
            for combo in itertools.combinations(range(len(mats)), size):
                product = mats[combo[0]]
                for k in combo[1:]:
                    product = product * mats[k]
                values.append(sp.nsimplify(sp.expand(product.trace())))
        return tuple(values)

    @staticmethod
    def conjugate(src, dst):
        """True iff some invertible g satisfies g dst_j = src_j g for all j."""
        m = src[0].shape[0]
        symbols = sp.symbols(f'g0:{m * m}')
        g = sp.Matrix(m, m, symbols)
        equations = []
        for S, D in zip(src, dst):
            equations.extend(sp.expand(g * D - S * g))
        system, _ = sp.linear_eq_to_matrix(equations, symbols)
        basis = system.nullspace()
        if not basis:
            return False
        coeffs = sp.symbols(f'c0:{len(basis)}')
        generic = sum((c * sp.Matrix(m, m, list(v)) for c, v in zip(coeffs, basis)), sp.zeros(m, m))
        return sp.expand(generic.det()) != 0

    def _conjugate_cached(self, src, dst):
        return self.decisions.get_or_compute((src, dst), lambda: self.conjugate(src, dst))

    def orbit(self, rep, cap=ORBIT_CAP):
        """Breadth-first orbit with exact conjugacy tests."""
        generators = self.braid.pure_braid_generators(rep.n)
        seed = self.to_exact(rep)
        elements = [seed]
        buckets = {self.invariants(seed): [0]}
        frontier = [seed]
        while frontier:
            next_frontier = []
            for mats in frontier:
                for word in generators:
                    child = self.apply_braid(word, mats)
                    key = self.invariants(child)
                    candidates = buckets.setdefault(key, [])
                    if any(self._conjugate_cached(elements[k], child) for k in candidates):
                        continue
                    elements.append(child)
                    candidates.append(len(elements) - 1)
                    next_frontier.append(child)
                    if len(elements) > cap:
                        return OrbitVerdict(kind='exceeded_cap', visited=len(elements))
            frontier = next_frontier
        logger.info(f"Exact orbit closed with {len(elements)} classes")
        return OrbitVerdict(kind='finite', size=len(elements), visited=len(elements))
