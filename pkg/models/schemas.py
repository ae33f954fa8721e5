"""JSON schemas for command input and output (complex numbers as [re, im] pairs)."""
from __future__ import annotations

from typing import Annotated, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .types import GarnierConfig, GermConnection, PhasePoint, RepTuple

ComplexPair = Annotated[list[float], Field(min_length=2, max_length=2)]
Matrix = list[list[ComplexPair]]


def to_pair(value):
    value = complex(value)
    return [float(value.real), float(value.imag)]


def from_pair(pair):
    return complex(pair[0], pair[1])


def to_pairs(values):
    return [to_pair(v) for v in np.ravel(values)]


def from_pairs(pairs):
    return np.array([from_pair(p) for p in pairs], dtype=complex)


def matrix_to_json(M):
    return [[to_pair(x) for x in row] for row in np.asarray(M)]


def matrix_from_json(rows):
    if not rows:
        return np.zeros((0, 0), dtype=complex)
    return np.array([[from_pair(x) for x in row] for row in rows], dtype=complex)


class Schema(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)


# ------------------------------------------------------------------ inputs

class RepTupleModel(Schema):
    n: int = Field(ge=3)
    m: int = Field(ge=0)
    product_constraint: bool = False
    accuracy: float = Field(default=0.0, ge=0.0)
    matrices: list[Matrix]

    @model_validator(mode='after')
    def _check_shape(self):
        if len(self.matrices) != self.n:
            raise ValueError(f'n={self.n} but {len(self.matrices)} matrices given')
        for j, M in enumerate(self.matrices):
            if len(M) != self.m or any(len(row) != self.m for row in M):
                raise ValueError(f'matrix {j + 1} is not {self.m}x{self.m}')
        return self

    def to_domain(self):
        mats = [matrix_from_json(M) if self.m else np.zeros((0, 0)) for M in self.matrices]
        return RepTuple(tuple(mats), self.product_constraint, self.accuracy)

    @classmethod
    def from_domain(cls, rep):
        return cls(n=rep.n, m=rep.m, product_constraint=rep.product_constraint, accuracy=rep.accuracy,
                   matrices=[matrix_to_json(M) for M in rep.matrices])


class GermModel(Schema):
    m: int = Field(ge=1)
    coeffs: list[Matrix] = Field(min_length=1)

    @model_validator(mode='after')
    def _check_shape(self):
        for k, M in enumerate(self.coeffs):
            if len(M) != self.m or any(len(row) != self.m for row in M):
                raise ValueError(f'coefficient A_{k} is not {self.m}x{self.m}')
        return self

    def to_domain(self):
        return GermConnection(np.array([matrix_from_json(M) for M in self.coeffs]))

    @classmethod
    def from_domain(cls, germ):
        return cls(m=germ.m, coeffs=[matrix_to_json(A) for A in germ.coeffs])


class LaurentModel(Schema):
    k0: int
    coeffs: list[Matrix]

    @classmethod
    def from_domain(cls, G):
        return cls(k0=G.k0, coeffs=[matrix_to_json(C) for C in G.coeffs])


class LocalRHRequest(Schema):
    monodromies: list[Matrix] = Field(min_length=1)

    def to_domain(self):
        return [matrix_from_json(M) for M in self.monodromies]


class GarnierConfigModel(Schema):
    N: int = Field(ge=1)
    theta: list[ComplexPair]

    @model_validator(mode='after')
    def _check_length(self):
        if len(self.theta) != self.N + 3:
            raise ValueError(f'N={self.N} needs {self.N + 3} exponents, got {len(self.theta)}')
        return self

    def to_domain(self):
        return GarnierConfig(from_pairs(self.theta))

    @classmethod
    def from_domain(cls, config):
        return cls(N=config.N, theta=to_pairs(config.theta))


class PhasePointModel(Schema):
    t: list[ComplexPair] = Field(min_length=1)
    lambda_: list[ComplexPair] = Field(alias='lambda', min_length=1)
    nu: list[ComplexPair] = Field(min_length=1)

    def to_domain(self):
        return PhasePoint(from_pairs(self.t), from_pairs(self.lambda_), from_pairs(self.nu))

    @classmethod
    def from_domain(cls, phase):
        return cls(t=to_pairs(phase.t), lambda_=to_pairs(phase.lam), nu=to_pairs(phase.nu))


class GarnierRequest(Schema):
    config: GarnierConfigModel
    phase: PhasePointModel
    path: list[list[ComplexPair]] = []  # t-space waypoints
    theta_n: Optional[ComplexPair] = None
    basepoint: Optional[ComplexPair] = None
    include_lambda: bool = False

    @model_validator(mode='after')
    def _check_sizes(self):
        N = self.config.N
        for name in ('t', 'lambda_', 'nu'):
            if len(getattr(self.phase, name)) != N:
                raise ValueError(f'phase.{name.rstrip("_")} must have N={N} entries')
        for k, waypoint in enumerate(self.path):
            if len(waypoint) != N:
                raise ValueError(f'path waypoint {k} must have N={N} entries')
        return self

    def waypoints(self):
        return [from_pairs(w) for w in self.path]


# ----------------------------------------------------------------- outputs

class Result(Schema):
    command: str
    tolerances: dict[str, float]
    seed: int


class OrbitResult(Result):
    kind: Literal['finite', 'exceeded_cap']
    size: Optional[int] = None
    visited: int
    fingerprints: list[str] = []
    cap: int


class ReduceResult(Result):
    reduced: GermModel
    lambda_: list[ComplexPair] = Field(alias='lambda')
    blocks: list[tuple[int, int]]
    gauge: LaurentModel
    gauge_residual: float


class EulResult(Result):
    C: Matrix
    L: list[int]


class MildResult(Result):
    verdict: Literal['mild', 'not_mild']
    witness: Optional[LaurentModel] = None
    entry: Optional[tuple[int, int]] = None
    exponent_gap: Optional[int] = None
    witness_residual: Optional[float] = None
    report: str


class LocalRHResult(Result):
    residues: list[Matrix]


class FlowResult(Result):
    endpoint: PhasePointModel
    samples: int
    arclength: float


class MonodromyResultModel(Result):
    tuple: RepTupleModel
    labels: list[str]
    basepoint: ComplexPair
    traces: list[ComplexPair]


class BranchResult(Result):
    kind: Literal['branches', 'exceeded_cap']
    count: int
    branches: list[PhasePointModel] = []
    visited: int
    cap: int
    depth: int


class RoundtripResult(Result):
    a: list[ComplexPair]
    nu: list[ComplexPair]
    L: list[ComplexPair]
    hamiltonians: list[ComplexPair]
    lambda_double: list[ComplexPair]
    max_deviation: float
