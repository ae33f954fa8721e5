"""Domain value types and JSON schemas."""
from .types import (BraidWord, BranchVerdict, ExtractedCoefficients, FlowTrajectory,
                    GarnierConfig, GermConnection, LaurentMatrix,
                    MildVerdict, MonodromyResult, OrbitVerdict, PhasePoint,
                    RationalPotential, RationalTriple, ReducedBlock, ReducedConnection,
                    ReductionReport, RepTuple, Spectrum, Tolerances, UReading,
                    garnier_coefficients)

__all__ = [
    'BraidWord', 'BranchVerdict', 'ExtractedCoefficients', 'FlowTrajectory',
    'GarnierConfig', 'GermConnection', 'LaurentMatrix',
    'MildVerdict', 'MonodromyResult', 'OrbitVerdict', 'PhasePoint',
    'RationalPotential', 'RationalTriple', 'ReducedBlock', 'ReducedConnection',
    'ReductionReport', 'RepTuple', 'Spectrum', 'Tolerances', 'UReading',
    'garnier_coefficients',
]
