"""qplab: finite-scale numerics for quasi-periodic long-range operators, their
Aubry duals and the associated companion cocycles."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DecayingSymbol,
    FourierSeries,
    Frequency,
    RationalFrequencyError,
    TrigPoly,
    diophantine_diagnostic,
    evaluate,
    fourier_transform_sequence,
)
from .operators import DualSpec, EigenPair, EmpiricalIDS, LongRangeSpec  # noqa: E402
from .cocycle import CocycleSampler, LyapunovReport  # noqa: E402
from .reducibility import ConjugacyData, ModeProfile, ResonanceMatch  # noqa: E402
from .decay import DecayFit  # noqa: E402

__all__ = [
    "CocycleSampler",
    "ConjugacyData",
    "DecayFit",
    "DecayingSymbol",
    "DualSpec",
    "EigenPair",
    "EmpiricalIDS",
    "FourierSeries",
    "Frequency",
    "LongRangeSpec",
    "LyapunovReport",
    "ModeProfile",
    "RationalFrequencyError",
    "ResonanceMatch",
    "TrigPoly",
    "diophantine_diagnostic",
    "evaluate",
    "fourier_transform_sequence",
]
