"""Two-phase Moran measures: closed-form multifractal spectra and numerical checks."""

from .errors import (AddressTooShort, InfeasibleParameters, MoranError, NoTangency, OutOfRange,
                     PointNotCovered, ScheduleError)
from .model import GeneralParams, LevelSchedule, ModelParams, mixed_entropy, validate
from .spectra import EMPTY, BetaFunction, betas, landmarks

__version__ = "0.1.0"

__all__ = [
    "AddressTooShort", "BetaFunction", "EMPTY", "GeneralParams", "InfeasibleParameters",
    "LevelSchedule", "ModelParams", "MoranError", "NoTangency", "OutOfRange", "PointNotCovered",
    "ScheduleError", "betas", "landmarks", "mixed_entropy", "validate",
]
