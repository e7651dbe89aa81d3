"""EM, ECM and PX-EM schedules with a Poisson-Binomial toy model and robit regression."""
from pxem._backend import BACKEND
from pxem.engine import (
    FitTrace,
    StopReason,
    StopRule,
    rate_diagnostics,
    run_ecm,
    run_em,
    run_px_em,
    run_schedule,
)
from pxem.robit import ReductionVariant, RobitData, RobitModel
from pxem.toy import ToyConfig, ToyModel

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FitTrace",
    "StopReason",
    "StopRule",
    "rate_diagnostics",
    "run_ecm",
    "run_em",
    "run_px_em",
    "run_schedule",
    "ReductionVariant",
    "RobitData",
    "RobitModel",
    "ToyConfig",
    "ToyModel",
]
