"""Simulation and secret-yield analysis of amplified BB84 with advantage distillation."""

from .distillation import DistillationOutcome, gad
from .harness import CurveResult, CurveSpec, SweepSpec, evaluate_point, max_range, run_sweep
from .keyrate import YieldPoint, secret_fraction, takeoka_bound
from .measurement import DetectorSpec
from .optical_path import AmplifierSpec, FiberSpec, PolarizationSpec, amplified_state
from .photon_stats import BoseEinstein, LaguerreGauss, Poisson
from .session import SessionConfig, run_session

__version__ = "0.1.0"
