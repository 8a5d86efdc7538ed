"""Simulation of continuous QND phonon-number measurement and two-mode state preparation."""

__version__ = "0.1.0"

from .fockspace import DensityMatrix, StateVector  # noqa: E402
from .projection import JointOutcome, VirtualOscillatorState, outcome_distribution, project_joint  # noqa: E402
from .sme import SmeParams, simulate_trajectory  # noqa: E402
from .states import CatComponent, CatSpec  # noqa: E402

__all__ = [
    "__version__",
    "CatComponent",
    "CatSpec",
    "DensityMatrix",
    "JointOutcome",
    "SmeParams",
    "StateVector",
    "VirtualOscillatorState",
    "outcome_distribution",
    "project_joint",
    "simulate_trajectory",
]
