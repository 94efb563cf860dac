"""Joint antenna activation and resource allocation for pinching-antenna WPT-MEC."""

from .cross_entropy import CEParams
from .errors import (BudgetExceeded, ConfigError, ConfigMismatch, DegenerateUplink,
                     DomainError, NoConvergence, PamsError, ZeroActivation)
from .inner import InnerProblem, InnerSolution, solve, solve_batch
from .model import ActivationPattern, SystemParams, Topology, sample_topology
from .schemes import (ALL_CONFIGS, Access, ActivationSet, Level, SchemeConfig, evaluate,
                      optimize_config, theorem_chain)

__version__ = "0.1.0"

__all__ = [
    "CEParams", "BudgetExceeded", "ConfigError", "ConfigMismatch", "DegenerateUplink",
    "DomainError", "NoConvergence", "PamsError", "ZeroActivation", "InnerProblem",
    "InnerSolution", "solve", "solve_batch", "ActivationPattern", "SystemParams", "Topology",
    "sample_topology", "ALL_CONFIGS", "Access", "ActivationSet", "Level", "SchemeConfig",
    "evaluate", "optimize_config", "theorem_chain",
]
