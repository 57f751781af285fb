"""binlab: balanced-allocation processes, drift certificates, and experiments."""

__version__ = "0.1.0"

from .core import LoadState, new_state
from .processes import ProcessSpec, parse_process, run
from .vectors import ConditionParams, ProbabilityVector

__all__ = [
    "ConditionParams",
    "LoadState",
    "ProbabilityVector",
    "ProcessSpec",
    "new_state",
    "parse_process",
    "run",
    "__version__",
]
