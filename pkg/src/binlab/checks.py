"""Small result records shared by the certification and check routines."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass


class PreconditionError(ValueError):
    """Inputs violate a check's hypotheses (distinct from the check failing)."""


class MgfDivergenceError(ValueError):
    """Exponential moment requested outside the distribution's finite region."""


def inputs_hash(*parts) -> str:
    """Stable short hash of heterogeneous check inputs, for report rows."""
    h = hashlib.sha256()
    for part in parts:
        if hasattr(part, "tobytes"):
            h.update(part.tobytes())
        else:
            h.update(repr(part).encode())
        h.update(b"|")
    return h.hexdigest()[:12]


CHECK_CSV_HEADER = "name,inputs_hash,value,bound,slack,passed"


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a single inequality check: value <= bound."""

    name: str
    value: float
    bound: float
    passed: bool
    inputs: str = ""  # inputs_hash of whatever was checked

    @property
    def slack(self) -> float:
        return self.bound - self.value

    def csv_row(self) -> str:
        return (f"{self.name},{self.inputs},{self.value:.9g},{self.bound:.9g},"
                f"{self.slack:.9g},{int(self.passed)}")


CERT_CSV_HEADER = "inputs_hash,value,bound,bound_theorem,slack,log_scale,passed,passed_theorem"


@dataclass(frozen=True)
class CertResult:
    """Outcome of a drift certification on one (state, vector) instance.

    ``value`` and the bounds share a common scaling of exp(-log_scale),
    applied when the raw potentials would overflow; log_scale is 0.0 in the
    ordinary regime.
    """

    inputs: str
    value: float
    bound: float           # tight (4n) form
    bound_theorem: float   # relaxed (8n) form
    log_scale: float
    passed: bool
    passed_theorem: bool

    @property
    def slack(self) -> float:
        return self.bound - self.value

    def csv_row(self) -> str:
        return (f"{self.inputs},{self.value:.9g},{self.bound:.9g},"
                f"{self.bound_theorem:.9g},{self.slack:.9g},{self.log_scale:.9g},"
                f"{int(self.passed)},{int(self.passed_theorem)}")
