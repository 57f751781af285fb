"""Exponential (hyperbolic-cosine) potentials and one-step drift bounds.

For a normalized load vector y (loads minus their mean) and smoothing
gamma, the potential splits into an overload and an underload part:

    phi = sum_i exp(+gamma * y_i)      psi = sum_i exp(-gamma * y_i)

and their sum Gamma = phi + psi contracts in expectation whenever the
allocation vector is biased away from heavy ranks.  ``certify_drift``
verifies the deterministic one-step inequality

    dphi_bar + dpsi_bar <= -Gamma * gamma*eps*delta/(4n) + c(delta)*gamma*eps

on a concrete (state, vector) instance, where dphi_bar/dpsi_bar are the
first-order expected changes and c(delta) is the closed-form constant from
``drift_constant``.  The relaxed 8n variant used by the expectation bound
is certified alongside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .checks import CertResult, CheckResult, PreconditionError, inputs_hash
from .core import LoadState
from .rng import make_generator
from .vectors import ConditionParams, ProbabilityVector, check_c1, quantile_index

# overflow guard: switch to log-space aggregation past this many nats
_LOG_GUARD = 500.0
# keep scaled terms around exp(400) at most when the guard trips
_LOG_KEEP = 400.0


@dataclass(frozen=True)
class PotentialReport:
    """Potential values for one state at one smoothing gamma.

    Per-bin arrays are in rank order.  When ``used_log_space`` is set the
    scalar fields may be inf; the log fields are always finite.
    """

    gamma: float
    phi_per_bin: np.ndarray
    psi_per_bin: np.ndarray
    phi: float
    psi: float
    gamma_total: float
    log_phi: float
    log_psi: float
    log_gamma_total: float
    used_log_space: bool


@dataclass(frozen=True)
class DriftValues:
    """First-order expected potential changes for one allocation step."""

    dphi: float
    dpsi: float
    dgamma: float


@dataclass(frozen=True)
class DriftParams:
    """Parameters for the expectation drift bound.

    k is the quadratic (second-order) coefficient of the per-step moment
    bound, r the ball-count scale of one round; gamma must respect
    gamma <= min(1, eps*delta/(8k)).
    """

    cond: ConditionParams
    k: float
    r: float
    gamma: float
    s: float | None = None

    def __post_init__(self):
        if self.k <= 0 or self.r <= 0:
            raise ValueError("k and r must be positive")
        cap = min(1.0, self.cond.epsilon * self.cond.delta / (8 * self.k))
        if not 0 < self.gamma <= cap:
            raise ValueError(
                f"gamma={self.gamma} outside (0, {cap:g}] for k={self.k}")


def _logsumexp(v: np.ndarray) -> float:
    m = float(np.max(v))
    return m + math.log(float(np.sum(np.exp(v - m))))


def potential(state: LoadState, gamma: float, mode: str = "auto") -> PotentialReport:
    """Evaluate the potential; switches to log-space aggregation when the
    exponents would overflow (|gamma*y| > 500)."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if mode not in ("auto", "direct", "log"):
        raise ValueError(f"unknown mode {mode!r}")
    y = state.sorted_normalized()
    ex = gamma * y
    peak = float(np.max(np.abs(ex))) if len(ex) else 0.0
    use_log = mode == "log" or (mode == "auto" and peak > _LOG_GUARD)
    log_phi = _logsumexp(ex)
    log_psi = _logsumexp(-ex)
    with np.errstate(over="ignore"):
        phi_per_bin = np.exp(ex)
        psi_per_bin = np.exp(-ex)
        if use_log:
            phi = math.exp(log_phi) if log_phi < 709 else math.inf
            psi = math.exp(log_psi) if log_psi < 709 else math.inf
        else:
            phi = float(np.sum(phi_per_bin))
            psi = float(np.sum(psi_per_bin))
    total = phi + psi
    return PotentialReport(
        gamma=gamma,
        phi_per_bin=phi_per_bin,
        psi_per_bin=psi_per_bin,
        phi=phi,
        psi=psi,
        gamma_total=total,
        log_phi=log_phi,
        log_psi=log_psi,
        log_gamma_total=np.logaddexp(log_phi, log_psi),
        used_log_space=use_log,
    )


def expected_drift(state: LoadState, p: ProbabilityVector, gamma: float) -> DriftValues:
    """First-order expected change of (phi, psi, Gamma) for one unit ball
    allocated by the rank-indexed vector p."""
    if p.n != state.n:
        raise ValueError(f"vector has {p.n} entries but state has {state.n} bins")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    y = state.sorted_normalized()
    n = state.n
    probs = np.asarray(p.probs)
    bias = probs - 1.0 / n
    phi_i = np.exp(gamma * y)
    psi_i = np.exp(-gamma * y)
    dphi = gamma * float(np.dot(phi_i, bias))
    dpsi = gamma * float(np.dot(psi_i, -bias))
    return DriftValues(dphi=dphi, dpsi=dpsi, dgamma=dphi + dpsi)


def drift_constant(delta: float) -> float:
    """Closed-form additive constant c(delta) of the one-step drift bound."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    ratio = delta / (1 - delta)
    log83 = math.log(8.0 / 3.0)
    return 4.0 * max(
        1.0,
        ratio,
        math.exp((1 - delta) / (2 * delta) * log83) * ratio,
        delta * math.exp(delta / (2 * (1 - delta)) * log83),
    )


def certify_drift(state: LoadState, p: ProbabilityVector, params: ConditionParams,
                  gamma: float) -> CertResult:
    """Certify the one-step drift inequality on a concrete instance.

    The vector must satisfy C1(delta, eps) — violations raise
    PreconditionError rather than producing a failed certificate.  Both the
    tight (4n) and relaxed (8n) additive forms are evaluated.  When the
    exponents are large, everything is computed under a common exp(-shift)
    scaling, recorded as log_scale; the inequality is scale-invariant.
    """
    if p.n != state.n:
        raise PreconditionError(f"vector has {p.n} entries but state has {state.n} bins")
    if not 0 < gamma <= 1:
        raise PreconditionError(f"gamma must lie in (0, 1], got {gamma}")
    delta, eps = params.delta, params.epsilon
    quantile_index(delta, state.n)
    if not check_c1(p, delta, eps):
        raise PreconditionError(
            f"vector fails C1(delta={delta}, eps={eps}); cannot certify")
    n = state.n
    y = state.sorted_normalized()
    ex = gamma * y
    peak = float(np.max(np.abs(ex)))
    shift = max(0.0, peak - _LOG_KEEP) if peak > _LOG_GUARD else 0.0
    scale = math.exp(-shift)
    phi_i = np.exp(ex - shift)
    psi_i = np.exp(-ex - shift)
    bias = np.asarray(p.probs) - 1.0 / n
    value = gamma * (float(np.dot(phi_i, bias)) - float(np.dot(psi_i, bias)))
    total = float(np.sum(phi_i) + np.sum(psi_i))
    additive = drift_constant(delta) * gamma * eps * scale
    bound4 = -total * gamma * eps * delta / (4 * n) + additive
    bound8 = -total * gamma * eps * delta / (8 * n) + additive
    tol = 1e-9 * max(abs(value), abs(bound4))
    return CertResult(
        inputs=inputs_hash(y, np.asarray(p.probs), delta, eps, gamma),
        value=value,
        bound=bound4,
        bound_theorem=bound8,
        log_scale=shift,
        passed=value <= bound4 + tol,
        passed_theorem=value <= bound8 + max(tol, 1e-9 * abs(bound8)),
    )


def gamma_for_weighted(params: ConditionParams, c_cap: float, s: float) -> float:
    """Smoothing parameter for weighted runs: eps*delta/(16*C*S)."""
    if c_cap <= 0 or s <= 0:
        raise ValueError("c_cap and s must be positive")
    return params.epsilon * params.delta / (16.0 * c_cap * s)


RoundSampler = Callable[[LoadState, np.random.Generator], list]


def drift_step_bound_check(state: LoadState, p: ProbabilityVector,
                           sampler: RoundSampler, gamma: float, k: float, r: float,
                           trials: int, seed: int, side: str = "phi") -> CheckResult:
    """Monte-Carlo check of the per-round expectation precondition.

    ``sampler(state, rng)`` must return the balls of one round as
    (bin, weight) pairs without mutating the state.  The empirical mean of
    the potential change is compared against

        sum_i pot_i * ((+/-)(p_i - 1/n) * r * gamma  +  k * r * gamma^2 / n)

    with a three-standard-error allowance folded into the bound.
    """
    if side not in ("phi", "psi"):
        raise ValueError(f"side must be 'phi' or 'psi', got {side!r}")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    n = state.n
    y_rank = state.sorted_normalized()
    sign = 1.0 if side == "phi" else -1.0
    pot_rank = np.exp(sign * gamma * y_rank)
    bias = np.asarray(p.probs) - 1.0 / n
    bound = float(np.dot(pot_rank, sign * bias * r * gamma + k * r * gamma * gamma / n))
    # per-bin potentials for evaluating sampled rounds
    y_bin = state.normalized()
    pot_bin = np.exp(sign * gamma * y_bin)
    pot_total = float(np.sum(pot_bin))
    samples = np.empty(trials)
    for t in range(trials):
        rng = make_generator(seed, t)
        hits: dict[int, float] = {}
        added = 0.0
        for b, w in sampler(state, rng):
            hits[b] = hits.get(b, 0.0) + w
            added += w
        # all bins shift by -added/n; hit bins additionally gain their weight
        new_total = pot_total
        for b, w in hits.items():
            new_total += pot_bin[b] * math.expm1(sign * gamma * w)
        samples[t] = new_total * math.exp(-sign * gamma * added / n) - pot_total
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1)) / math.sqrt(trials)
    return CheckResult(
        name=f"drift_step_bound({side})",
        value=mean,
        bound=bound + 3 * se,
        passed=mean <= bound + 3 * se,
        inputs=inputs_hash(y_rank, np.asarray(p.probs), gamma, k, r, trials, seed),
    )


def gamma_expectation_bound(gamma_totals: Sequence[float], delta: float, n: int) -> CheckResult:
    """Check mean Gamma over independent runs against (8*c(delta)/delta)*n."""
    if len(gamma_totals) < 30:
        raise ValueError(f"need at least 30 runs, got {len(gamma_totals)}")
    mean = float(np.mean(np.asarray(gamma_totals, dtype=float)))
    bound = 8.0 * drift_constant(delta) / delta * n
    return CheckResult(
        name="gamma_expectation_bound",
        value=mean,
        bound=bound,
        passed=mean <= bound,
        inputs=inputs_hash(np.asarray(gamma_totals, dtype=float), delta, n),
    )
