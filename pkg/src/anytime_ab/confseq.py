"""Anytime-valid confidence sequences for streaming A/B tests.

The two-sample interval tracks the difference of arm means using nothing
but per-arm counts, running means, and running biased variances, so the
whole test state fits in two ``StreamingMoments``. The treatment
propensity is taken to be the observed allocation ``n1 / n``, which
collapses the inverse-propensity-weighted estimator to a plain difference
in means while keeping its variance expressible in per-arm summaries.

Every function here is a pure map from (accumulator state, parameters) to
an interval or statistic: replaying a log reproduces a trajectory bit for
bit, and evaluation cadence is immaterial to validity, so no schedule
state is kept. Intervals are *not* intersected across time by default;
the stopping rule used throughout is "first n whose current interval
excludes the null".
"""

import math
from dataclasses import dataclass

import numpy as np

from .moments import StreamingMoments

DEFAULT_RHO2 = 1e-3

# Tolerance below which a negative variance bracket is treated as float
# round-off on constant data; anything more negative means the
# accumulators are corrupt.
_VARIANCE_SLACK = 1e-12


class InsufficientDataError(ValueError):
    """Raised when an interval is requested before its preconditions hold."""


class VarianceGuardError(ValueError):
    """Raised when the variance term is negative beyond float round-off."""


class ZeroVarianceError(ValueError):
    """Raised when the mixture test needs a positive pooled variance."""


@dataclass(frozen=True)
class ConfSeqParams:
    """Level and tuning parameter governing every radius computation.

    ``rho2`` controls how fast the error budget is spent over the life of
    the test; 1e-3 is a conservative production default that keeps power
    high across typical conversion-rate scenarios.
    """

    alpha: float = 0.05
    rho2: float = DEFAULT_RHO2

    def __post_init__(self):
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must be in (0, 0.5], got {self.alpha}")
        if self.rho2 <= 0.0:
            raise ValueError(f"rho2 must be positive, got {self.rho2}")


@dataclass(frozen=True)
class Interval:
    """Closed interval with possibly infinite endpoints."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"lower must not exceed upper: [{self.lower}, {self.upper}]")

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def excludes(self, x: float) -> bool:
        return not self.contains(x)

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class TwoArmState:
    """Per-arm accumulators for a two-arm experiment (0 = control)."""

    arm0: StreamingMoments
    arm1: StreamingMoments

    @property
    def n(self) -> int:
        return self.arm0.count + self.arm1.count

    def merge(self, other: "TwoArmState") -> "TwoArmState":
        return TwoArmState(self.arm0.merge(other.arm0), self.arm1.merge(other.arm1))


def radius_beta(n, alpha: float, rho2: float):
    """Width multiplier sqrt(2(nr+1)/(n^2 r) * log(sqrt(nr+1)/alpha)), r = rho2.

    Strictly positive and, over the parameter ranges we use, strictly
    decreasing in n (a grid-tested property, not an assumed theorem).
    Accepts scalar or array n.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if rho2 <= 0.0:
        raise ValueError(f"rho2 must be positive, got {rho2}")
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("n must be at least 1")
    nr = n_arr * rho2
    out = np.sqrt(2.0 * (nr + 1.0) / (n_arr * n_arr * rho2) * np.log(np.sqrt(nr + 1.0) / alpha))
    if np.ndim(n) == 0:
        return float(out)
    return out


def asympcs_ate(state: TwoArmState, params: ConfSeqParams) -> Interval:
    """Anytime-valid interval for the average treatment effect mu1 - mu0.

    Centered at the difference of running means with half-width

        radius_beta(n, alpha, rho2) *
        sqrt( n/(n-1) * [ (n/n0)(v0 + mu0^2) + (n/n1)(v1 + mu1^2)
                          - (mu1 - mu0)^2 ] )

    where v0, v1 are the biased per-arm variances. The bracketed term is
    the running variance of the allocation-weighted influence values and
    is clamped at zero when float round-off on constant data pushes it
    slightly negative.
    """
    arm0, arm1 = state.arm0, state.arm1
    if arm0.count < 1 or arm1.count < 1 or state.n < 2:
        raise InsufficientDataError(
            f"ATE interval needs both arms nonempty and n >= 2, got n0={arm0.count}, n1={arm1.count}"
        )
    n, n0, n1 = float(state.n), float(arm0.count), float(arm1.count)
    mu0, mu1 = arm0.mean, arm1.mean
    v0, v1 = arm0.biased_variance, arm1.biased_variance
    center = mu1 - mu0
    bracket = (n / n0) * (v0 + mu0 * mu0) + (n / n1) * (v1 + mu1 * mu1) - center * center
    if bracket < -_VARIANCE_SLACK:
        raise VarianceGuardError(f"variance bracket is {bracket}; accumulators look corrupt")
    var_f = n / (n - 1.0) * max(bracket, 0.0)
    hw = radius_beta(state.n, params.alpha, params.rho2) * math.sqrt(var_f)
    return Interval(center - hw, center + hw)


def asympcs_mean(arm: StreamingMoments, params: ConfSeqParams) -> Interval:
    """One-sample anytime-valid interval: mean +/- biased std * radius."""
    if arm.count < 2:
        raise InsufficientDataError(f"mean interval needs count >= 2, got {arm.count}")
    hw = arm.biased_std * radius_beta(arm.count, params.alpha, params.rho2)
    return Interval(arm.mean - hw, arm.mean + hw)


def arm_bounds(arm: StreamingMoments, level: float, rho2: float) -> tuple[float, float]:
    """Per-arm lower/upper anytime bounds at the given level."""
    if arm.count < 2:
        raise InsufficientDataError(f"arm bounds need count >= 2, got {arm.count}")
    hw = arm.biased_std * radius_beta(arm.count, level, rho2)
    return arm.mean - hw, arm.mean + hw


def asympcs_lift(state: TwoArmState, params: ConfSeqParams, arm_level: float | None = None) -> Interval:
    """Anytime-valid interval for the relative lift mu1/mu0 - 1.

    Built by composing per-arm bounds: take per-arm intervals for each
    mean, push them through log, take worst-case differences, and map
    back through exp. Defined only for positive-mean metrics. When the
    control's lower bound is nonpositive the upper endpoint is +inf, and
    when the treatment's lower bound is nonpositive the lower endpoint is
    -1 (a nonnegative metric cannot lose more than everything).

    ``arm_level`` is the level used for each per-arm interval and
    defaults to ``params.alpha``; pass ``params.alpha / 2`` for strict
    union-bound accounting across the two arms.
    """
    if arm_level is None:
        arm_level = params.alpha
    if state.arm0.count < 2 or state.arm1.count < 2:
        raise InsufficientDataError("lift interval needs at least two observations per arm")
    if state.arm0.mean <= 0.0 or state.arm1.mean <= 0.0:
        raise ValueError("lift is defined for positive-mean metrics only")
    l0, u0 = arm_bounds(state.arm0, arm_level, params.rho2)
    l1, u1 = arm_bounds(state.arm1, arm_level, params.rho2)
    lower = l1 / u0 - 1.0 if l1 > 0.0 else -1.0
    upper = u1 / l0 - 1.0 if l0 > 0.0 else math.inf
    return Interval(lower, upper)


def _mixture_log_lambda(theta_hat, theta0, sigma2, n, rho2):
    """log of the Gaussian-mixture likelihood ratio; array friendly."""
    nr = n * rho2
    return 0.5 * np.log(sigma2 / (nr + sigma2)) + (
        n * n * rho2 * (theta_hat - theta0) ** 2
    ) / (2.0 * sigma2 * (nr + sigma2))


def _mixture_halfwidth(sigma2, n, rho2, alpha):
    """Half-width of the interval obtained by inverting lambda >= 1/alpha."""
    nr = n * rho2
    inner = 0.5 * np.log((nr + sigma2) / sigma2) + np.log(1.0 / alpha)
    return np.sqrt(sigma2) * np.sqrt(2.0 * (nr + sigma2) / (n * n * rho2) * inner)


def _two_sample_scale(state: TwoArmState) -> tuple[float, float, float]:
    """Effect estimate and the variance of sqrt(n) * estimate.

    The returned variance is n * (v0/n0 + v1/n1) with biased per-arm
    variances, i.e. the per-observation variance of the effect on the
    paired-difference scale; at a 50/50 split it equals 2(v0 + v1).
    """
    arm0, arm1 = state.arm0, state.arm1
    if arm0.count < 1 or arm1.count < 1 or state.n < 2:
        raise InsufficientDataError(
            f"mixture test needs both arms nonempty and n >= 2, got n0={arm0.count}, n1={arm1.count}"
        )
    n = float(state.n)
    sigma2 = n * (
        arm0.biased_variance / arm0.count + arm1.biased_variance / arm1.count
    )
    if sigma2 <= 0.0:
        raise ZeroVarianceError("pooled variance is zero; mixture test undefined")
    return arm1.mean - arm0.mean, sigma2, n


def msprt_lambda(state: TwoArmState, params: ConfSeqParams, theta0: float = 0.0) -> float:
    """Two-sample mixture likelihood ratio for the difference of means."""
    theta_hat, sigma2, n = _two_sample_scale(state)
    return float(np.exp(_mixture_log_lambda(theta_hat, theta0, sigma2, n, params.rho2)))


def msprt_cs(state: TwoArmState, params: ConfSeqParams) -> Interval:
    """Interval obtained by inverting the two-sample mixture test.

    Excludes a point exactly when the mixture likelihood ratio at that
    point reaches 1/alpha, so the induced stopping rule agrees with the
    p-process reaching alpha.
    """
    theta_hat, sigma2, n = _two_sample_scale(state)
    hw = float(_mixture_halfwidth(sigma2, n, params.rho2, params.alpha))
    return Interval(theta_hat - hw, theta_hat + hw)


def msprt_p_step(prev_p: float, state: TwoArmState, params: ConfSeqParams, theta0: float = 0.0) -> float:
    """One step of the always-valid p-process: p_n = min(p_{n-1}, 1/lambda_n).

    Start the recursion from p = 1 before any data.
    """
    if not 0.0 < prev_p <= 1.0:
        raise ValueError(f"prev_p must be in (0, 1], got {prev_p}")
    lam = msprt_lambda(state, params, theta0)
    return min(prev_p, 1.0 / lam)


def msprt_lambda_mean(arm: StreamingMoments, params: ConfSeqParams, theta0: float) -> float:
    """One-sample mixture likelihood ratio for the mean."""
    if arm.count < 2:
        raise InsufficientDataError(f"mixture test needs count >= 2, got {arm.count}")
    sigma2 = arm.biased_variance
    if sigma2 <= 0.0:
        raise ZeroVarianceError("sample variance is zero; mixture test undefined")
    return float(np.exp(_mixture_log_lambda(arm.mean, theta0, sigma2, float(arm.count), params.rho2)))


def msprt_cs_mean(arm: StreamingMoments, params: ConfSeqParams) -> Interval:
    """One-sample interval obtained by inverting the mixture test."""
    if arm.count < 2:
        raise InsufficientDataError(f"mixture test needs count >= 2, got {arm.count}")
    sigma2 = arm.biased_variance
    if sigma2 <= 0.0:
        raise ZeroVarianceError("sample variance is zero; mixture test undefined")
    hw = float(_mixture_halfwidth(sigma2, float(arm.count), params.rho2, params.alpha))
    return Interval(arm.mean - hw, arm.mean + hw)
