"""Vectorized stopping-rule evaluators over peek-grid count matrices.

These mirror the scalar interval functions in ``confseq`` and the rules
in ``bayes`` and ``gst``, restated over (replications x peeks) matrices
of Bernoulli sufficient statistics. The arithmetic is kept in lockstep
with the scalar versions and the test suite pins the two paths to each
other, so there is one source of truth for what each rule does.

All evaluators return boolean "rejects at this peek" matrices plus a
validity mask; entries where a rule's preconditions fail never reject.
"""

import numpy as np
from scipy.special import betainc, betaln

from ..confseq import _mixture_halfwidth, _mixture_log_lambda, radius_beta
from ..special import normal_quantile


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=float), where=den > 0)


def bernoulli_summaries(n0, n1, s0, s1):
    """Means and biased variances per arm from count matrices."""
    mu0 = _safe_div(s0, n0)
    mu1 = _safe_div(s1, n1)
    return mu0, mu1, mu0 * (1.0 - mu0), mu1 * (1.0 - mu1)


def ate_interval_arrays(n0, n1, s0, s1, alpha, rho2):
    """Center and half-width of the two-sample interval; invalid -> inf width."""
    n = n0 + n1
    valid = (n0 >= 1) & (n1 >= 1) & (n >= 2)
    mu0, mu1, v0, v1 = bernoulli_summaries(n0, n1, s0, s1)
    center = mu1 - mu0
    with np.errstate(divide="ignore", invalid="ignore"):
        bracket = (
            _safe_div(n, n0) * (v0 + mu0 * mu0)
            + _safe_div(n, n1) * (v1 + mu1 * mu1)
            - center * center
        )
        var_f = np.where(valid, n / np.maximum(n - 1.0, 1.0), 0.0) * np.maximum(bracket, 0.0)
        hw = np.where(valid, radius_beta(np.maximum(n, 1.0), alpha, rho2) * np.sqrt(var_f), np.inf)
    return center, hw, valid


def ate_reject(n0, n1, s0, s1, alpha, rho2, theta0=0.0):
    center, hw, valid = ate_interval_arrays(n0, n1, s0, s1, alpha, rho2)
    return valid & (np.abs(center - theta0) > hw)


def lift_interval_arrays(n0, n1, s0, s1, arm_level, rho2):
    """Lower/upper lift bounds; valid only where both means are positive."""
    valid = (n0 >= 2) & (n1 >= 2) & (s0 >= 1) & (s1 >= 1)
    mu0, mu1, v0, v1 = bernoulli_summaries(n0, n1, s0, s1)
    with np.errstate(divide="ignore", invalid="ignore"):
        hw0 = np.sqrt(v0) * radius_beta(np.maximum(n0, 1.0), arm_level, rho2)
        hw1 = np.sqrt(v1) * radius_beta(np.maximum(n1, 1.0), arm_level, rho2)
        l0, u0 = mu0 - hw0, mu0 + hw0
        l1, u1 = mu1 - hw1, mu1 + hw1
        lower = np.where(l1 > 0.0, _safe_div(l1, u0) - 1.0, -1.0)
        upper = np.where(l0 > 0.0, np.divide(u1, l0, out=np.full_like(u1, np.inf), where=l0 > 0.0) - 1.0, np.inf)
    return lower, upper, valid


def lift_reject(n0, n1, s0, s1, arm_level, rho2, lift0=0.0):
    lower, upper, valid = lift_interval_arrays(n0, n1, s0, s1, arm_level, rho2)
    return valid & ((lower > lift0) | (upper < lift0))


def msprt_log_lambda_arrays(n0, n1, s0, s1, rho2, theta0=0.0):
    """Two-sample mixture log likelihood ratio over count matrices."""
    n = n0 + n1
    mu0, mu1, v0, v1 = bernoulli_summaries(n0, n1, s0, s1)
    sigma2 = n * (_safe_div(v0, n0) + _safe_div(v1, n1))
    valid = (n0 >= 1) & (n1 >= 1) & (n >= 2) & (sigma2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        loglam = _mixture_log_lambda(mu1 - mu0, theta0, np.where(valid, sigma2, 1.0), n, rho2)
    return np.where(valid, loglam, -np.inf), valid


def msprt_reject(n0, n1, s0, s1, alpha, rho2, theta0=0.0):
    loglam, valid = msprt_log_lambda_arrays(n0, n1, s0, s1, rho2, theta0)
    return valid & (loglam >= np.log(1.0 / alpha))


def z_statistic_arrays(n0, n1, s0, s1):
    """Two-sample z statistic; infinite when the difference has no noise."""
    valid = (n0 >= 1) & (n1 >= 1) & (n0 + n1 >= 2)
    mu0, mu1, v0, v1 = bernoulli_summaries(n0, n1, s0, s1)
    se = np.sqrt(_safe_div(v0, n0) + _safe_div(v1, n1))
    diff = mu1 - mu0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff != 0, np.inf, 0.0))
    return z, valid


def z_reject(n0, n1, s0, s1, alpha):
    # Strict inequality to match the interval-exclusion reading of the rule.
    z, valid = z_statistic_arrays(n0, n1, s0, s1)
    return valid & (np.abs(z) > normal_quantile(1.0 - alpha / 2.0))


def log_bayes_factor_arrays(n0, n1, s0, s1, prior_a, prior_b):
    a, b = prior_a, prior_b
    return (
        betaln(a + s0, b + n0 - s0)
        + betaln(a + s1, b + n1 - s1)
        - betaln(a, b)
        - betaln(a + s0 + s1, b + n0 + n1 - s0 - s1)
    )


def bf_reject(n0, n1, s0, s1, prior_a, prior_b, odds_threshold):
    valid = (n0 + n1) >= 1
    return valid & (log_bayes_factor_arrays(n0, n1, s0, s1, prior_a, prior_b) >= np.log(odds_threshold))


def mean_interval_arrays(n, s, alpha, rho2):
    """One-sample interval parts over cumulative Bernoulli counts."""
    valid = n >= 2
    mu = _safe_div(s, n)
    v = mu * (1.0 - mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        hw = np.where(valid, np.sqrt(v) * radius_beta(np.maximum(n, 1.0), alpha, rho2), np.inf)
    return mu, hw, valid


def msprt1_log_lambda_arrays(n, s, rho2, theta0):
    """One-sample mixture log likelihood ratio over cumulative counts."""
    mu = _safe_div(s, n)
    sigma2 = mu * (1.0 - mu)
    valid = (n >= 2) & (sigma2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        loglam = _mixture_log_lambda(mu, theta0, np.where(valid, sigma2, 1.0), n, rho2)
    return np.where(valid, loglam, -np.inf), valid


def msprt1_interval_arrays(n, s, alpha, rho2):
    """One-sample mixture-inversion interval parts over cumulative counts."""
    mu = _safe_div(s, n)
    sigma2 = mu * (1.0 - mu)
    valid = (n >= 2) & (sigma2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hw = np.where(
            valid,
            _mixture_halfwidth(np.where(valid, sigma2, 1.0), np.maximum(n, 2.0), rho2, alpha),
            np.inf,
        )
    return mu, hw, valid


def bht_single_losses(n, s, prior_a, prior_b, theta0):
    """Directional expected losses for the one-arm rule, vectorized.

    Returns (loss_below, loss_above): the expected regret of declaring
    the arm above (resp. below) the baseline when it is not.
    """
    a = prior_a + s
    b = prior_b + (n - s)
    mean = a / (a + b)
    loss_below = theta0 * betainc(a, b, theta0) - mean * betainc(a + 1.0, b, theta0)
    loss_above = mean * betainc(b, a + 1.0, 1.0 - theta0) - theta0 * betainc(b, a, 1.0 - theta0)
    return np.maximum(loss_below, 0.0), np.maximum(loss_above, 0.0)


def first_crossing(reject: np.ndarray, grid: np.ndarray):
    """First-peek crossing per replication.

    Returns (stopped, stop_n, stop_idx): stop_n is +inf and stop_idx is
    -1 for replications that never cross.
    """
    stopped = reject.any(axis=1)
    idx = np.argmax(reject, axis=1)
    stop_n = np.where(stopped, np.asarray(grid, dtype=float)[idx], np.inf)
    stop_idx = np.where(stopped, idx, -1)
    return stopped, stop_n, stop_idx


def cumulative_fraction(reject: np.ndarray) -> np.ndarray:
    """Fraction of replications that have crossed by each peek."""
    return np.maximum.accumulate(reject, axis=1).mean(axis=0)
