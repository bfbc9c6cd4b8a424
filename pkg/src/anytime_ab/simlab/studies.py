"""Monte Carlo studies over the streaming decision rules.

Each study simulates Bernoulli experiments on a peek grid, applies one
method's stopping rule to every replication, and aggregates first
crossings. Replication streams are keyed by (master_seed, replication
index) and the peek grid is a function of the study settings alone, never
of the method, so runs with different methods but the same seed consume
identical outcome streams and are directly comparable.

Default scales are desk sized (thousands of replications, peeks every
hundred observations); each report's ``meta`` records the scale it ran
at.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .. import design
from ..bayes import BetaPosterior, BfConfig, BhtConfig, two_arm_expected_loss
from ..confseq import ConfSeqParams
from ..gst import SpendingSchedule, compute_boundaries
from . import methods, streams
from .report import SimReport

METHODS = (
    "FHT",
    "FHT-peeking",
    "LDM",
    "mSPRT",
    "AsympCS",
    "AsympCS-lift",
    "BHT-uninformed",
    "BHT-matched",
    "BF-uninformed",
)

LDM_PEEK_COUNT = 100
STOP_QUALITY_PEEKS = 400
MISSPEC_HORIZON_MULTIPLE = 6.0
MISSPEC_PEEKS = 500


@dataclass
class SimStudyConfig:
    """Declarative description of one study run.

    ``params`` carries the method's own knobs: ConfSeqParams for the
    interval methods, a SpendingSchedule (or ConfSeqParams, from which a
    100-peek schedule is built) for LDM, BhtConfig or BfConfig for the
    Bayesian rules. ``design_mde`` anchors the fixed-horizon sample size
    that peek schedules and horizon multiples refer to; it defaults to
    the true difference of ``arm_means`` when they differ.
    """

    method: str
    arm_means: tuple[float, float] | None = None
    truth_prior: tuple[float, float] | None = None
    replications: int = 2000
    horizon: int | None = None
    peek_every: int = 100
    master_seed: int = 0
    params: object = field(default_factory=ConfSeqParams)
    theta0: float = 0.0
    design_mde: float | None = None
    design_alpha: float = 0.05
    design_power: float = 0.8
    mde_misspecification_factor: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.peek_every < 1:
            raise ValueError("peek_every must be at least 1")
        if self.horizon is not None and self.horizon < self.peek_every:
            raise ValueError("horizon must be at least peek_every")
        if self.mde_misspecification_factor <= 0.0:
            raise ValueError("misspecification factor must be positive")


def _confseq_params(cfg: SimStudyConfig) -> ConfSeqParams:
    if isinstance(cfg.params, ConfSeqParams):
        return cfg.params
    raise ValueError(f"method {cfg.method!r} needs ConfSeqParams, got {type(cfg.params).__name__}")


def _alpha(cfg: SimStudyConfig) -> float:
    if isinstance(cfg.params, ConfSeqParams):
        return cfg.params.alpha
    return cfg.design_alpha


def _fht_total(cfg: SimStudyConfig) -> int:
    """Total two-arm fixed-horizon sample size anchoring the study."""
    if cfg.arm_means is None:
        raise ValueError("study needs arm_means")
    p0, p1 = cfg.arm_means
    mde = cfg.design_mde if cfg.design_mde is not None else p1 - p0
    if mde == 0.0:
        raise ValueError("study needs design_mde when arm means are equal")
    per_arm = design.fixed_horizon_sample_size(p0, mde, _alpha(cfg), cfg.design_power)
    return 2 * per_arm


@lru_cache(maxsize=32)
def _cached_schedule(fractions: tuple, alpha: float) -> SpendingSchedule:
    return compute_boundaries(fractions, alpha)


def _ldm_peek_ns(fht_total: int) -> np.ndarray:
    ks = np.arange(1, LDM_PEEK_COUNT + 1, dtype=float)
    ns = np.maximum(np.round(ks / LDM_PEEK_COUNT * fht_total), 1.0).astype(np.int64)
    return np.unique(ns)


def _study_grid(cfg: SimStudyConfig, horizon: int, fht_total: int, markers=()) -> np.ndarray:
    base = np.arange(cfg.peek_every, horizon + 1, cfg.peek_every, dtype=np.int64)
    parts = [base, np.asarray([horizon], dtype=np.int64)]
    ldm = _ldm_peek_ns(fht_total)
    parts.append(ldm[ldm <= horizon])
    if markers:
        mk = np.asarray(sorted(markers), dtype=np.int64)
        parts.append(mk[mk <= horizon])
    grid = np.unique(np.concatenate(parts))
    return grid[grid >= 1]


def _reject_matrix(cfg: SimStudyConfig, grid: np.ndarray, counts, fht_total: int) -> np.ndarray:
    n0, n1, s0, s1 = counts
    method = cfg.method
    if method == "AsympCS":
        p = _confseq_params(cfg)
        return methods.ate_reject(n0, n1, s0, s1, p.alpha, p.rho2, cfg.theta0)
    if method == "AsympCS-lift":
        p = _confseq_params(cfg)
        return methods.lift_reject(n0, n1, s0, s1, p.alpha, p.rho2, cfg.theta0)
    if method == "mSPRT":
        p = _confseq_params(cfg)
        return methods.msprt_reject(n0, n1, s0, s1, p.alpha, p.rho2, cfg.theta0)
    if method == "FHT-peeking":
        return methods.z_reject(n0, n1, s0, s1, _alpha(cfg))
    if method == "FHT":
        reject = methods.z_reject(n0, n1, s0, s1, _alpha(cfg))
        look = np.searchsorted(grid, min(fht_total, grid[-1]))
        mask = np.zeros_like(reject)
        mask[:, look] = reject[:, look]
        return mask
    if method == "LDM":
        if isinstance(cfg.params, SpendingSchedule):
            schedule = cfg.params
            ldm_ns = np.maximum(
                np.round(np.asarray(schedule.peek_fractions) * fht_total), 1.0
            ).astype(np.int64)
        else:
            ldm_ns = _ldm_peek_ns(fht_total)
            fractions = tuple((ldm_ns / fht_total).tolist())
            schedule = _cached_schedule(fractions, _alpha(cfg))
        cols = np.searchsorted(grid, ldm_ns)
        if np.any(cols >= grid.size) or np.any(grid[cols] != ldm_ns):
            raise ValueError("schedule peeks are not on the study grid")
        z, valid = methods.z_statistic_arrays(n0, n1, s0, s1)
        mask = np.zeros(z.shape, dtype=bool)
        bounds = np.asarray(schedule.boundaries)
        mask[:, cols] = valid[:, cols] & (np.abs(z[:, cols]) >= bounds[None, :])
        return mask
    if method == "BF-uninformed":
        bf = cfg.params if isinstance(cfg.params, BfConfig) else BfConfig()
        return methods.bf_reject(n0, n1, s0, s1, bf.prior_a, bf.prior_b, bf.odds_threshold)
    if method in ("BHT-uninformed", "BHT-matched"):
        bht = cfg.params if isinstance(cfg.params, BhtConfig) else BhtConfig()
        return _bht_two_arm_reject(n0, n1, s0, s1, bht)
    raise ValueError(f"unhandled method {method!r}")


def _bht_two_arm_reject(n0, n1, s0, s1, cfg: BhtConfig) -> np.ndarray:
    """Expected-loss stopping over count matrices, exact Beta tail sums.

    Costs O(conversions) per cell, so this is meant for desk-scale runs;
    the closed-form single-arm path covers the large calibration studies.
    """
    reps, peeks = n0.shape
    reject = np.zeros((reps, peeks), dtype=bool)
    for r in range(reps):
        for j in range(peeks):
            if n0[r, j] < 1 or n1[r, j] < 1:
                continue
            post0 = BetaPosterior(cfg.prior_a + s0[r, j], cfg.prior_b + n0[r, j] - s0[r, j])
            post1 = BetaPosterior(cfg.prior_a + s1[r, j], cfg.prior_b + n1[r, j] - s1[r, j])
            loss0 = two_arm_expected_loss(post0, post1, "arm0", backend="exact")
            loss1 = max(loss0 - (post1.mean - post0.mean), 0.0)
            if min(loss0, loss1) < cfg.epsilon:
                reject[r, j] = True
                break
    return reject


def _quantiles(stop_n: np.ndarray, qs=(0.5, 0.8, 0.9)) -> dict[str, float | None]:
    out = {}
    for q in qs:
        v = float(np.quantile(stop_n, q, method="lower"))
        out[f"{q}"] = v if math.isfinite(v) else None
    return out


def _base_report(cfg: SimStudyConfig, study: str, grid, curve, stop_n, horizon: int, **extra) -> SimReport:
    meta = {
        "scale": f"{cfg.replications} replications, {len(grid)} peeks",
        "peek_every": cfg.peek_every,
        "params": repr(cfg.params),
        "theta0": cfg.theta0,
    }
    meta.update(extra.pop("meta", {}))
    return SimReport(
        study=study,
        method=cfg.method,
        replications=cfg.replications,
        horizon=horizon,
        master_seed=cfg.master_seed,
        peek_ns=[int(n) for n in grid],
        cumulative_rejection_by_peek=[float(v) for v in curve],
        stop_time_quantiles=_quantiles(stop_n),
        meta=meta,
        **extra,
    )


def run_type1_study(cfg: SimStudyConfig) -> SimReport:
    """Cumulative first-rejection frequency under equal arm means."""
    if cfg.arm_means is None or cfg.arm_means[0] != cfg.arm_means[1]:
        raise ValueError("type-1 study needs equal arm means")
    p0 = cfg.arm_means[0]
    fht_total = _fht_total(cfg)
    horizon = cfg.horizon if cfg.horizon is not None else 3 * fht_total
    grid = _study_grid(cfg, horizon, fht_total, markers=[fht_total])
    counts = streams.two_arm_count_matrices(cfg.master_seed, cfg.replications, grid, p0, p0)
    reject = _reject_matrix(cfg, grid, counts, fht_total)
    curve = methods.cumulative_fraction(reject)
    _, stop_n, _ = methods.first_crossing(reject, grid)
    return _base_report(
        cfg, "type1", grid, curve, stop_n, horizon,
        power=float(curve[-1]),
        meta={"fht_total": fht_total, "type1_at_fht": float(curve[np.searchsorted(grid, min(fht_total, horizon))])},
    )


def run_power_study(cfg: SimStudyConfig, horizon_multiples=(1.0, 2.0, 3.0)) -> SimReport:
    """Rejection frequency at multiples of the fixed-horizon sample size.

    With equal arm means the power curve is, by definition, the type-I
    curve; that degenerate case is allowed for exactly that comparison.
    """
    if cfg.arm_means is None:
        raise ValueError("power study needs arm_means")
    p0, p1 = cfg.arm_means
    fht_total = _fht_total(cfg)
    markers = sorted({min(int(round(m * fht_total)), 10**12) for m in horizon_multiples})
    horizon = cfg.horizon if cfg.horizon is not None else max(markers)
    markers = [m for m in markers if m <= horizon]
    grid = _study_grid(cfg, horizon, fht_total, markers=markers)
    counts = streams.two_arm_count_matrices(cfg.master_seed, cfg.replications, grid, p0, p1)
    reject = _reject_matrix(cfg, grid, counts, fht_total)
    curve = methods.cumulative_fraction(reject)
    _, stop_n, _ = methods.first_crossing(reject, grid)
    by_multiple = []
    for m in horizon_multiples:
        marker = min(int(round(m * fht_total)), horizon)
        by_multiple.append((float(m), float(curve[np.searchsorted(grid, marker)])))
    return _base_report(
        cfg, "power", grid, curve, stop_n, horizon,
        power=by_multiple[-1][1],
        power_by_multiple=by_multiple,
        meta={"fht_total": fht_total},
    )


def run_lift_power_study(
    cfg: SimStudyConfig,
    horizon_multiples=(1.0, 2.0, 3.0),
    lift_grid=None,
) -> dict[str, SimReport]:
    """Paired lift-rule and difference-rule power, plus a null lift run.

    Returns reports keyed "lift", "ate", and "lift-aa"; all three consume
    streams generated from the same master seed. With ``lift_grid``, the
    "lift" report's meta carries (true lift, lift power, difference
    power) triples at the final horizon.
    """
    if cfg.arm_means is None:
        raise ValueError("lift study needs arm_means")
    p0, p1 = cfg.arm_means
    p = _confseq_params(cfg)
    fht_total = _fht_total(cfg)
    markers = sorted({int(round(m * fht_total)) for m in horizon_multiples})
    horizon = cfg.horizon if cfg.horizon is not None else max(markers)
    markers = [m for m in markers if m <= horizon]
    grid = _study_grid(cfg, horizon, fht_total, markers=markers)

    def _curves(pa, pb):
        counts = streams.two_arm_count_matrices(cfg.master_seed, cfg.replications, grid, pa, pb)
        lift_mask = methods.lift_reject(*counts, p.alpha, p.rho2, 0.0)
        ate_mask = methods.ate_reject(*counts, p.alpha, p.rho2, 0.0)
        return lift_mask, ate_mask

    lift_mask, ate_mask = _curves(p0, p1)
    aa_lift_mask, _ = _curves(p0, p0)

    def _power_by_multiple(curve):
        out = []
        for m in horizon_multiples:
            marker = min(int(round(m * fht_total)), horizon)
            out.append((float(m), float(curve[np.searchsorted(grid, marker)])))
        return out

    reports = {}
    for key, mask in (("lift", lift_mask), ("ate", ate_mask), ("lift-aa", aa_lift_mask)):
        curve = methods.cumulative_fraction(mask)
        _, stop_n, _ = methods.first_crossing(mask, grid)
        by_multiple = _power_by_multiple(curve)
        label_cfg = cfg
        reports[key] = _base_report(
            label_cfg, f"lift-power:{key}", grid, curve, stop_n, horizon,
            power=by_multiple[-1][1],
            power_by_multiple=by_multiple,
            meta={"fht_total": fht_total},
        )

    if lift_grid:
        rows = []
        for lift in lift_grid:
            pb = p0 * (1.0 + lift)
            lm, am = _curves(p0, pb)
            rows.append((
                float(lift),
                float(methods.cumulative_fraction(lm)[-1]),
                float(methods.cumulative_fraction(am)[-1]),
            ))
        reports["lift"].meta["power_by_lift"] = rows
    return reports


def run_rho2_sweep(cfg: SimStudyConfig, rho2_grid) -> list[SimReport]:
    """Type-I at the horizon and power at twice the anchor, per tuning value.

    The null and alternative stream sets are each generated once and
    shared across the whole grid, so the sweep is paired in the tuning
    parameter.
    """
    if cfg.method not in ("AsympCS", "mSPRT"):
        raise ValueError("tuning sweep applies to the interval methods")
    if cfg.arm_means is None:
        raise ValueError("sweep needs arm_means (the alternative pair)")
    p0, p1 = cfg.arm_means
    if p1 <= p0 and cfg.design_mde is None:
        raise ValueError("sweep needs a positive effect or explicit design_mde")
    p = _confseq_params(cfg)
    fht_total = _fht_total(cfg)
    horizon = cfg.horizon if cfg.horizon is not None else 3 * fht_total
    power_marker = min(2 * fht_total, horizon)
    grid = _study_grid(cfg, horizon, fht_total, markers=[power_marker])
    aa = streams.two_arm_count_matrices(cfg.master_seed, cfg.replications, grid, p0, p0)
    h1 = streams.two_arm_count_matrices(cfg.master_seed, cfg.replications, grid, p0, p1)
    marker_col = np.searchsorted(grid, power_marker)

    rejector = methods.ate_reject if cfg.method == "AsympCS" else methods.msprt_reject
    reports = []
    for rho2 in rho2_grid:
        aa_mask = rejector(*aa, p.alpha, rho2, cfg.theta0)
        h1_mask = rejector(*h1, p.alpha, rho2, cfg.theta0)
        curve = methods.cumulative_fraction(aa_mask)
        power_curve = methods.cumulative_fraction(h1_mask)
        _, stop_n, _ = methods.first_crossing(aa_mask, grid)
        reports.append(
            _base_report(
                cfg, "rho2-sweep", grid, curve, stop_n, horizon,
                power=float(power_curve[marker_col]),
                meta={
                    "rho2": float(rho2),
                    "fht_total": fht_total,
                    "type1": float(curve[-1]),
                    "power_at_2x": float(power_curve[marker_col]),
                },
            )
        )
    return reports


def run_mde_misspec_study(effect_distribution, factor: float, cfg: SimStudyConfig) -> SimReport:
    """Stopping time of the anytime rule against a misspecified fixed horizon.

    For each true effect, simulates the anytime rule's stop times, takes
    the 80th percentile, and divides by the fixed-horizon total sized
    with MDE = factor * effect; factor < 1 models an analyst who
    underestimated the effect.
    """
    if factor <= 0.0:
        raise ValueError("factor must be positive")
    if cfg.arm_means is None:
        raise ValueError("misspecification study needs arm_means (baseline rate first)")
    p0 = cfg.arm_means[0]
    p = _confseq_params(cfg)
    ratios = []
    per_effect = {}
    for theta in effect_distribution:
        per_arm_true = design.fixed_horizon_sample_size(p0, theta, p.alpha, cfg.design_power)
        horizon = int(math.ceil(MISSPEC_HORIZON_MULTIPLE * 2 * per_arm_true))
        step = max(1, horizon // MISSPEC_PEEKS)
        grid = np.arange(step, horizon + 1, step, dtype=np.int64)
        counts = streams.two_arm_count_matrices(cfg.master_seed, cfg.replications, grid, p0, p0 + theta)
        reject = methods.ate_reject(*counts, p.alpha, p.rho2, cfg.theta0)
        _, stop_n, _ = methods.first_crossing(reject, grid)
        q80 = float(np.quantile(stop_n, 0.8, method="lower"))
        per_arm_assumed = design.fixed_horizon_sample_size(p0, factor * theta, p.alpha, cfg.design_power)
        ratio = q80 / (2 * per_arm_assumed)
        ratios.append((float(theta), float(ratio)))
        per_effect[f"{theta}"] = {"q80": q80, "fht_total_assumed": 2 * per_arm_assumed}
    finite = [r for _, r in ratios if math.isfinite(r)]
    median = float(np.median(finite)) if finite else None
    return SimReport(
        study="mde-misspec",
        method=cfg.method,
        replications=cfg.replications,
        horizon=0,
        master_seed=cfg.master_seed,
        peek_ns=[],
        cumulative_rejection_by_peek=[],
        stop_ratio_by_effect=ratios,
        meta={
            "factor": float(factor),
            "median_ratio": median,
            "per_effect": per_effect,
            "scale": f"{cfg.replications} replications per effect",
        },
    )


def run_stop_quality_study(
    cfg: SimStudyConfig,
    grid_start: int = 100,
    num_peeks: int = STOP_QUALITY_PEEKS,
) -> SimReport:
    """Single-arm stop-time quality: miscoverage, calibration, loss at stop.

    The true rate is drawn per replication from ``truth_prior`` and
    compared against the fixed baseline ``theta0``. Peeks are log spaced
    between ``grid_start`` and the horizon. Supports the one-sample
    interval methods and the expected-loss rule.
    """
    if cfg.truth_prior is None:
        raise ValueError("stop-quality study needs truth_prior")
    if cfg.horizon is None:
        raise ValueError("stop-quality study needs an explicit horizon")
    horizon = cfg.horizon
    grid = np.unique(np.round(np.geomspace(grid_start, horizon, num_peeks)).astype(np.int64))
    theta, s = streams.single_arm_count_matrices(
        cfg.master_seed, cfg.replications, grid, truth_prior=cfg.truth_prior
    )
    n = np.broadcast_to(grid.astype(float), s.shape)
    theta0 = cfg.theta0
    mean_loss = None

    if cfg.method in ("AsympCS", "mSPRT"):
        p = _confseq_params(cfg)
        if cfg.method == "AsympCS":
            center, hw, valid = methods.mean_interval_arrays(n, s, p.alpha, p.rho2)
            reject = valid & (np.abs(center - theta0) > hw)
        else:
            loglam, valid = methods.msprt1_log_lambda_arrays(n, s, p.rho2, theta0)
            reject = valid & (loglam >= np.log(1.0 / p.alpha))
            center, hw, _ = methods.msprt1_interval_arrays(n, s, p.alpha, p.rho2)
        stopped, stop_n, stop_idx = methods.first_crossing(reject, grid)
        rows = np.flatnonzero(stopped)
        cols = stop_idx[rows]
        miscover = np.abs(center[rows, cols] - theta[rows]) > hw[rows, cols]
        inferred = center[rows, cols]
    elif cfg.method in ("BHT-uninformed", "BHT-matched"):
        bht = cfg.params if isinstance(cfg.params, BhtConfig) else BhtConfig()
        loss_below, loss_above = methods.bht_single_losses(n, s, bht.prior_a, bht.prior_b, theta0)
        directional = np.minimum(loss_below, loss_above)
        reject = directional < bht.epsilon
        stopped, stop_n, stop_idx = methods.first_crossing(reject, grid)
        rows = np.flatnonzero(stopped)
        cols = stop_idx[rows]
        post_a = bht.prior_a + s[rows, cols]
        post_b = bht.prior_b + n[rows, cols] - s[rows, cols]
        from scipy.stats import beta as _beta

        level = 0.95
        tail = (1.0 - level) / 2.0
        lo = _beta.ppf(tail, post_a, post_b)
        hi = _beta.ppf(1.0 - tail, post_a, post_b)
        miscover = (theta[rows] < lo) | (theta[rows] > hi)
        inferred = post_a / (post_a + post_b)
        declared_above = loss_below[rows, cols] <= loss_above[rows, cols]
        realized = np.where(
            declared_above,
            np.maximum(theta0 - theta[rows], 0.0),
            np.maximum(theta[rows] - theta0, 0.0),
        )
        mean_loss = float(realized.mean()) if rows.size else None
    else:
        raise ValueError(f"stop-quality study does not support method {cfg.method!r}")

    curve = methods.cumulative_fraction(reject)
    report = _base_report(
        cfg, "stop-quality", grid, curve, stop_n, horizon,
        power=float(stopped.mean()),
        miscoverage_at_stop=float(miscover.mean()) if rows.size else None,
        mean_loss_at_stop=mean_loss,
        calibration_pairs=[(float(t), float(i)) for t, i in zip(theta[rows], inferred)],
        meta={"truth_prior": list(cfg.truth_prior), "stopped_fraction": float(stopped.mean())},
    )
    return report
