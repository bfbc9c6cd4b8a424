"""Event-log ingestion, experiment analysis, and decision cross-tabs.

Logs are JSON-lines (one event per line: ts, unit, arm, value) or CSV
with a header naming the same fields. Ingestion folds events into per-arm
accumulators in arrival order and takes state snapshots at a fixed
cadence; analysis replays the snapshots through one decision rule and
records the first crossing. Everything is deterministic: the same log and
flags produce byte-identical outputs.
"""

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field

from .bayes import BfConfig, BhtConfig, bayes_factor, bht_decide, binary_counts
from .confseq import (
    ConfSeqParams,
    Interval,
    InsufficientDataError,
    TwoArmState,
    ZeroVarianceError,
    asympcs_ate,
    asympcs_lift,
    msprt_cs,
    msprt_p_step,
)
from .gst import SpendingSchedule
from .moments import StreamingMoments
from .special import normal_quantile

ANALYZE_METHODS = ("asympcs", "asympcs-lift", "msprt", "fht-peeking", "bf", "bht", "ldm")

VERDICT_SIGNIFICANT = "significant"
VERDICT_NOT_SIGNIFICANT = "not-significant"
VERDICT_RUNNING = "running"


class LogParseError(ValueError):
    """Malformed event log; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnpairedRecordError(ValueError):
    """Cross-tab input lacking one record per method per experiment."""


@dataclass(frozen=True)
class EventRecord:
    ts: int
    unit: str
    arm: int
    value: float


@dataclass
class DecisionRecord:
    experiment_id: str
    method: str
    verdict: str
    n: int
    n0: int
    n1: int
    peek_count: int
    n_at_decision: int | None = None
    lower: float | None = None
    upper: float | None = None
    statistic: float | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "DecisionRecord":
        return cls(**obj)


def _coerce_event(obj: dict, line_no: int) -> EventRecord:
    try:
        ts = int(obj["ts"])
        unit = str(obj["unit"])
        arm = int(obj["arm"])
        value = float(obj["value"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LogParseError(line_no, f"bad event fields: {exc}") from None
    if arm not in (0, 1):
        raise LogParseError(line_no, f"arm must be 0 or 1, got {arm}")
    if not math.isfinite(value):
        raise LogParseError(line_no, f"value must be finite, got {value}")
    return EventRecord(ts, unit, arm, value)


def parse_events(path: str):
    """Yield (line_no, EventRecord) from a JSONL or CSV log file."""
    fmt = "csv" if str(path).endswith(".csv") else "jsonl"
    with open(path, "r", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            for line_no, row in enumerate(reader, start=2):
                yield line_no, _coerce_event(row, line_no)
        else:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise LogParseError(line_no, f"invalid JSON: {exc.msg}") from None
                yield line_no, _coerce_event(obj, line_no)


@dataclass
class IngestResult:
    state: TwoArmState
    snapshots: list[tuple[int, TwoArmState]]
    events_seen: int
    events_used: int


def ingest(events, snapshot_every: int = 100, dedup: bool = False) -> IngestResult:
    """Fold events into per-arm accumulators, snapshotting periodically.

    ``events`` yields EventRecord (or (line_no, EventRecord) pairs as
    produced by ``parse_events``). With ``dedup`` the first event per
    unit wins. A final snapshot is always taken at end of stream when any
    events arrived after the last periodic one.
    """
    if snapshot_every < 1:
        raise ValueError("snapshot cadence must be at least 1")
    arm0 = StreamingMoments()
    arm1 = StreamingMoments()
    seen_units: set[str] = set()
    snapshots: list[tuple[int, TwoArmState]] = []
    seen = used = 0
    for item in events:
        record = item[1] if isinstance(item, tuple) else item
        seen += 1
        if dedup:
            if record.unit in seen_units:
                continue
            seen_units.add(record.unit)
        if record.arm == 0:
            arm0 = arm0.update(record.value)
        else:
            arm1 = arm1.update(record.value)
        used += 1
        if used % snapshot_every == 0:
            snapshots.append((used, TwoArmState(arm0, arm1)))
    state = TwoArmState(arm0, arm1)
    if used > 0 and (not snapshots or snapshots[-1][0] != used):
        snapshots.append((used, state))
    return IngestResult(state, snapshots, seen, used)


def _z_stat(state: TwoArmState) -> float:
    if state.arm0.count < 1 or state.arm1.count < 1:
        raise InsufficientDataError("z statistic needs both arms nonempty")
    se2 = (
        state.arm0.biased_variance / state.arm0.count
        + state.arm1.biased_variance / state.arm1.count
    )
    center = state.arm1.mean - state.arm0.mean
    if se2 == 0.0:
        return math.inf if center > 0 else (-math.inf if center < 0 else 0.0)
    return center / math.sqrt(se2)


def _z_interval(state: TwoArmState, alpha: float) -> Interval:
    if state.arm0.count < 1 or state.arm1.count < 1:
        raise InsufficientDataError("z interval needs both arms nonempty")
    se2 = (
        state.arm0.biased_variance / state.arm0.count
        + state.arm1.biased_variance / state.arm1.count
    )
    center = state.arm1.mean - state.arm0.mean
    hw = normal_quantile(1.0 - alpha / 2.0) * math.sqrt(se2)
    if se2 == 0.0 and center != 0.0:
        hw = 0.0
    return Interval(center - hw, center + hw)


@dataclass
class TrajectoryRow:
    n: int
    n0: int
    n1: int
    center: float | None
    lower: float | None
    upper: float | None
    verdict: str


def analyze_snapshots(
    snapshots,
    method: str,
    params: ConfSeqParams,
    theta0: float = 0.0,
    bht_config: BhtConfig | None = None,
    bf_config: BfConfig | None = None,
    schedule: SpendingSchedule | None = None,
    intersect: bool = False,
) -> tuple[list[TrajectoryRow], int | None, float | None]:
    """Replay snapshots through one stopping rule.

    Returns (rows, n at first crossing or None, statistic at decision).
    The decision rule is "first snapshot whose current interval (or
    statistic threshold) excludes the null"; with ``intersect`` the
    running intersection of intervals is reported and used instead.
    """
    if method not in ANALYZE_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {ANALYZE_METHODS}")
    snapshots = list(snapshots)
    if method == "ldm":
        if schedule is None:
            raise ValueError("ldm analysis needs a spending schedule")
        if len(snapshots) != schedule.n_peeks:
            from .gst import ScheduleMismatchError

            raise ScheduleMismatchError(
                f"log has {len(snapshots)} snapshots, schedule has {schedule.n_peeks} peeks"
            )
    rows: list[TrajectoryRow] = []
    crossed_at: int | None = None
    statistic: float | None = None
    p_running = 1.0
    run_lo, run_hi = -math.inf, math.inf
    ldm_bounds = list(schedule.boundaries) if schedule is not None else []
    for peek_index, (n_events, state) in enumerate(snapshots):
        n0, n1 = state.arm0.count, state.arm1.count
        center = state.arm1.mean - state.arm0.mean if n0 >= 1 and n1 >= 1 else None
        interval: Interval | None = None
        stat_here: float | None = None
        crossed_here = False
        try:
            if method == "asympcs":
                interval = asympcs_ate(state, params)
            elif method == "asympcs-lift":
                if n0 >= 1 and n1 >= 1 and (state.arm0.mean <= 0.0 or state.arm1.mean <= 0.0):
                    center = None  # lift undefined until both means are positive
                else:
                    interval = asympcs_lift(state, params)
                    center = state.arm1.mean / state.arm0.mean - 1.0
            elif method == "msprt":
                interval = msprt_cs(state, params)
                p_running = msprt_p_step(p_running, state, params, theta0)
                stat_here = p_running
            elif method == "fht-peeking":
                interval = _z_interval(state, params.alpha)
            elif method == "ldm":
                z = _z_stat(state)
                stat_here = z
                crossed_here = abs(z) >= ldm_bounds[peek_index]
            elif method == "bf":
                cfg = bf_config or BfConfig()
                c0, n0_b, c1, n1_b = binary_counts(state)
                stat_here = bayes_factor(c0, n0_b, c1, n1_b, cfg)
                crossed_here = stat_here >= cfg.odds_threshold
            elif method == "bht":
                cfg = bht_config or BhtConfig()
                decision = bht_decide(state, cfg, backend="exact")
                stat_here = min(decision.loss_arm0, decision.loss_arm1)
                crossed_here = decision.stopped
        except (InsufficientDataError, ZeroVarianceError):
            interval = None
        lo = hi = None
        if interval is not None:
            lo, hi = interval.lower, interval.upper
            if intersect:
                run_lo, run_hi = max(run_lo, lo), min(run_hi, hi)
                lo, hi = run_lo, run_hi
            null_value = theta0 if method != "asympcs-lift" else 0.0
            crossed_here = not (lo <= null_value <= hi)
        if crossed_at is None and crossed_here:
            crossed_at = n_events
            statistic = stat_here
        verdict = VERDICT_SIGNIFICANT if crossed_at is not None else VERDICT_RUNNING
        rows.append(TrajectoryRow(n_events, n0, n1, center, lo, hi, verdict))
    return rows, crossed_at, statistic


def analyze(
    log_path: str,
    method: str,
    params: ConfSeqParams,
    out_dir: str | None = None,
    theta0: float = 0.0,
    snapshot_every: int = 100,
    dedup: bool = False,
    partial: bool = False,
    experiment_id: str | None = None,
    bht_config: BhtConfig | None = None,
    bf_config: BfConfig | None = None,
    schedule: SpendingSchedule | None = None,
    intersect: bool = False,
) -> tuple[DecisionRecord, list[TrajectoryRow]]:
    """Analyze one event log end to end, optionally writing result files.

    Writes ``trajectory.csv`` and ``decision.json`` under ``out_dir``
    when given. A log that ends without a crossing is verdict
    not-significant, or running when ``partial`` marks the log as still
    collecting.
    """
    result = ingest(parse_events(log_path), snapshot_every=snapshot_every, dedup=dedup)
    rows, crossed_at, statistic = analyze_snapshots(
        result.snapshots, method, params, theta0,
        bht_config=bht_config, bf_config=bf_config, schedule=schedule, intersect=intersect,
    )
    if crossed_at is not None:
        verdict = VERDICT_SIGNIFICANT
    else:
        verdict = VERDICT_RUNNING if partial else VERDICT_NOT_SIGNIFICANT
    if experiment_id is None:
        experiment_id = os.path.splitext(os.path.basename(log_path))[0]
    last = rows[-1] if rows else None
    record = DecisionRecord(
        experiment_id=experiment_id,
        method=method,
        verdict=verdict,
        n=result.events_used,
        n0=result.state.arm0.count,
        n1=result.state.arm1.count,
        peek_count=len(rows),
        n_at_decision=crossed_at,
        lower=None if last is None else last.lower,
        upper=None if last is None else last.upper,
        statistic=statistic,
        params={"alpha": params.alpha, "rho2": params.rho2, "theta0": theta0},
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "trajectory.csv"), "w", encoding="utf-8") as fh:
            fh.write(format_trajectory_csv(rows))
        with open(os.path.join(out_dir, "decision.json"), "w", encoding="utf-8") as fh:
            json.dump(record.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
    return record, rows


def format_trajectory_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("n,n0,n1,center,lower,upper,verdict\n")
    for r in rows:
        center = "" if r.center is None else repr(r.center)
        lo = "" if r.lower is None else repr(r.lower)
        hi = "" if r.upper is None else repr(r.upper)
        buf.write(f"{r.n},{r.n0},{r.n1},{center},{lo},{hi},{r.verdict}\n")
    return buf.getvalue()


@dataclass(frozen=True)
class CrossTab:
    """2x2 agreement table between the fixed-horizon and anytime verdicts."""

    fht_sig_cs_sig: int
    fht_sig_cs_not: int
    fht_not_cs_sig: int
    fht_not_cs_not: int

    @property
    def total(self) -> int:
        return self.fht_sig_cs_sig + self.fht_sig_cs_not + self.fht_not_cs_sig + self.fht_not_cs_not

    @property
    def row_totals(self) -> tuple[int, int]:
        return (self.fht_sig_cs_sig + self.fht_sig_cs_not, self.fht_not_cs_sig + self.fht_not_cs_not)

    @property
    def col_totals(self) -> tuple[int, int]:
        return (self.fht_sig_cs_sig + self.fht_not_cs_sig, self.fht_sig_cs_not + self.fht_not_cs_not)

    def percentages(self) -> tuple[str, str, str, str]:
        return tuple(
            _format_pct(c, self.total)
            for c in (self.fht_sig_cs_sig, self.fht_sig_cs_not, self.fht_not_cs_sig, self.fht_not_cs_not)
        )

    def format_table(self) -> str:
        p = self.percentages()
        rows = [
            ["", "AsympCS Significant", "AsympCS Not Significant", "Total"],
            [
                "FHT Significant",
                f"{p[0]} ({self.fht_sig_cs_sig})",
                f"{p[1]} ({self.fht_sig_cs_not})",
                str(self.row_totals[0]),
            ],
            [
                "FHT Not Significant",
                f"{p[2]} ({self.fht_not_cs_sig})",
                f"{p[3]} ({self.fht_not_cs_not})",
                str(self.row_totals[1]),
            ],
            ["Total", str(self.col_totals[0]), str(self.col_totals[1]), str(self.total)],
        ]
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)

    def to_dict(self) -> dict:
        p = self.percentages()
        return {
            "counts": {
                "fht_sig_cs_sig": self.fht_sig_cs_sig,
                "fht_sig_cs_not": self.fht_sig_cs_not,
                "fht_not_cs_sig": self.fht_not_cs_sig,
                "fht_not_cs_not": self.fht_not_cs_not,
            },
            "percentages": {
                "fht_sig_cs_sig": p[0],
                "fht_sig_cs_not": p[1],
                "fht_not_cs_sig": p[2],
                "fht_not_cs_not": p[3],
            },
            "row_totals": list(self.row_totals),
            "col_totals": list(self.col_totals),
            "total": self.total,
        }


def _format_pct(count: int, total: int) -> str:
    if total == 0:
        return "0%"
    pct = 100.0 * count / total
    if 0.0 < pct < 1.0:
        return f"{pct:.1f}%"
    return f"{round(pct):.0f}%"


_FHT_SIDE = ("fht-peeking", "fht")
_CS_SIDE = ("asympcs",)


def crosstab(records) -> CrossTab:
    """Pair decision records by experiment and tabulate verdict agreement.

    Each experiment must contribute exactly one fixed-horizon record and
    one anytime record, both with final (non-running) verdicts.
    """
    by_experiment: dict[str, dict[str, str]] = {}
    for record in records:
        if record.method in _FHT_SIDE:
            side = "fht"
        elif record.method in _CS_SIDE:
            side = "cs"
        else:
            raise UnpairedRecordError(f"method {record.method!r} does not belong to either side")
        if record.verdict == VERDICT_RUNNING:
            raise UnpairedRecordError(f"experiment {record.experiment_id!r} has a running verdict")
        slot = by_experiment.setdefault(record.experiment_id, {})
        if side in slot:
            raise UnpairedRecordError(f"experiment {record.experiment_id!r} has duplicate {side} records")
        slot[side] = record.verdict
    counts = {"ss": 0, "sn": 0, "ns": 0, "nn": 0}
    for experiment_id, slot in by_experiment.items():
        if set(slot) != {"fht", "cs"}:
            raise UnpairedRecordError(f"experiment {experiment_id!r} is missing a record")
        fht_sig = slot["fht"] == VERDICT_SIGNIFICANT
        cs_sig = slot["cs"] == VERDICT_SIGNIFICANT
        key = ("s" if fht_sig else "n") + ("s" if cs_sig else "n")
        counts[key] += 1
    return CrossTab(counts["ss"], counts["sn"], counts["ns"], counts["nn"])
