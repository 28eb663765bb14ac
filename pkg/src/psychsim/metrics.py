"""Per-patient outcome records, unit occupancy traces and summary reports."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import stats as _sps

from .scenario import AGE_GROUPS, AgeGroup

DISTANCE_BUCKETS = (10, 25, 50)
GROUPS = ("all", "adult", "vulnerable")
PLACEMENTS = ("all", "internal", "transferred")


class OutOfOrderUpdate(ValueError):
    pass


class EmptyLog(ValueError):
    pass


@dataclass(frozen=True)
class PatientRecord:
    patient_id: int
    replication: int
    origin_ed: str | None
    origin_facility: str
    age_group: AgeGroup
    alpha: float
    disposition_time: float
    placement_time: float
    coordination_hours: float
    travel_hours: float
    distance_miles: float
    destination_unit: str | None
    destination_facility: str | None
    los_hours: float
    requests_sent: int
    total_requests: int
    searches: int
    transferred: bool
    censored: bool = False

    @property
    def treatment_delay_hours(self) -> float:
        return self.coordination_hours + self.travel_hours

    @property
    def vulnerable(self) -> bool:
        return self.age_group is not AgeGroup.ADULT

    @property
    def internal(self) -> bool:
        return not self.censored and not self.transferred


RECORD_COLUMNS = tuple(f.name for f in fields(PatientRecord)) + ("treatment_delay_hours", "vulnerable")


class OccupancySeries:
    """Time-weighted occupied-bed integral for one unit, counted from ``start``."""

    __slots__ = ("unit_id", "capacity", "start", "t", "level", "integral", "max_level", "end")

    def __init__(self, unit_id: str, capacity: int, start: float = 0.0):
        self.unit_id = unit_id
        self.capacity = capacity
        self.start = start
        self.t = 0.0
        self.level = 0
        self.integral = 0.0
        self.max_level = 0
        self.end = None

    def update(self, t: float, level: int) -> None:
        if t < self.t:
            raise OutOfOrderUpdate(f"{self.unit_id}: update at {t} after {self.t}")
        if t > self.start:
            self.integral += self.level * (t - max(self.t, self.start))
        self.t = t
        self.level = level
        if level > self.max_level:
            self.max_level = level

    def finish(self, end: float) -> None:
        self.update(end, self.level)
        self.end = end

    def bed_hours_capacity(self, end: float | None = None) -> float:
        end = self.end if end is None else end
        return self.capacity * max(end - self.start, 0.0)

    def mean(self, end: float | None = None) -> float:
        cap = self.bed_hours_capacity(end)
        return self.integral / cap if cap > 0 else math.nan


def occupancy_update(series: OccupancySeries, time: float, in_service: int) -> None:
    series.update(time, in_service)


def occupancy_mean(series) -> float:
    """Mean occupancy of one series or the bed-weighted mean of several."""
    if isinstance(series, OccupancySeries):
        return series.mean()
    series = list(series)
    cap = sum(s.bed_hours_capacity() for s in series)
    return sum(s.integral for s in series) / cap if cap > 0 else math.nan


class ReplicationLog:
    """Accepted records of one replication after the warm-up filter."""

    def __init__(self, warmup_end: float):
        self.warmup_end = warmup_end
        self.records: list = []
        self.discarded = 0

    def record_patient(self, rec: PatientRecord) -> bool:
        if rec.disposition_time < self.warmup_end:
            self.discarded += 1
            return False
        self.records.append(rec)
        return True


def record_patient(log: ReplicationLog, rec: PatientRecord) -> bool:
    return log.record_patient(rec)


# ---------------------------------------------------------------------------
# summaries


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else None


def _median(xs):
    return float(np.median(xs)) if len(xs) else None


def _pct(num, den):
    return 100.0 * num / den if den else None


def _group_filter(group):
    if group == "all":
        return lambda r: True
    if group == "adult":
        return lambda r: not r.vulnerable
    return lambda r: r.vulnerable


def record_metrics(records, days: float, reference_facility: str | None) -> dict:
    """Record-level summary measures; ``days`` is the measured span used
    for daily rates."""
    out: dict = {}
    out["records"] = len(records)
    out["censored"] = sum(1 for r in records if r.censored)
    placed = [r for r in records if not r.censored]
    for g in GROUPS:
        keep = _group_filter(g)
        grp = [r for r in placed if keep(r)]
        internal = [r for r in grp if not r.transferred]
        transferred = [r for r in grp if r.transferred]
        out[f"{g}_count"] = len(grp)
        out[f"{g}_censored"] = sum(1 for r in records if r.censored and keep(r))
        out[f"{g}_internal_count"] = len(internal)
        out[f"{g}_transferred_count"] = len(transferred)
        out[f"{g}_pct_transferred"] = _pct(len(transferred), len(grp))
        for place, rows in (("all", grp), ("internal", internal), ("transferred", transferred)):
            coord = [r.coordination_hours for r in rows]
            delay = [r.treatment_delay_hours for r in rows]
            out[f"{g}_{place}_coordination_mean"] = _mean(coord)
            out[f"{g}_{place}_coordination_median"] = _median(coord)
            out[f"{g}_{place}_delay_mean"] = _mean(delay)
            out[f"{g}_{place}_delay_median"] = _median(delay)
            out[f"{g}_{place}_distance_mean"] = _mean([r.distance_miles for r in rows])
        for radius in DISTANCE_BUCKETS:
            within = sum(1 for r in transferred if r.distance_miles <= radius)
            out[f"{g}_transferred_within_{radius}mi_pct"] = _pct(within, len(transferred))
        out[f"{g}_requests_mean"] = _mean([r.total_requests for r in grp])
    if reference_facility is not None and days > 0:
        into = [r for r in placed if r.transferred and r.destination_facility == reference_facility
                and r.origin_facility != reference_facility]
        out_of = [r for r in placed if r.transferred and r.origin_facility == reference_facility]
        for g in GROUPS:
            keep = _group_filter(g)
            out[f"ref_ip_transfers_in_per_day_{g}"] = sum(1 for r in into if keep(r)) / days
            out[f"ref_ed_transfers_out_per_day_{g}"] = sum(1 for r in out_of if keep(r)) / days
    return out


def occupancy_metrics(occupancy: dict, cfg) -> dict:
    units = {u.unit_id: u for u in cfg.units}
    out = {"occupancy_all": occupancy_mean(occupancy.values())}
    for g in AGE_GROUPS:
        members = [s for uid, s in occupancy.items() if g in units[uid].licensed_ages]
        out[f"occupancy_{g.value.lower()}"] = occupancy_mean(members) if members else None
    out["max_unit_occupancy"] = max((s.max_level / s.capacity for s in occupancy.values()), default=None)
    return out


@dataclass
class SummaryReport:
    label: str
    replications: list          # one metrics dict per replication
    pooled: dict
    pooled_ci: dict             # 95% half-widths across replications

    @property
    def metric_names(self) -> list:
        names = list(self.pooled)
        for row in self.replications:
            for k in row:
                if k not in self.pooled:
                    names.append(k)
        return [n for n in dict.fromkeys(names) if self._present(n)]

    def _present(self, name) -> bool:
        if self.pooled.get(name) is not None:
            return True
        return any(row.get(name) is not None for row in self.replications)


def t_half_width(values, confidence: float = 0.95):
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    n = len(vals)
    if n < 2:
        return None
    s = float(np.std(vals, ddof=1))
    return float(_sps.t.ppf(0.5 + confidence / 2.0, n - 1) * s / math.sqrt(n))


def summarize(results, cfg, label: str | None = None) -> SummaryReport:
    """Build the per-replication and pooled summary.

    ``results`` are ``ReplicationResult`` objects. Records are warm-up
    filtered on disposition time; pooled record measures use every
    accepted record, so they weight replications by their record counts.
    """
    results = list(results)
    ref = cfg.reference_facility
    ref_id = ref.facility_id if ref is not None else None
    logs, rows = [], []
    total_days = 0.0
    for res in results:
        log = ReplicationLog(res.warmup_hours)
        for rec in res.records:
            log.record_patient(rec)
        days = (res.horizon_hours - res.warmup_hours) / 24.0
        total_days += days
        row = {"replication": res.replication}
        row.update(record_metrics(log.records, days, ref_id))
        row.update(occupancy_metrics(res.occupancy, cfg))
        row["non_ed_admissions"] = res.non_ed_admissions
        logs.append(log)
        rows.append(row)
    all_records = [r for log in logs for r in log.records]
    if not all_records:
        raise EmptyLog("no records after warm-up")
    pooled = record_metrics(all_records, total_days, ref_id)
    # count-type measures are reported per replication on average
    for k in list(pooled):
        if k == "records" or k == "censored" or k.endswith("_count") or k.endswith("_censored"):
            pooled[k] = pooled[k] / len(results)
    for k in ("occupancy_all",) + tuple(f"occupancy_{g.value.lower()}" for g in AGE_GROUPS) + ("non_ed_admissions",):
        vals = [row[k] for row in rows if row.get(k) is not None]
        pooled[k] = float(np.mean(vals)) if vals else None
    maxes = [row["max_unit_occupancy"] for row in rows if row.get("max_unit_occupancy") is not None]
    pooled["max_unit_occupancy"] = max(maxes) if maxes else None
    ci = {}
    for k in pooled:
        ci[k] = t_half_width([row.get(k) for row in rows])
    return SummaryReport(label or cfg.policy.label, rows, pooled, ci)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".10g")
    if isinstance(v, AgeGroup):
        return v.value
    return str(v)


def export_report(report: SummaryReport, path, format: str = "csv") -> Path:
    """Write the report deterministically as ``csv`` (one row per
    replication plus a pooled row) or ``txt``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [n for n in report.metric_names if n != "replication"]
    if format == "csv":
        header = ["label", "replication"]
        for n in names:
            header += [n, f"{n}_ci95"]
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in report.replications:
                line = [report.label, row["replication"]]
                for n in names:
                    line += [_fmt(row.get(n)), ""]
                w.writerow(line)
            line = [report.label, "pooled"]
            for n in names:
                line += [_fmt(report.pooled.get(n)), _fmt(report.pooled_ci.get(n))]
            w.writerow(line)
        tmp.replace(path)
    elif format == "txt":
        lines = [f"label: {report.label}", f"replications: {len(report.replications)}", "pooled:"]
        width = max((len(n) for n in names), default=0)
        for n in names:
            v = report.pooled.get(n)
            if v is None:
                continue
            ci = report.pooled_ci.get(n)
            tail = f"  +/- {_fmt(ci)}" if ci is not None else ""
            lines.append(f"  {n.ljust(width)}  {_fmt(v)}{tail}")
        for row in report.replications:
            lines.append(f"replication {row['replication']}:")
            for n in names:
                if row.get(n) is not None:
                    lines.append(f"  {n.ljust(width)}  {_fmt(row[n])}")
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        tmp.replace(path)
    else:
        raise ValueError(f"unknown report format {format!r}")
    return path


def export_patients(results, path) -> Path:
    """One row per simulated ED patient, warm-up patients included and flagged."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS + ("in_warmup",))
        for res in results:
            for r in res.records:
                row = [_fmt(getattr(r, c)) for c in RECORD_COLUMNS[:-2]]
                row += [_fmt(r.treatment_delay_hours), _fmt(r.vulnerable), _fmt(r.disposition_time < res.warmup_hours)]
                w.writerow(row)
    tmp.replace(path)
    return path
