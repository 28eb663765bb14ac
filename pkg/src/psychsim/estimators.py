"""Input-parameter estimation from reference-hospital logs and HCCIS-style
annual tables.

Three inputs feed the estimators:

* a reference ED log (one row per ED registration with a ``needs_ip`` flag)
  plus the mean daily registration count ``n_ref_ed``;
* a transfer log of referral contacts (``t1`` sent, ``t2`` answered, and
  the decision);
* an annual table with ED registrations per facility and admissions,
  patient days and beds per IP unit.

Annual volumes become daily ones by dividing by 365. Every estimate is a
plain dict; ``build_scenario_params`` merges them into an ``Overlay`` that
remembers which values were estimated and which were defaulted.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path

from .scenario import DAYS, ParseError, ScenarioConfig

DAYS_PER_YEAR = 365.0

# used only when nothing at all could be estimated for a field
FALLBACK_REVIEW_HOURS = 1.0
FALLBACK_ACCEPT_PROB = 0.5
FALLBACK_MEAN_LOS_HOURS = 200.0


class EmptyLog(ValueError):
    pass


class MissingFacility(KeyError):
    pass


class MissingReferenceUnit(KeyError):
    pass


class ZeroReferenceVolume(ValueError):
    pass


class ZeroAdmissions(ValueError):
    pass


class NoContacts(UserWarning):
    """Facilities with no transfer contacts; they get no estimate."""

    def __init__(self, facilities):
        self.facilities = sorted(facilities)
        super().__init__(f"no transfer contacts for: {', '.join(self.facilities)}")


class CoverageGap(UserWarning):
    """Units (or EDs) whose parameters fell back to defaults."""

    def __init__(self, entries):
        self.entries = sorted(entries)
        super().__init__(f"defaults applied to: {', '.join(self.entries)}")


# ---------------------------------------------------------------------------
# input tables


@dataclass(frozen=True)
class RefEdLog:
    rows: tuple  # (datetime, needs_ip)
    n_ref_ed: float

    def __post_init__(self):
        if not self.n_ref_ed > 0:
            raise ValueError("n_ref_ed must be > 0")

    @classmethod
    def from_daily_counts(cls, counts, n_ref_ed: float, start: date = date(2023, 1, 2)) -> "RefEdLog":
        """Log with ``counts[i]`` IP-bound arrivals on day ``start + i``."""
        rows = []
        for i, c in enumerate(counts):
            d = date.fromordinal(start.toordinal() + i)
            stamp = datetime(d.year, d.month, d.day, 12)
            rows.extend((stamp, True) for _ in range(int(c)))
            if c == 0:
                rows.append((stamp, False))
        return cls(tuple(rows), n_ref_ed)


@dataclass(frozen=True)
class HccisRow:
    facility_id: str
    annual_ed_registrations: int
    unit_id: str | None
    annual_admissions: int
    annual_patient_days: int
    beds: int


@dataclass(frozen=True)
class HccisTable:
    rows: tuple

    def ed_registrations(self) -> dict:
        out = {}
        for r in self.rows:
            out[r.facility_id] = max(out.get(r.facility_id, 0), r.annual_ed_registrations)
        return out

    def unit_rows(self) -> dict:
        return {r.unit_id: r for r in self.rows if r.unit_id}

    def facility_of_unit(self) -> dict:
        return {r.unit_id: r.facility_id for r in self.rows if r.unit_id}


@dataclass(frozen=True)
class TransferContact:
    patient_id: str
    facility_id: str
    t1: float  # hours
    t2: float
    accepted: bool


@dataclass(frozen=True)
class TransferLog:
    rows: tuple

    def __post_init__(self):
        for r in self.rows:
            if r.t2 < r.t1:
                raise ValueError(f"contact {r.patient_id}/{r.facility_id}: t2 before t1")


# ---------------------------------------------------------------------------
# CSV readers


def _parse_time(text: str, where: str) -> float:
    """Hours: either a plain number or an ISO timestamp (hours since epoch)."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"{where}: bad timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp() / 3600.0


def _parse_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n"):
        return False
    raise ParseError(f"{where}: expected a boolean, got {text!r}")


def _parse_int(text: str, where: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ParseError(f"{where}: expected an integer, got {text!r}") from None
    if v < 0:
        raise ParseError(f"{where}: must be >= 0")
    return v


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != list(header):
            raise ParseError(f"{path}: line 1: expected header {','.join(header)}")
        for row in reader:
            where = f"{path}: line {reader.line_num}"
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{where}: expected {len(header)} fields, got {len(row)}")
            yield where, [c.strip() for c in row]


def read_ref_ed_log(path, n_ref_ed: float | None = None) -> RefEdLog:
    """Read ``timestamp,needs_ip``. Without ``n_ref_ed`` the mean daily
    registration count is taken from the log itself."""
    rows = []
    for where, (ts, flag) in _read_rows(path, ("timestamp", "needs_ip")):
        try:
            stamp = datetime.fromisoformat(ts)
        except ValueError:
            raise ParseError(f"{where}: bad timestamp {ts!r}") from None
        rows.append((stamp, _parse_bool(flag, where)))
    if not rows:
        raise EmptyLog(f"{path}: no rows")
    if n_ref_ed is None:
        n_ref_ed = len(rows) / _span_days(rows)
    return RefEdLog(tuple(rows), float(n_ref_ed))


def read_transfer_log(path) -> TransferLog:
    rows = []
    header = ("patient_id", "facility_id", "t1", "t2", "decision")
    for where, (pid, fid, t1, t2, dec) in _read_rows(path, header):
        d = dec.lower()
        if d not in ("accept", "reject"):
            raise ParseError(f"{where}: decision must be Accept or Reject, got {dec!r}")
        a, b = _parse_time(t1, where), _parse_time(t2, where)
        if b < a:
            raise ParseError(f"{where}: t2 is earlier than t1")
        rows.append(TransferContact(pid, fid, a, b, d == "accept"))
    return TransferLog(tuple(rows))


def read_hccis(path) -> HccisTable:
    header = ("facility_id", "annual_ed_registrations", "unit_id", "annual_admissions",
              "annual_patient_days", "beds")
    rows = []
    for where, (fid, regs, uid, adm, days, beds) in _read_rows(path, header):
        if not fid:
            raise ParseError(f"{where}: facility_id is empty")
        row = HccisRow(fid, _parse_int(regs or "0", where), uid or None,
                       _parse_int(adm or "0", where), _parse_int(days or "0", where),
                       _parse_int(beds or "0", where))
        if row.annual_patient_days > 0 and row.annual_admissions == 0:
            raise ParseError(f"{where}: patient days without admissions")
        rows.append(row)
    return HccisTable(tuple(rows))


# ---------------------------------------------------------------------------
# estimators


def _span_days(rows) -> int:
    first = min(ts.date() for ts, _ in rows)
    last = max(ts.date() for ts, _ in rows)
    return last.toordinal() - first.toordinal() + 1


def estimate_ed_proportions(log: RefEdLog) -> dict:
    """rho[d] = mean daily count of IP-bound arrivals on weekday d / n_ref_ed.

    Days inside the log's span with no IP-bound arrival count as zeros.
    """
    if not log.rows:
        raise EmptyLog("reference ED log has no rows")
    first = min(ts.date() for ts, _ in log.rows)
    n_days = _span_days(log.rows)
    if n_days < 7:
        raise ValueError(f"reference ED log spans {n_days} days, need a full week")
    day_count = defaultdict(int)
    for i in range(n_days):
        day_count[DAYS[(first.weekday() + i) % 7]] += 1
    ip = defaultdict(int)
    for ts, needs_ip in log.rows:
        if needs_ip:
            ip[DAYS[ts.weekday()]] += 1
    return {d: ip[d] / day_count[d] / log.n_ref_ed for d in DAYS}


def estimate_ed_rates(props: dict, hccis: HccisTable, facilities=None) -> dict:
    """lambda[(k, d)] = rho[d] * annual registrations of k / 365.

    ``facilities`` lists the ED facilities that must be covered; by default
    every facility with registrations.
    """
    regs = hccis.ed_registrations()
    if facilities is None:
        facilities = sorted(f for f, n in regs.items() if n > 0)
    missing = [f for f in facilities if f not in regs]
    if missing:
        raise MissingFacility(f"no HCCIS row for ED facilities: {', '.join(missing)}")
    return {(k, d): props[d] * regs[k] / DAYS_PER_YEAR for k in facilities for d in DAYS}


def estimate_non_ed_rate(hccis: HccisTable, ref_daily_non_ed: float, ref_unit_id: str) -> dict:
    """lambda_f = lambda_ref * (admissions_f / admissions_ref), per unit."""
    units = hccis.unit_rows()
    if ref_unit_id not in units:
        raise MissingReferenceUnit(ref_unit_id)
    n_ref = units[ref_unit_id].annual_admissions / DAYS_PER_YEAR
    if n_ref <= 0:
        raise ZeroReferenceVolume(f"reference unit {ref_unit_id} has no admissions")
    return {uid: ref_daily_non_ed * (r.annual_admissions / DAYS_PER_YEAR) / n_ref
            for uid, r in units.items()}


def estimate_mean_los(hccis: HccisTable) -> dict:
    """mu_f = 24 * patient days / admissions (hours)."""
    out = {}
    for uid, r in hccis.unit_rows().items():
        if r.annual_admissions <= 0:
            raise ZeroAdmissions(f"unit {uid} has no admissions")
        out[uid] = r.annual_patient_days * 24.0 / r.annual_admissions
    return out


def _contacts_by_facility(log: TransferLog) -> dict:
    by = defaultdict(list)
    for r in log.rows:
        by[r.facility_id].append(r)
    return by


def _warn_missing(by: dict, facilities) -> None:
    if facilities is None:
        return
    missing = [h for h in facilities if h not in by]
    if missing:
        warnings.warn(NoContacts(missing), stacklevel=3)


def estimate_review_times(log: TransferLog, facilities=None) -> dict:
    """delta_h = mean of (t2 - t1) over every contact with facility h.

    Repeat contacts by the same patient count separately. Facilities in
    ``facilities`` that were never contacted are left out and reported
    through a ``NoContacts`` warning.
    """
    by = _contacts_by_facility(log)
    _warn_missing(by, facilities)
    return {h: math.fsum(r.t2 - r.t1 for r in rs) / len(rs) for h, rs in sorted(by.items())}


def estimate_accept_prob(log: TransferLog, facilities=None) -> dict:
    """gamma_h = accepted contacts / contacts."""
    by = _contacts_by_facility(log)
    _warn_missing(by, facilities)
    return {h: sum(r.accepted for r in rs) / len(rs) for h, rs in sorted(by.items())}


# ---------------------------------------------------------------------------
# overlay


@dataclass
class Overlay:
    """Per-ED rates and per-unit parameters ready to merge into a scenario.

    ``provenance`` maps ``"<entity>.<field>"`` to ``"estimate"`` or
    ``"default"``; ``gaps`` lists the entities that used any default.
    """

    ed_rates: dict = field(default_factory=dict)   # facility_id -> {day: rate}
    units: dict = field(default_factory=dict)      # unit_id -> {field: value}
    provenance: dict = field(default_factory=dict)
    gaps: list = field(default_factory=list)

    @property
    def defaults_used(self) -> int:
        return sum(v == "default" for v in self.provenance.values())

    def to_dict(self) -> dict:
        return {
            "ed_rates": {k: dict(v) for k, v in sorted(self.ed_rates.items())},
            "units": {k: dict(v) for k, v in sorted(self.units.items())},
            "provenance": dict(sorted(self.provenance.items())),
            "gaps": list(self.gaps),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Overlay":
        return cls(dict(d.get("ed_rates") or {}), dict(d.get("units") or {}),
                   dict(d.get("provenance") or {}), list(d.get("gaps") or []))


def _mean_or(values, fallback: float) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else fallback


def build_scenario_params(units: dict, ed_facilities=(), *, ed_rates=None, non_ed_rates=None,
                          mean_los=None, review_times=None, accept_probs=None) -> Overlay:
    """Merge estimates for a roster of units.

    ``units`` maps unit id to facility id; ``ed_facilities`` lists facility
    ids whose ED needs arrival rates. Review time and acceptance
    probability are facility-level. Missing values default to the mean of
    the estimated ones (or a fixed fallback when nothing was estimated) and
    are reported through a ``CoverageGap`` warning.
    """
    ed_rates = ed_rates or {}
    non_ed_rates = non_ed_rates or {}
    mean_los = mean_los or {}
    review_times = review_times or {}
    accept_probs = accept_probs or {}

    ov = Overlay()
    gaps = set()
    rate_zero = {d: 0.0 for d in DAYS}
    for k in ed_facilities:
        if all((k, d) in ed_rates for d in DAYS):
            ov.ed_rates[k] = {d: float(ed_rates[(k, d)]) for d in DAYS}
            ov.provenance[f"{k}.daily_rates"] = "estimate"
        else:
            ov.ed_rates[k] = dict(rate_zero)
            ov.provenance[f"{k}.daily_rates"] = "default"
            gaps.add(k)

    d_review = _mean_or(review_times.values(), FALLBACK_REVIEW_HOURS)
    d_accept = _mean_or(accept_probs.values(), FALLBACK_ACCEPT_PROB)
    d_los = _mean_or(mean_los.values(), FALLBACK_MEAN_LOS_HOURS)
    for uid, fid in sorted(units.items()):
        vals = {}
        for name, source, key, default in (
            ("accept_prob", accept_probs, fid, d_accept),
            ("mean_review_hours", review_times, fid, d_review),
            ("mean_los_hours", mean_los, uid, d_los),
            ("non_ed_rate", non_ed_rates, uid, 0.0),
        ):
            if key in source:
                vals[name] = float(source[key])
                ov.provenance[f"{uid}.{name}"] = "estimate"
            else:
                vals[name] = float(default)
                ov.provenance[f"{uid}.{name}"] = "default"
                gaps.add(uid)
        ov.units[uid] = vals
    ov.gaps = sorted(gaps)
    if gaps:
        warnings.warn(CoverageGap(gaps), stacklevel=2)
    return ov


def apply_overlay(cfg: ScenarioConfig, overlay: Overlay) -> ScenarioConfig:
    """Scenario with overlay values substituted; entities the overlay does
    not mention keep their current values."""
    facs = []
    for f in cfg.facilities:
        ed = f.ed
        if ed is not None and f.facility_id in overlay.ed_rates:
            ed = type(ed)(ed.ed_id, dict(overlay.ed_rates[f.facility_id]))
        units = []
        for u in f.ip_units:
            vals = overlay.units.get(u.unit_id)
            if vals:
                u = type(u)(**{**u.__dict__, **vals})
            units.append(u)
        facs.append(type(f)(**{**f.__dict__, "ed": ed, "ip_units": tuple(units)}))
    return cfg.replace(facilities=tuple(facs))


def estimate_all(ref_log: RefEdLog, transfer_log: TransferLog, hccis: HccisTable, *,
                 ref_unit_id: str, ref_daily_non_ed: float) -> Overlay:
    """Run every estimator over the inputs, using the HCCIS table as roster."""
    units = hccis.facility_of_unit()
    facilities = sorted(set(units.values()))
    regs = hccis.ed_registrations()
    ed_facs = sorted(f for f, n in regs.items() if n > 0)
    props = estimate_ed_proportions(ref_log)
    return build_scenario_params(
        units, ed_facs,
        ed_rates=estimate_ed_rates(props, hccis, ed_facs),
        non_ed_rates=estimate_non_ed_rate(hccis, ref_daily_non_ed, ref_unit_id),
        mean_los=estimate_mean_los(hccis),
        review_times=estimate_review_times(transfer_log, facilities),
        accept_probs=estimate_accept_prob(transfer_log, facilities),
    )
