"""Scenario domain types plus loading, validation and serialization.

A scenario lives in a directory as one YAML file next to two CSV side
files::

    scenario.yaml        facilities, EDs, IP units, distributions, run controls
    travel.csv           ed_id,unit_id,drive_hours,distance_miles
    los_samples.csv      los_hours

All times are hours except the ED and non-ED arrival rates, which are
expected arrivals per day.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from .policy import PlacementPolicy

DAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

TRAVEL_HEADER = ("ed_id", "unit_id", "drive_hours", "distance_miles")
LOS_HEADER = ("los_hours",)


class ParseError(ValueError):
    """Scenario input could not be read; message carries file/line/field context."""


class ValidationError(ValueError):
    """Scenario parsed but violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.violations))


class AgeGroup(str, enum.Enum):
    CHILD = "Child"
    ADOLESCENT = "Adolescent"
    ADULT = "Adult"
    GERIATRIC = "Geriatric"

    @classmethod
    def from_age(cls, age: int) -> "AgeGroup":
        if age < 0:
            raise ValueError(f"age must be nonnegative, got {age}")
        if age <= 11:
            return cls.CHILD
        if age <= 17:
            return cls.ADOLESCENT
        if age <= 64:
            return cls.ADULT
        return cls.GERIATRIC

    @property
    def vulnerable(self) -> bool:
        return self is not AgeGroup.ADULT


AGE_GROUPS = tuple(AgeGroup)


@dataclass(frozen=True)
class EdUnit:
    ed_id: str
    daily_rates: Mapping[str, float]

    def rate_on(self, day_index: int) -> float:
        return self.daily_rates[DAYS[day_index % 7]]


@dataclass(frozen=True)
class IpUnit:
    unit_id: str
    facility_id: str
    licensed_ages: frozenset
    bed_count: int
    accept_prob: float
    mean_review_hours: float
    mean_los_hours: float
    non_ed_rate: float = 0.0

    def treats(self, group: AgeGroup) -> bool:
        return group in self.licensed_ages


@dataclass(frozen=True)
class Facility:
    facility_id: str
    name: str = ""
    has_ed: bool = False
    ed: EdUnit | None = None
    ip_units: tuple = ()
    is_reference: bool = False


@dataclass(frozen=True)
class TravelMatrix:
    """Drive hours and road miles per (ed_id, unit_id) pair."""

    drive_hours: Mapping[tuple, float]
    distance_miles: Mapping[tuple, float]

    def pairs(self):
        return sorted(self.drive_hours)


@dataclass(frozen=True)
class DistributionSpec:
    los_samples: tuple
    reference_mean_los: float
    alpha_triangular: tuple = (0.0, 0.1, 1.0)
    age_mix: Mapping[AgeGroup, float] = field(default_factory=lambda: {AgeGroup.ADULT: 1.0})


@dataclass(frozen=True)
class ScenarioConfig:
    facilities: tuple
    travel: TravelMatrix
    dists: DistributionSpec
    horizon_days: int = 365
    warmup_days: int = 30
    replications: int = 20
    policy: PlacementPolicy = PlacementPolicy()
    seed: int = 0
    rate_multiplier: float = 1.0
    los_multiplier: float = 1.0

    @property
    def units(self) -> list:
        return [u for f in self.facilities for u in f.ip_units]

    @property
    def eds(self) -> list:
        """(facility, ed) pairs for every facility with an ED."""
        return [(f, f.ed) for f in self.facilities if f.has_ed and f.ed is not None]

    @property
    def reference_facility(self) -> Facility | None:
        refs = [f for f in self.facilities if f.is_reference]
        return refs[0] if len(refs) == 1 else None

    def facility_of_ed(self) -> dict:
        return {ed.ed_id: f.facility_id for f, ed in self.eds}

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# validation


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    """Return one description per violated invariant; empty means valid."""
    out: list[str] = []

    fac_ids = [f.facility_id for f in cfg.facilities]
    for dup in sorted({i for i in fac_ids if fac_ids.count(i) > 1}):
        out.append(f"facility {dup}: facility_id: not unique")
    units = cfg.units
    unit_ids = [u.unit_id for u in units]
    for dup in sorted({i for i in unit_ids if unit_ids.count(i) > 1}):
        out.append(f"unit {dup}: unit_id: not unique")
    ed_ids = [ed.ed_id for _, ed in cfg.eds]
    for dup in sorted({i for i in ed_ids if ed_ids.count(i) > 1}):
        out.append(f"ed {dup}: ed_id: not unique")

    if sum(1 for f in cfg.facilities if f.is_reference) > 1:
        out.append("scenario: is_reference: reference facility not unique")
    if not cfg.facilities:
        out.append("scenario: facilities: at least one facility required")

    for f in cfg.facilities:
        ent = f"facility {f.facility_id}"
        if not f.has_ed and not f.ip_units:
            out.append(f"{ent}: has_ed/ip_units: facility needs an ED or at least one IP unit")
        if f.has_ed and f.ed is None:
            out.append(f"{ent}: ed: has_ed is true but no ED record given")
        if not f.has_ed and f.ed is not None:
            out.append(f"{ent}: ed: ED record given but has_ed is false")
        if len(f.ip_units) > 4:
            out.append(f"{ent}: ip_units: at most 4 IP units per facility, got {len(f.ip_units)}")
        seen_sets = set()
        for u in f.ip_units:
            key = frozenset(u.licensed_ages)
            if key in seen_sets:
                out.append(f"{ent}: ip_units: two units share licensed_ages {sorted(a.value for a in key)}")
            seen_sets.add(key)
        if f.ed is not None:
            e = f"ed {f.ed.ed_id}"
            missing = [d for d in DAYS if d not in f.ed.daily_rates]
            if missing:
                out.append(f"{e}: daily_rates: missing days {missing}")
            extra = [d for d in f.ed.daily_rates if d not in DAYS]
            if extra:
                out.append(f"{e}: daily_rates: unknown days {extra}")
            for d, r in f.ed.daily_rates.items():
                if not _finite(r) or r < 0:
                    out.append(f"{e}: daily_rates[{d}]: must be finite and >= 0, got {r!r}")
        for u in f.ip_units:
            ent_u = f"unit {u.unit_id}"
            if u.facility_id != f.facility_id:
                out.append(f"{ent_u}: facility_id: {u.facility_id!r} does not match parent {f.facility_id!r}")
            if not u.licensed_ages:
                out.append(f"{ent_u}: licensed_ages: must be nonempty")
            if isinstance(u.bed_count, bool) or not isinstance(u.bed_count, int) or u.bed_count < 1:
                out.append(f"{ent_u}: bed_count: must be an integer >= 1, got {u.bed_count!r}")
            if not _finite(u.accept_prob) or not 0.0 <= u.accept_prob <= 1.0:
                out.append(f"{ent_u}: accept_prob: must lie in [0, 1], got {u.accept_prob!r}")
            if not _finite(u.mean_review_hours) or u.mean_review_hours <= 0:
                out.append(f"{ent_u}: mean_review_hours: must be > 0, got {u.mean_review_hours!r}")
            if not _finite(u.mean_los_hours) or u.mean_los_hours <= 0:
                out.append(f"{ent_u}: mean_los_hours: must be > 0, got {u.mean_los_hours!r}")
            if not _finite(u.non_ed_rate) or u.non_ed_rate < 0:
                out.append(f"{ent_u}: non_ed_rate: must be finite and >= 0, got {u.non_ed_rate!r}")

    out.extend(_validate_travel(cfg))
    out.extend(_validate_dists(cfg.dists))

    if isinstance(cfg.horizon_days, bool) or not isinstance(cfg.horizon_days, int) or cfg.horizon_days < 1:
        out.append(f"scenario: horizon_days: must be a positive integer, got {cfg.horizon_days!r}")
    if isinstance(cfg.warmup_days, bool) or not isinstance(cfg.warmup_days, int) or cfg.warmup_days < 0:
        out.append(f"scenario: warmup_days: must be a nonnegative integer, got {cfg.warmup_days!r}")
    elif isinstance(cfg.horizon_days, int) and cfg.warmup_days >= cfg.horizon_days:
        out.append(
            f"scenario: warmup_days: warm-up ({cfg.warmup_days}) must be shorter than horizon ({cfg.horizon_days})"
        )
    if isinstance(cfg.replications, bool) or not isinstance(cfg.replications, int) or cfg.replications < 1:
        out.append(f"scenario: replications: must be a positive integer, got {cfg.replications!r}")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        out.append(f"scenario: seed: must be an unsigned 64-bit integer, got {cfg.seed!r}")
    for name in ("rate_multiplier", "los_multiplier"):
        v = getattr(cfg, name)
        if not _finite(v) or v <= 0:
            out.append(f"scenario: {name}: must be > 0, got {v!r}")
    if not isinstance(cfg.policy, PlacementPolicy):
        out.append(f"scenario: policy: not a placement policy: {cfg.policy!r}")
    return out


def _validate_travel(cfg: ScenarioConfig) -> list[str]:
    out = []
    t = cfg.travel
    ed_fac = cfg.facility_of_ed()
    unit_fac = {u.unit_id: u.facility_id for u in cfg.units}
    for (ed_id, unit_id) in sorted(t.drive_hours):
        if ed_id not in ed_fac:
            out.append(f"travel ({ed_id}, {unit_id}): ed_id: unknown ED")
        if unit_id not in unit_fac:
            out.append(f"travel ({ed_id}, {unit_id}): unit_id: unknown IP unit")
    for ed_id in sorted(ed_fac):
        for unit_id in sorted(unit_fac):
            key = (ed_id, unit_id)
            ent = f"travel ({ed_id}, {unit_id})"
            if key not in t.drive_hours or key not in t.distance_miles:
                out.append(f"{ent}: missing travel entry for pair")
                continue
            h, d = t.drive_hours[key], t.distance_miles[key]
            if not _finite(h) or h < 0:
                out.append(f"{ent}: drive_hours: must be finite and >= 0, got {h!r}")
            if not _finite(d) or d < 0:
                out.append(f"{ent}: distance_miles: must be finite and >= 0, got {d!r}")
            if ed_fac[ed_id] == unit_fac[unit_id] and (h != 0 or d != 0):
                out.append(f"{ent}: same facility pair must have zero drive_hours and distance_miles")
    return out


def _validate_dists(d: DistributionSpec) -> list[str]:
    out = []
    if not d.los_samples:
        out.append("dists: los_samples: must be nonempty")
    bad = [s for s in d.los_samples if not _finite(s) or s <= 0]
    if bad:
        out.append(f"dists: los_samples: {len(bad)} sample(s) not > 0 (first {bad[0]!r})")
    if not _finite(d.reference_mean_los) or d.reference_mean_los <= 0:
        out.append(f"dists: reference_mean_los: must be > 0, got {d.reference_mean_los!r}")
    tri = tuple(d.alpha_triangular)
    if len(tri) != 3 or not all(_finite(x) for x in tri):
        out.append(f"dists: alpha_triangular: expected (min, mode, max), got {tri!r}")
    else:
        a, c, b = tri
        if not 0.0 <= a <= c <= b <= 1.0:
            out.append(f"dists: alpha_triangular: need 0 <= min <= mode <= max <= 1, got {tri!r}")
    probs = list(d.age_mix.values())
    if any(not isinstance(k, AgeGroup) for k in d.age_mix):
        out.append(f"dists: age_mix: unknown age group keys {[k for k in d.age_mix if not isinstance(k, AgeGroup)]}")
    if any(not _finite(p) or p < 0 for p in probs):
        out.append("dists: age_mix: probabilities must be finite and >= 0")
    elif abs(sum(probs) - 1.0) > 1e-9:
        out.append(f"dists: age_mix: probabilities sum to {sum(probs)!r}, expected 1")
    return out


# ---------------------------------------------------------------------------
# loading


class _LineDict(dict):
    """Mapping that remembers the source line of each key."""

    lines: dict


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    loader.flatten_mapping(node)
    out = _LineDict()
    out.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        out[key] = loader.construct_object(value_node, deep=deep)
        out.lines[key] = key_node.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


class _Reader:
    """Pulls typed fields out of a parsed YAML mapping with path context."""

    def __init__(self, source: str):
        self.source = source

    def fail(self, path: str, msg: str, node=None, key=None):
        line = ""
        if isinstance(node, _LineDict) and key in node.lines:
            line = f" line {node.lines[key]}"
        raise ParseError(f"{self.source}:{line} {path}: {msg}")

    def mapping(self, node, path):
        if not isinstance(node, dict):
            self.fail(path, f"expected a mapping, got {type(node).__name__}")
        return node

    def get(self, node, key, path, kind, default=...):
        if key not in node:
            if default is ...:
                self.fail(f"{path}.{key}" if path else key, "required field missing", node)
            return default
        value = node[key]
        full = f"{path}.{key}" if path else key
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(full, f"expected integer, got {value!r}", node, key)
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(full, f"expected number, got {value!r}", node, key)
            value = float(value)
        elif kind is bool:
            if not isinstance(value, bool):
                self.fail(full, f"expected true/false, got {value!r}", node, key)
        elif kind is str:
            if not isinstance(value, (str, int)) or isinstance(value, bool):
                self.fail(full, f"expected string, got {value!r}", node, key)
            value = str(value)
        elif kind is list:
            if not isinstance(value, list):
                self.fail(full, f"expected a list, got {value!r}", node, key)
        elif kind is dict:
            if not isinstance(value, dict):
                self.fail(full, f"expected a mapping, got {value!r}", node, key)
        return value

    def age_group(self, value, path, node=None, key=None) -> AgeGroup:
        try:
            return AgeGroup(value)
        except ValueError:
            self.fail(path, f"unknown age group {value!r}; expected one of {[g.value for g in AGE_GROUPS]}", node, key)


def _parse_policy(reader: _Reader, node, key="policy"):
    if key not in node:
        return PlacementPolicy()
    raw = node[key]
    try:
        if isinstance(raw, str):
            return PlacementPolicy.parse(raw)
        if isinstance(raw, dict):
            return PlacementPolicy(str(raw.get("kind", "baseline")), raw.get("m", 1))
    except ValueError as exc:
        reader.fail(key, str(exc), node, key)
    reader.fail(key, f"expected a policy name or mapping, got {raw!r}", node, key)


def _parse_unit(reader, node, path, facility_id):
    reader.mapping(node, path)
    ages_raw = reader.get(node, "licensed_ages", path, list)
    ages = frozenset(reader.age_group(a, f"{path}.licensed_ages", node, "licensed_ages") for a in ages_raw)
    fid = reader.get(node, "facility_id", path, str, facility_id)
    return IpUnit(
        unit_id=reader.get(node, "unit_id", path, str),
        facility_id=fid,
        licensed_ages=ages,
        bed_count=reader.get(node, "bed_count", path, int),
        accept_prob=reader.get(node, "accept_prob", path, float),
        mean_review_hours=reader.get(node, "mean_review_hours", path, float),
        mean_los_hours=reader.get(node, "mean_los_hours", path, float),
        non_ed_rate=reader.get(node, "non_ed_rate", path, float, 0.0),
    )


def _parse_facility(reader, node, path):
    reader.mapping(node, path)
    fid = reader.get(node, "facility_id", path, str)
    ed = None
    if node.get("ed") is not None:
        ed_node = reader.get(node, "ed", path, dict)
        rates_node = reader.get(ed_node, "daily_rates", f"{path}.ed", dict)
        rates = {}
        for day in rates_node:
            rates[str(day)] = reader.get(rates_node, day, f"{path}.ed.daily_rates", float)
        ed = EdUnit(ed_id=reader.get(ed_node, "ed_id", f"{path}.ed", str), daily_rates=rates)
    units_raw = reader.get(node, "ip_units", path, list, [])
    units = tuple(_parse_unit(reader, u, f"{path}.ip_units[{i}]", fid) for i, u in enumerate(units_raw))
    return Facility(
        facility_id=fid,
        name=reader.get(node, "name", path, str, ""),
        has_ed=reader.get(node, "has_ed", path, bool, ed is not None),
        ed=ed,
        ip_units=units,
        is_reference=reader.get(node, "is_reference", path, bool, False),
    )


def read_travel_csv(path) -> TravelMatrix:
    path = Path(path)
    hours, miles = {}, {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAVEL_HEADER:
            raise ParseError(f"{path}: line 1: header must be {','.join(TRAVEL_HEADER)}, got {header!r}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ParseError(f"{path}: line {reader.line_num}: expected 4 columns, got {len(row)}")
            ed_id, unit_id = row[0].strip(), row[1].strip()
            try:
                h, d = float(row[2]), float(row[3])
            except ValueError:
                raise ParseError(f"{path}: line {reader.line_num}: drive_hours/distance_miles not numeric: {row!r}") from None
            key = (ed_id, unit_id)
            if key in hours:
                raise ParseError(f"{path}: line {reader.line_num}: duplicate pair {key}")
            hours[key], miles[key] = h, d
    return TravelMatrix(drive_hours=hours, distance_miles=miles)


def read_los_csv(path) -> tuple:
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOS_HEADER:
            raise ParseError(f"{path}: line 1: header must be los_hours, got {header!r}")
        for row in reader:
            if not row or not row[0].strip():
                continue
            try:
                out.append(float(row[0]))
            except ValueError:
                raise ParseError(f"{path}: line {reader.line_num}: los_hours not numeric: {row[0]!r}") from None
    return tuple(out)


def load_scenario(path, validate: bool = True) -> ScenarioConfig:
    """Read a scenario YAML file plus its travel and LoS side files.

    Raises ParseError for unreadable input and ValidationError when the
    parsed scenario breaks an invariant.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "scenario.yaml"
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    source = str(path)
    try:
        doc = yaml.load(path.read_text(), Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}" if mark is not None else ""
        raise ParseError(f"{source}:{where} malformed YAML: {getattr(exc, 'problem', exc)}") from None
    r = _Reader(source)
    doc = r.mapping(doc, "<root>")

    fac_raw = r.get(doc, "facilities", "", list)
    facilities = tuple(_parse_facility(r, f, f"facilities[{i}]") for i, f in enumerate(fac_raw))

    travel_ref = r.get(doc, "travel", "", str)
    dists_node = r.get(doc, "dists", "", dict)
    los_ref = r.get(dists_node, "los_samples", "dists", str)
    travel = read_travel_csv(path.parent / travel_ref)
    los = read_los_csv(path.parent / los_ref)

    tri = r.get(dists_node, "alpha_triangular", "dists", list, [0.0, 0.1, 1.0])
    if len(tri) != 3 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in tri):
        r.fail("dists.alpha_triangular", f"expected [min, mode, max], got {tri!r}", dists_node, "alpha_triangular")
    mix_node = r.get(dists_node, "age_mix", "dists", dict)
    age_mix = {}
    for k in mix_node:
        age_mix[r.age_group(k, "dists.age_mix", mix_node, k)] = r.get(mix_node, k, "dists.age_mix", float)
    dists = DistributionSpec(
        los_samples=los,
        reference_mean_los=r.get(dists_node, "reference_mean_los", "dists", float),
        alpha_triangular=tuple(float(x) for x in tri),
        age_mix=age_mix,
    )
    cfg = ScenarioConfig(
        facilities=facilities,
        travel=travel,
        dists=dists,
        horizon_days=r.get(doc, "horizon_days", "", int, 365),
        warmup_days=r.get(doc, "warmup_days", "", int, 30),
        replications=r.get(doc, "replications", "", int, 20),
        policy=_parse_policy(r, doc),
        seed=r.get(doc, "seed", "", int, 0),
        rate_multiplier=r.get(doc, "rate_multiplier", "", float, 1.0),
        los_multiplier=r.get(doc, "los_multiplier", "", float, 1.0),
    )
    if validate:
        problems = validate_scenario(cfg)
        if problems:
            raise ValidationError(problems)
    return cfg


# ---------------------------------------------------------------------------
# serialization


def scenario_to_dict(cfg: ScenarioConfig, travel_file="travel.csv", los_file="los_samples.csv") -> dict:
    def unit_dict(u: IpUnit):
        return {
            "unit_id": u.unit_id,
            "licensed_ages": [g.value for g in AGE_GROUPS if g in u.licensed_ages],
            "bed_count": u.bed_count,
            "accept_prob": u.accept_prob,
            "mean_review_hours": u.mean_review_hours,
            "mean_los_hours": u.mean_los_hours,
            "non_ed_rate": u.non_ed_rate,
        }

    facs = []
    for f in cfg.facilities:
        d = {"facility_id": f.facility_id, "name": f.name, "has_ed": f.has_ed, "is_reference": f.is_reference}
        if f.ed is not None:
            d["ed"] = {"ed_id": f.ed.ed_id, "daily_rates": {day: f.ed.daily_rates[day] for day in DAYS if day in f.ed.daily_rates}}
        d["ip_units"] = [unit_dict(u) for u in f.ip_units]
        facs.append(d)
    return {
        "horizon_days": cfg.horizon_days,
        "warmup_days": cfg.warmup_days,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "policy": cfg.policy.to_dict(),
        "rate_multiplier": cfg.rate_multiplier,
        "los_multiplier": cfg.los_multiplier,
        "travel": travel_file,
        "dists": {
            "los_samples": los_file,
            "reference_mean_los": cfg.dists.reference_mean_los,
            "alpha_triangular": list(cfg.dists.alpha_triangular),
            "age_mix": {g.value: cfg.dists.age_mix[g] for g in AGE_GROUPS if g in cfg.dists.age_mix},
        },
        "facilities": facs,
    }


def write_travel_csv(travel: TravelMatrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAVEL_HEADER)
        for key in travel.pairs():
            w.writerow([key[0], key[1], repr(float(travel.drive_hours[key])), repr(float(travel.distance_miles[key]))])


def write_los_csv(samples: Iterable[float], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOS_HEADER)
        for s in samples:
            w.writerow([repr(float(s))])


def dump_scenario(cfg: ScenarioConfig, directory, name: str = "scenario.yaml") -> Path:
    """Write ``cfg`` as a scenario directory; returns the YAML path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = scenario_to_dict(cfg)
    out = directory / name
    out.write_text(yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100))
    write_travel_csv(cfg.travel, directory / doc["travel"])
    write_los_csv(cfg.dists.los_samples, directory / doc["dists"]["los_samples"])
    return out
