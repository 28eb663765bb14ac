"""Experiment plans: run sets of scenario variants and compare them.

Each variant gets its own seed, ``base seed + variant index``, so variants
draw independent streams. With ``crn=True`` every variant reuses the base
seed instead (common random numbers); a policy compared with itself then
produces identical replications.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .flow import run_replication
from .metrics import SummaryReport, export_patients, export_report, summarize
from .policy import PlacementPolicy
from .scenario import ScenarioConfig, ValidationError, validate_scenario
from .stats import DegenerateSample, kruskal_wallis, mann_whitney_u, welch_t_test

SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class Variant:
    label: str
    policy: PlacementPolicy | None = None
    rate_multiplier: float | None = None
    los_multiplier: float | None = None

    def apply(self, base: ScenarioConfig) -> ScenarioConfig:
        changes = {}
        if self.policy is not None:
            changes["policy"] = self.policy
        if self.rate_multiplier is not None:
            changes["rate_multiplier"] = self.rate_multiplier
        if self.los_multiplier is not None:
            changes["los_multiplier"] = self.los_multiplier
        return base.replace(**changes) if changes else base


@dataclass
class VariantResult:
    variant: Variant
    config: ScenarioConfig
    seed: int
    results: list
    report: SummaryReport


@dataclass
class ExperimentPlan:
    base: ScenarioConfig
    variants: list
    replications: int | None = None
    crn: bool = False
    name: str = "experiment"
    trace: bool = False
    outcomes: list = field(default_factory=list)

    def __post_init__(self):
        labels = [v.label for v in self.variants]
        if len(set(labels)) != len(labels):
            raise ValueError(f"variant labels must be unique: {labels}")
        problems = []
        for v in self.variants:
            problems += [f"{v.label}: {p}" for p in validate_scenario(v.apply(self.base))]
        if problems:
            raise ValidationError(problems)

    def seed_for(self, index: int) -> int:
        if self.crn:
            return self.base.seed
        return (self.base.seed + index) % SEED_LIMIT

    def run(self, progress=None) -> list:
        reps = self.replications or self.base.replications
        self.outcomes = []
        for i, v in enumerate(self.variants):
            cfg = v.apply(self.base).replace(replications=reps)
            seed = self.seed_for(i)
            results = run_replications(cfg, reps, seed=seed, trace=self.trace)
            report = summarize(results, cfg, v.label)
            self.outcomes.append(VariantResult(v, cfg, seed, results, report))
            if progress is not None:
                progress(v.label)
        return self.outcomes


def run_replications(cfg: ScenarioConfig, replications: int | None = None, seed: int | None = None,
                     crn_seed: int | None = None, trace: bool = False) -> list:
    reps = cfg.replications if replications is None else replications
    seed = cfg.seed if seed is None else seed
    return [run_replication(cfg, r, seed=seed, crn_seed=crn_seed, trace=trace) for r in range(reps)]


# ---------------------------------------------------------------------------
# outputs


def write_variant(outcome: VariantResult, directory, patient_log: bool = False, trace: bool = False) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    export_report(outcome.report, d / "summary.csv", "csv")
    export_report(outcome.report, d / "summary.txt", "txt")
    if patient_log:
        export_patients(outcome.results, d / "patients.csv")
    if trace:
        write_trace(outcome.results, d / "trace.csv")
    return d


def write_trace(results, path) -> Path:
    """All replications' traces in one file; each block opens with a
    ``replication`` row."""
    path = Path(path)
    tmp = path.with_suffix(".csv.tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("time_hours", "event_type", "entity_id", "detail"))
        for res in results:
            w.writerow((repr(0.0), "replication", res.replication, ""))
            if res.trace is None:
                continue
            for t, e, i, dtl in res.trace.rows:
                w.writerow((repr(float(t)), e, i, dtl))
    tmp.replace(path)
    return path


# ---------------------------------------------------------------------------
# comparisons


def replication_means(outcome: VariantResult, metric: str) -> list:
    return [row.get(metric) for row in outcome.report.replications]


def _clean(xs):
    return [x for x in xs if x is not None]


def compare_outcomes(outcomes, group: str = "vulnerable", placement: str = "transferred",
                     control: int = 0) -> dict:
    """Replication means of coordination time and treatment delay per
    variant, Kruskal-Wallis across variants and Mann-Whitney plus Welch
    against the control variant.

    Returns ``{metric: {"means": {...}, "kruskal": TestResult|None,
    "vs_control": {label: (mw, welch)}}}``.
    """
    out = {}
    for kind in ("coordination", "delay"):
        metric = f"{group}_{placement}_{kind}_mean"
        samples = {o.variant.label: _clean(replication_means(o, metric)) for o in outcomes}
        means = {o.variant.label: o.report.pooled.get(metric) for o in outcomes}
        usable = [s for s in samples.values() if s]
        kw = None
        if len(usable) == len(samples) and sum(map(len, usable)) >= 3:
            kw = kruskal_wallis(*usable)
        ctrl = outcomes[control].variant.label
        vs = {}
        for o in outcomes:
            lab = o.variant.label
            if lab == ctrl or not samples[lab] or not samples[ctrl]:
                continue
            mw = mann_whitney_u(samples[lab], samples[ctrl])
            try:
                wt = welch_t_test(samples[lab], samples[ctrl])
            except DegenerateSample:
                wt = None
            vs[lab] = (mw, wt)
        out[metric] = {"means": means, "samples": samples, "kruskal": kw, "vs_control": vs, "control": ctrl}
    return out


def write_comparison(comparison: dict, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    for metric, block in comparison.items():
        kw = block["kruskal"]
        for label, mean in block["means"].items():
            mw, wt = block["vs_control"].get(label, (None, None))
            rows.append([
                metric, label, _f(mean), len(block["samples"][label]),
                _f(kw.statistic if kw else None), _f(kw.p_value if kw else None),
                _f(mw.statistic if mw else None), _f(mw.p_value if mw else None),
                _f(wt.difference if wt else None), _f(wt.ci[0] if wt else None),
                _f(wt.ci[1] if wt else None), _f(wt.p_value if wt else None),
            ])
    header = ["metric", "variant", "mean", "replications", "kruskal_h", "kruskal_p",
              "mw_u_vs_control", "mw_p_vs_control", "welch_diff_vs_control",
              "welch_ci_low", "welch_ci_high", "welch_p_vs_control"]
    _write_csv(d / "comparison.csv", header, rows)

    lines = []
    for metric, block in comparison.items():
        kw = block["kruskal"]
        lines.append(metric)
        if kw is not None:
            lines.append(f"  Kruskal-Wallis H = {_f(kw.statistic)}, p = {_f(kw.p_value)}")
        width = max(len(k) for k in block["means"])
        for label, mean in block["means"].items():
            tail = ""
            mw, _ = block["vs_control"].get(label, (None, None))
            if mw is not None:
                tail = f"  vs {block['control']}: Mann-Whitney p = {_f(mw.p_value)}"
            lines.append(f"  {label.ljust(width)}  {_f(mean)}{tail}")
    tmp = d / "comparison.txt.tmp"
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(d / "comparison.txt")
    return d


SWEEP_METRICS = ("all_all_coordination_mean", "all_all_delay_mean", "all_transferred_distance_mean",
                 "vulnerable_transferred_coordination_mean", "vulnerable_transferred_delay_mean",
                 "vulnerable_transferred_distance_mean", "occupancy_all")


def write_sweep(outcomes, axis: str, directory) -> Path:
    """Plot-ready table: one row per multiplier with pooled means and CI
    half-widths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    header = ["axis", "multiplier", "variant"]
    for m in SWEEP_METRICS:
        header += [m, f"{m}_ci95"]
    rows = []
    for o in outcomes:
        mult = o.config.rate_multiplier if axis == "rate" else o.config.los_multiplier
        row = [axis, _f(mult), o.variant.label]
        for m in SWEEP_METRICS:
            row += [_f(o.report.pooled.get(m)), _f(o.report.pooled_ci.get(m))]
        rows.append(row)
    _write_csv(d / "sweep.csv", header, rows)
    return d


def _f(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".10g")


def _write_csv(path: Path, header, rows) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    tmp.replace(path)
