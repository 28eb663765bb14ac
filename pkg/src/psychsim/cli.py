"""``psychsim`` command line: run, compare, sweep, estimate, validate.

Exit codes: 0 success, 1 bad input (parse, validation, usage), 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import yaml

from . import estimators as est
from .experiments import ExperimentPlan, Variant, compare_outcomes, write_comparison, write_sweep, write_variant
from .fixture import fixture_path
from .policy import POLICY_KINDS, PlacementPolicy
from .scenario import ParseError, ValidationError, load_scenario, validate_scenario

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario_pos", nargs="?", metavar="SCENARIO",
                   help="scenario YAML or directory, or 'fixture'")
    p.add_argument("--scenario", dest="scenario_opt", metavar="PATH")
    p.add_argument("--overlay", metavar="FILE", help="estimate overlay to apply first")
    p.add_argument("--replications", type=int)
    p.add_argument("--horizon-days", type=int)
    p.add_argument("--warmup-days", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--rate-multiplier", type=float)
    p.add_argument("--los-multiplier", type=float)
    p.add_argument("--out", default="out", metavar="DIR")
    p.add_argument("--patient-log", action="store_true", help="also write patients.csv")
    p.add_argument("--trace", action="store_true", help="also write trace.csv")
    p.add_argument("--crn", action="store_true", help="share random streams across variants")
    p.add_argument("--quiet", action="store_true")


def _policy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", choices=POLICY_KINDS)
    p.add_argument("--m", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psychsim", description="Psychiatric patient placement simulator.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="run one scenario")
    _scenario_args(run)
    _policy_args(run)

    cmp_ = sub.add_parser("compare", help="compare placement policies")
    _scenario_args(cmp_)
    cmp_.add_argument("--policies", required=True,
                      help="comma list, e.g. baseline,by-acceptance,concurrent-proximity:2")
    cmp_.add_argument("--group", choices=("vulnerable", "adult", "all"), default="vulnerable")

    sweep = sub.add_parser("sweep", help="sensitivity sweep over a multiplier")
    _scenario_args(sweep)
    _policy_args(sweep)
    sweep.add_argument("--axis", choices=("rate", "los"), required=True)
    sweep.add_argument("--grid", default="0.5,0.75,1.0,1.25,1.5",
                       help="multipliers, e.g. 0.5,1,1.5 or 50%%,100%%,150%%")

    estimate = sub.add_parser("estimate", help="estimate parameters from logs")
    estimate.add_argument("--ref-ed-log", required=True, metavar="CSV")
    estimate.add_argument("--transfer-log", required=True, metavar="CSV")
    estimate.add_argument("--hccis", required=True, metavar="CSV")
    estimate.add_argument("--ref-unit", required=True, help="reference IP unit id in the HCCIS table")
    estimate.add_argument("--ref-non-ed-rate", type=float, required=True,
                          help="reference unit's mean daily non-ED admissions")
    estimate.add_argument("--ref-facility", help="take daily ED registrations from this HCCIS row")
    estimate.add_argument("--n-ref-ed", type=float, help="mean daily ED registrations at the reference")
    estimate.add_argument("--scenario", dest="scenario_opt", metavar="PATH",
                          help="use this scenario's units as the roster")
    estimate.add_argument("--out", required=True, metavar="FILE")

    val = sub.add_parser("validate", help="check a scenario")
    val.add_argument("scenario_pos", nargs="?", metavar="SCENARIO")
    val.add_argument("--scenario", dest="scenario_opt", metavar="PATH")
    return parser


# ---------------------------------------------------------------------------


def _resolve(args) -> Path:
    name = args.scenario_opt or args.scenario_pos
    if name is None:
        raise UsageError("a scenario is required (path or 'fixture')")
    return fixture_path() if name == "fixture" else Path(name)


def _load(args):
    cfg = load_scenario(_resolve(args), validate=False)
    if getattr(args, "overlay", None):
        cfg = est.apply_overlay(cfg, read_overlay(args.overlay))
    changes = {}
    for flag, name in (("replications", "replications"), ("horizon_days", "horizon_days"),
                       ("warmup_days", "warmup_days"), ("seed", "seed"),
                       ("rate_multiplier", "rate_multiplier"), ("los_multiplier", "los_multiplier")):
        v = getattr(args, flag, None)
        if v is not None:
            changes[name] = v
    if getattr(args, "policy", None) is not None or getattr(args, "m", None) is not None:
        kind = args.policy or cfg.policy.kind
        m = args.m if args.m is not None else (cfg.policy.m if kind == cfg.policy.kind else 1)
        try:
            changes["policy"] = PlacementPolicy(kind, m)
        except ValueError as e:
            raise ValidationError([f"policy: m: {e}"]) from None
    cfg = cfg.replace(**changes) if changes else cfg
    problems = validate_scenario(cfg)
    if problems:
        raise ValidationError(problems)
    return cfg


def _say(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _report_paths(args, exp: str, outcomes) -> None:
    for o in outcomes:
        write_variant(o, Path(args.out) / exp / o.variant.label, args.patient_log, args.trace)


def cmd_run(args) -> int:
    cfg = _load(args)
    plan = ExperimentPlan(cfg, [Variant(cfg.policy.label)], crn=args.crn, name="run", trace=args.trace)
    outcomes = plan.run(progress=lambda lab: _say(args, f"ran {lab}"))
    _report_paths(args, "run", outcomes)
    _say(args, f"wrote {Path(args.out) / 'run' / outcomes[0].variant.label}")
    return EXIT_OK


def _parse_policies(text: str) -> list:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            out.append(PlacementPolicy.parse(item))
        except ValueError as e:
            raise UsageError(f"--policies: {e}") from None
    return out


def cmd_compare(args) -> int:
    policies = _parse_policies(args.policies)
    if len(policies) < 2:
        raise UsageError("compare needs at least two policies")
    cfg = _load(args)
    variants = [Variant(p.label, policy=p) for p in policies]
    plan = ExperimentPlan(cfg, variants, crn=args.crn, name="compare", trace=args.trace)
    outcomes = plan.run(progress=lambda lab: _say(args, f"ran {lab}"))
    _report_paths(args, "compare", outcomes)
    comparison = compare_outcomes(outcomes, group=args.group)
    d = write_comparison(comparison, Path(args.out) / "compare")
    print((d / "comparison.txt").read_text(), end="")
    return EXIT_OK


def parse_grid(text: str) -> list:
    vals = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            v = float(item[:-1]) / 100.0 if item.endswith("%") else float(item)
        except ValueError:
            raise UsageError(f"--grid: not a number: {item!r}") from None
        if not v > 0:
            raise UsageError(f"--grid: values must be > 0, got {item!r}")
        vals.append(v)
    if not vals:
        raise UsageError("--grid is empty")
    return vals


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    cfg = _load(args)
    key = "rate_multiplier" if args.axis == "rate" else "los_multiplier"
    variants = [Variant(f"{args.axis}-{g:g}", **{key: g}) for g in grid]
    exp = f"sweep-{args.axis}"
    plan = ExperimentPlan(cfg, variants, crn=args.crn, name=exp, trace=args.trace)
    outcomes = plan.run(progress=lambda lab: _say(args, f"ran {lab}"))
    _report_paths(args, exp, outcomes)
    d = write_sweep(outcomes, args.axis, Path(args.out) / exp)
    print((d / "sweep.csv").read_text(), end="")
    return EXIT_OK


def read_overlay(path) -> est.Overlay:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ParseError(f"{path}: {e}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: overlay must be a mapping")
    return est.Overlay.from_dict(data)


def write_overlay(overlay: est.Overlay, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(yaml.safe_dump(overlay.to_dict(), sort_keys=True, default_flow_style=False))
    tmp.replace(path)
    return path


def cmd_estimate(args) -> int:
    hccis = est.read_hccis(args.hccis)
    n_ref = args.n_ref_ed
    if n_ref is None and args.ref_facility:
        regs = hccis.ed_registrations().get(args.ref_facility)
        if not regs:
            raise est.MissingFacility(f"no ED registrations for {args.ref_facility}")
        n_ref = regs / est.DAYS_PER_YEAR
    ref_log = est.read_ref_ed_log(args.ref_ed_log, n_ref)
    tlog = est.read_transfer_log(args.transfer_log)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.scenario_opt:
            cfg = load_scenario(fixture_path() if args.scenario_opt == "fixture" else args.scenario_opt)
            units = {u.unit_id: u.facility_id for u in cfg.units}
            ed_facs = [f.facility_id for f in cfg.facilities if f.ed is not None]
            facs = sorted(set(units.values()))
            props = est.estimate_ed_proportions(ref_log)
            overlay = est.build_scenario_params(
                units, ed_facs,
                ed_rates=est.estimate_ed_rates(props, hccis, ed_facs),
                non_ed_rates=est.estimate_non_ed_rate(hccis, args.ref_non_ed_rate, args.ref_unit),
                mean_los=est.estimate_mean_los(hccis),
                review_times=est.estimate_review_times(tlog, facs),
                accept_probs=est.estimate_accept_prob(tlog, facs),
            )
        else:
            overlay = est.estimate_all(ref_log, tlog, hccis, ref_unit_id=args.ref_unit,
                                       ref_daily_non_ed=args.ref_non_ed_rate)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_overlay(overlay, args.out)
    print(f"wrote {args.out}: {len(overlay.provenance) - overlay.defaults_used} estimated, "
          f"{overlay.defaults_used} defaulted", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    path = _resolve(args)
    cfg = load_scenario(path, validate=False)
    problems = validate_scenario(cfg)
    if problems:
        for p in problems:
            print(p)
        return EXIT_INPUT
    print(f"{path}: ok ({len(cfg.facilities)} facilities, {len(cfg.units)} units)")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep,
            "estimate": cmd_estimate, "validate": cmd_validate}

INPUT_ERRORS = (UsageError, ParseError, ValidationError, est.EmptyLog, est.MissingFacility,
                est.MissingReferenceUnit, est.ZeroReferenceVolume, est.ZeroAdmissions,
                FileNotFoundError, IsADirectoryError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
