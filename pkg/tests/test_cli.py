import csv

import pytest
import yaml

from psychsim import experiments
from psychsim.cli import main, parse_grid, UsageError
from psychsim.fixture import load_fixture, write_synthetic_logs

SHORT = ["--horizon-days", "20", "--warmup-days", "2", "--replications", "2", "--quiet"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path):
    rc = main(["run", "fixture", "--seed", "3", "--patient-log", "--trace", "--out", str(tmp_path)] + SHORT)
    assert rc == 0
    d = tmp_path / "run" / "baseline"
    for name in ("summary.csv", "summary.txt", "patients.csv", "trace.csv"):
        assert (d / name).stat().st_size > 0, name
    trace = rows(d / "trace.csv")
    assert [r["entity_id"] for r in trace if r["event_type"] == "replication"] == ["0", "1"]


def test_run_policy_label(tmp_path):
    rc = main(["run", "--scenario", "fixture", "--policy", "concurrent-proximity", "--m", "3",
               "--out", str(tmp_path)] + SHORT)
    assert rc == 0
    assert (tmp_path / "run" / "concurrent-proximity-m3" / "summary.csv").exists()


@pytest.mark.parametrize("argv", [
    ["run"],
    ["run", "fixture", "--horizon-days", "10", "--warmup-days", "10"],
    ["run", "fixture", "--policy", "concurrent-proximity", "--m", "0"],
    ["run", "no/such/scenario.yaml"],
    ["compare", "fixture", "--policies", "baseline"],
    ["compare", "fixture", "--policies", "baseline,teleport"],
    ["sweep", "fixture", "--axis", "rate", "--grid", "0.5,-1"],
    ["frobnicate"],
])
def test_input_errors_exit_1(argv, capsys):
    # each of these fails before any output is written
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_warmup_error_names_field(capsys):
    assert main(["run", "fixture", "--horizon-days", "10", "--warmup-days", "12"]) == 1
    assert "warmup" in capsys.readouterr().err


def test_runtime_error_exit_2(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("kaput")
    monkeypatch.setattr(experiments, "run_replications", boom)
    assert main(["run", "fixture", "--out", str(tmp_path)] + SHORT) == 2
    assert "kaput" in capsys.readouterr().err


def test_compare_self_with_crn_is_identical(tmp_path, capsys):
    rc = main(["compare", "fixture", "--policies", "baseline,concurrent-proximity:1", "--crn",
               "--out", str(tmp_path)] + SHORT)
    assert rc == 0
    table = rows(tmp_path / "compare" / "comparison.csv")
    cp = [r for r in table if r["variant"] == "concurrent-proximity-m1"]
    assert cp and all(float(r["mw_p_vs_control"]) == 1.0 for r in cp)
    base = {r["metric"]: r["mean"] for r in table if r["variant"] == "baseline"}
    assert all(base[r["metric"]] == r["mean"] for r in cp)
    assert "Kruskal-Wallis" in capsys.readouterr().out


def test_sweep_unit_multiplier_matches_run(tmp_path):
    assert main(["sweep", "fixture", "--axis", "los", "--grid", "50%,1.0", "--seed", "4",
                 "--out", str(tmp_path)] + SHORT) == 0
    table = rows(tmp_path / "sweep-los" / "sweep.csv")
    assert [float(r["multiplier"]) for r in table] == [0.5, 1.0]
    assert main(["run", "fixture", "--seed", "5", "--out", str(tmp_path)] + SHORT) == 0
    # the second sweep variant uses seed 4 + 1
    swept = (tmp_path / "sweep-los" / "los-1" / "summary.csv").read_text()
    ran = (tmp_path / "run" / "baseline" / "summary.csv").read_text()
    def body(text):
        return [line.split(",", 1)[1] for line in text.splitlines()[1:]]
    assert body(swept) == body(ran)


def test_parse_grid():
    assert parse_grid("50%, 1, 1.25") == [0.5, 1.0, 1.25]
    with pytest.raises(UsageError):
        parse_grid(",")


def _estimate(tmp_path, *extra):
    cfg = load_fixture()
    truth = write_synthetic_logs(cfg, tmp_path, days=84, contacts=30)
    out = tmp_path / "overlay.yaml"
    argv = ["estimate", "--ref-ed-log", str(tmp_path / "ref_ed_log.csv"),
            "--transfer-log", str(tmp_path / "transfer_log.csv"), "--hccis", str(tmp_path / "hccis.csv"),
            "--ref-unit", "U000", "--ref-non-ed-rate", str(truth["non_ed"]["U000"]),
            "--ref-facility", cfg.reference_facility.facility_id, "--out", str(out), *extra]
    return argv, out, truth


def test_estimate_then_run_with_overlay(tmp_path):
    argv, out, truth = _estimate(tmp_path, "--scenario", "fixture")
    assert main(argv) == 0
    data = yaml.safe_load(out.read_text())
    assert data["units"]["U000"]["mean_los_hours"] == pytest.approx(truth["mean_los"]["U000"])
    assert main(["run", "fixture", "--overlay", str(out), "--out", str(tmp_path / "o")] + SHORT) == 0


def test_estimate_empty_transfer_log_defaults(tmp_path, capsys):
    argv, out, _ = _estimate(tmp_path)
    (tmp_path / "transfer_log.csv").write_text("patient_id,facility_id,t1,t2,decision\n")
    assert main(argv) == 0
    data = yaml.safe_load(out.read_text())
    review = {k: v for k, v in data["provenance"].items() if k.endswith("mean_review_hours")}
    assert review and set(review.values()) == {"default"}
    assert "warning" in capsys.readouterr().err


def test_estimate_malformed_row(tmp_path, capsys):
    argv, _, _ = _estimate(tmp_path)
    with (tmp_path / "transfer_log.csv").open("a") as fh:
        fh.write("P9,F000,abc,3.0,Accept\n")
    assert main(argv) == 1
    assert "line" in capsys.readouterr().err


def test_validate(tmp_path, capsys):
    assert main(["validate", "fixture"]) == 0
    assert "ok" in capsys.readouterr().out
    bad = tmp_path / "bad.yaml"
    bad.write_text("facilities: []\n")
    assert main(["validate", str(bad)]) == 1
