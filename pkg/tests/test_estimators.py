import warnings
from datetime import datetime

import numpy as np
import pytest
from helpers import two_site_scenario
from hypothesis import given, settings
from hypothesis import strategies as st

from psychsim import estimators as est
from psychsim.fixture import load_fixture, write_synthetic_logs
from psychsim.scenario import DAYS, ParseError


def hccis(rows):
    return est.HccisTable(tuple(est.HccisRow(*r) for r in rows))


def contacts(rows):
    return est.TransferLog(tuple(est.TransferContact(*r) for r in rows))


def test_proportions_examples():
    log = est.RefEdLog.from_daily_counts([5] * 7, 179.34)
    assert est.estimate_ed_proportions(log)["Mon"] == pytest.approx(5 / 179.34)
    zero = est.RefEdLog.from_daily_counts([0] * 14, 100.0)
    assert set(est.estimate_ed_proportions(zero).values()) == {0.0}


def test_proportions_count_empty_days_as_zero():
    # two weeks; only the first Monday has arrivals
    log = est.RefEdLog.from_daily_counts([4] + [0] * 13, 10.0)
    rho = est.estimate_ed_proportions(log)
    assert rho["Mon"] == pytest.approx(0.2)
    assert rho["Tue"] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=7, max_size=35), st.floats(20, 300))
def test_proportions_scale_with_counts(counts, n_ref):
    one = est.estimate_ed_proportions(est.RefEdLog.from_daily_counts(counts, n_ref))
    two = est.estimate_ed_proportions(est.RefEdLog.from_daily_counts([2 * c for c in counts], n_ref))
    for d in DAYS:
        assert two[d] == pytest.approx(2 * one[d])
        assert one[d] >= 0


def test_proportions_errors():
    with pytest.raises(est.EmptyLog):
        est.estimate_ed_proportions(est.RefEdLog((), 10.0))
    with pytest.raises(ValueError):
        est.estimate_ed_proportions(est.RefEdLog.from_daily_counts([1, 2, 3], 10.0))
    with pytest.raises(ValueError):
        est.RefEdLog((), 0.0)


def test_ed_rates():
    props = {d: 0.0284 for d in DAYS}
    table = hccis([("A", 36500, None, 0, 0, 0), ("B", 0, "U1", 10, 50, 4)])
    rates = est.estimate_ed_rates(props, table)
    assert rates[("A", "Mon")] == pytest.approx(2.84)
    assert ("B", "Mon") not in rates
    assert est.estimate_ed_rates({d: 0.0 for d in DAYS}, table)[("A", "Sun")] == 0.0
    with pytest.raises(est.MissingFacility):
        est.estimate_ed_rates(props, table, ["A", "Z"])


def test_reference_rates_close_the_loop():
    means = {"Mon": 5.10, "Tue": 5.04, "Wed": 4.83, "Thu": 4.38, "Fri": 4.80, "Sat": 2.59, "Sun": 2.31}
    counts = [int(means[DAYS[i % 7]] * 100) // 100 + (1 if (i // 7) < int(round(means[DAYS[i % 7]] * 100)) % 100 else 0)
              for i in range(700)]
    log = est.RefEdLog.from_daily_counts(counts, 179.34)
    table = hccis([("RF", round(179.34 * 365), None, 0, 0, 0)])
    rates = est.estimate_ed_rates(est.estimate_ed_proportions(log), table)
    for d in DAYS:
        assert rates[("RF", d)] == pytest.approx(means[d], abs=0.01)


def test_non_ed_rate():
    table = hccis([("F0", 0, "R", 365, 3650, 10), ("F1", 0, "A", 365, 10, 2), ("F2", 0, "B", 730, 10, 2)])
    rates = est.estimate_non_ed_rate(table, 1.5, "R")
    assert rates["A"] == 1.5 and rates["B"] == 3.0 and rates["R"] == 1.5
    with pytest.raises(est.MissingReferenceUnit):
        est.estimate_non_ed_rate(table, 1.5, "Q")
    with pytest.raises(est.ZeroReferenceVolume):
        est.estimate_non_ed_rate(hccis([("F0", 0, "R", 0, 0, 1)]), 1.5, "R")


def test_mean_los():
    table = hccis([("F0", 0, "U", 730, 3650, 10), ("F0", 0, "V", 24, 1, 1)])
    mu = est.estimate_mean_los(table)
    assert mu == {"U": 120.0, "V": 1.0}
    with pytest.raises(est.ZeroAdmissions):
        est.estimate_mean_los(hccis([("F0", 0, "U", 0, 0, 1)]))


def test_review_and_accept():
    log = contacts([("p1", "H", 0.0, 2.0, True), ("p2", "H", 1.0, 5.0, False), ("p3", "K", 0.0, 0.5, False),
                    ("p3", "H", 3.0, 6.0, True), ("p4", "H", 0.0, 1.0, True)])
    assert est.estimate_review_times(log)["K"] == 0.5
    assert est.estimate_review_times(log)["H"] == pytest.approx(10 / 4)
    g = est.estimate_accept_prob(log)
    assert g == {"H": 0.75, "K": 0.0}
    with pytest.warns(est.NoContacts) as w:
        out = est.estimate_accept_prob(log, ["H", "K", "Z"])
    assert "Z" not in out and w[0].message.facilities == ["Z"]


def test_repeat_contacts_count_separately():
    log = contacts([("p", "H", 0.0, 2.0, False), ("p", "H", 5.0, 9.0, True)])
    assert est.estimate_review_times(log)["H"] == 3.0
    assert est.estimate_accept_prob(log)["H"] == 0.5


def test_review_time_law_of_large_numbers():
    rng = np.random.default_rng(4)
    gaps = rng.exponential(2.0, 10_000)
    log = contacts([(f"p{i}", "H", 0.0, float(g), True) for i, g in enumerate(gaps)])
    assert est.estimate_review_times(log)["H"] == pytest.approx(2.0, abs=0.1)


def test_build_params_coverage():
    units = {"U1": "F1", "U2": "F2"}
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        full = est.build_scenario_params(units, ["F1"], ed_rates={("F1", d): 1.0 for d in DAYS},
                                         non_ed_rates={"U1": 0.1, "U2": 0.2}, mean_los={"U1": 100, "U2": 50},
                                         review_times={"F1": 1.0, "F2": 2.0}, accept_probs={"F1": 0.5, "F2": 0.7})
    assert full.defaults_used == 0 and full.gaps == []
    with pytest.warns(est.CoverageGap) as w:
        part = est.build_scenario_params(units, ed_rates={}, mean_los={"U1": 100, "U2": 50},
                                         non_ed_rates={"U1": 0.1, "U2": 0.2},
                                         review_times={"F1": 1.0}, accept_probs={"F1": 0.5, "F2": 0.7})
    assert w[0].message.entries == ["U2"]
    assert part.units["U2"]["mean_review_hours"] == 1.0  # regional mean of estimates
    assert part.provenance["U2.mean_review_hours"] == "default"
    assert part.provenance["U1.mean_review_hours"] == "estimate"
    with pytest.warns(est.CoverageGap) as w:
        empty = est.build_scenario_params(units, ["F1"])
    assert w[0].message.entries == ["F1", "U1", "U2"]
    assert set(empty.provenance.values()) == {"default"}
    assert empty.units["U1"]["accept_prob"] == est.FALLBACK_ACCEPT_PROB


def test_apply_overlay_and_serialisation():
    cfg = two_site_scenario()
    ov = est.Overlay(ed_rates={"F0": {d: 9.0 for d in DAYS}}, units={"U1": {"accept_prob": 0.25}})
    new = est.apply_overlay(cfg, est.Overlay.from_dict(ov.to_dict()))
    assert new.facilities[0].ed.daily_rates["Wed"] == 9.0
    assert new.units[1].accept_prob == 0.25
    assert new.units[0] == cfg.units[0]
    assert new.facilities[1].ed == cfg.facilities[1].ed


def test_csv_readers_and_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("patient_id,facility_id,t1,t2,decision\np,H,2023-01-01T00:00,2023-01-01T02:30,Accept\n")
    log = est.read_transfer_log(p)
    assert log.rows[0].t2 - log.rows[0].t1 == 2.5
    p.write_text("patient_id,facility_id,t1,t2,decision\np,H,0,1,Accept\np,H,5,4,Reject\n")
    with pytest.raises(ParseError, match="line 3"):
        est.read_transfer_log(p)
    p.write_text("patient_id,facility_id,t1,t2,decision\np,H,0,1,Maybe\n")
    with pytest.raises(ParseError, match="line 2"):
        est.read_transfer_log(p)
    h = tmp_path / "h.csv"
    h.write_text("facility_id,annual_ed_registrations,unit_id,annual_admissions,annual_patient_days,beds\n"
                 "F,100,U,0,20,3\n")
    with pytest.raises(ParseError, match="line 2"):
        est.read_hccis(h)
    r = tmp_path / "r.csv"
    r.write_text("timestamp,needs_ip\n")
    with pytest.raises(est.EmptyLog):
        est.read_ref_ed_log(r)
    r.write_text("timestamp,needs_ip\n2023-01-02T10:00,1\n2023-01-03T10:00,0\n2023-01-03T11:00,0\n")
    log = est.read_ref_ed_log(r)
    assert log.n_ref_ed == 1.5
    assert log.rows[0] == (datetime(2023, 1, 2, 10), True)


def test_generate_then_estimate_round_trip(tmp_path):
    cfg = load_fixture()
    truth = write_synthetic_logs(cfg, tmp_path, contacts=2000)
    table = est.read_hccis(tmp_path / "hccis.csv")
    log = est.read_ref_ed_log(tmp_path / "ref_ed_log.csv", truth["registrations"]["F000"] / 365)
    tlog = est.read_transfer_log(tmp_path / "transfer_log.csv")
    ov = est.estimate_all(log, tlog, table, ref_unit_id="U000", ref_daily_non_ed=truth["non_ed"]["U000"])
    assert ov.defaults_used == 0
    for f in cfg.facilities:
        if f.ed is not None:
            for d in DAYS:
                assert ov.ed_rates[f.facility_id][d] == pytest.approx(f.ed.daily_rates[d], rel=0.1, abs=0.02)
        for u in f.ip_units:
            vals = ov.units[u.unit_id]
            assert vals["accept_prob"] == pytest.approx(truth["accept"][f.facility_id], abs=0.05)
            assert vals["mean_review_hours"] == pytest.approx(truth["review"][f.facility_id], rel=0.1)
            assert vals["mean_los_hours"] == pytest.approx(u.mean_los_hours, abs=0.1)
            assert vals["non_ed_rate"] == pytest.approx(truth["non_ed"][u.unit_id])
