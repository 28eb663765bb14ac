"""Synthetic regional scenario shipped with the package.

The region has about one hundred EDs and forty IP units spread over a
200 x 200 mile square, with one dense metro cluster, one smaller city and
a rural remainder. Most beds are licensed for adults. The reference
facility sits in the metro cluster and its ED volume reproduces the
weekly IP-bound arrival profile used by the estimators.

``build_synthetic_region`` regenerates the shipped files bit for bit;
``fixture_path`` points at the packaged copy.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .policy import PlacementPolicy
from .scenario import (
    DAYS,
    AgeGroup,
    DistributionSpec,
    EdUnit,
    Facility,
    IpUnit,
    ScenarioConfig,
    TravelMatrix,
    dump_scenario,
    load_scenario,
)

FIXTURE_DIR = Path(__file__).parent / "data" / "fixture"

# Mean daily IP-bound ED arrivals at the reference hospital (Mon..Sun) and
# its mean daily ED registrations.
REFERENCE_DAILY_IP_ARRIVALS = {
    "Mon": 5.10, "Tue": 5.04, "Wed": 4.83, "Thu": 4.38, "Fri": 4.80, "Sat": 2.59, "Sun": 2.31,
}
REFERENCE_DAILY_ED_REGISTRATIONS = 179.34

AGE_MIX = {
    AgeGroup.CHILD: 0.04,
    AgeGroup.ADOLESCENT: 0.20,
    AgeGroup.ADULT: 0.66,
    AgeGroup.GERIATRIC: 0.10,
}

C, AD, A, G = AgeGroup.CHILD, AgeGroup.ADOLESCENT, AgeGroup.ADULT, AgeGroup.GERIATRIC

# (licensed groups, bed range, mean LoS range in hours)
UNIT_KINDS = {
    "adult": ((A,), (14, 30), (150.0, 210.0)),
    "adult_geri": ((A, G), (12, 22), (180.0, 260.0)),
    "geri": ((G,), (8, 16), (240.0, 330.0)),
    "adol": ((AD,), (8, 16), (170.0, 230.0)),
    "child_adol": ((C, AD), (8, 14), (180.0, 240.0)),
    "child": ((C,), (6, 10), (190.0, 250.0)),
}

ROAD_FACTOR = 1.25
MPH = 48.0


def fixture_path() -> Path:
    return FIXTURE_DIR / "scenario.yaml"


def load_fixture(**overrides) -> ScenarioConfig:
    cfg = load_scenario(fixture_path())
    return cfg.replace(**overrides) if overrides else cfg


def _rates_for(registrations_per_day: float) -> dict:
    rho = {d: REFERENCE_DAILY_IP_ARRIVALS[d] / REFERENCE_DAILY_ED_REGISTRATIONS for d in DAYS}
    return {d: round(rho[d] * registrations_per_day, 4) for d in DAYS}


def build_synthetic_region(seed: int = 20230517, n_eds: int = 100,
                           target_occupancy: float = 0.45, direct_share: float = 0.25,
                           region_miles: float = 200.0, gamma_range=(0.35, 0.97),
                           median_review_hours: float = 0.7) -> ScenarioConfig:
    """Generate the synthetic region.

    Bed counts are sized per age group so that the expected load (ED
    arrivals plus a ``direct_share`` of non-ED admissions) fills
    ``target_occupancy`` of the beds; units licensed for two groups count
    half toward each.
    """
    rng = np.random.default_rng(seed)

    # facility sites: metro cluster, a smaller city, rural remainder
    n_ip_only = 4
    n_fac = n_eds + n_ip_only
    kinds = np.array(["metro"] * 30 + ["city"] * 14 + ["rural"] * (n_fac - 44))
    rng.shuffle(kinds[1:])
    kinds[0] = "metro"
    xy = np.empty((n_fac, 2))
    k_mi = region_miles / 320.0
    for i, k in enumerate(kinds):
        if k == "metro":
            xy[i] = rng.normal((170.0 * k_mi, 150.0 * k_mi), 9.0 * k_mi)
        elif k == "city":
            xy[i] = rng.normal((70.0 * k_mi, 250.0 * k_mi), 6.0 * k_mi)
        else:
            xy[i] = rng.uniform(0.0, region_miles, 2)

    # which facilities host IP units, and which unit kinds
    metro_idx = [i for i in range(n_fac) if kinds[i] == "metro"]
    city_idx = [i for i in range(n_fac) if kinds[i] == "city"]
    rural_idx = [i for i in range(n_fac) if kinds[i] == "rural"]
    ip_hosts = [0] + metro_idx[1:10] + city_idx[:4] + rural_idx[:10]
    ip_only = set(rural_idx[10:10 + n_ip_only])
    ip_hosts += sorted(ip_only)

    plan = {
        0: ["adult", "child_adol", "geri"],
        metro_idx[1]: ["adult", "adol"],
        metro_idx[2]: ["adult", "adult_geri"],
        metro_idx[3]: ["adult", "child"],
        metro_idx[4]: ["adult", "adol"],
        metro_idx[5]: ["adult"],
        metro_idx[6]: ["adult_geri"],
        metro_idx[7]: ["adult", "geri"],
        metro_idx[8]: ["adol", "child_adol"],
        metro_idx[9]: ["adult", "geri"],
        city_idx[0]: ["adult", "child_adol"],
        city_idx[1]: ["adult", "geri"],
        city_idx[2]: ["adult"],
        city_idx[3]: ["adol", "child"],
    }
    rural_kinds = ["adult", "adult_geri", "adult", "geri", "adult", "adol", "adult",
                   "adult_geri", "adult", "child_adol"]
    for i, k in zip(rural_idx[:10], rural_kinds):
        plan[i] = [k]
    for i, k in zip(sorted(ip_only), ["adult_geri", "child_adol", "adult", "adol"]):
        plan[i] = [k]

    facilities = []
    n_units = 0
    ed_count = 0
    for i in range(n_fac):
        fid = f"F{i:03d}"
        has_ed = i not in ip_only
        ed = None
        if has_ed:
            if i == 0:
                regs = REFERENCE_DAILY_ED_REGISTRATIONS
            elif kinds[i] == "metro":
                regs = float(rng.lognormal(np.log(30.0), 0.5))
            elif kinds[i] == "city":
                regs = float(rng.lognormal(np.log(20.0), 0.5))
            else:
                regs = float(rng.lognormal(np.log(8.0), 0.6))
            ed = EdUnit(ed_id=f"E{i:03d}", daily_rates=_rates_for(regs))
            ed_count += 1
        units = []
        for k in plan.get(i, []):
            groups, (b_lo, b_hi), (l_lo, l_hi) = UNIT_KINDS[k]
            uid = f"U{n_units:03d}"
            n_units += 1
            beds = int(rng.integers(b_lo, b_hi + 1))
            if i == 0:
                gamma = 0.6
            elif i in ip_only:
                # state hospitals: accept every referral
                gamma = 1.0
            else:
                gamma = float(np.round(rng.uniform(*gamma_range), 3))
            review = float(np.round(np.clip(rng.lognormal(np.log(median_review_hours), 0.6), 0.1, 2.5), 3))
            los = float(np.round(rng.uniform(l_lo, l_hi), 1))
            units.append(IpUnit(
                unit_id=uid,
                facility_id=fid,
                licensed_ages=frozenset(groups),
                bed_count=beds,
                accept_prob=gamma,
                mean_review_hours=review,
                mean_los_hours=los,
                non_ed_rate=0.0,
            ))
        facilities.append(Facility(
            facility_id=fid,
            name=("Reference Medical Center" if i == 0 else f"{kinds[i].title()} Hospital {i:03d}"),
            has_ed=has_ed,
            ed=ed,
            ip_units=tuple(units),
            is_reference=(i == 0),
        ))

    # scale bed counts to demand, then add direct admissions
    ed_per_day = sum(sum(f.ed.daily_rates.values()) / 7.0 for f in facilities if f.ed is not None)
    need, have = {}, {}
    for g, share in AGE_MIX.items():
        members = [u for f in facilities for u in f.ip_units if g in u.licensed_ages]
        los_days = np.mean([u.mean_los_hours for u in members]) / 24.0
        need[g] = ed_per_day * share * los_days / (1.0 - direct_share) / target_occupancy
        have[g] = sum(u.bed_count / len(u.licensed_ages) for u in members)
    fac_list = []
    for f in facilities:
        new_units = []
        for u in f.ip_units:
            scale = np.mean([need[g] / have[g] for g in u.licensed_ages])
            beds = max(int(round(u.bed_count * scale)), 2)
            throughput = target_occupancy * beds / (u.mean_los_hours / 24.0)
            new_units.append(IpUnit(**{**u.__dict__, "bed_count": beds,
                                       "non_ed_rate": float(np.round(direct_share * throughput, 4))}))
        fac_list.append(Facility(**{**f.__dict__, "ip_units": tuple(new_units)}))
    facilities = fac_list

    hours, miles = {}, {}
    for i, f in enumerate(facilities):
        if f.ed is None:
            continue
        for j, g in enumerate(facilities):
            for u in g.ip_units:
                if i == j:
                    d = h = 0.0
                else:
                    d = float(np.round(ROAD_FACTOR * np.hypot(*(xy[i] - xy[j])) + 1.0, 1))
                    h = float(np.round(d / MPH + 0.1, 3))
                hours[(f.ed.ed_id, u.unit_id)] = h
                miles[(f.ed.ed_id, u.unit_id)] = d

    los_pool = np.round(rng.lognormal(np.log(150.0), 0.75, 3000), 1)
    los_pool = np.clip(los_pool, 4.0, None)
    ref_mean = float(np.round(los_pool.mean(), 2))
    ref_adult = facilities[0].ip_units[0]
    ref_units = (IpUnit(**{**ref_adult.__dict__, "mean_los_hours": ref_mean}),) + facilities[0].ip_units[1:]
    facilities[0] = Facility(**{**facilities[0].__dict__, "ip_units": ref_units})

    return ScenarioConfig(
        facilities=tuple(facilities),
        travel=TravelMatrix(hours, miles),
        dists=DistributionSpec(
            los_samples=tuple(float(x) for x in los_pool),
            reference_mean_los=ref_mean,
            alpha_triangular=(0.0, 0.1, 1.0),
            age_mix=dict(AGE_MIX),
        ),
        horizon_days=365,
        warmup_days=30,
        replications=20,
        policy=PlacementPolicy(),
        seed=7,
    )


def write_fixture(directory=FIXTURE_DIR, **kwargs) -> Path:
    return dump_scenario(build_synthetic_region(**kwargs), directory)


def write_synthetic_logs(cfg: ScenarioConfig, directory, days: int = 364, contacts: int = 400,
                         seed: int = 99) -> dict:
    """Write ``ref_ed_log.csv``, ``transfer_log.csv`` and ``hccis.csv`` whose
    true parameters are those of ``cfg``; returns the truth used.

    Facility-level review time and acceptance are the means over the
    facility's units. Annual volumes are exact multiples of 365 so daily
    figures are recovered without rounding.
    """
    import csv
    from datetime import datetime, timedelta

    rng = np.random.default_rng(seed)
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ref = cfg.reference_facility
    ref_regs = REFERENCE_DAILY_ED_REGISTRATIONS
    t0 = datetime(2023, 1, 2)  # a Monday
    with (d / "ref_ed_log.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp", "needs_ip"))
        for day in range(days):
            rate = ref.ed.daily_rates[DAYS[day % 7]]
            n_ip = rng.poisson(rate)
            n_other = rng.poisson(max(ref_regs - rate, 0.0))
            stamps = np.sort(rng.uniform(0, 86400, n_ip + n_other))
            flags = np.zeros(len(stamps), bool)
            flags[rng.choice(len(stamps), n_ip, replace=False)] = True
            for s, f in zip(stamps, flags):
                w.writerow(((t0 + timedelta(days=day, seconds=float(s))).isoformat(timespec="seconds"),
                            int(f)))

    truth = {"review": {}, "accept": {}, "mean_los": {}, "non_ed": {}, "registrations": {}}
    with (d / "transfer_log.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("patient_id", "facility_id", "t1", "t2", "decision"))
        pid = 0
        for f in cfg.facilities:
            if not f.ip_units:
                continue
            delta = float(np.mean([u.mean_review_hours for u in f.ip_units]))
            gamma = float(np.mean([u.accept_prob for u in f.ip_units]))
            truth["review"][f.facility_id] = delta
            truth["accept"][f.facility_id] = gamma
            for _ in range(contacts):
                t1 = float(rng.uniform(0, 24 * days))
                gap = float(rng.exponential(delta))
                dec = "Accept" if rng.random() < gamma else "Reject"
                w.writerow((f"P{pid}", f.facility_id, repr(t1), repr(t1 + gap), dec))
                pid += 1

    with (d / "hccis.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("facility_id", "annual_ed_registrations", "unit_id", "annual_admissions",
                    "annual_patient_days", "beds"))
        for f in cfg.facilities:
            regs = 0
            if f.ed is not None:
                regs = int(round(f.ed.daily_rates["Mon"] / REFERENCE_DAILY_IP_ARRIVALS["Mon"]
                                 * ref_regs * 365))
            truth["registrations"][f.facility_id] = regs
            if not f.ip_units:
                w.writerow((f.facility_id, regs, "", 0, 0, 0))
            for u in f.ip_units:
                adm = 365 * max(int(round(u.non_ed_rate * 4)), 1)
                days_ = int(round(adm * u.mean_los_hours / 24.0))
                truth["mean_los"][u.unit_id] = days_ * 24.0 / adm
                truth["non_ed"][u.unit_id] = adm / 365.0
                w.writerow((f.facility_id, regs, u.unit_id, adm, days_, u.bed_count))
    return truth
