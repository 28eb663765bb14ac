"""Small scenario builders shared by the test modules."""

import numpy as np

from psychsim.policy import PlacementPolicy
from psychsim.scenario import (
    DAYS,
    AgeGroup,
    DistributionSpec,
    EdUnit,
    Facility,
    IpUnit,
    ScenarioConfig,
    TravelMatrix,
)


def single_unit_scenario(beds=10, daily_rate=7.0, mean_los=24.0, pool_size=200_000, horizon_days=2000,
                         warmup_days=100, replications=5, seed=11, review=1e-9, pool_seed=3):
    """One facility whose ED feeds its own unit: an M/M/c queue when the
    LoS pool is exponential and the review time is negligible."""
    pool = np.random.default_rng(pool_seed).exponential(mean_los, pool_size)
    unit = IpUnit("U0", "F0", frozenset({AgeGroup.ADULT}), beds, 1.0, review, mean_los, 0.0)
    fac = Facility("F0", "Only", True, EdUnit("E0", {d: daily_rate for d in DAYS}), (unit,), True)
    return ScenarioConfig(
        facilities=(fac,),
        travel=TravelMatrix({("E0", "U0"): 0.0}, {("E0", "U0"): 0.0}),
        dists=DistributionSpec(tuple(pool.tolist()), mean_los, (0.0, 0.0, 0.0), {AgeGroup.ADULT: 1.0}),
        horizon_days=horizon_days,
        warmup_days=warmup_days,
        replications=replications,
        policy=PlacementPolicy(),
        seed=seed,
    )


def two_site_scenario(policy=None, seed=5, horizon_days=60, warmup_days=5, replications=2,
                      beds=(3, 4, 2), gammas=(0.9, 0.5, 0.7), rates=3.0, non_ed=0.2):
    """Three facilities, two with EDs, three small units: busy enough that
    patients queue, transfer and wait on signals."""
    groups = [frozenset({AgeGroup.ADULT}), frozenset({AgeGroup.ADULT, AgeGroup.GERIATRIC}),
              frozenset({AgeGroup.CHILD, AgeGroup.ADOLESCENT})]
    units = [IpUnit(f"U{i}", f"F{i}", groups[i], beds[i], gammas[i], 0.5 + 0.25 * i, 72.0 + 24 * i, non_ed)
             for i in range(3)]
    facs = []
    for i in range(3):
        ed = EdUnit(f"E{i}", {d: rates for d in DAYS}) if i < 2 else None
        facs.append(Facility(f"F{i}", f"Site {i}", ed is not None, ed, (units[i],), i == 0))
    hours, miles = {}, {}
    for i in range(2):
        for j in range(3):
            d = 0.0 if i == j else 10.0 * (1 + abs(i - j)) + j
            hours[(f"E{i}", f"U{j}")] = d / 50.0
            miles[(f"E{i}", f"U{j}")] = d
    pool = np.random.default_rng(1).lognormal(np.log(60.0), 0.6, 500)
    return ScenarioConfig(
        facilities=tuple(facs),
        travel=TravelMatrix(hours, miles),
        dists=DistributionSpec(tuple(pool.tolist()), float(pool.mean()), (0.0, 0.1, 1.0),
                               {AgeGroup.CHILD: 0.1, AgeGroup.ADOLESCENT: 0.2,
                                AgeGroup.ADULT: 0.5, AgeGroup.GERIATRIC: 0.2}),
        horizon_days=horizon_days,
        warmup_days=warmup_days,
        replications=replications,
        policy=policy or PlacementPolicy(),
        seed=seed,
    )


def erlang_busy_fraction(lam, mean_service, c, n_max=2000):
    """Expected busy servers / c for M/M/c from the truncated birth-death
    balance equations (log space, no closed form used)."""
    mu = 1.0 / mean_service
    logp = [0.0]
    for n in range(1, n_max + 1):
        logp.append(logp[-1] + np.log(lam) - np.log(min(n, c) * mu))
    logp = np.array(logp)
    p = np.exp(logp - logp.max())
    p /= p.sum()
    busy = np.minimum(np.arange(n_max + 1), c)
    return float((p * busy).sum() / c)
