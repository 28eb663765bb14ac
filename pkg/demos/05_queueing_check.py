"""
Does the engine agree with queueing theory?
===========================================

One unit, Poisson arrivals, exponential stays and no referrals is an
M/M/c queue with unlimited waiting room. Its long-run bed occupancy is known in closed
form, so the simulated value should land right on it.
"""

# %%
import math

import numpy as np

from psychsim.experiments import run_replications
from psychsim.policy import PlacementPolicy
from psychsim.scenario import (DAYS, AgeGroup, DistributionSpec, EdUnit, Facility, IpUnit,
                               ScenarioConfig, TravelMatrix)


def one_unit(beds, daily_rate, mean_los=24.0, horizon_days=1000, replications=3):
    """An ED feeding its own unit, exponential stays, near-instant review."""
    pool = np.random.default_rng(3).exponential(mean_los, 200_000)
    unit = IpUnit("U0", "F0", frozenset({AgeGroup.ADULT}), beds, 1.0, 1e-9, mean_los, 0.0)
    fac = Facility("F0", "Only", True, EdUnit("E0", {d: daily_rate for d in DAYS}), (unit,), True)
    return ScenarioConfig(
        facilities=(fac,),
        travel=TravelMatrix({("E0", "U0"): 0.0}, {("E0", "U0"): 0.0}),
        dists=DistributionSpec(tuple(pool.tolist()), mean_los, (0.0, 0.0, 0.0), {AgeGroup.ADULT: 1.0}),
        horizon_days=horizon_days, warmup_days=100, replications=replications,
        policy=PlacementPolicy(), seed=11,
    )


def erlang_c_occupancy(lam, mu, c):
    """Busy fraction of an M/M/c queue: offered load over servers."""
    a = lam / mu
    assert a < c, "unstable"
    return a / c


def erlang_c_wait(lam, mu, c):
    a = lam / mu
    top = a ** c / math.factorial(c) * c / (c - a)
    p_wait = top / (sum(a ** k / math.factorial(k) for k in range(c)) + top)
    return p_wait / (c * mu - lam)


# %%
# 10 beds, 7 arrivals a day, one-day mean stay: 70% busy in the long run.
# Waits are noisier than occupancy over three replications.
for beds, rate in ((10, 7.0), (5, 4.0)):
    cfg = one_unit(beds, rate)
    res = run_replications(cfg)
    occ = np.mean([r.occupancy["U0"].mean() for r in res])
    waits = [rec.coordination_hours for r in res for rec in r.records
             if not rec.censored and rec.disposition_time >= r.warmup_hours]
    print(f"c={beds} lambda={rate}/day: occupancy {occ:.3f} (theory {erlang_c_occupancy(rate, 1, beds):.3f}), "
          f"mean wait {np.mean(waits):.2f} h (theory {24 * erlang_c_wait(rate, 1, beds):.2f} h)")
