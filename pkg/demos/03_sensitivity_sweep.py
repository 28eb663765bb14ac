"""
How fragile is the system?
==========================

Scales ED arrival rates and inpatient length of stay up and down and
watches coordination time, treatment delay and travel distance for
vulnerable patients. Longer stays fill nearby beds, so patients travel
farther; the search itself takes about as long either way.
"""

# %%
from psychsim.experiments import ExperimentPlan, Variant
from psychsim.fixture import load_fixture

base = load_fixture()
grid = (0.5, 1.0, 1.5)
key = "vulnerable_transferred_{}_mean"

for axis, field in (("rate", "rate_multiplier"), ("los", "los_multiplier")):
    variants = [Variant(f"{axis}-{g:g}", **{field: g}) for g in grid]
    outcomes = ExperimentPlan(base, variants, replications=3).run()
    print(f"\n{axis} multiplier   coordination   delay   distance   occupancy")
    for g, o in zip(grid, outcomes):
        p = o.report.pooled
        print(f"  {g:>4}          {p[key.format('coordination')]:8.3f}  {p[key.format('delay')]:7.3f}"
              f"  {p[key.format('distance')]:8.1f}   {p['occupancy_all']:.3f}")
