"""
A year of placements under the baseline policy
==============================================

Runs the packaged synthetic region for a few replications and looks at
how long psychiatric patients wait between ED disposition and an
inpatient bed, split by who stays in-house and who is sent elsewhere.
"""

# %%
# The fixture is a 200 x 200 mile region: 100 EDs, 40 inpatient units.
import numpy as np

from psychsim.experiments import run_replications
from psychsim.fixture import load_fixture
from psychsim.metrics import summarize

cfg = load_fixture(replications=3)
print(f"{len(cfg.facilities)} facilities, {len(cfg.units)} units, "
      f"{sum(u.bed_count for u in cfg.units)} beds, policy {cfg.policy.label}")

# %%
# Each replication is an independent year after a warm-up period.
results = run_replications(cfg)
report = summarize(results, cfg)
p = report.pooled

for group in ("adult", "vulnerable"):
    print(f"\n{group}:")
    print(f"  transferred       {p[f'{group}_pct_transferred']:.1f}%")
    for place in ("internal", "transferred"):
        coord = p[f"{group}_{place}_coordination_mean"]
        delay = p[f"{group}_{place}_delay_mean"]
        print(f"  {place:<11} coordination {coord:6.2f} h   treatment delay {delay:6.2f} h")
    print(f"  mean distance     {p[f'{group}_transferred_distance_mean']:.1f} mi")

# %%
# Requests per placement: the baseline asks one unit at a time, so long
# request chains show up as long coordination times.
placed = [r for res in results for r in res.records if not r.censored]
sent = np.array([r.total_requests for r in placed])
print("\nrequests per placement:", {k: int((sent == k).sum()) for k in range(1, 6)},
      f"... max {sent.max()}")
print(f"mean occupancy {p['occupancy_all']:.3f}")
