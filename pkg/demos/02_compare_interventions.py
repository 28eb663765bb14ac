"""
Three ways to send referrals
============================

Compares the baseline (nearest unit first, one request at a time) with
concurrent referrals to the ``m`` nearest units and with ordering
candidates by their historical acceptance rate. Vulnerable patients
(children, adolescents, older adults) are the group of interest since
they have the fewest licensed beds.
"""

# %%
from psychsim.experiments import ExperimentPlan, Variant, compare_outcomes
from psychsim.fixture import load_fixture
from psychsim.policy import PlacementPolicy

policies = [PlacementPolicy(), PlacementPolicy("concurrent-proximity", 2),
            PlacementPolicy("concurrent-proximity", 4), PlacementPolicy("by-acceptance")]
plan = ExperimentPlan(load_fixture(), [Variant(p.label, policy=p) for p in policies], replications=5)
outcomes = plan.run(progress=lambda label: print("ran", label))

# %%
# Kruskal-Wallis across all four, then each intervention against the
# baseline on replication means.
comparison = compare_outcomes(outcomes)
for metric, block in comparison.items():
    print(f"\n{metric}")
    kw = block["kruskal"]
    print(f"  Kruskal-Wallis H = {kw.statistic:.2f}, p = {kw.p_value:.4f}")
    for label, mean in block["means"].items():
        tail = ""
        if label in block["vs_control"]:
            mw, welch = block["vs_control"][label]
            tail = f"  Mann-Whitney p = {mw.p_value:.4f}"
            if welch is not None:
                lo, hi = welch.ci
                tail += f", difference {welch.difference:+.3f} h [{lo:+.3f}, {hi:+.3f}]"
        print(f"  {label:<24} {mean:6.3f} h{tail}")
