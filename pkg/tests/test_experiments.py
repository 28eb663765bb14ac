import pytest
from helpers import two_site_scenario

from psychsim.experiments import ExperimentPlan, Variant, compare_outcomes, replication_means
from psychsim.policy import PlacementPolicy
from psychsim.scenario import ValidationError


def test_seeds_and_labels():
    cfg = two_site_scenario()
    plan = ExperimentPlan(cfg, [Variant("a"), Variant("b"), Variant("c")])
    assert [plan.seed_for(i) for i in range(3)] == [cfg.seed, cfg.seed + 1, cfg.seed + 2]
    crn = ExperimentPlan(cfg, [Variant("a"), Variant("b")], crn=True)
    assert crn.seed_for(1) == cfg.seed
    with pytest.raises(ValueError):
        ExperimentPlan(cfg, [Variant("a"), Variant("a")])
    with pytest.raises(ValidationError):
        ExperimentPlan(cfg, [Variant("bad", rate_multiplier=-1.0)])


def test_variant_applies_changes():
    cfg = two_site_scenario()
    v = Variant("x", policy=PlacementPolicy("by-acceptance"), rate_multiplier=2.0, los_multiplier=0.5)
    out = v.apply(cfg)
    assert (out.policy.kind, out.rate_multiplier, out.los_multiplier) == ("by-acceptance", 2.0, 0.5)
    assert Variant("y").apply(cfg) is cfg


def test_crn_variants_match_and_comparison_shape():
    cfg = two_site_scenario(replications=3)
    plan = ExperimentPlan(cfg, [Variant("a"), Variant("b"), Variant("c", rate_multiplier=1.5)], crn=True)
    out = plan.run()
    key = "all_all_coordination_mean"
    assert replication_means(out[0], key) == replication_means(out[1], key)
    cmp_ = compare_outcomes(out, group="all", placement="all")
    block = cmp_["all_all_coordination_mean"]
    assert set(block["means"]) == {"a", "b", "c"}
    assert set(block["vs_control"]) == {"b", "c"}
    assert block["vs_control"]["b"][0].p_value == 1.0
    assert block["kruskal"] is not None
