"""Discrete-event simulation of psychiatric patient placement from
emergency departments into inpatient units."""

from .policy import PlacementPolicy
from .scenario import AgeGroup, ScenarioConfig, load_scenario, validate_scenario

__version__ = "0.1.0"

__all__ = ["AgeGroup", "PlacementPolicy", "ScenarioConfig", "load_scenario", "validate_scenario"]
