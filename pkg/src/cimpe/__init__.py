"""Common-information Markov perfect equilibria of two-controller linear-Gaussian games."""

from __future__ import annotations

__version__ = "0.1.0"

from .belief import BeliefStage, IndependenceReport, check_strategy_independence, propagate_belief
from .closed_loop import AffineControlLaw, StageLaw
from .game_model import (
    Component, GameSpec, InfoMaps, InfoStructure, SpecError, ValidationReport,
    build_info_maps, load_spec, loads_spec, spec_from_dict, validate_spec,
)
from .induction import (
    BeliefAssumptionError, EquilibriumSolution, ExistenceFailure, ValueQuadratic,
    evaluate_value, lift_costs, solve_cimpe, terminal_value,
)
from .stage_game import (
    AffineRule, ConditionReport, ConditioningWarning, StageGameData, StageSolution,
    best_response_map, check_existence_conditions, solve_stage_game,
)
from .verifier import (
    CostEstimate, DegenerateParameter, closed_form_costs, deviation_test, lambda_family,
    realize_control_laws, simulate,
)

__all__ = [
    "AffineControlLaw", "AffineRule", "BeliefAssumptionError", "BeliefStage", "Component",
    "ConditionReport", "ConditioningWarning", "CostEstimate", "DegenerateParameter",
    "EquilibriumSolution", "ExistenceFailure", "GameSpec", "IndependenceReport", "InfoMaps",
    "InfoStructure", "SpecError", "StageGameData", "StageLaw", "StageSolution",
    "ValidationReport", "ValueQuadratic", "best_response_map", "build_info_maps",
    "check_existence_conditions", "check_strategy_independence", "closed_form_costs",
    "deviation_test", "evaluate_value", "lambda_family", "lift_costs", "load_spec",
    "loads_spec", "propagate_belief", "realize_control_laws", "simulate", "solve_cimpe",
    "solve_stage_game", "spec_from_dict", "terminal_value", "validate_spec",
]
