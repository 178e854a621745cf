"""Learn vehicle routing preferences from historical routings and predict new ones."""

from ._core import (
    BudgetExhaustedError,
    DataError,
    DistanceMatrix,
    HistoryDataset,
    InfeasibleError,
    TransitionMatrix,
    arc_difference,
    daisy_chain,
    estimate_first_order,
    generate_synthetic,
    incremental_evaluate,
    load_distances,
    load_history,
    route_difference,
    run_cli,
    solve_costs,
)

__all__ = [
    "BudgetExhaustedError",
    "DataError",
    "DistanceMatrix",
    "HistoryDataset",
    "InfeasibleError",
    "TransitionMatrix",
    "arc_difference",
    "daisy_chain",
    "estimate_first_order",
    "generate_synthetic",
    "incremental_evaluate",
    "load_distances",
    "load_history",
    "route_difference",
    "run_cli",
    "solve_costs",
]
