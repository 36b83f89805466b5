"""Chance-constrained bid bounds for energy storage."""

from ._gridbound import (
    Bounds,
    Error,
    Forecast,
    InputError,
    Network,
    RangeError,
    SolveError,
    Storage,
    TopologyError,
    ValueFunction,
    compute_bounds,
    deterministic_bounds,
    gauss_hermite,
    inverse_cdf,
    load_forecast,
    load_network,
    simulate,
    solve_value_function,
    verify_coverage,
    verify_monotonicity,
    withholding_sigma,
)

__all__ = [name for name in dir() if not name.startswith("_")]
