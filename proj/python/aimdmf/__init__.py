"""Mean-field AIMD models: stationary laws, equilibria, simulators and experiments."""

from ._aimdmf import (
    BracketError,
    ConfigError,
    ConvergenceError,
    Error,
    ModelError,
    NetworkModel,
    NumericError,
    ParameterError,
    StationaryDistribution,
    StationaryLaw,
    UnsupportedModelError,
    fixed_point_map,
    load_model,
    next_jump_time,
    parse_model,
    psi,
    run_experiment,
    sample_discrete_aimd,
    simulate_connection,
    solve_fixed_point,
    solve_linear_network,
    solve_mckean,
    solve_single_node,
    solve_torus,
    stationary_density,
)

__version__ = "0.1.0"
