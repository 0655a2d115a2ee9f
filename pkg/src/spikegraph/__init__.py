"""Interaction graph estimation for stochastic spiking networks with variable-length memory."""
from .bounds import (
    BoundReport,
    ModelConstants,
    compute_constants,
    coupling_bound,
    hoeffding_bound,
    overestimation_bound,
    solve_alpha0,
    theorem2_bounds,
    underestimation_bound,
)
from .contexts import ContextKey, ContextTable, admissible_set, count_contexts, empirical_prob
from .estimator import (
    EstimatedGraph,
    SensitivityProfile,
    epsilon_schedule,
    estimate_graph,
    select_neighborhood,
    sensitivity,
)
from .model import (
    NetworkSpec,
    NetworkValidationError,
    PulseKernel,
    RateFunction,
    SpikeRaster,
    ValidatedNetwork,
    membrane_potential,
    rate_derivative_inf,
    true_neighborhood,
    validate_network,
)
from .simulate import CoupledResult, SimulationConfig, simulate, simulate_coupled

__version__ = "0.1.0"
