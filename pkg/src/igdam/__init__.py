"""Two-threshold release control of a storage system fed by an inverse
Gaussian input process.

Closed-form machinery (passage laws, resolvents, crossing laws, cycle
economics, stationary content distribution), an independent Monte Carlo
simulator that cross-validates all of it, a deterministic policy search,
and a batch CLI.
"""

from .errors import DivergenceError, DomainError, InsufficientDataError
from .ig_core import (
    IGParams,
    erf,
    erfc,
    erfc_scaled,
    ig_cdf,
    ig_density,
    ig_sf,
    laplace_exponent,
    levy_measure_density,
    normal_pdf,
    rng_stream,
    sample_increment,
)
from .quadrature import DEFAULT_QUAD, QuadConfig
from .passage_laws import (
    Policy,
    cdf_w_lambda,
    eta,
    lt_w_lambda,
    lt_w_tau_star,
    mean_var_w_tau_star,
    mean_w_lambda,
    pdf_w_tau_star,
    prob_w_tau_star_finite,
)
from .resolvents import KilledResolvent, ReleaseKernel, ResolventDensity
from .overshoot import OvershootLaw
from .cost_model import (
    CostBreakdown,
    CostModel,
    CostParams,
    PenaltyFn,
    PolicyEvaluation,
    average_cost,
    cycle_transform,
    discounted_cycle_cost,
    discounted_total_cost,
    evaluate_policy,
    mean_cycle_length,
    stationary_cdf,
)
from .simulator import (
    CycleRecord,
    SimConfig,
    SimResult,
    estimate_discounted,
    estimate_stationary,
    occupancy_grid,
    sample_fill_passages,
    sample_release_passages,
    simulate_cycles,
)
from .optimizer import OptimizeResult, SearchSpec, optimize

__version__ = "0.1.0"
