"""Batch-updating stochastic approximation.

Iterates ``theta_{t+1} = theta_t + alpha_t phi_{t+1}`` where the search
direction ``phi`` updates a random subset of coordinates, using either a
noisy gradient (options O1-O4) or a central-difference estimate of it
(O1A-O4A).
"""

from .diagnostics import (
    MomentEstimate,
    check_d1_d2,
    check_rs_conclusions,
    convergence_metrics,
    estimate_moments,
    exact_moments_by_enumeration,
    make_rs_process,
    rs_guard,
    simulate_rs,
)
from .directions import (
    OPTIONS,
    DirectionSample,
    DirectionSpec,
    approx_gradient,
    predicted_bias,
    predicted_sigma_sq,
    sample_direction,
    sample_directions,
)
from .noise import NO_NOISE, NoiseModel, derive_seed, rng_stream
from .objectives import (
    NonConvergenceError,
    Objective,
    audit_assumptions,
    compute_jstar_oracle,
    make_example21,
    make_objective,
    make_quadratic_logsumexp,
    make_strongly_convex_quadratic,
)
from .optimizer import ALGORITHMS, ConditionRefused, RunConfig, RunTrace, run
from .schedules import ConditionReport, Schedule, alpha, increment_c, verify_conditions

__version__ = "0.1.0"
