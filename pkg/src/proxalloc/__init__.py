"""Distributed nonsmooth resource allocation over directed graphs via
smooth multi-proximal primal-dual flows, with verification instrumentation
(KKT residuals, conservation invariants, Lyapunov monitoring, and
centralized oracles), an HTTP service, and a CLI."""

__version__ = "0.1.0"

from .dynamics import (FlowState, RhsOutput, estimator_closed_form,
                       initial_state, rhs_estimator, rhs_known_h)
from .graph import Digraph, SpectralData, is_strongly_connected, laplacian, spectral_data
from .integrator import (IntegratorConfig, Trajectory, integrate,
                         lyapunov_value, summarize, trajectory_to_csv)
from .oracle import OracleResult, solve_grid, solve_subgradient
from .problem import (AgentSpec, FlowParams, NetworkProblem, QuadraticCost,
                      check_params, kkt_residual, objective, suggest_params,
                      validate_assumptions)
from .prox import (BallIndicator, BoxIndicator, CustomTerm, L1Anchor,
                   NonsmoothTerm, PairwiseExact, PairwisePhi, ZeroTerm, phi,
                   project_ball, project_box, soft_threshold, validate_prox)

__all__ = [
    "__version__",
    "Digraph", "SpectralData", "laplacian", "is_strongly_connected", "spectral_data",
    "NonsmoothTerm", "L1Anchor", "PairwisePhi", "PairwiseExact", "BallIndicator",
    "BoxIndicator", "ZeroTerm", "CustomTerm", "phi", "soft_threshold",
    "project_ball", "project_box", "validate_prox",
    "QuadraticCost", "AgentSpec", "NetworkProblem", "FlowParams",
    "validate_assumptions", "check_params", "suggest_params", "kkt_residual",
    "objective",
    "FlowState", "RhsOutput", "initial_state", "rhs_known_h", "rhs_estimator",
    "estimator_closed_form",
    "IntegratorConfig", "Trajectory", "integrate", "lyapunov_value", "summarize",
    "trajectory_to_csv",
    "OracleResult", "solve_grid", "solve_subgradient",
]
