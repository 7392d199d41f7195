"""Static and dynamic dispatch programs, a bounded simplex, and their outputs."""

from src.solver.drivers import SolveOutcome, solve_dynamic, solve_static, stationary_start
from src.solver.plan import (
    PER_STEP,
    DualCertificate,
    FlowPlan,
    SolveResult,
    SupplyConstraint,
    load_certificate,
    load_plan,
    primal_residuals,
    save_model,
)
from src.solver.programs import (
    LinearProgram,
    SolverConfig,
    build_dynamic_program,
    build_envelopes,
    build_static_program,
    solve,
)
from src.solver.pwl import Segment, pwl_discretize
from src.solver.simplex import LPResult, solve_lp

__all__ = [
    "SolveOutcome",
    "solve_dynamic",
    "solve_static",
    "stationary_start",
    "PER_STEP",
    "DualCertificate",
    "FlowPlan",
    "SolveResult",
    "SupplyConstraint",
    "load_certificate",
    "load_plan",
    "primal_residuals",
    "save_model",
    "LinearProgram",
    "SolverConfig",
    "build_dynamic_program",
    "build_envelopes",
    "build_static_program",
    "solve",
    "Segment",
    "pwl_discretize",
    "LPResult",
    "solve_lp",
]
