"""Complementarity problems on the monotone extended second order cone.

The cone orders the first block and bounds it below by the norm of the
second; ``cones`` provides memberships and pair classification, ``lcp`` the
instance data model and its square reformulation, ``newton`` the globalized
semismooth solver, ``portfolio`` the closed-form allocation application, and
``cli`` the command line front end.
"""
from .cones import (
    ComplementarityCertificate,
    ConeDims,
    ConePoint,
    classify_pair,
    dual_contains,
    mesoc_contains,
    monotone_nonneg_contains,
    orthant_contains,
    shift_to_monotone,
)
from .lcp import (
    AlphaBetaCertificate,
    BlockMatrix,
    JacobianBlocks,
    LcpInstance,
    ReformPoint,
    affine_image,
    alpha_beta_certificate,
    dump_instance,
    jacobian_blocks,
    load_instance,
    planted_instance,
    reform_from_xu,
    reform_g,
    reform_h,
    solve_case_u_zero,
    solve_case_w_zero,
    x_from_reform,
)
from .newton import (
    FbResidual,
    GenJacobianElement,
    IterationTrace,
    NewtonConfig,
    NewtonResult,
    SolveResult,
    StationarityReport,
    default_starts,
    fb_residual,
    fb_scalar,
    generalized_jacobian,
    newton_solve,
    solve_lcp,
    solve_orthant_lcp,
    stationarity_check,
)
from .portfolio import (
    AllocationReport,
    JstarSelection,
    MadModel,
    PortfolioSolution,
    ReturnsPanel,
    beta_roots_general,
    disturbances,
    kkt_pair,
    kkt_residuals,
    load_returns_csv,
    select_jstar,
    solve_allocation,
    solve_degenerate_case,
    theta_schedule,
    weights_closed_form,
)
from .reference import claimed_point, claimed_point_report, known_solution, reference_instance

__version__ = "0.1.0"
