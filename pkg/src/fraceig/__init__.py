"""Principal eigenvalue of the weighted spectral fractional Laplacian on boxes."""

__version__ = "0.1.0"

from .analysis import (
    Certificate,
    ConditionReport,
    DirichletBallConstants,
    Shape,
    SSweep,
    check_conditions,
    classify_curve,
    critical_d,
    dirichlet_ball_constants,
    monotone_regime_bounds,
    sweep_s,
)
from .basis import Basis, Boundary, BoxDomain, ModeIndex, enumerate_modes, eval_mode, eval_mode_grid
from .design import BangBangParams, RearrangementTrace, optimize_weight, rearrange_step
from .dynamics import SimConfig, Trajectory, Verdict, simulate, steady_state_residual
from .environment import (
    Ball,
    Box,
    GalerkinSystem,
    Weight,
    WeightReport,
    analyze_weight,
    assemble_weight_matrix,
    eval_weight,
)
from .errors import *  # noqa: F401,F403
from .pencil import (
    ReducedPencil,
    SpectrumSlice,
    build_reduced_pencil,
    eigendecompose_symmetric,
    lambda1_limit_s0,
    reconstruct_function,
    solve,
    solve_spectrum,
)
from .quadrature import QuadratureRule, QuadSpec, quadrature_grid
