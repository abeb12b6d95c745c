"""Planar pose-graph optimization with dual quaternions and Riemannian Gauss-Newton."""

from . import dq
from .chordal import initialize, odometry_initialize
from .dq import (
    IDENTITY,
    canonicalize,
    compose,
    exp_at,
    exp_identity,
    from_pose,
    inverse,
    log_at,
    log_identity,
    to_pose,
)
from .graph import Edge, InvalidGraphError, PoseGraph, validate
from .graphio import GraphFormatError, load_graph, parse_graph, save_graph, write_graph
from .metrics import RpeResult, g2o_cost, rpe
from .optimizer import (
    LinearSolveError,
    SolverConfig,
    SolverReport,
    gn_step,
    optimize,
    total_cost,
)
from .synth import NoiseSpec, make_ring, perturb

__version__ = "0.1.0"
