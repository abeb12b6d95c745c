"""Riemannian Gauss-Newton pose-graph optimizer on planar dual quaternions.

Edge error ``e = log_identity(z^-1 x_i^-1 x_j)``, per-edge cost
``f = 0.5 e^T Omega e``.  Reported costs are ``sum(e^T Omega e)`` (twice
``sum f``); gradients and Hessians are those of ``sum f``.  The linear system
is solved in per-node tangent-basis coordinates with one anchor node removed,
which gives a sparse SPD matrix of size ``3(n-1)``.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import dq
from .graph import InvalidGraphError, is_connected
from .linalg import SingularSystemError, factorize_spd

log = logging.getLogger(__name__)

_CONJ_DIAG = np.diag([1.0, -1.0, -1.0, -1.0])

TERMINATION_REASONS = ("gradient-converged", "iteration-limit", "linear-solve-failure")


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-6
    fixed_iterations: Optional[int] = None
    anchor_node: int = 0
    damping: float = 0.0
    solve_retries: int = 6

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.fixed_iterations is not None and self.fixed_iterations < 1:
            raise ValueError("fixed_iterations must be at least 1")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if self.anchor_node < 0:
            raise ValueError("anchor_node must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    grad_norm: float
    step_norm: float
    seconds: float


@dataclass
class SolverReport:
    """Per-iteration trace.  ``cost`` and ``grad_norm`` are taken before each step."""

    records: list = field(default_factory=list)
    termination: str = "iteration-limit"
    final_cost: float = float("nan")
    final_grad_norm: float = float("nan")

    def to_csv(self):
        rows = ["iter,cost,grad_norm,step_norm,millis"]
        for r in self.records:
            rows.append(
                f"{r.iteration},{r.cost:.17g},{r.grad_norm:.17g},{r.step_norm:.17g},"
                f"{1e3 * r.seconds:.3f}"
            )
        return "\n".join(rows) + "\n"


class LinearSolveError(RuntimeError):
    """The reduced normal equations could not be factorized, even with damping."""

    def __init__(self, message, report=None, graph=None):
        super().__init__(message)
        self.report = report
        self.graph = graph


def edge_error(x_i, x_j, z):
    """Tangent-space residual of the edge, ``log_identity(z^-1 x_i^-1 x_j)``."""
    q = dq.multiply(dq.multiply(dq.conjugate(z), dq.conjugate(x_i)), x_j)
    return dq.log_identity(q)


def edge_cost(x_i, x_j, edge):
    e = edge_error(x_i, x_j, edge.z)
    return 0.5 * e @ edge.omega @ e


def edge_costs(g, nodes=None):
    """Per-edge ``e^T Omega e`` (no one-half factor)."""
    x = g.nodes if nodes is None else nodes
    e = edge_error(x[g.edge_i], x[g.edge_j], g.z)
    return np.einsum("mi,mij,mj->m", e, g.omega, e)


def total_cost(g, nodes=None):
    return float(np.sum(edge_costs(g, nodes)))


def edge_jacobians(x_i, x_j, z):
    """Ambient Jacobians ``(A, B)`` of :func:`edge_error` w.r.t. ``x_i`` and ``x_j``."""
    zc = dq.conjugate(z)
    left = dq.multiply(zc, dq.conjugate(x_i))
    q = dq.multiply(left, x_j)
    J = dq.log_identity_jacobian(q)
    A = J @ dq.left_matrix(zc) @ dq.right_matrix(x_j) @ _CONJ_DIAG
    B = J @ dq.left_matrix(left)
    return A, B


def _linearize(g, nodes):
    xi, xj = nodes[g.edge_i], nodes[g.edge_j]
    e = edge_error(xi, xj, g.z)
    A, B = edge_jacobians(xi, xj, g.z)
    return e, A @ dq.tangent_basis(xi), B @ dq.tangent_basis(xj)


def _reduced_gradient(g, e, Ar, Br):
    """Gradient of ``sum f`` in tangent-basis coordinates, shape ``(n, 3)``."""
    We = np.einsum("mij,mj->mi", g.omega, e)
    grad = np.zeros((g.num_nodes, 3))
    np.add.at(grad, g.edge_i, np.einsum("mji,mj->mi", Ar, We))
    np.add.at(grad, g.edge_j, np.einsum("mji,mj->mi", Br, We))
    return grad


def _block_coo(g, blocks, size):
    """Scatter per-edge 4 blocks ``(ii, ij, ji, jj)`` of shape ``(m, s, s)`` into COO arrays."""
    s = size
    r, c = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    rows, cols, vals = [], [], []
    for (a, b), blk in zip(
        [(g.edge_i, g.edge_i), (g.edge_i, g.edge_j), (g.edge_j, g.edge_i), (g.edge_j, g.edge_j)],
        blocks,
    ):
        rows.append((s * a[:, None, None] + r).ravel())
        cols.append((s * b[:, None, None] + c).ravel())
        vals.append(blk.ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _reduced_blocks(g, Ar, Br):
    WA = g.omega @ Ar
    WB = g.omega @ Br
    At = np.swapaxes(Ar, 1, 2)
    Bt = np.swapaxes(Br, 1, 2)
    return At @ WA, At @ WB, Bt @ WA, Bt @ WB


def riemannian_gradient(g):
    """Projected gradient of ``sum f``, one ambient 4-vector per node, shape ``(n, 4)``."""
    e, Ar, Br = _linearize(g, g.nodes)
    grad = _reduced_gradient(g, e, Ar, Br)
    return np.einsum("nij,nj->ni", dq.tangent_basis(g.nodes), grad)


def hessian_blocks(g):
    """Gauss-Newton approximation of the Riemannian Hessian, ``4n x 4n`` sparse.

    Blocks are ``P_i A^T Omega A P_i``, ``P_i A^T Omega B P_j`` and so on; with
    ``P = basis @ basis.T`` they are assembled from the reduced 3x3 blocks.
    """
    _, Ar, Br = _linearize(g, g.nodes)
    bases = dq.tangent_basis(g.nodes)
    Bi, Bj = bases[g.edge_i], bases[g.edge_j]
    red = _reduced_blocks(g, Ar, Br)
    amb = [
        Bi @ red[0] @ np.swapaxes(Bi, 1, 2),
        Bi @ red[1] @ np.swapaxes(Bj, 1, 2),
        Bj @ red[2] @ np.swapaxes(Bi, 1, 2),
        Bj @ red[3] @ np.swapaxes(Bj, 1, 2),
    ]
    n = 4 * g.num_nodes
    rows, cols, vals = _block_coo(g, amb, 4)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def adapt_error_small_angle(delta):
    """Tangent error from a ``[dtheta, dtx, dty]`` pose difference.

    Same value as ``log_identity(from_pose(dtheta, dt))`` written as a linear
    map of the pose difference; as ``dtheta -> 0`` it tends to ``delta / 2``.
    """
    delta = np.asarray(delta, dtype=float)
    dth = delta[..., 0]
    alpha = 0.5 * dth
    beta = np.cos(alpha) / dq.sinc(alpha)
    return 0.5 * np.stack(
        [
            dth,
            beta * delta[..., 1] + alpha * delta[..., 2],
            -alpha * delta[..., 1] + beta * delta[..., 2],
        ],
        axis=-1,
    )


def _solve(H, rhs, damping, retries):
    scale = max(1.0, float(np.abs(H.diagonal()).max(initial=0.0)))
    lam = damping
    eye = sp.identity(H.shape[0], format="csc")
    for attempt in range(retries + 1):
        try:
            sol = factorize_spd(H + lam * eye if lam > 0 else H).solve(rhs)
            if np.all(np.isfinite(sol)):
                return sol, lam
        except SingularSystemError as err:
            log.debug("factorization failed (damping %g): %s", lam, err)
        lam = 10.0 * lam if lam > 0 else 1e-9 * scale
    raise LinearSolveError(f"reduced system singular after {retries} damping escalations")


def _step(g, cfg, stop_below=None):
    """Returns ``(graph, step_norm, grad_norm, cost, stepped)``."""
    n = g.num_nodes
    anchor = cfg.anchor_node
    if not 0 <= anchor < n:
        raise ValueError(f"anchor node {anchor} out of range for {n} nodes")
    nodes = g.nodes
    e, Ar, Br = _linearize(g, nodes)
    cost = float(np.einsum("mi,mij,mj->", e, g.omega, e))
    grad = _reduced_gradient(g, e, Ar, Br)
    grad_norm = float(np.linalg.norm(grad))
    if stop_below is not None and grad_norm < stop_below:
        return g, 0.0, grad_norm, cost, False

    # node k -> reduced index; the anchor maps outside the system
    order = np.arange(n)
    red = np.where(order < anchor, order, order - 1)
    red[anchor] = -1
    rows, cols, vals = _block_coo(g, _reduced_blocks(g, Ar, Br), 3)
    node_r, node_c = red[rows // 3], red[cols // 3]
    keep = (node_r >= 0) & (node_c >= 0)
    dim = 3 * (n - 1)
    H = sp.csc_matrix(
        (vals[keep], (3 * node_r[keep] + rows[keep] % 3, 3 * node_c[keep] + cols[keep] % 3)),
        shape=(dim, dim),
    )
    rhs = -np.delete(grad, anchor, axis=0).ravel()

    delta = np.zeros((n, 3))
    if dim:
        sol, lam = _solve(H, rhs, cfg.damping, cfg.solve_retries)
        delta[order != anchor] = sol.reshape(-1, 3)

    step = np.einsum("nij,nj->ni", dq.tangent_basis(nodes), delta)
    new_nodes = dq.exp_at(nodes, step)
    new_nodes[anchor] = nodes[anchor]
    return g.with_nodes(new_nodes), float(np.linalg.norm(delta)), grad_norm, cost, True


def gn_step(g, cfg=None):
    """One Gauss-Newton step; returns ``(graph, step_norm, grad_norm)``.

    ``grad_norm`` is the Riemannian gradient norm at the input graph.
    """
    new_g, step_norm, grad_norm, _, _ = _step(g, cfg or SolverConfig())
    return new_g, step_norm, grad_norm


def optimize(g, cfg=None):
    """Iterate Gauss-Newton steps; returns ``(graph, SolverReport)``.

    Stops when the Riemannian gradient norm drops below
    ``cfg.gradient_tolerance``, or after exactly ``cfg.fixed_iterations`` steps
    when that is set (the tolerance is then ignored), or at ``max_iterations``.
    """
    cfg = cfg or SolverConfig()
    if g.num_nodes > 1 and not is_connected(g):
        raise InvalidGraphError("cannot optimize a disconnected graph")
    report = SolverReport()
    fixed = cfg.fixed_iterations is not None
    limit = cfg.fixed_iterations if fixed else cfg.max_iterations
    report.termination = "iteration-limit"
    for k in range(limit):
        t0 = time.perf_counter()
        try:
            g, step_norm, grad_norm, cost, stepped = _step(
                g, cfg, None if fixed else cfg.gradient_tolerance
            )
        except LinearSolveError as err:
            report.termination = "linear-solve-failure"
            report.final_cost = total_cost(g)
            raise LinearSolveError(str(err), report=report, graph=g) from err
        if not stepped:
            report.termination = "gradient-converged"
            break
        rec = IterationRecord(k, cost, grad_norm, step_norm, time.perf_counter() - t0)
        report.records.append(rec)
        log.debug("iter %d cost %.6g |grad| %.3g |step| %.3g", k, cost, grad_norm, step_norm)

    report.final_cost = total_cost(g)
    report.final_grad_norm = float(np.linalg.norm(riemannian_gradient(g)))
    if (
        not fixed
        and report.termination == "iteration-limit"
        and report.final_grad_norm < cfg.gradient_tolerance
    ):
        report.termination = "gradient-converged"
    return g, report
