"""Evaluation metrics: the g2o reference cost and relative pose errors."""

from dataclasses import dataclass

import numpy as np

from . import dq


@dataclass(frozen=True)
class RpeResult:
    e_t: float  # RMS translational error, length units
    e_r: float  # RMS rotational error, degrees


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.arctan2(np.sin(a), np.cos(a))
    return np.where(a <= -np.pi, a + 2.0 * np.pi, a)


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def g2o_errors(g, nodes=None):
    """Per-edge ``[dtheta, dx, dy]`` in the convention of g2o's SE2 edge.

    ``dtheta = Log(R_ij^T R_i^T R_j)`` and the translation part is
    ``R_ij^T (R_i^T (t_j - t_i) - t_ij)``.
    """
    x = g.nodes if nodes is None else nodes
    th, t = dq.to_pose(x)
    thz, tz = dq.to_pose(g.z)
    i, j = g.edge_i, g.edge_j
    dth = wrap_angle(th[j] - th[i] - thz)
    Ri, Rz = _rot(th[i]), _rot(thz)
    local = np.einsum("mki,mk->mi", Ri, t[j] - t[i])
    dt = np.einsum("mki,mk->mi", Rz, local - tz)
    return np.concatenate([dth[:, None], dt], axis=1)


def g2o_cost(g, nodes=None):
    """Sum of squared Mahalanobis norms of :func:`g2o_errors` (g2o's chi2)."""
    e = g2o_errors(g, nodes)
    return float(np.einsum("mi,mij,mj->", e, g.omega, e))


def rpe(estimate, truth, sequential_only=False):
    """RMS relative pose error over the estimate's edges.

    For each edge the relative motion of the estimate is compared with that of
    the ground truth; no alignment is needed because relative motions do not
    depend on the global frame.  ``sequential_only`` keeps edges with
    ``|i - j| == 1``.
    """
    if estimate.num_nodes != truth.num_nodes:
        raise ValueError(
            f"node count mismatch: estimate {estimate.num_nodes}, truth {truth.num_nodes}"
        )
    i, j = estimate.edge_i, estimate.edge_j
    if sequential_only:
        keep = np.abs(i - j) == 1
        i, j = i[keep], j[keep]
    if len(i) == 0:
        return RpeResult(0.0, 0.0)
    xe, xt = estimate.nodes, truth.nodes
    rel_e = dq.multiply(dq.conjugate(xe[i]), xe[j])
    rel_t = dq.multiply(dq.conjugate(xt[i]), xt[j])
    delta = dq.canonicalize(dq.normalize(dq.multiply(dq.conjugate(rel_e), rel_t)))
    theta, t = dq.to_pose(delta)
    e_t = np.sqrt(np.mean(np.sum(t * t, axis=1)))
    e_r = np.degrees(np.sqrt(np.mean(theta * theta)))
    return RpeResult(float(e_t), float(e_r))
