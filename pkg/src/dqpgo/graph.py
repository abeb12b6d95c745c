"""Pose-graph data model.

Information matrices are ordered over ``[dtheta, dtx, dty]`` throughout the
package; file readers and writers permute to and from the on-disk orders.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import dq


class InvalidGraphError(ValueError):
    pass


class Edge(NamedTuple):
    i: int
    j: int
    z: np.ndarray
    omega: np.ndarray


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PoseGraph:
    """Node poses plus directed relative-pose measurements ``z = x_i^-1 x_j``.

    Stored column-wise: ``nodes`` is ``(n, 4)``, ``edge_i``/``edge_j`` are
    ``(m,)``, ``z`` is ``(m, 4)`` and ``omega`` is ``(m, 3, 3)``.  ``ids``
    holds the original vertex ids so output can use them again.
    """

    nodes: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    z: np.ndarray
    omega: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        nodes = _frozen(self.nodes).reshape(-1, 4)
        m = len(np.atleast_1d(self.edge_i))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edge_i", _frozen(self.edge_i, np.int64).reshape(m))
        object.__setattr__(self, "edge_j", _frozen(self.edge_j, np.int64).reshape(m))
        object.__setattr__(self, "z", _frozen(self.z).reshape(m, 4))
        object.__setattr__(self, "omega", _frozen(self.omega).reshape(m, 3, 3))
        ids = np.arange(len(nodes)) if self.ids is None else self.ids
        object.__setattr__(self, "ids", _frozen(ids, np.int64))

    @classmethod
    def from_edges(cls, nodes, edges, ids=None):
        edges = list(edges)
        return cls(
            nodes=nodes,
            edge_i=[e.i for e in edges],
            edge_j=[e.j for e in edges],
            z=[e.z for e in edges] if edges else np.zeros((0, 4)),
            omega=[e.omega for e in edges] if edges else np.zeros((0, 3, 3)),
            ids=ids,
        )

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_edges(self):
        return len(self.edge_i)

    @property
    def edges(self):
        return [
            Edge(int(i), int(j), z, om)
            for i, j, z, om in zip(self.edge_i, self.edge_j, self.z, self.omega)
        ]

    def with_nodes(self, nodes):
        return PoseGraph(nodes, self.edge_i, self.edge_j, self.z, self.omega, self.ids)

    def with_measurements(self, z=None, omega=None):
        return PoseGraph(
            self.nodes,
            self.edge_i,
            self.edge_j,
            self.z if z is None else z,
            self.omega if omega is None else omega,
            self.ids,
        )

    def with_identity_information(self):
        return self.with_measurements(omega=np.broadcast_to(np.eye(3), self.omega.shape))


def is_connected(g):
    n = g.num_nodes
    if n == 0:
        return False
    ok = (g.edge_i >= 0) & (g.edge_i < n) & (g.edge_j >= 0) & (g.edge_j < n)
    adj = sp.coo_matrix(
        (np.ones(ok.sum()), (g.edge_i[ok], g.edge_j[ok])), shape=(n, n)
    )
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def validate(g):
    """Return a list of human-readable diagnostics; empty when the graph is sound."""
    out = []
    n = g.num_nodes
    if n == 0:
        out.append("graph has no nodes")
    norms = np.hypot(g.nodes[:, 0], g.nodes[:, 1])
    for k in np.flatnonzero(np.abs(norms - 1.0) > 1e-9):
        out.append(f"node {k}: real part has norm {norms[k]:.17g}, expected 1")
    for k in np.flatnonzero(~np.all(np.isfinite(g.nodes), axis=1)):
        out.append(f"node {k}: non-finite pose")
    for k, (i, j, om) in enumerate(zip(g.edge_i, g.edge_j, g.omega)):
        if not (0 <= i < n and 0 <= j < n):
            out.append(f"edge {k}: node index out of range ({i}, {j}) for {n} nodes")
        if i == j:
            out.append(f"edge {k}: self-loop on node {i}")
        if not np.allclose(om, om.T, rtol=0.0, atol=1e-9):
            out.append(f"edge {k} ({i}->{j}): information matrix is not symmetric")
        elif np.linalg.eigvalsh(0.5 * (om + om.T)).min() <= 0.0:
            out.append(f"edge {k} ({i}->{j}): information matrix is not positive definite")
    if len(g.z):
        znorm = np.hypot(g.z[:, 0], g.z[:, 1])
        for k in np.flatnonzero(np.abs(znorm - 1.0) > 1e-9):
            out.append(f"edge {k}: measurement real part has norm {znorm[k]:.17g}")
    if n > 1 and not is_connected(g):
        out.append("graph is not connected")
    return out


def check(g):
    problems = validate(g)
    if problems:
        raise InvalidGraphError("; ".join(problems[:10]))
    return g


def relative_poses(g, nodes=None):
    """``x_i^-1 x_j`` for every edge."""
    x = g.nodes if nodes is None else nodes
    return dq.compose(dq.inverse(x[g.edge_i]), x[g.edge_j])
