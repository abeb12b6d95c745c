"""Initial guesses: chordal relaxation and odometry chaining."""

from collections import deque

import numpy as np
import scipy.sparse as sp

from . import dq
from .graph import InvalidGraphError, is_connected
from .linalg import solve_anchored


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _assemble(g, W, Jj_i):
    """Normal matrix of residuals ``x_j - M x_i`` with weights ``W`` (all 2x2 blocks).

    ``Jj_i`` holds the per-edge matrices ``M``.
    """
    n = g.num_nodes
    Mt = np.swapaxes(Jj_i, 1, 2)
    blocks = [Mt @ W @ Jj_i, -Mt @ W, -W @ Jj_i, W]
    pairs = [(g.edge_i, g.edge_i), (g.edge_i, g.edge_j), (g.edge_j, g.edge_i), (g.edge_j, g.edge_j)]
    r, c = np.meshgrid(np.arange(2), np.arange(2), indexing="ij")
    rows, cols, vals = [], [], []
    for (a, b), blk in zip(pairs, blocks):
        rows.append((2 * a[:, None, None] + r).ravel())
        cols.append((2 * b[:, None, None] + c).ravel())
        vals.append(blk.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n, 2 * n)
    )


def _require_connected(g):
    if g.num_nodes > 1 and not is_connected(g):
        raise InvalidGraphError("chordal initialization needs a connected graph")


def chordal_rotations(g, anchor=0):
    """Node headings from the relaxed linear problem ``r_j = R(theta_ij) r_i``.

    Each ``r_i`` is an unconstrained 2-vector standing in for
    ``[cos theta_i, sin theta_i]``; edges are weighted by their rotational
    information entry and the anchor keeps its current heading.
    """
    _require_connected(g)
    theta_z, _ = dq.to_pose(g.z)
    w = g.omega[:, 0, 0]
    W = w[:, None, None] * np.eye(2)
    H = _assemble(g, W, _rot(theta_z))
    theta0, _ = dq.to_pose(g.nodes[anchor])
    r = solve_anchored(H, np.zeros(2 * g.num_nodes), anchor, [np.cos(theta0), np.sin(theta0)], 2)
    norms = np.linalg.norm(r, axis=1)
    angles = np.arctan2(r[:, 1], r[:, 0])
    return np.where(norms < 1e-12, 0.0, angles)


def chordal_translations(g, angles, anchor=0):
    """Positions from ``t_j - t_i = R(theta_i) t_ij`` with the translational information block."""
    _require_connected(g)
    _, tz = dq.to_pose(g.z)
    W = g.omega[:, 1:, 1:]
    offset = np.einsum("mab,mb->ma", _rot(np.asarray(angles)[g.edge_i]), tz)
    H = _assemble(g, W, np.broadcast_to(np.eye(2), W.shape))
    Wc = np.einsum("mab,mb->ma", W, offset)
    b = np.zeros((g.num_nodes, 2))
    np.add.at(b, g.edge_j, Wc)
    np.add.at(b, g.edge_i, -Wc)
    _, t0 = dq.to_pose(g.nodes[anchor])
    return solve_anchored(H, b.ravel(), anchor, t0, 2)


def initialize(g, anchor=0):
    """Replace node poses with the two-stage chordal estimate."""
    angles = chordal_rotations(g, anchor)
    t = chordal_translations(g, angles, anchor)
    nodes = dq.from_pose(angles, t)
    nodes[anchor] = g.nodes[anchor]
    return g.with_nodes(nodes)


def odometry_initialize(g, anchor=0):
    """Chain measurements outward from the anchor.

    Sequential edges ``<k, k+1>`` (either direction) are preferred; nodes they
    cannot reach are attached through a breadth-first spanning tree over the
    remaining edges.
    """
    _require_connected(g)
    n = g.num_nodes
    adj = [[] for _ in range(n)]
    for k, (i, j) in enumerate(zip(g.edge_i, g.edge_j)):
        cost = 0 if abs(i - j) == 1 else 1
        adj[i].append((cost, j, k, False))
        adj[j].append((cost, i, k, True))
    nodes = np.array(g.nodes, dtype=float)
    dist = np.full(n, np.iinfo(np.int64).max)
    parent = [None] * n
    dist[anchor] = 0
    queue = deque([anchor])
    # 0-1 BFS: sequential edges cost nothing, others cost one hop
    while queue:
        u = queue.popleft()
        for cost, v, k, reverse in adj[u]:
            if dist[u] + cost < dist[v]:
                dist[v] = dist[u] + cost
                parent[v] = (u, k, reverse)
                if cost == 0:
                    queue.appendleft(v)
                else:
                    queue.append(v)

    done = np.zeros(n, dtype=bool)
    done[anchor] = True

    def place(v):
        stack = []
        while not done[v]:
            stack.append(v)
            v = parent[v][0]
        for v in reversed(stack):
            u, k, reverse = parent[v]
            z = dq.inverse(g.z[k]) if reverse else g.z[k]
            nodes[v] = dq.compose(nodes[u], z)
            done[v] = True

    for v in range(n):
        place(v)
    return g.with_nodes(nodes)
