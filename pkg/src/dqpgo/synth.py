"""Synthetic odometry noise and toy ground-truth graphs."""

import warnings
from dataclasses import dataclass

import numpy as np

from . import dq
from .graph import PoseGraph


@dataclass(frozen=True)
class NoiseSpec:
    """Covariance over ``[dtheta, dtx, dty]`` and the generator seed."""

    sigma: np.ndarray
    seed: int = 0

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        if sigma.shape != (3, 3):
            raise ValueError("sigma must be 3x3")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() < -1e-12 * max(1.0, np.abs(sigma).max()):
            raise ValueError("sigma must be positive semi-definite")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)


def sigma_from_values(values):
    """Covariance from 9 row-major entries or a 6-entry upper triangle."""
    v = [float(a) for a in values]
    if len(v) == 9:
        return np.array(v).reshape(3, 3)
    if len(v) == 6:
        a, b, c, d, e, f = v
        return np.array([[a, b, c], [b, d, e], [c, e, f]])
    raise ValueError(f"expected 6 or 9 covariance entries, got {len(v)}")


def _sqrt_factor(sigma):
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(sigma)
        return V * np.sqrt(np.clip(w, 0.0, None))


def rng_for(seed):
    """Counter-based generator, reproducible across platforms."""
    return np.random.Generator(np.random.Philox(seed))


def draw_noise(spec, count):
    """``count`` samples of ``[dtheta, dtx, dty] ~ N(0, sigma)``."""
    std = rng_for(spec.seed).standard_normal((count, 3))
    return std @ _sqrt_factor(spec.sigma).T


def perturb(g, spec, sequential_only=False):
    """Right-compose every measurement with a sampled noise pose, ``z' = z * noise``.

    Perturbed edges get ``Omega = inv(sigma)``; a singular ``sigma`` uses the
    pseudo-inverse (with a warning) and an all-zero ``sigma`` leaves the
    information matrices alone.  Node poses are not touched.
    """
    if not np.any(spec.sigma):
        return g
    mask = np.ones(g.num_edges, dtype=bool)
    if sequential_only:
        mask = np.abs(g.edge_i - g.edge_j) == 1
    nu = draw_noise(spec, g.num_edges)
    noise = dq.from_pose(nu[:, 0], nu[:, 1:])
    z = np.array(g.z)
    z[mask] = dq.compose(g.z[mask], noise[mask])

    sigma = spec.sigma
    omega = np.array(g.omega)
    if np.linalg.matrix_rank(sigma) < 3:
        warnings.warn("singular noise covariance; using its pseudo-inverse", stacklevel=2)
        info = np.linalg.pinv(sigma)
    else:
        info = np.linalg.inv(sigma)
    omega[mask] = 0.5 * (info + info.T)
    return g.with_measurements(z=z, omega=omega)


def make_ring(n, radius=10.0, closures=1, seed=0):
    """Noise-free ring of ``n`` poses; returns ``(ground_truth, odometry)``.

    Poses sit on a circle heading along its tangent.  Edges are the ``n - 1``
    sequential ones plus ``closures`` loop closures: the first closes the
    ring, the rest join random non-adjacent pairs.  The odometry graph has its
    poses rebuilt by chaining the sequential edges from node 0.
    """
    if n < 3:
        raise ValueError("a ring needs at least 3 nodes")
    phi = 2.0 * np.pi * np.arange(n) / n
    truth_nodes = dq.from_pose(
        phi + 0.5 * np.pi, radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    )
    pairs = [(k, k + 1) for k in range(n - 1)]
    candidates = [(a, b) for a in range(n) for b in range(a + 2, n) if (a, b) != (0, n - 1)]
    extra = []
    if closures > 0:
        extra.append((n - 1, 0))
        rng = rng_for(seed)
        picks = rng.choice(len(candidates), size=min(closures - 1, len(candidates)), replace=False)
        extra += [candidates[k] for k in sorted(picks)]
    pairs += extra
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    z = dq.compose(dq.inverse(truth_nodes[i]), truth_nodes[j])
    omega = np.broadcast_to(np.eye(3), (len(pairs), 3, 3))
    truth = PoseGraph(truth_nodes, i, j, z, omega)

    odo = np.array(truth_nodes)
    for k in range(1, n):
        odo[k] = dq.compose(odo[k - 1], z[k - 1])
    return truth, truth.with_nodes(odo)


def make_grid_world(n, seed=0, step=1.0, closure_radius=0.75, sigma=None):
    """Manhattan-style random walk on a unit grid with loop closures at revisits.

    The walk moves one ``step`` per pose, turning by a multiple of 90 degrees
    with probability 0.2.  A closure joins any two poses that occupy the same
    grid cell (within ``closure_radius``) and are at least ten steps apart.
    Returns the noise-free ground-truth graph; ``sigma`` optionally sets the
    information matrices to its inverse.
    """
    rng = rng_for(seed)
    heading = 0.0
    pos = np.zeros(2)
    thetas, positions = [], []
    for k in range(n):
        thetas.append(heading)
        positions.append(pos.copy())
        if rng.random() < 0.2:
            heading = heading + rng.choice([-0.5, 0.5, 1.0]) * np.pi
        pos = pos + step * np.array([np.cos(heading), np.sin(heading)])
    thetas = np.array(thetas)
    positions = np.array(positions)
    nodes = dq.from_pose(thetas, positions)

    pairs = [(k, k + 1) for k in range(n - 1)]
    cells = {}
    for k, p in enumerate(np.round(positions / step).astype(int)):
        cells.setdefault(tuple(p), []).append(k)
    for members in cells.values():
        for a_idx, a in enumerate(members):
            for b in members[a_idx + 1:]:
                if b - a >= 10 and np.linalg.norm(positions[a] - positions[b]) < closure_radius:
                    pairs.append((a, b))
    pairs.sort()
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    z = dq.compose(dq.inverse(nodes[i]), nodes[j])
    info = np.eye(3) if sigma is None else np.linalg.inv(np.asarray(sigma, dtype=float))
    omega = np.broadcast_to(info, (len(pairs), 3, 3))
    return PoseGraph(nodes, i, j, z, omega)
