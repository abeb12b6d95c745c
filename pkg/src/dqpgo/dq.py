"""Planar dual quaternions on the manifold S^1 x R^2.

A pose is stored as a float array ``[x0, x1, x2, x3]`` over the basis
``{1, k, i, j}``: the real part ``[x0, x1] = [cos(theta/2), sin(theta/2)]``
and the dual part ``[x2, x3] = 0.5 * Qr @ t``.  Every function broadcasts
over leading axes, so an ``(n, 4)`` array is a batch of ``n`` poses.
"""

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])
IDENTITY.setflags(write=False)

_CONJ = np.array([1.0, -1.0, -1.0, -1.0])
_SMALL = 1e-4


class DomainError(ValueError):
    """A tangent vector does not lie in the tangent plane of its base point."""


def sinc(u):
    """Unnormalized sinc, sin(u)/u, using a Taylor series near zero."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    series = 1.0 - u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)))
    small = np.abs(u) < _SMALL
    safe = np.where(small, 1.0, u)
    return np.where(small, series, np.sin(safe) / safe)


def sinc_prime(u):
    """Derivative of :func:`sinc`."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    series = -u / 3.0 * (1.0 - u2 / 10.0 * (1.0 - u2 / 28.0 * (1.0 - u2 / 54.0)))
    small = np.abs(u) < _SMALL
    safe = np.where(small, 1.0, u)
    return np.where(small, series, (safe * np.cos(safe) - np.sin(safe)) / (safe * safe))


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def from_pose(theta, t):
    """Build the canonical dual quaternion of a rotation ``theta`` followed by translation ``t``."""
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(t))):
        raise ValueError("from_pose requires finite angle and translation")
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    tx, ty = t[..., 0], t[..., 1]
    x = _stack(c, s, 0.5 * (c * tx + s * ty), 0.5 * (-s * tx + c * ty))
    return canonicalize(x)


def to_pose(x):
    """Return ``(theta, t)`` with ``theta`` in (-pi, pi] for canonical input."""
    x = np.asarray(x, dtype=float)
    theta = 2.0 * np.arctan2(x[..., 1], x[..., 0])
    theta = np.where(theta <= -np.pi, theta + 2.0 * np.pi, theta)
    theta = np.where(theta > np.pi, theta - 2.0 * np.pi, theta)
    # Qr is orthogonal for unit real part, so its inverse is the transpose
    x0, x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    t = 2.0 * _stack(x0 * x2 - x1 * x3, x1 * x2 + x0 * x3)
    return theta, t


def to_xyt(x):
    """Poses as ``(..., 3)`` arrays of ``[x, y, theta]``."""
    theta, t = to_pose(x)
    return np.concatenate([t, theta[..., None]], axis=-1)


def from_xyt(p):
    p = np.asarray(p, dtype=float)
    return from_pose(p[..., 2], p[..., :2])


def canonicalize(x):
    """Pick the representative with ``x0 > 0`` (or ``x0 == 0`` and ``x1 > 0``)."""
    x = np.asarray(x, dtype=float)
    flip = (x[..., 0] < 0.0) | ((x[..., 0] == 0.0) & (x[..., 1] < 0.0))
    return np.where(flip[..., None], -x, x)


def normalize(x):
    """Rescale the real part to unit norm."""
    x = np.array(x, dtype=float)
    norm = np.hypot(x[..., 0], x[..., 1])
    x[..., :2] /= norm[..., None]
    return x


def left_matrix(x):
    """Matrix ``L`` with ``compose(x, y) == L @ y``."""
    x = np.asarray(x, dtype=float)
    x0, x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    z = np.zeros_like(x0)
    rows = [
        _stack(x0, -x1, z, z),
        _stack(x1, x0, z, z),
        _stack(x2, x3, x0, -x1),
        _stack(x3, -x2, x1, x0),
    ]
    return np.stack(rows, axis=-2)


def right_matrix(y):
    """Matrix ``R`` with ``compose(x, y) == R @ x``."""
    y = np.asarray(y, dtype=float)
    y0, y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    z = np.zeros_like(y0)
    rows = [
        _stack(y0, -y1, z, z),
        _stack(y1, y0, z, z),
        _stack(y2, -y3, y0, y1),
        _stack(y3, y2, -y1, y0),
    ]
    return np.stack(rows, axis=-2)


def product_matrices(x):
    return left_matrix(x), right_matrix(x)


def multiply(x, y):
    """Raw dual quaternion product without normalization or sign choice."""
    return np.einsum("...ij,...j->...i", left_matrix(x), np.asarray(y, dtype=float))


def compose(x, y):
    """Rigid-motion composition: apply ``y`` first, then ``x``."""
    return canonicalize(normalize(multiply(x, y)))


def conjugate(x):
    return np.asarray(x, dtype=float) * _CONJ


def inverse(x):
    # unit planar dual quaternions are inverted by the conjugate
    return canonicalize(conjugate(x))


def transform_point(x, v):
    """Map a point ``v`` through the pose ``x``, i.e. ``R(theta) v + t``.

    The point is embedded as ``1 + eps*v`` and sandwiched between ``x`` and its
    combined quaternion/dual-number conjugate ``[x0, -x1, x2, x3]``; the plain
    quaternion conjugate would cancel the translation.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    one = np.ones(v.shape[:-1])
    zero = np.zeros(v.shape[:-1])
    p = _stack(one, zero, v[..., 0], v[..., 1])
    xbar = x * np.array([1.0, -1.0, 1.0, 1.0])
    out = multiply(multiply(x, p), xbar)
    return out[..., 2:]


def tangent_projection(x):
    """Orthogonal projector onto the tangent plane at ``x``."""
    x = np.asarray(x, dtype=float)
    P = np.zeros(x.shape[:-1] + (4, 4))
    xr = x[..., :2]
    P[..., :2, :2] = np.eye(2) - xr[..., :, None] * xr[..., None, :]
    P[..., 2, 2] = 1.0
    P[..., 3, 3] = 1.0
    return P


def tangent_basis(x):
    """Orthonormal ``4 x 3`` basis of the tangent plane at ``x``."""
    x = np.asarray(x, dtype=float)
    B = np.zeros(x.shape[:-1] + (4, 3))
    B[..., 0, 0] = -x[..., 1]
    B[..., 1, 0] = x[..., 0]
    B[..., 2, 1] = 1.0
    B[..., 3, 2] = 1.0
    return B


def log_identity(x):
    """Logarithm at the identity: ``[x1, x2, x3] / sinc(theta/2)``.

    The first coordinate is the half angle, in (-pi/2, pi/2].
    """
    x = canonicalize(x)
    half = np.arctan2(x[..., 1], x[..., 0])
    return x[..., 1:] / sinc(half)[..., None]


def exp_identity(v):
    """Inverse of :func:`log_identity`."""
    v = np.asarray(v, dtype=float)
    gamma = sinc(v[..., 0])
    x = np.concatenate([np.cos(v[..., :1]), gamma[..., None] * v], axis=-1)
    return canonicalize(normalize(x))


def log_identity_jacobian(q):
    """Jacobian ``d log_identity / d q`` in ambient coordinates, shape ``(..., 3, 4)``.

    ``log_identity`` is extended off the manifold by ``[q1, q2, q3] / sinc(atan2(q1, q0))``
    after sign canonicalization; the sign flip enters via the chain rule.
    """
    q = np.asarray(q, dtype=float)
    s = np.where((q[..., 0] < 0.0) | ((q[..., 0] == 0.0) & (q[..., 1] < 0.0)), -1.0, 1.0)
    qc = q * s[..., None]
    half = np.arctan2(qc[..., 1], qc[..., 0])
    gamma = sinc(half)
    out = qc[..., 1:] / gamma[..., None]
    r2 = qc[..., 0] ** 2 + qc[..., 1] ** 2
    dhalf = np.zeros(q.shape)
    dhalf[..., 0] = -qc[..., 1] / r2
    dhalf[..., 1] = qc[..., 0] / r2
    J = np.zeros(q.shape[:-1] + (3, 4))
    J[..., 0, 1] = 1.0
    J[..., 1, 2] = 1.0
    J[..., 2, 3] = 1.0
    J = J / gamma[..., None, None]
    J -= (out * (sinc_prime(half) / gamma)[..., None])[..., :, None] * dhalf[..., None, :]
    return J * s[..., None, None]


def log_at(x, y):
    """Logarithm of ``y`` in the tangent plane at ``x`` (ambient coordinates)."""
    x = np.asarray(x, dtype=float)
    rel = log_identity(multiply(conjugate(x), y))
    padded = np.concatenate([np.zeros(rel.shape[:-1] + (1,)), rel], axis=-1)
    return multiply(x, padded)


def exp_at(x, v, tol=1e-9):
    """Exponential map of the ambient tangent vector ``v`` based at ``x``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    radial = np.abs(np.sum(x[..., :2] * v[..., :2], axis=-1))
    if np.any(radial > tol * np.maximum(1.0, np.linalg.norm(v, axis=-1))):
        raise DomainError("vector is not in the tangent plane of its base point")
    local = multiply(conjugate(x), v)[..., 1:]
    return canonicalize(normalize(multiply(x, exp_identity(local))))


def random_poses(rng, size=(), max_translation=10.0):
    """Canonical random poses with angles in (-pi, pi); a test and demo helper."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    theta = rng.uniform(-np.pi, np.pi, shape)
    t = rng.uniform(-max_translation, max_translation, shape + (2,))
    return from_pose(theta, t)
