"""Sparse symmetric positive-definite solves."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SingularSystemError(RuntimeError):
    pass


def factorize_spd(M):
    """LU with a symmetric fill-reducing ordering and diagonal pivots only.

    With diagonal pivoting the U pivots are the LDL^T pivots, so a
    non-positive pivot means ``M`` is not positive definite.
    """
    try:
        lu = splu(
            sp.csc_matrix(M),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as err:
        raise SingularSystemError(str(err)) from None
    pivots = lu.U.diagonal()
    if not np.array_equal(lu.perm_r, lu.perm_c) or not np.all(pivots > 0):
        raise SingularSystemError("matrix is not positive definite")
    return lu


def solve_spd(M, rhs):
    sol = factorize_spd(M).solve(np.asarray(rhs, dtype=float))
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("non-finite solution")
    return sol


def solve_anchored(H, b, anchor, value, dim):
    """Solve ``H x = b`` for block vector ``x`` with block ``anchor`` held at ``value``.

    ``H`` is ``(dim*n, dim*n)``; returns ``x`` reshaped to ``(n, dim)``.
    """
    H = sp.csr_matrix(H)
    n = H.shape[0] // dim
    fixed = np.arange(dim * anchor, dim * anchor + dim)
    free = np.setdiff1d(np.arange(dim * n), fixed)
    rhs = np.asarray(b, dtype=float)[free] - H[free][:, fixed] @ np.asarray(value, dtype=float)
    x = np.zeros(dim * n)
    x[fixed] = value
    if len(free):
        x[free] = solve_spd(H[free][:, free], rhs)
    return x.reshape(n, dim)
