"""
Planar poses as dual quaternions
================================

A pose (theta, t) is stored as four numbers: the rotation half-angle pair
[cos(theta/2), sin(theta/2)] and a dual part carrying the translation.
This script walks through composing poses, the two representations of the
same motion, and the log/exp maps that turn poses into 3-vectors and back.
"""

# %%
import numpy as np

from dqpgo import dq

a = dq.from_pose(np.pi / 2, [1.0, 0.0])
b = dq.from_pose(np.pi / 4, [0.5, 0.5])
print("a =", a)
print("a * b as (theta, x, y):", dq.to_xyt(dq.compose(a, b)))

# %%
# x and -x describe the same motion; compose() returns the copy with a
# non-negative scalar part so results are comparable entry by entry.
print(dq.to_xyt(a), dq.to_xyt(-a))
print("composition with the inverse:", dq.compose(a, dq.inverse(a)))

# %%
# Points: rotate then translate, written as a sandwich product.
print(dq.transform_point(a, [[1.0, 0.0], [0.0, 2.0]]))

# %%
# The log at identity returns (half-angle, scaled translation); exp undoes it.
v = dq.log_identity(a)
print("log(a) =", v, " exp(log(a)) =", dq.exp_identity(v))

# Away from identity the maps live on the tangent plane at the base pose.
# Walking along a tangent direction and coming back is exact.
base = dq.from_pose(-0.3, [2.0, -1.0])
step = dq.log_at(base, a)
print("tangent step from base to a:", step)
print("recovered a:", dq.exp_at(base, step))

# %%
# The tangent plane at x is three dimensional: the projector has rank 3 and
# its null direction is the rotation part of x itself.
P = dq.tangent_projection(base)
print("rank", np.linalg.matrix_rank(P), " P @ [x_r, 0] =", P @ np.r_[base[:2], 0, 0])
