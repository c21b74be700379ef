"""Discrete optimal transport building blocks.

Walks through the exact coupling solver, its optimality certificates, the
entropically regularized approximation and the closed-form Gaussian map.
"""

import numpy as np

from letf.transport import (
    check_cyclical_monotonicity,
    coupling_support_pairs,
    coupling_to_transform,
    gaussian_optimal_map,
    sinkhorn_coupling,
    solve_optimal_coupling,
    squared_distance_cost,
)

rng = np.random.default_rng(0)

# A small point cloud with non-uniform source weights.  The target marginal is
# uniform, which is the situation every transform-based filter ends up in.
m = 8
points = rng.standard_normal((2, m))
weights = rng.dirichlet(np.ones(m))
uniform = np.full(m, 1.0 / m)
cost = squared_distance_cost(points)

coupling = solve_optimal_coupling(cost, weights, uniform)
print("optimal objective:", coupling.objective)
print("support size:", int(np.sum(coupling.t > 1e-9)), "(bound:", 2 * m - 1, ")")

# Dual variables certify optimality: u_i + v_j <= c_ij with equality on the
# support of the plan.
slack = cost - coupling.dual_row[:, None] - coupling.dual_col[None, :]
print("min slack:", slack.min(), " max slack on support:",
      np.max(np.abs(slack[coupling.t > 1e-9])))

# The support is cyclically monotone: no reassignment of the coupled pairs can
# lower the total squared distance.
report = check_cyclical_monotonicity(coupling_support_pairs(points, coupling))
print("cyclically monotone:", report["is_monotone"])

# Converting to a transform matrix (columns sum to one) is how the coupling is
# applied to an ensemble.
s = coupling_to_transform(coupling)
print("transform column sums:", s.sum(axis=0))

# Entropic regularization trades accuracy for smoothness; the regularized
# objective approaches the exact one as the regularization vanishes.
for reg in (1.0, 0.1, 0.01):
    approx = sinkhorn_coupling(cost, weights, uniform, reg=reg)
    print(f"sinkhorn reg={reg}: objective {approx.objective:.6f}")

# Between two Gaussians the optimal map is a linear SPD matrix.
b1 = rng.standard_normal((3, 3))
b2 = rng.standard_normal((3, 3))
p_f = b1 @ b1.T + 0.1 * np.eye(3)
p_a = b2 @ b2.T + 0.1 * np.eye(3)
a = gaussian_optimal_map(p_f, p_a)
print("pushforward error:", np.linalg.norm(a @ p_f @ a.T - p_a))
