"""Discrete optimal transport on the transportation polytope.

Exact couplings come from an LP solved with HiGHS dual simplex, which returns
a basic optimal vertex (at most ``2M - 1`` nonzeros) together with the dual
variables used for optimality certification.  An entropically regularized
Sinkhorn approximation and the closed-form Gaussian optimal map complete the
module.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, identity, kron, vstack

from .core import validate_weights
from .exceptions import (
    DecompositionError,
    DimensionError,
    MarginalMismatchError,
    NonConvergenceError,
)

MARGINAL_TOL = 1e-9


@dataclass
class CouplingMatrix:
    """Nonnegative matrix with prescribed row and column sums."""

    t: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    objective: Optional[float] = None
    dual_row: Optional[np.ndarray] = None
    dual_col: Optional[np.ndarray] = None

    def check_marginals(self, tol=MARGINAL_TOL):
        if np.max(np.abs(self.t.sum(axis=1) - self.row_marginal)) > tol:
            raise MarginalMismatchError("row sums deviate from row marginal")
        if np.max(np.abs(self.t.sum(axis=0) - self.col_marginal)) > tol:
            raise MarginalMismatchError("column sums deviate from column marginal")


def squared_distance_cost(a, b=None):
    """Pairwise squared Euclidean distances between the columns of two blocks."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    sq_a = np.sum(a * a, axis=0)
    sq_b = np.sum(b * b, axis=0)
    c = sq_a[:, None] + sq_b[None, :] - 2.0 * (a.T @ b)
    return np.maximum(c, 0.0)


_constraint_cache: dict = {}


def _transport_constraints(n_rows, n_cols):
    # the last column constraint is redundant (rank 2M - 1) and is dropped so
    # tiny roundoff between the two marginal sums cannot render the system
    # inconsistent for the presolver
    key = (n_rows, n_cols)
    if key not in _constraint_cache:
        ones_row = csr_matrix(np.ones((1, n_cols)))
        ones_col = csr_matrix(np.ones((1, n_rows)))
        a_rows = kron(identity(n_rows), ones_row)  # row sums
        a_cols = kron(ones_col, identity(n_cols))  # column sums
        _constraint_cache[key] = vstack([a_rows, a_cols]).tocsr()[:-1]
    return _constraint_cache[key]


def solve_optimal_coupling(cost, rows, cols, marginal_tol=1e-9):
    """Minimize ``sum_ij t_ij c_ij`` over couplings of ``rows`` and ``cols``.

    Returns a basic optimal vertex with the LP objective and dual variables
    ``(u, v)`` satisfying ``u_i + v_j <= c_ij`` with equality on the support.
    """
    cost = np.asarray(cost, dtype=float)
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    n_rows, n_cols = cost.shape
    if rows.size != n_rows or cols.size != n_cols:
        raise DimensionError("marginal lengths must match the cost matrix")
    if abs(rows.sum() - cols.sum()) > marginal_tol:
        raise MarginalMismatchError(
            f"marginal masses differ: {rows.sum()} vs {cols.sum()}"
        )

    a_eq = _transport_constraints(n_rows, n_cols)
    b_eq = np.concatenate([rows, cols[:-1]])
    # scale costs to unit magnitude so HiGHS tolerances behave for extreme data
    scale = np.max(np.abs(cost))
    scale = scale if scale > 0 else 1.0
    res = linprog(
        cost.ravel() / scale,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status != 0:
        raise MarginalMismatchError(f"transport LP failed: {res.message}")
    t = res.x.reshape(n_rows, n_cols)
    # the dropped constraint pins the dual normalization at v_last = 0
    duals = scale * np.append(np.asarray(res.eqlin.marginals, dtype=float), 0.0)
    return CouplingMatrix(
        t=t,
        row_marginal=rows,
        col_marginal=cols,
        objective=float(scale * res.fun),
        dual_row=duals[:n_rows],
        dual_col=duals[n_rows:],
    )


def coupling_to_transform(coupling, tol=1e-8):
    """Transform matrix ``S = M T`` for a coupling with uniform column marginal."""
    t = coupling.t if isinstance(coupling, CouplingMatrix) else np.asarray(coupling)
    m = t.shape[1]
    if isinstance(coupling, CouplingMatrix):
        if np.max(np.abs(coupling.col_marginal - 1.0 / m)) > tol:
            raise MarginalMismatchError("column marginal must be uniform 1/M")
    return m * t


def check_cyclical_monotonicity(support_pairs, exhaustive_limit=8, n_random=2000, rng=None):
    """Search for a permutation of assignments that lowers total squared cost.

    ``support_pairs`` is a list of ``(z_f, z_a)`` pairs.  Returns the worst
    violation margin: positive means a strictly cheaper reassignment exists,
    so the support is not cyclically monotone.  Exhaustive up to
    ``exhaustive_limit`` pairs; larger supports are probed with the optimal
    assignment plus random permutations.
    """
    pairs = [(np.atleast_1d(np.asarray(f, float)), np.atleast_1d(np.asarray(a, float)))
             for f, a in support_pairs]
    n = len(pairs)
    if n < 2:
        raise ValueError("need at least two support pairs")
    zf = np.stack([f for f, _ in pairs])
    za = np.stack([a for _, a in pairs])
    # cost[i, j] = ||z_i^f - z_j^a||^2
    diff = zf[:, None, :] - za[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    baseline = float(np.trace(cost))

    best = baseline
    best_perm = tuple(range(n))
    if n <= exhaustive_limit:
        for perm in permutations(range(n)):
            total = float(cost[np.arange(n), perm].sum())
            if total < best:
                best = total
                best_perm = perm
    else:
        from scipy.optimize import linear_sum_assignment

        _, cols = linear_sum_assignment(cost)
        total = float(cost[np.arange(n), cols].sum())
        if total < best:
            best = total
            best_perm = tuple(cols)
        rng = np.random.default_rng(rng)
        for _ in range(n_random):
            perm = rng.permutation(n)
            total = float(cost[np.arange(n), perm].sum())
            if total < best:
                best = total
                best_perm = tuple(perm)

    return {
        "violation": baseline - best,
        "is_monotone": baseline - best <= 1e-9 * max(1.0, baseline),
        "best_permutation": best_perm,
        "baseline_cost": baseline,
        "best_cost": best,
    }


def coupling_support_pairs(forecast, coupling, threshold=1e-9):
    """Extract ``(z_i^f, z_j^a)`` pairs carried by the coupling support.

    The analysis points are the forecast points themselves: entry ``t_ij > 0``
    couples forecast member ``i`` with analysis slot holding ``z_j^f``.
    """
    z = np.atleast_2d(np.asarray(forecast, dtype=float))
    t = coupling.t if isinstance(coupling, CouplingMatrix) else np.asarray(coupling)
    rows, cols = np.nonzero(t > threshold)
    return [(z[:, i], z[:, j]) for i, j in zip(rows, cols)]


def sinkhorn_coupling(cost, rows, cols, reg, tol=1e-9, max_iters=10000):
    """Entropically regularized coupling via log-domain Sinkhorn iterations."""
    if reg <= 0:
        raise ValueError("regularization must be positive")
    cost = np.asarray(cost, dtype=float)
    rows = validate_weights(rows)
    cols = validate_weights(cols)
    log_rows = np.log(np.maximum(rows, 1e-300))
    log_cols = np.log(np.maximum(cols, 1e-300))
    k = -cost / reg
    # scaled dual potentials f/reg, g/reg
    f = np.zeros(rows.size)
    g = np.zeros(cols.size)
    err = np.inf
    for _ in range(max_iters):
        f = log_rows - _logsumexp_rows(k + g[None, :])
        g = log_cols - _logsumexp_rows((k + f[:, None]).T)
        t = np.exp(k + f[:, None] + g[None, :])
        err = max(
            np.max(np.abs(t.sum(axis=1) - rows)),
            np.max(np.abs(t.sum(axis=0) - cols)),
        )
        if err < tol:
            break
    else:
        raise NonConvergenceError(
            f"Sinkhorn hit the iteration limit with marginal error {err:.3e}",
            achieved_error=err,
        )
    # zero rows/columns of the marginals stay exactly zero
    t[rows == 0, :] = 0.0
    t[:, cols == 0] = 0.0
    return CouplingMatrix(
        t=t,
        row_marginal=rows,
        col_marginal=cols,
        objective=float(np.sum(t * cost)),
    )


def _logsumexp_rows(a):
    amax = np.max(a, axis=1, keepdims=True)
    return (amax + np.log(np.sum(np.exp(a - amax), axis=1, keepdims=True)))[:, 0]


def _symmetric_root(p, power=0.5, floor=1e-14):
    p = np.asarray(p, dtype=float)
    if not np.allclose(p, p.T, atol=1e-10):
        raise DecompositionError("matrix must be symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (p + p.T))
    if np.min(vals) < -1e-10:
        raise DecompositionError("matrix must be positive (semi)definite")
    vals = np.maximum(vals, floor)
    return (vecs * vals**power) @ vecs.T


def gaussian_optimal_map(p_f, p_a):
    """Optimal linear map ``A`` with ``A P_f A^T = P_a`` between Gaussians.

    ``A = P_a^{1/2} [P_a^{1/2} P_f P_a^{1/2}]^{-1/2} P_a^{1/2}``; the result is
    symmetric positive definite.
    """
    root_a = _symmetric_root(p_a, 0.5)
    inner = root_a @ np.asarray(p_f, dtype=float) @ root_a
    a = root_a @ _symmetric_root(inner, -0.5) @ root_a
    return 0.5 * (a + a.T)
