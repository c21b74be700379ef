"""Chaotic test models and the implicit-midpoint flow map.

The right-hand sides act column-wise on ``(dim, n_members)`` blocks so a whole
ensemble can be propagated with one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import as_ensemble
from .exceptions import DimensionError, IntegrationFailureError


@dataclass
class OdeModel:
    """Autonomous ODE ``dz/dt = rhs(z)`` with vectorized right-hand side."""

    rhs: Callable[[np.ndarray], np.ndarray]
    dim: int
    params: dict


@dataclass
class FlowMapConfig:
    """Time stepping between assimilation instants."""

    dt: float
    steps_per_assimilation: int
    solver_tol: float = 1e-12
    solver_max_iters: int = 100

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")
        if self.steps_per_assimilation < 0:
            raise ValueError("steps_per_assimilation must be >= 0")


def lorenz63_rhs(z, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    """Lorenz-63 vector field, vectorized over columns."""
    z = np.asarray(z, dtype=float)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[:, None]
    if z.shape[0] != 3:
        raise DimensionError(f"Lorenz-63 state must have 3 components, got {z.shape[0]}")
    x, y, w = z[0], z[1], z[2]
    out = np.empty_like(z)
    out[0] = sigma * (y - x)
    out[1] = x * (rho - w) - y
    out[2] = x * y - beta * w
    return out[:, 0] if squeeze else out


def lorenz96_rhs(u, forcing=8.0, dx=1.0 / 3.0):
    """Lorenz-96 vector field with periodic indexing, vectorized over columns.

    du_j/dt = -(u_{j-1} u_{j+1} - u_{j-2} u_{j-1}) / (3 dx) - u_j + F
    """
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    if squeeze:
        u = u[:, None]
    if u.shape[0] < 4:
        raise DimensionError("Lorenz-96 needs at least 4 grid points")
    um1 = np.roll(u, 1, axis=0)
    um2 = np.roll(u, 2, axis=0)
    up1 = np.roll(u, -1, axis=0)
    out = -(um1 * up1 - um2 * um1) / (3.0 * dx) - u + forcing
    return out[:, 0] if squeeze else out


def lorenz63_model(sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    params = {"sigma": sigma, "rho": rho, "beta": beta}
    return OdeModel(lambda z: lorenz63_rhs(z, sigma, rho, beta), 3, params)


def lorenz96_model(dim=40, forcing=8.0, dx=1.0 / 3.0):
    params = {"forcing": forcing, "dx": dx}
    return OdeModel(lambda u: lorenz96_rhs(u, forcing, dx), dim, params)


def implicit_midpoint_step(model, z, dt, tol=1e-12, max_iters=100):
    """One step of the implicit midpoint rule.

    Solves ``z' = z + dt * f((z + z') / 2)`` by fixed-point iteration seeded
    with an explicit Euler predictor.  Convergence is measured in the max norm.
    """
    z = np.asarray(z, dtype=float)
    z_new = z + dt * model.rhs(z)
    for _ in range(max_iters):
        z_next = z + dt * model.rhs(0.5 * (z + z_new))
        residual = np.max(np.abs(z_next - z_new))
        z_new = z_next
        if residual < tol:
            return z_new
    raise IntegrationFailureError(
        f"implicit midpoint did not converge within {max_iters} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
    )


def flow_map(model, z, cfg):
    """Compose ``steps_per_assimilation`` implicit-midpoint steps."""
    z = np.asarray(z, dtype=float)
    for _ in range(cfg.steps_per_assimilation):
        z = implicit_midpoint_step(
            model, z, cfg.dt, tol=cfg.solver_tol, max_iters=cfg.solver_max_iters
        )
    return z
