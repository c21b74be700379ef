"""Ensemble containers and the shared ensemble-statistics algebra.

An ensemble is stored as a dense ``(dim, n_members)`` array whose columns are
the individual model states.  Keeping members as columns means every analysis
step of a linear ensemble transform filter is a single matrix-matrix product
``Z_analysis = Z_forecast @ S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DegenerateEnsembleError, DimensionError

#: default absolute tolerance for invariant checks
DEFAULT_TOL = 1e-10


def as_ensemble(z):
    """Coerce input to a ``(dim, n_members)`` float array.

    A 1-D input is interpreted as a single-member ensemble.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise DimensionError(f"ensemble must be 2-D, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("ensemble contains non-finite entries")
    return z


def ensemble_mean(ens):
    """Arithmetic mean state, one entry per component."""
    ens = as_ensemble(ens)
    return ens.mean(axis=1)


def ensemble_deviations(ens):
    """Matrix of member deviations from the ensemble mean.

    Column ``i`` is ``z_i - zbar``; columns sum to the zero vector.
    Requires at least two members.
    """
    ens = as_ensemble(ens)
    if ens.shape[1] < 2:
        raise DegenerateEnsembleError(
            f"deviations need >= 2 members, got {ens.shape[1]}"
        )
    return ens - ens.mean(axis=1, keepdims=True)


def ensemble_covariance(ens):
    """Sample covariance ``A A^T / (M - 1)`` of the ensemble."""
    dev = ensemble_deviations(ens)
    m = dev.shape[1]
    return (dev @ dev.T) / (m - 1)


def cross_covariance(ens, obs_ens):
    """Cross covariance between state ensemble and observed ensemble.

    ``obs_ens`` holds ``h(z_i)`` as columns; returns ``A_z A_y^T / (M - 1)``.
    """
    dev_z = ensemble_deviations(ens)
    dev_y = ensemble_deviations(obs_ens)
    if dev_z.shape[1] != dev_y.shape[1]:
        raise DimensionError("state and observation ensembles differ in member count")
    m = dev_z.shape[1]
    return (dev_z @ dev_y.T) / (m - 1)


def validate_weights(w, tol=1e-12):
    """Check that ``w`` is a probability vector; returns it as an array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise DimensionError("weights must be a 1-D vector")
    if np.any(w < -tol):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > max(tol, 1e-12):
        raise ValueError(f"weights sum to {w.sum()}, expected 1")
    return np.clip(w, 0.0, None)


def validate_transform(s, tol=DEFAULT_TOL, convex=False):
    """Check the defining transform-matrix invariants.

    Every column must sum to one.  With ``convex=True`` entries must also lie
    in ``[0, 1]`` (resampling / transport transforms).
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError("transform matrix must be square")
    colsums = s.sum(axis=0)
    if np.max(np.abs(colsums - 1.0)) > tol:
        raise ValueError("transform columns must sum to one")
    if convex and (s.min() < -tol or s.max() > 1.0 + tol):
        raise ValueError("convex transform entries must lie in [0, 1]")
    return s


def apply_transform(ens, s):
    """Analysis ensemble ``z_j^a = sum_i z_i^f s_ij`` as one matrix product."""
    ens = as_ensemble(ens)
    return ens @ np.asarray(s, dtype=float)


@dataclass
class ObservationModel:
    """Forward map plus diagonal observation-error statistics.

    Either ``obs_indices`` (component selection) or a callable ``h`` acting on
    a ``(dim, n_members)`` block must be given.  ``obs_locations`` are spatial
    positions of the observations, needed only for localization.
    """

    r_diag: np.ndarray
    obs_indices: Optional[np.ndarray] = None
    h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    obs_locations: Optional[np.ndarray] = None

    def __post_init__(self):
        self.r_diag = np.atleast_1d(np.asarray(self.r_diag, dtype=float))
        if np.any(self.r_diag <= 0):
            raise ValueError("observation error variances must be positive")
        if self.obs_indices is not None:
            self.obs_indices = np.asarray(self.obs_indices, dtype=int)
        if self.obs_indices is None and self.h is None:
            raise ValueError("need obs_indices or a forward map h")
        if self.obs_locations is not None:
            self.obs_locations = np.asarray(self.obs_locations, dtype=float)

    @property
    def n_obs(self):
        return self.r_diag.size

    def observe(self, ens):
        """Map an ensemble block to observation space, ``(n_obs, n_members)``."""
        ens = as_ensemble(ens)
        if self.obs_indices is not None:
            out = ens[self.obs_indices, :]
        else:
            out = np.asarray(self.h(ens), dtype=float)
            if out.ndim == 1:
                out = out[None, :]
        if out.shape[0] != self.n_obs:
            raise DimensionError(
                f"forward map produced {out.shape[0]} rows, expected {self.n_obs}"
            )
        return out


@dataclass
class AnalysisResult:
    """Output of one analysis step."""

    analysis: np.ndarray
    transform: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
