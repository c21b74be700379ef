"""Skill and convergence metrics for twin experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryRecord:
    """Aligned per-cycle analysis means, reference states and ESS values."""

    analysis_means: np.ndarray  # (n_cycles, dim)
    reference: np.ndarray  # (n_cycles, dim)
    ess: np.ndarray = None
    start_cycle: int = 0

    def __post_init__(self):
        self.analysis_means = np.atleast_2d(np.asarray(self.analysis_means, float))
        self.reference = np.atleast_2d(np.asarray(self.reference, float))
        if self.analysis_means.shape != self.reference.shape:
            raise ValueError("analysis and reference shapes differ")
        if self.ess is not None:
            self.ess = np.asarray(self.ess, dtype=float)
            if self.ess.size != self.analysis_means.shape[0]:
                raise ValueError("ess length differs from cycle count")


def rmse_time_average(record, normalized=False):
    """Mean over cycles of the Euclidean norm of the mean error.

    ``(1/N) sum_n ||zbar_n - z_ref_n||``; with ``normalized=True`` each norm is
    divided by ``sqrt(dim)`` (per-component scale).
    """
    err = record.analysis_means - record.reference
    norms = np.linalg.norm(err, axis=1)
    if normalized:
        norms = norms / np.sqrt(err.shape[1])
    return float(norms.mean())


def spatial_correlation(trajectory, shift, average_x=True):
    """Time-averaged spatial correlation ``C(x, s)`` on a periodic grid.

    ``trajectory`` is ``(n_steps, n_grid)``; ``shift`` an integer number of
    grid points.  Returns a scalar when averaging over ``x`` (homogeneity),
    otherwise one value per grid point.
    """
    z = np.atleast_2d(np.asarray(trajectory, dtype=float))
    shifted = np.roll(z, -int(shift), axis=1)
    num = np.sum(shifted * z, axis=0)
    den = np.sum(z * z, axis=0)
    if average_x:
        return float(num.sum() / den.sum())
    return num / den


def convergence_slope(points):
    """Least-squares slope of ``log(error)`` against ``log(M)``.

    ``points`` is a sequence of ``(M, error)`` pairs with positive errors.
    """
    points = [(m, e) for m, e in points]
    if len(points) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    m = np.array([p[0] for p in points], dtype=float)
    e = np.array([p[1] for p in points], dtype=float)
    if np.any(e <= 0) or np.any(m <= 0):
        raise ValueError("sizes and errors must be positive")
    slope, _ = np.polyfit(np.log(m), np.log(e), 1)
    return float(slope)
