"""Global analysis steps of the linear ensemble transform family.

Every filter maps a forecast ensemble ``(dim, M)`` and an observation vector
to an :class:`~letf.core.AnalysisResult` whose transform matrix has unit
column sums; particle-type transforms additionally have entries in ``[0, 1]``.
"""

from __future__ import annotations

import warnings

import numpy as np

from .core import (
    AnalysisResult,
    apply_transform,
    as_ensemble,
    ensemble_covariance,
    ensemble_deviations,
    ensemble_mean,
    validate_weights,
)
from .exceptions import InvalidEpsilonError, WeightCollapseError
from .transport import (
    CouplingMatrix,
    coupling_to_transform,
    solve_optimal_coupling,
    squared_distance_cost,
    _symmetric_root,
)


def rng_stream(seed, stream=0):
    """Independent reproducible generator for (seed, stream id)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def log_likelihoods(forecast, obs, om):
    """Per-member Gaussian observation log-likelihoods (up to a constant)."""
    y_ens = om.observe(forecast)
    obs = np.atleast_1d(np.asarray(obs, dtype=float))
    innov = y_ens - obs[:, None]
    return -0.5 * np.sum(innov * innov / om.r_diag[:, None], axis=0)


def weights_from_loglik(loglik):
    """Normalize log-likelihoods into importance weights with max-shift."""
    loglik = np.asarray(loglik, dtype=float)
    if not np.all(np.isfinite(loglik)):
        raise WeightCollapseError("non-finite log-likelihoods; weights collapsed")
    shifted = loglik - loglik.max()
    w = np.exp(shifted)
    total = w.sum()
    if total == 0.0 or not np.isfinite(total):
        raise WeightCollapseError("all likelihoods underflowed after shifting")
    return w / total


def importance_weights(forecast, obs, om):
    """Importance weights ``w_i \\propto exp(-0.5 (h(z_i)-y)^T R^-1 (h(z_i)-y))``."""
    w = weights_from_loglik(log_likelihoods(forecast, obs, om))
    if effective_sample_size(w) < 2.0:
        warnings.warn("effective sample size below 2; weights nearly collapsed")
    return w


def effective_sample_size(w):
    """``1 / sum(w_i^2)``, between 1 and M."""
    w = validate_weights(w)
    return 1.0 / np.sum(w * w)


def resampling_coupling(w, epsilon=0.0):
    """Del Moral resampling kernel ``t_ij = (e w_j d_ij + (1 - e w_j) w_i)/M``.

    ``epsilon = 0`` is monomial resampling ``t_ij = w_i / M``.
    """
    w = validate_weights(w)
    m = w.size
    if epsilon < 0 or epsilon * w.max() > 1.0 + 1e-12:
        raise InvalidEpsilonError(f"need 0 <= epsilon * max(w) <= 1, got eps={epsilon}")
    t = (np.outer(w, 1.0 - epsilon * w) + epsilon * np.diag(w)) / m
    return CouplingMatrix(t=t, row_marginal=w, col_marginal=np.full(m, 1.0 / m))


def realize_resampling(coupling, rng, size=None):
    """Draw a 0/1 transform: column ``j`` selects row ``i`` w.p. ``M t_ij``.

    With ``size`` given, draws that many independent realizations at once and
    returns a ``(size, m, m)`` stack.
    """
    t = coupling.t if isinstance(coupling, CouplingMatrix) else np.asarray(coupling)
    m = t.shape[1]
    cdf = np.cumsum(m * t, axis=0)
    cdf[-1, :] = 1.0
    n = 1 if size is None else int(size)
    u = rng.random((n, 1, m))
    picks = (u < cdf[None, :, :]).argmax(axis=1)
    s = np.zeros((n, m, m))
    s[np.arange(n)[:, None], picks, np.arange(m)[None, :]] = 1.0
    return s[0] if size is None else s


def residual_resampling(w, rng):
    """Residual resampling: deterministic ``floor(M w_i)`` copies, multinomial rest."""
    w = validate_weights(w)
    m = w.size
    counts = np.floor(m * w + 1e-9).astype(int)  # guard fp noise at integers
    residual = np.maximum(m * w - counts, 0.0)
    n_rest = m - counts.sum()
    if n_rest > 0:
        total = residual.sum()
        rest_w = residual / total if total > 0 else np.full(m, 1.0 / m)
        counts += rng.multinomial(n_rest, rest_w)
    picks = np.repeat(np.arange(m), counts)
    s = np.zeros((m, m))
    s[picks, np.arange(m)] = 1.0
    return s


def _rejuvenate(analysis, p_forecast, h_rej, rng):
    """Add N(0, h^2 P_zz^f) perturbations to every analysis member."""
    if h_rej <= 0:
        return analysis
    root = _symmetric_root(p_forecast, 0.5, floor=0.0)
    noise = root @ rng.standard_normal(analysis.shape)
    return analysis + h_rej * noise


def sir_analysis(forecast, obs, om, epsilon=0.0, h_rej=0.0, rng=None):
    """Sequential importance resampling with optional particle rejuvenation."""
    forecast = as_ensemble(forecast)
    rng = np.random.default_rng(rng)
    w = importance_weights(forecast, obs, om)
    coupling = resampling_coupling(w, epsilon)
    s = realize_resampling(coupling, rng)
    analysis = apply_transform(forecast, s)
    if h_rej > 0:
        analysis = _rejuvenate(analysis, ensemble_covariance(forecast), h_rej, rng)
    return AnalysisResult(
        analysis=analysis,
        transform=s,
        weights=w,
        diagnostics={"ess": effective_sample_size(w)},
    )


def enkf_perturbed_analysis(forecast, obs, om, rng=None, return_transform=True):
    """EnKF with perturbed observations, ``z_j^a = z_j^f - K (y_j^f + xi_j - y)``."""
    forecast = as_ensemble(forecast)
    rng = np.random.default_rng(rng)
    obs = np.atleast_1d(np.asarray(obs, dtype=float))
    m = forecast.shape[1]
    y_ens = om.observe(forecast)
    a_y = ensemble_deviations(y_ens)
    a_z = ensemble_deviations(forecast)
    p_yy = (a_y @ a_y.T) / (m - 1)
    p_zy = (a_z @ a_y.T) / (m - 1)
    gain = p_zy @ np.linalg.inv(p_yy + np.diag(om.r_diag))
    xi = np.sqrt(om.r_diag)[:, None] * rng.standard_normal((om.n_obs, m))
    perturbed_innov = y_ens + xi - obs[:, None]
    analysis = forecast - gain @ perturbed_innov

    s = None
    if return_transform:
        # s_ij = delta_ij - (y_i - ybar)^T (P_yy + R)^{-1} (y_j + xi_j - y) / (M-1)
        inv_innov = np.linalg.solve(p_yy + np.diag(om.r_diag), perturbed_innov)
        s = np.eye(m) - (a_y.T @ inv_innov) / (m - 1)
    return AnalysisResult(analysis=analysis, transform=s, diagnostics={})


def esrf_analysis(forecast, obs, om):
    """Deterministic ensemble square root filter.

    Mean update by the Kalman formula; deviations scaled by the unique
    symmetric square root ``D`` of ``Q = {I + A_y^T R^-1 A_y/(M-1)}^{-1}``.
    """
    forecast = as_ensemble(forecast)
    obs = np.atleast_1d(np.asarray(obs, dtype=float))
    m = forecast.shape[1]
    y_ens = om.observe(forecast)
    a_y = ensemble_deviations(y_ens)
    q_inv = np.eye(m) + (a_y.T @ (a_y / om.r_diag[:, None])) / (m - 1)
    q = np.linalg.inv(q_inv)
    d = _symmetric_root(0.5 * (q + q.T), 0.5)
    innov = obs - y_ens.mean(axis=1)
    # gain column g_i = [Q A_y^T R^-1 innov]_i / (M-1); columns of S sum to 1
    g = q @ (a_y.T @ (innov / om.r_diag)) / (m - 1)
    s = g[:, None] + d
    analysis = apply_transform(forecast, s)
    return AnalysisResult(analysis=analysis, transform=s, diagnostics={})


def etpf_transform(forecast, w):
    """Optimal-transport transform ``S = M T*`` between weights and uniform."""
    forecast = as_ensemble(forecast)
    m = forecast.shape[1]
    cost = squared_distance_cost(forecast)
    coupling = solve_optimal_coupling(cost, validate_weights(w), np.full(m, 1.0 / m))
    return coupling_to_transform(coupling), coupling


def etpf_analysis(forecast, obs, om, h_rej=0.0, rng=None):
    """Ensemble transform particle filter analysis."""
    forecast = as_ensemble(forecast)
    w = importance_weights(forecast, obs, om)
    s, coupling = etpf_transform(forecast, w)
    analysis = apply_transform(forecast, s)
    if h_rej > 0:
        rng = np.random.default_rng(rng)
        analysis = _rejuvenate(analysis, ensemble_covariance(forecast), h_rej, rng)
    return AnalysisResult(
        analysis=analysis,
        transform=s,
        weights=w,
        diagnostics={
            "ess": effective_sample_size(w),
            "lp_objective": coupling.objective,
        },
    )


def stochastic_etpf_analysis(forecast, obs, om, rng=None):
    """ETPF variant drawing member ``j`` from column ``j`` of ``S``."""
    forecast = as_ensemble(forecast)
    rng = np.random.default_rng(rng)
    w = importance_weights(forecast, obs, om)
    s, coupling = etpf_transform(forecast, w)
    m = s.shape[1]
    coupling_like = CouplingMatrix(
        t=s / m, row_marginal=w, col_marginal=np.full(m, 1.0 / m)
    )
    s_real = realize_resampling(coupling_like, rng)
    analysis = apply_transform(forecast, s_real)
    return AnalysisResult(
        analysis=analysis,
        transform=s_real,
        weights=w,
        diagnostics={
            "ess": effective_sample_size(w),
            "lp_objective": coupling.objective,
        },
    )


def apply_inflation(ens, alpha):
    """Multiplicative inflation ``z_i -> zbar + alpha (z_i - zbar)``."""
    if alpha < 1.0:
        raise ValueError("inflation factor must be >= 1")
    ens = as_ensemble(ens)
    mean = ensemble_mean(ens)[:, None]
    return mean + alpha * (ens - mean)
