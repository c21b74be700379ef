"""End-to-end acceptance suite.

Twelve numbered criteria, one test each, from LP optimality certificates
through full twin experiments.  Each test prints a single PASS/FAIL line with
the measured quantities; the slow experiment-scale checks state their runtime
budget and are asserted against it.
"""

import time
from itertools import permutations

import numpy as np

from letf.core import ObservationModel, ensemble_covariance, ensemble_deviations
from letf.filters import (
    esrf_analysis,
    etpf_analysis,
    realize_resampling,
    resampling_coupling,
    rng_stream,
)
from letf.harness import (
    default_l63_config,
    default_l96_config,
    mcmc_path_sampler,
    path_importance_sampler,
    qmc_single_step_experiment,
    run_twin_experiment,
)
from letf.localization import kernel_gaspari_cohn, kernel_triangular
from letf.transport import (
    check_cyclical_monotonicity,
    coupling_support_pairs,
    gaussian_optimal_map,
    solve_optimal_coupling,
    squared_distance_cost,
)

SQRT_R = np.sqrt(8.0)


def _report(criterion, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_01_lp_matches_permutation_enumeration():
    t_start = time.perf_counter()
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(2, 6))
        cost = rng.integers(0, 50, (m, m)).astype(float)
        uniform = np.full(m, 1.0 / m)
        cp = solve_optimal_coupling(cost, uniform, uniform)
        brute = min(cost[np.arange(m), perm].sum() / m
                    for perm in permutations(range(m)))
        worst = max(worst, abs(cp.objective - brute))
    elapsed = time.perf_counter() - t_start
    _report(1, worst < 1e-12 and elapsed < 10.0,
            f"200 instances, max objective gap {worst:.2e}, {elapsed:.1f}s (< 10s)")


def test_criterion_02_lp_optimality_certificates():
    rng = np.random.default_rng(101)
    worst_slack = 0.0
    worst_support = 0
    monotone_fail = 0
    for _ in range(200):
        m = int(rng.integers(3, 21))
        z = rng.standard_normal((2, m)) * rng.uniform(0.5, 3.0)
        cost = squared_distance_cost(z)
        w = rng.dirichlet(rng.uniform(0.3, 3.0, m))
        uniform = np.full(m, 1.0 / m)
        cp = solve_optimal_coupling(cost, w, uniform)
        support = cp.t > 1e-9
        slack = cost - cp.dual_row[:, None] - cp.dual_col[None, :]
        worst_slack = max(worst_slack,
                          float(np.max(np.abs(slack[support]))),
                          float(max(0.0, -np.min(slack))))
        worst_support = max(worst_support, int(support.sum()) - (2 * m - 1))
        pairs = coupling_support_pairs(z, cp)
        if len(pairs) >= 2 and not check_cyclical_monotonicity(pairs)["is_monotone"]:
            monotone_fail += 1
    ok = worst_slack < 1e-7 and worst_support <= 0 and monotone_fail == 0
    _report(2, ok,
            f"200 instances, slack {worst_slack:.2e} (< 1e-7), support excess "
            f"{worst_support}, monotonicity failures {monotone_fail}")


def test_criterion_03_esrf_algebra():
    rng = np.random.default_rng(102)
    worst_d = worst_cov = worst_col = 0.0
    for _ in range(100):
        n_z = int(rng.integers(1, 6))
        n_y = int(rng.integers(1, min(n_z, 3) + 1))
        m = int(rng.integers(3, 41))
        ens = rng.standard_normal((n_z, m)) * rng.uniform(0.5, 2.0)
        om = ObservationModel(r_diag=rng.uniform(0.5, 4.0, n_y),
                              obs_indices=np.arange(n_y))
        obs = rng.standard_normal(n_y)
        result = esrf_analysis(ens, obs, om)

        a_y = ensemble_deviations(om.observe(ens))
        a_z = ensemble_deviations(ens)
        r = np.diag(om.r_diag)
        # direct Q vs the Woodbury form of the same matrix
        q1 = np.linalg.inv(np.eye(m) + a_y.T @ (a_y / om.r_diag[:, None]) / (m - 1))
        q2 = np.eye(m) - a_y.T @ np.linalg.inv(
            a_y @ a_y.T / (m - 1) + r) @ a_y / (m - 1)
        worst_d = max(worst_d, float(np.max(np.abs(q1 - q2))))

        p_yy = a_y @ a_y.T / (m - 1)
        gain = (a_z @ a_y.T / (m - 1)) @ np.linalg.inv(p_yy + r)
        cov_expected = a_z @ a_z.T / (m - 1) - gain @ (a_y @ a_z.T / (m - 1))
        worst_cov = max(worst_cov, float(np.max(np.abs(
            ensemble_covariance(result.analysis) - cov_expected))))
        worst_col = max(worst_col, float(np.max(np.abs(
            result.transform.sum(axis=0) - 1.0))))
    ok = worst_d < 1e-8 and worst_cov < 1e-9 and worst_col < 1e-10
    _report(3, ok,
            f"100 instances, D gap {worst_d:.2e} (< 1e-8), covariance gap "
            f"{worst_cov:.2e} (< 1e-9), column-sum gap {worst_col:.2e} (< 1e-10)")


def test_criterion_04_etpf_mean_identity():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(100):
        n_z = int(rng.integers(1, 5))
        m = int(rng.integers(3, 31))
        ens = rng.standard_normal((n_z, m)) * rng.uniform(0.5, 3.0)
        om = ObservationModel(r_diag=rng.uniform(1.0, 8.0, 1),
                              obs_indices=np.array([0]))
        result = etpf_analysis(ens, rng.standard_normal(1), om)
        gap = np.max(np.abs(result.analysis.mean(axis=1) - ens @ result.weights))
        worst = max(worst, float(gap))
    _report(4, worst < 1e-10,
            f"100 instances, max mean-identity gap {worst:.2e} (< 1e-10)")


def test_criterion_05_resampling_unbiasedness():
    t_start = time.perf_counter()
    w = np.array([0.5, 0.3, 0.2])
    n = 10**5
    details = []
    ok = True
    for eps in (0.0, 1.0):
        cp = resampling_coupling(w, epsilon=eps)
        rng = rng_stream(104, int(eps))
        draws = realize_resampling(cp, rng, size=n)
        w_hat = draws.mean(axis=(0, 2))
        p = 3.0 * cp.t  # column selection probabilities
        sigma = np.sqrt(np.sum(p * (1.0 - p), axis=1)) / (3.0 * np.sqrt(n))
        dev = np.abs(w_hat - w)
        ok = ok and bool(np.all(dev <= 4.0 * sigma))
        details.append(f"eps={eps:g} max |dev|/sigma "
                       f"{np.max(dev / sigma):.2f}")
    elapsed = time.perf_counter() - t_start
    ok = ok and elapsed < 5.0
    _report(5, ok, f"{'; '.join(details)} (<= 4), {elapsed:.1f}s (< 5s)")


def test_criterion_06_qmc_convergence_rates():
    t_start = time.perf_counter()
    out = qmc_single_step_experiment(seed=0)
    s_etpf = out["slopes"]["etpf_mean_slope"]
    s_rs = out["slopes"]["resample_mean_slope"]
    elapsed = time.perf_counter() - t_start
    ok = -1.2 <= s_etpf <= -0.8 and -0.65 <= s_rs <= -0.35 and elapsed < 600
    _report(6, ok,
            f"transform slope {s_etpf:.3f} (in [-1.2, -0.8]), resampling slope "
            f"{s_rs:.3f} (in [-0.65, -0.35]), {elapsed:.0f}s (< 600s)")


def _pilot_then_full(base_cfg, param, values, pilot_cycles=400, pilot_spin=100,
                     top_k=1):
    """Select the sweep parameter with short pilot runs, score full runs.

    Short pilots rank the candidate values; the ``top_k`` best-ranked values
    are then scored at full length and the lowest full-length RMSE wins.  The
    full-length pass matters: parameters can look good over a short window but
    suffer rare divergence episodes that only long runs expose.
    """
    ranked = []
    for value in values:
        cfg = type(base_cfg)(**{**base_cfg.__dict__})
        setattr(cfg, param, value)
        cfg.cycles, cfg.spin_up = pilot_cycles, pilot_spin
        summary = run_twin_experiment(cfg)
        if not summary.diverged and np.isfinite(summary.rmse):
            ranked.append((summary.rmse, value))
    ranked.sort()
    best_value, best_summary = None, None
    for _, value in ranked[:top_k]:
        cfg = type(base_cfg)(**{**base_cfg.__dict__})
        setattr(cfg, param, value)
        summary = run_twin_experiment(cfg)
        if (best_summary is None
                or (not summary.diverged and summary.rmse < best_summary.rmse)):
            best_value, best_summary = value, summary
    return best_value, best_summary


def test_criterion_07_lorenz63_sir_large_ensemble():
    t_start = time.perf_counter()
    base = default_l63_config(filter_name="sir", members=1000,
                              cycles=5000, spin_up=200, seed=1)
    grid = tuple(np.round(np.arange(0.04, 0.4001, 0.04), 4))
    best_h, summary = _pilot_then_full(base, "rejuvenation", grid, top_k=3)
    elapsed = time.perf_counter() - t_start
    ok = 1.1 <= summary.rmse <= 1.75 and elapsed < 1200
    _report(7, ok,
            f"SIR M=1000, h={best_h}, RMSE {summary.rmse:.3f} (in [1.1, 1.75]), "
            f"{elapsed:.0f}s (< 1200s)")


def test_criterion_08_lorenz63_skill_ordering():
    t_start = time.perf_counter()
    enkf_base = default_l63_config(filter_name="enkf", members=50,
                                   cycles=5000, spin_up=200, seed=1)
    infl_grid = tuple(np.round(np.arange(1.0, 1.1201, 0.02), 4))
    best_infl, enkf = _pilot_then_full(enkf_base, "inflation", infl_grid)

    etpf_base = default_l63_config(filter_name="etpf", members=50,
                                   cycles=5000, spin_up=200, seed=1)
    rej_grid = tuple(np.round(np.arange(0.04, 0.4001, 0.04), 4))
    best_h, etpf = _pilot_then_full(etpf_base, "rejuvenation", rej_grid, top_k=2)

    elapsed = time.perf_counter() - t_start
    bound = 0.9 * SQRT_R
    ok = etpf.rmse <= enkf.rmse and enkf.rmse <= bound and etpf.rmse <= bound
    _report(8, ok,
            f"M=50: ETPF (h={best_h}) RMSE {etpf.rmse:.3f} <= EnKF "
            f"(infl={best_infl}) RMSE {enkf.rmse:.3f}, both <= {bound:.3f}, "
            f"{elapsed:.0f}s")


def test_criterion_09_lorenz96_localization():
    t_start = time.perf_counter()
    letkf = run_twin_experiment(default_l96_config(
        filter_name="letkf", members=20, inflation=1.02, r_loc_r=4.0,
        cycles=2000, spin_up=500, seed=1))
    letpf = run_twin_experiment(default_l96_config(
        filter_name="letpf", members=20, rejuvenation=0.2,
        r_loc_r=2.0, r_loc_c=2.0, cycles=2000, spin_up=500, seed=1))
    glob = run_twin_experiment(default_l96_config(
        filter_name="etpf", members=20, rejuvenation=0.2,
        cycles=2000, spin_up=500, seed=1))
    elapsed = time.perf_counter() - t_start
    glob_bad = glob.diverged or (glob.rmse > letkf.rmse and glob.rmse > letpf.rmse)
    ok = (letkf.rmse < SQRT_R and letpf.rmse < SQRT_R and glob_bad
          and elapsed < 1800)
    glob_txt = "diverged" if glob.diverged else f"RMSE {glob.rmse:.3f}"
    _report(9, ok,
            f"M=20: LETKF r=4 RMSE {letkf.rmse:.3f}, localized ETPF r=2 RMSE "
            f"{letpf.rmse:.3f} (both < {SQRT_R:.3f}), global ETPF {glob_txt}, "
            f"{elapsed:.0f}s (< 1800s)")


def test_criterion_10_gaussian_optimal_map():
    rng = np.random.default_rng(110)
    worst_push = 0.0
    worst_sym = 0.0
    min_eig = np.inf
    for _ in range(100):
        d = int(rng.integers(1, 7))
        b1 = rng.standard_normal((d, d))
        b2 = rng.standard_normal((d, d))
        p_f = b1 @ b1.T + 0.05 * np.eye(d)
        p_a = b2 @ b2.T + 0.05 * np.eye(d)
        a = gaussian_optimal_map(p_f, p_a)
        worst_push = max(worst_push, float(np.linalg.norm(a @ p_f @ a.T - p_a)))
        worst_sym = max(worst_sym, float(np.max(np.abs(a - a.T))))
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(a))))
    ok = worst_push < 1e-8 and worst_sym < 1e-12 and min_eig > 0
    _report(10, ok,
            f"100 SPD pairs, pushforward error {worst_push:.2e} (< 1e-8), "
            f"asymmetry {worst_sym:.2e}, min eigenvalue {min_eig:.2e} (> 0)")


def test_criterion_11_localization_kernels():
    # Gaspari-Cohn branch values at s = 1 from the two polynomial formulas
    s = 1.0
    inner = 1 - (5 / 3) * s**2 + (5 / 8) * s**3 + 0.5 * s**4 - 0.25 * s**5
    outer = (-(2 / 3) / s + 4 - 5 * s + (5 / 3) * s**2 + (5 / 8) * s**3
             - 0.5 * s**4 + (1 / 12) * s**5)
    branch_gap = abs(inner - outer)
    gc_ok = (kernel_gaspari_cohn(0.0, 1.0) == 1.0
             and kernel_gaspari_cohn(2.0, 1.0) < 1e-12
             and kernel_gaspari_cohn(3.5, 1.0) == 0.0
             and abs(kernel_gaspari_cohn(1.0, 1.0) - inner) < 1e-12
             and branch_gap < 1e-12)
    tri_ok = (kernel_triangular(0.0, 2.0) == 1.0
              and kernel_triangular(1.0, 2.0) == 0.75
              and kernel_triangular(2.0, 2.0) == 0.5
              and kernel_triangular(4.0, 2.0) == 0.0
              and kernel_triangular(9.0, 2.0) == 0.0)
    _report(11, gc_ok and tri_ok,
            f"Gaspari-Cohn branch gap at s=1 {branch_gap:.2e} (< 1e-12), "
            f"value 5/24 = {inner:.6f}; triangular values exact")


def test_criterion_12_smoother_cross_validation():
    # scalar model z' = a z, several direct observations: the posterior of the
    # initial condition is Gaussian in closed form
    a, r, n_obs = 0.9, 0.5, 4
    om = ObservationModel(r_diag=np.array([r]), obs_indices=np.array([0]))
    rng = rng_stream(112)
    z0_true = rng.standard_normal()
    obs_seq = [np.array([z0_true * a**k + np.sqrt(r) * rng.standard_normal()])
               for k in range(1, n_obs + 1)]
    precision = 1.0 + sum(a ** (2 * k) / r for k in range(1, n_obs + 1))
    mean_exact = sum(a**k * obs_seq[k - 1][0] / r
                     for k in range(1, n_obs + 1)) / precision
    var_exact = 1.0 / precision

    step = lambda z: a * z
    is_out = path_importance_sampler(
        step_fn=step, prior_sampler=lambda n, rg: rg.standard_normal((1, n)),
        obs_seq=obs_seq, om=om, n_samples=40000, rng=rng_stream(113))
    is_mean = float(is_out["paths"][0, 0] @ is_out["weights"])
    is_sigma = np.sqrt(var_exact / is_out["ess"])

    mcmc_out = mcmc_path_sampler(
        step_fn=step, log_prior=lambda z0: -0.5 * float(z0 @ z0),
        obs_seq=obs_seq, om=om, proposal_std=0.8, n_samples=60000,
        rng=rng_stream(114), z0_init=np.array([0.0]))
    chain = mcmc_out["samples"][5000:, 0]
    # effective chain size from the integrated autocorrelation time
    lags = np.arange(1, 200)
    c = np.array([np.corrcoef(chain[:-k], chain[k:])[0, 1] for k in lags])
    tau = 1.0 + 2.0 * np.sum(c[c > 0.05])
    mcmc_sigma = np.sqrt(var_exact * tau / chain.size)

    dev_is = abs(is_mean - mean_exact)
    dev_mcmc = abs(chain.mean() - mean_exact)
    ok = dev_is <= 3 * is_sigma and dev_mcmc <= 3 * mcmc_sigma
    _report(12, ok,
            f"IS dev {dev_is:.4f} <= 3 sigma {3 * is_sigma:.4f}; MCMC dev "
            f"{dev_mcmc:.4f} <= 3 sigma {3 * mcmc_sigma:.4f} "
            f"(acceptance {mcmc_out['acceptance_rate']:.2f})")
