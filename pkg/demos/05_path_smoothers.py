"""Path-space smoothing baselines on a scalar linear-Gaussian model.

The model is ``z' = a z`` with Gaussian observations, so the smoothing
distribution of the initial condition is available in closed form.  Both the
weighted-trajectory importance sampler and the random-walk Metropolis sampler
are checked against it.
"""

import numpy as np

from letf.core import ObservationModel
from letf.filters import rng_stream
from letf.harness import mcmc_path_sampler, path_importance_sampler

a = 0.9
r = 0.5
n_obs = 4
om = ObservationModel(r_diag=np.array([r]), obs_indices=np.array([0]))

rng = rng_stream(0)
z0_true = rng.standard_normal()
truth = z0_true * a ** np.arange(1, n_obs + 1)
obs_seq = [np.array([t + np.sqrt(r) * rng.standard_normal()]) for t in truth]

# closed form: the whole path is a linear function of z0, so the posterior of
# z0 is Gaussian with precision 1 + sum_k a^{2k} / r
precision = 1.0 + sum(a ** (2 * k) / r for k in range(1, n_obs + 1))
mean = sum(a**k * obs_seq[k - 1][0] / r for k in range(1, n_obs + 1)) / precision
print(f"closed form: mean {mean:.4f}, std {precision**-0.5:.4f}")

step = lambda z: a * z

is_out = path_importance_sampler(
    step_fn=step,
    prior_sampler=lambda n, rg: rg.standard_normal((1, n)),
    obs_seq=obs_seq, om=om, n_samples=20000, rng=rng_stream(1))
is_mean = float(is_out["paths"][0, 0] @ is_out["weights"])
print(f"importance sampler: mean {is_mean:.4f}, ESS {is_out['ess']:.0f}")

mcmc_out = mcmc_path_sampler(
    step_fn=step,
    log_prior=lambda z0: -0.5 * float(z0 @ z0),
    obs_seq=obs_seq, om=om, proposal_std=0.8, n_samples=20000,
    rng=rng_stream(2), z0_init=np.array([0.0]))
chain = mcmc_out["samples"][2000:, 0]
print(f"metropolis: mean {chain.mean():.4f}, std {chain.std():.4f}, "
      f"acceptance {mcmc_out['acceptance_rate']:.2f}")
