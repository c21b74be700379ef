"""Lorenz-96 with 20 members: localization makes or breaks the filters.

Observing every other grid point of the 40-variable model with a small
ensemble, the global transport filter cannot track the truth, while both
localized filters comfortably beat the observation-noise baseline.
"""

from letf.harness import default_l96_config, run_twin_experiment

CYCLES = 500
SPIN_UP = 100

settings = [
    ("letkf", dict(inflation=1.02, r_loc_r=4.0)),
    ("letpf", dict(rejuvenation=0.2, r_loc_r=2.0, r_loc_c=2.0)),
    ("etpf", dict(rejuvenation=0.2)),  # no localization
]

print(f"{'filter':8s} {'rmse':>8s} {'diverged':>9s} {'wall s':>7s}")
for name, kw in settings:
    cfg = default_l96_config(filter_name=name, members=20, cycles=CYCLES,
                             spin_up=SPIN_UP, seed=1, **kw)
    summary = run_twin_experiment(cfg, out_dir="out_l96")
    print(f"{name:8s} {summary.rmse:8.3f} {str(summary.diverged):>9s} "
          f"{summary.wall_time_s:7.1f}")

print("\nObservation-noise baseline (sqrt(R)): 2.83 per component.")
print("Radii are in grid-index units; the localized transport filter also")
print("tapers its cost function, so distant components never mix.")
