"""Fitting local kernels by per-site least squares, with standard errors.

Every site is an independent regression of its next value on the lagged
values inside its neighborhood, so the fit parallelizes trivially and
the usual OLS standard errors apply coefficient by coefficient.

Run from the repository root:  python3 demos/03_fit_and_uncertainty.py
"""

import numpy as np

from liargrid import (
    NoiseSpec,
    box_neighborhood,
    fit_all,
    linear_to_site,
    random_stable_kernels,
    simulate_liar,
)

shape = (10, 10)
truth = random_stable_kernels(shape, 1, target_norm=0.8, seed=21)
series = simulate_liar(truth, 3000, NoiseSpec(sigma=1.0, seed=22))

neighborhoods = [
    box_neighborhood(linear_to_site(i, shape), shape, 1)
    for i in range(series.n_sites)
]
report = fit_all(series, neighborhoods)
print(f"fitted {len(report)} sites, {len(report.errors)} failures")

errs = [
    np.linalg.norm(report.fits[i].coeffs_by_lag() - truth.coeffs[i])
    for i in range(series.n_sites)
]
print(f"mean per-site kernel error (Frobenius): {np.mean(errs):.4f}")

# Standard errors: check how many true coefficients the 95% intervals
# cover.  Around 95% is healthy; far less means the errors are wrong.
covered = total = 0
for i in range(series.n_sites):
    fit = report.fits[i]
    if fit.se is None:
        continue
    true_vec = truth.coeffs[i].ravel()
    hit = np.abs(fit.coeffs - true_vec) <= 1.96 * fit.se
    covered += int(hit.sum())
    total += hit.size
print(f"95% interval coverage over all coefficients: {covered / total:.3f}")

center = report.fit_for((5, 5))
print(f"\nsite (5, 5): rss {center.rss:.2f}, noise variance "
      f"estimate {center.sigma2:.4f}")
print("coefficient +/- standard error:")
for c, s in zip(center.coeffs, center.se):
    print(f"  {c:+.4f} +/- {s:.4f}")
