"""Regret of the weighted NML density against a plug-in MLE density.

The optimal density pays the same regret whatever statistic is observed;
a density fitted by maximum likelihood to the whole batch does not.
"""

import warnings

import numpy as np

from nmwl import (ComparisonSet, FamilyInstance, ParameterSpace, generalized_regret,
                  log_density, mle_baseline, nmwl_log_density, sample_statistic,
                  single_observation_weights)

fam = FamilyInstance.folded_t(6, 6)
rng = np.random.default_rng(3)
theta = np.where(rng.random(12) < 0.3, 1.5, 0.0)
obs = ComparisonSet.from_arrays([sample_statistic(fam, th, rng) for th in theta], fam)
space = ParameterSpace.half_line()
row = single_observation_weights(0, 12, len(obs))

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    fit = mle_baseline(obs)
print(f"MLE baseline: p = {fit.p:.3f}, theta_alt = {fit.theta_alt:.3f}\n")

print(f"{'t':>6} {'NMWL regret':>12} {'MLE regret':>12}  (bits)")
for t in (0.1, 0.5, 1.0, 2.0, 4.0, 8.0):
    sub = obs.substitute(0, t)
    opt = generalized_regret(0, t, space, nmwl_log_density(0, space, row, sub), row, sub)
    mle = generalized_regret(0, t, space, log_density(fam, fit.theta_alt, t), row, sub)
    print(f"{t:6.1f} {opt / np.log(2):12.6f} {mle / np.log(2):12.6f}")
