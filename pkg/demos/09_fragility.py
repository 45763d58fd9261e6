"""
Fragility: informative play dies under taste shocks
====================================================

Signal-responsive strategies like proportional response keep an agent
indifferent only at one exact public-good weight kappa.  Perturb each
agent's private kappa_i around the common value and the calibration
breaks for almost every draw: the prescribed interior action is no longer
a best response, and the size of the violation has a closed form.
"""

import numpy as np

from eqlab.strategies import GameParams
from eqlab.verifier import fragility_experiment

params = GameParams(n_agents=2, delta=0.6, kappa=0.75)

# %%
# Uniform shocks on [0.7, 0.8] around kappa-bar = 0.75.  Best responses
# stay at the corners (the stage game is linear in own action), they do
# not depend on the observed signal, and the mean IC violation matches
# (1 - delta) * E|kappa_i / kappa-bar - 1| over the unit action range.

report = fragility_experiment(params, ("uniform", 0.7, 0.8),
                              n_draws=5_000, seed=9)
analytic = (1 - params.delta) * np.mean(np.abs(report.kappas / 0.75 - 1.0))
print("interior best-response frequency:", report.interior_br_frequency)
print("state-dependent best-response frequency:",
      report.br_state_dependence_frequency)
print("mean IC violation:", report.mean_ic_violation)
print("analytic slope formula:", analytic)

# %%
# The knife edge itself: a point mass exactly at kappa-bar keeps every
# draw calibrated, so the violation is zero and interior actions remain
# best responses.

report = fragility_experiment(params, ("point", 0.75), n_draws=200, seed=9)
print("\npoint mass at 0.75: mean violation =", report.mean_ic_violation,
      " interior frequency =", report.interior_br_frequency)

# %%
# Any one-sided displacement reappears linearly: kappa_i = 0.8 against a
# calibration at 0.75 gives exactly (1 - delta) * (0.8 / 0.75 - 1).

report = fragility_experiment(params, ("point", 0.8), n_draws=200, seed=9)
print("point mass at 0.80: mean violation =", report.mean_ic_violation,
      " vs", (1 - params.delta) * (0.8 / 0.75 - 1.0))
