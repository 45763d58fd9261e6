"""
Ties are knife-edge events under smooth private utilities
==========================================================

The indifference construction above relies on the designer knowing the
agent's utility.  When the agent's private utility is drawn from a family
with a density (a base function plus a Gaussian coefficient vector over a
finite basis), two distinct outcome lotteries are almost never exactly
tied.  This script estimates the tie frequency by Monte Carlo and then
builds a control where the tie is structural, so the frequency is 1.
"""

import numpy as np

from eqlab.mechanism import Mechanism, OutcomeSet, tie_frequency_experiment
from eqlab.prefs import OutcomeSpace, PrevalentFamily, UtilityFn

# %%
# A mechanism with three actions and two consequences.  Outcomes live on
# the six action-consequence pairs, and the family loads one Gaussian
# coefficient on each pair.  The base utility is flat; all variation
# comes from the draw.

mech = Mechanism(np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]))
space = OutcomeSpace(labels=tuple(f"ac{k}" for k in range(6)))
family = PrevalentFamily(
    space=space,
    base=UtilityFn(space=space, table=(0.0,) * 6),
    lambda_density=("gaussian", 0.0, 1.0),
    dim=6,
)

# %%
# The default generators push a point mass on each action through the
# mechanism, giving pairwise distinct joint lotteries.  A sampled utility
# ties two of them only if its coefficients land on a lower-dimensional
# hyperplane, an event of probability zero under the density.

outcomes = OutcomeSet.from_mechanism(mech)
freq = tie_frequency_experiment(family, outcomes, n_samples=20_000, seed=7)
print(f"tie frequency over 20k draws (distinct lotteries): {freq}")

# %%
# Control: feed in two identical action lotteries.  Every draw values the
# two copies equally, so the multiplicity frequency is exactly 1
# regardless of the family.

same = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]])
tied = OutcomeSet.from_mechanism(mech, action_lotteries=same)
freq = tie_frequency_experiment(family, tied, n_samples=5_000, seed=7)
print(f"tie frequency with a duplicated lottery: {freq}")
