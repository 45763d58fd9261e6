"""
Classifying equilibria by informational discipline
===================================================

Six binary properties separate the strategy profiles in this package:
public equilibrium (measurable with respect to the public filtration),
informational-subset play, stage-Nash, belief-freeness, the atonement
pattern, and renegotiation-proofness on probed continuation values.
This script runs the whole classifier battery on the canonical suite
and prints the resulting matrix.
"""

from eqlab.monitoring import SignalStructure
from eqlab.strategies import (
    GameParams,
    atonement_machines,
    constant_machines,
    grim_machines,
    proportional_response_machines,
    public_proportional_machines,
)
from eqlab.verifier import classify_all

sum2 = SignalStructure(kind="deterministic_public_sum", n_agents=2)
sum3 = SignalStructure(kind="deterministic_public_sum", n_agents=3)
perfect2 = SignalStructure(kind="perfect", n_agents=2)

p2 = GameParams(n_agents=2, delta=0.5, kappa=0.75)
p3 = GameParams(n_agents=3, delta=0.6, kappa=0.75)
pr_params = GameParams(n_agents=2, delta=0.75, kappa=0.75, x=(0.6, 0.6))

suite = {
    "public proportional N=3": (
        public_proportional_machines(
            GameParams(n_agents=3, delta=0.6, kappa=0.75, x=(0.5,) * 3),
            (0.5,) * 3),
        sum3,
        GameParams(n_agents=3, delta=0.6, kappa=0.75, x=(0.5,) * 3),
    ),
    "atonement N=2": (atonement_machines(p2), sum2, p2),
    "atonement N=3": (atonement_machines(p3), sum3, p3),
    "proportional response": (
        proportional_response_machines(pr_params, (0.6, 0.6)),
        perfect2,
        pr_params,
    ),
    "grim trigger": (grim_machines(p2), sum2, p2),
    "all zero": (constant_machines(p3, 0.0), sum3, p3),
}

# %%
# Flags come back as True/False, or None when a latent randomizing device
# makes the probe inapplicable.

header = ["ppe", "info_subset", "stage_nash", "belief_free", "atonement",
          "reneg_proof"]
print(f"{'profile':26s}" + "".join(f"{h:>13s}" for h in header))
for name, (machines, ss, params) in suite.items():
    flags = classify_all(machines, ss, params)
    cells = "".join(f"{str(flags[h]):>13s}" for h in header)
    print(f"{name:26s}{cells}")

# %%
# The headline exclusion: an atonement profile conditions on who deviated,
# which the public filtration cannot express, so no profile is both a
# strictly public equilibrium and an atonement profile.  Atonement with
# N = 2 looks public only because common knowledge of the signal lets both
# players reconstruct the deviator; the strict public-path classifier
# separates the two readings.

from eqlab.verifier import classify_ppe

machines = atonement_machines(p2)
print("\natonement N=2, common-knowledge filtration:",
      classify_ppe(machines, sum2))
print("atonement N=2, strict public-path filtration:",
      classify_ppe(machines, sum2, filtration="public-path"))
