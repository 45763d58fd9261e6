"""Indifference mechanisms and repeated-game equilibrium verification.

The package has three layers:

* single-agent design: utility families with idiosyncratic coefficients
  (:mod:`eqlab.prefs`) and the indifference-mechanism construction with its
  incentive checks (:mod:`eqlab.mechanism`);
* a repeated public-goods game: monitoring technologies
  (:mod:`eqlab.monitoring`) and contribution strategy machines
  (:mod:`eqlab.strategies`);
* verification: discounted values, one-shot deviation gains, equilibrium
  classifiers, and fragility experiments (:mod:`eqlab.verifier`), plus a
  reproducible experiment runner (:mod:`eqlab.cli`).
"""

from eqlab.rng import stream_generator

__all__ = ["stream_generator"]
__version__ = "0.1.0"
