"""
Config-driven runs, report bundles, and bit-exact replay
=========================================================

Every experiment in this package can be driven from a JSON config with a
mandatory seed.  A run writes a bundle (report.json, summary.txt, CSV
tables) atomically; replaying the bundle's own config must reproduce
every payload number bit-exactly.  The same entry points back the
``eqlab`` command-line tool.
"""

import json
import tempfile
from pathlib import Path

from eqlab.cli import load_bundle, replay, run

config = {
    "schema": "eqlab-config/v1",
    "kind": "sweep",
    "name": "demo-grim-sweep",
    "seed": 99,
    "game": {"n_agents": 2},
    "monitoring": {"kind": "deterministic_public_sum"},
    "strategy": {"name": "grim"},
    "grid": {"kappa": [0.6, 0.75], "delta": [0.6, 0.647, 0.687, 0.7]},
    "tol": 1e-9,
}

out_dir = Path(tempfile.mkdtemp(prefix="eqlab-demo-"))
bundle = run(config, out_dir=out_dir)
print("bundle files:", sorted(p.name for p in out_dir.iterdir()))

# %%
# The summary prints every number exactly as stored in the payload; the
# CSV mirrors the rows with 17 significant digits, enough to round-trip
# doubles losslessly.

print("\nsummary.txt:")
print((out_dir / "summary.txt").read_text())

# %%
# Replay loads the stored config back, reruns it, and compares payloads
# number by number.  Any divergence is reported with its JSON path.

doc = load_bundle(out_dir)
ok, divergence = replay(doc)
print("replay bit-exact:", ok, " divergence:", divergence)

# %%
# Tamper with the recorded seed and replay notices (a sweep of analytic
# checks is seed-free, so tamper with a grid value instead).

doc["config"]["grid"]["delta"][1] = 0.65
ok, divergence = replay(doc)
print("after editing the config: bit-exact =", ok,
      " first divergence =", divergence)
