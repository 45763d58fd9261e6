"""Acceptance suite: one test per shipped deliverable, run from the checked-in configs.

Every test executes the corresponding ``configs/*.json`` file through
``eqlab.cli.run`` exactly as a user would (``eqlab <kind> --config ...``),
then asserts the persisted report bundle against independently derived
oracles.  Expected numbers that appear below as fractions or closed forms
were hand-derived and cross-checked in the unit suites; they are frozen
here on purpose so a regression in any layer (machine, verifier, CLI,
serialization) trips a single readable line in ``pytest -v``.

Runtime budgets are asserted on the wall-clock time of the ``run`` call,
which includes writing the bundle to disk.
"""

import json
import time
from collections import namedtuple

import pytest

from eqlab.cli import load_bundle, replay, run

Record = namedtuple("Record", "doc elapsed out_dir")

CONFIG_NAMES = [
    "c01_indifference_instances",
    "c02_tie_frequency",
    "c03_proportional_response_grid",
    "c04_grim_threshold",
    "c05_public_proportional_threshold",
    "c06_atonement_recursion",
    "c06_atonement_threshold",
    "c07_classifier_matrix",
    "c08_fragility",
    "c09_belief_mixing",
    "c10_contractor",
    "c11_monitoring_suites",
]


@pytest.fixture(scope="session")
def shipped(tmp_path_factory, configs_dir):
    """Run a shipped config once per session and cache the on-disk bundle."""
    cache = {}

    def runner(name: str) -> Record:
        if name not in cache:
            cfg = json.loads((configs_dir / f"{name}.json").read_text())
            out_dir = tmp_path_factory.mktemp(name)
            start = time.perf_counter()
            run(cfg, out_dir=out_dir)
            elapsed = time.perf_counter() - start
            cache[name] = Record(load_bundle(out_dir), elapsed, out_dir)
        return cache[name]

    return runner


def test_criterion_01_indifference_exactness_on_random_instances(shipped):
    rec = shipped("c01_indifference_instances")
    payload = rec.doc["payload"]
    assert rec.doc["exit_code"] == 0
    worked = payload["worked"]
    assert worked["security_value"] == 1.0
    assert worked["action_utilities"] == [1.0, 1.0]
    assert worked["ic_feasible"] is True
    inst = payload["instances"]
    assert inst["count"] == 1000
    assert inst["max_actions"] <= 8 and inst["max_consequences"] <= 8
    assert inst["max_abs_gap"] <= 1e-9
    assert payload["ok"] is True
    assert rec.elapsed < 10.0


def test_criterion_02_tie_frequency_zero_and_constructed_control(shipped):
    rec = shipped("c02_tie_frequency")
    payload = rec.doc["payload"]
    assert rec.doc["exit_code"] == 0
    assert payload["n_samples"] == 10**5
    assert payload["tie_tol"] == 1e-12
    cases = {c["name"]: c for c in payload["cases"]}
    assert cases["prevalent-family"]["frequency"] == 0.0
    assert cases["constructed-tie"]["frequency"] == 1.0
    assert all(c["ok"] for c in payload["cases"])
    assert rec.elapsed < 30.0


def test_criterion_03_proportional_response_grid_gains_vanish(shipped):
    rec = shipped("c03_proportional_response_grid")
    assert rec.doc["exit_code"] == 0
    assert rec.doc["config"]["monitoring"]["kind"] == "private_neighbor"
    rows = rec.doc["payload"]["rows"]
    assert len(rows) == 5 * 5 * 3
    constructible = [r for r in rows if not r.get("error")]
    # the remaining cells fail the construction feasibility bound, not the
    # deviation check; the grid is deterministic so the count is frozen
    assert len(constructible) == 47
    for row in constructible:
        assert row["feasible"] is True
        assert abs(row["worst_gain"]) <= 1e-9
        assert row["residual"] <= 1e-9
    assert rec.elapsed < 10.0


def test_criterion_04_grim_threshold_brackets_and_closed_form_gain(shipped):
    rec = shipped("c04_grim_threshold")
    assert rec.doc["exit_code"] == 0
    rows = {
        r["delta"]: r for r in rec.doc["payload"]["rows"] if r["kappa"] == 0.6
    }
    assert rows[0.687]["feasible"] is True
    failing = rows[0.647]
    assert failing["feasible"] is False
    # best one-shot defection against grim: (1-d)(1-k) today, -d(kN-1) forever
    delta, kappa, n = 0.647, 0.6, 2
    oracle = (1 - delta) * (1 - kappa) - delta * (kappa * n - 1)
    assert failing["worst_gain"] > 0
    assert failing["worst_gain"] == pytest.approx(oracle, abs=1e-9)
    assert rec.elapsed < 5.0


def test_criterion_05_public_proportional_boundary_brackets(shipped):
    rec = shipped("c05_public_proportional_threshold")
    assert rec.doc["exit_code"] == 0
    payload = rec.doc["payload"]
    assert payload["feasibility"] == "construction"
    rows = {r["delta"]: r for r in payload["rows"]}
    assert rows[0.52]["feasible"] is True
    assert rows[0.48]["feasible"] is False
    assert "feasibility bound" in rows[0.48]["error"]
    assert rec.elapsed < 10.0


def test_criterion_06_atonement_threshold_and_worked_recursion(shipped):
    sweep = shipped("c06_atonement_threshold")
    assert sweep.doc["exit_code"] == 0
    rows = {r["delta"]: r for r in sweep.doc["payload"]["rows"]}
    assert rows[0.34]["feasible"] is True
    failing = rows[0.32]
    assert failing["feasible"] is False
    # one defection, then atone: the tail telescopes to (1-d)(1-k-dk)
    delta, kappa = 0.32, 0.75
    oracle = (1 - delta) * (1 - kappa - delta * kappa)
    assert failing["worst_gain"] == pytest.approx(oracle, abs=1e-9)

    sim = shipped("c06_atonement_recursion")
    assert sim.doc["exit_code"] == 0
    states = sim.doc["payload"]["states"]
    # after the 0.5 defection the expected-total state must hit 5/3 exactly
    assert states[1][0][0] == 5 / 3
    assert states[1][1][0] == 5 / 3
    actions = sim.doc["payload"]["actions"]
    assert actions[0] == [1.0, 0.5]
    assert actions[1] == pytest.approx([2 / 3, 1.0], abs=1e-12)
    assert actions[2] == [1.0, 1.0]

    assert sweep.elapsed + sim.elapsed < 10.0


def test_criterion_07_classifier_matrix_and_exclusion(shipped):
    rec = shipped("c07_classifier_matrix")
    assert rec.doc["exit_code"] == 0
    payload = rec.doc["payload"]
    assert payload["ok"] is True
    profiles = {p["name"]: p for p in payload["profiles"]}

    flags = profiles["public-proportional-n3"]["flags"]
    assert flags["ppe"] is True
    assert flags["belief_free"] is False
    assert flags["atonement"] is False

    assert profiles["atonement-n3"]["flags"]["ppe"] is False

    flags = profiles["atonement-n2"]["flags"]
    assert flags["ppe"] is True
    assert flags["belief_free"] is False
    assert flags["atonement"] is True
    assert flags["reneg_proof"] is True

    flags = profiles["proportional-response-n2"]["flags"]
    assert flags["info_subset"] is False
    assert flags["belief_free"] is True

    assert profiles["grim-n2"]["flags"]["reneg_proof"] is False
    assert profiles["all-zero-n3"]["flags"]["stage_nash"] is True

    # exclusion: under the public-path filtration no profile is both a
    # public equilibrium and an atonement profile
    for prof in payload["profiles"]:
        assert prof["exclusion_ok"] is True
        assert not (prof["ppe_public_path"] and prof["flags"]["atonement"])
    assert rec.elapsed < 60.0


def test_criterion_08_fragility_of_the_informative_strategy(shipped):
    rec = shipped("c08_fragility")
    assert rec.doc["exit_code"] == 0
    payload = rec.doc["payload"]
    assert payload["n_draws"] == 10**4
    assert payload["interior_br_frequency"] == 0.0
    assert payload["br_state_dependence_frequency"] == 0.0
    assert payload["mean_ic_violation"] > 0
    assert payload["abs_difference"] <= 1e-6
    assert payload["ok"] is True
    assert rec.elapsed < 30.0


def test_criterion_09_belief_based_mixing_indifference(shipped):
    rec = shipped("c09_belief_mixing")
    assert rec.doc["exit_code"] == 0
    payload = rec.doc["payload"]
    assert payload["feasible"] is True
    assert payload["mixing_states"], "no on-path mixing states were checked"
    for entry in payload["mixing_states"]:
        assert entry["ok"] is True
        assert abs(entry["gap_one_vs_zero"]) <= 1e-6
        for level, loss in entry["interior_losses"].items():
            # interior contributions lose (1-d)(1-k)a against the threshold
            assert loss == pytest.approx(-0.5 * 0.25 * float(level), abs=1e-9)
            assert loss < 0
    assert rec.elapsed < 10.0


def test_criterion_10_contractor_cases(shipped):
    rec = shipped("c10_contractor")
    assert rec.doc["exit_code"] == 0
    payload = rec.doc["payload"]
    cases = {c["name"]: c for c in payload["cases"]}

    full = cases["full-revelation"]
    assert full["accepted"] is True
    assert full["sender_payoffs_equal"] is True
    assert full["customer_value"] == pytest.approx(0.95, abs=1e-9)

    babbling = cases["babbling"]
    assert babbling["accepted"] is True
    assert babbling["customer_value"] == babbling["reservation_utility"] == 0.55

    assert cases["below-reservation"]["accepted"] is False
    assert all(c["ok"] for c in payload["cases"])
    assert payload["ok"] is True
    assert rec.elapsed < 1.0


def test_criterion_11_monitoring_statistical_suites(shipped):
    rec = shipped("c11_monitoring_suites")
    assert rec.doc["exit_code"] == 0
    payload = rec.doc["payload"]
    assert payload["ok"] is True
    assert len(payload["structures"]) == 6
    required = {
        "mean_correctness",
        "support",
        "conditional_independence",
        "permutation_invariance",
    }
    for entry in payload["structures"]:
        assert required <= set(entry["suites"])
        for suite_name in required:
            assert entry["suites"][suite_name]["ok"] is True, (
                f"{entry['name']}: {suite_name} failed"
            )
    assert rec.elapsed < 60.0


def test_criterion_12_replay_is_bit_exact_for_every_bundle(shipped):
    for name in CONFIG_NAMES:
        rec = shipped(name)
        ok, divergence = replay(load_bundle(rec.out_dir))
        assert ok, f"{name} diverged at {divergence}"
        assert divergence is None
