import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlab.monitoring import (
    MONITORING_KINDS,
    NoiseFamily,
    SignalStructure,
    classify_structure,
    conditional_independence_suite,
    mean_correctness_suite,
    permutation_invariance_suite,
    sample_signals,
    support_suite,
)
from eqlab.rng import stream_generator


def structure(kind, n=3, **kw):
    return SignalStructure(kind=kind, n_agents=n, **kw)


def test_perfect_monitoring_reveals_the_profile():
    recs = sample_signals(structure("perfect"), [0.1, 0.5, 0.9], stream_generator(0))
    assert all(r.public == (0.1, 0.5, 0.9) for r in recs)
    assert [r.own_action for r in recs] == [0.1, 0.5, 0.9]
    assert all(r.private is None for r in recs)


def test_deterministic_sum_is_the_sum():
    recs = sample_signals(
        structure("deterministic_public_sum"), [0.25, 0.25, 0.5], stream_generator(0)
    )
    assert all(r.public == 1.0 for r in recs)


def test_deterministic_neighbor_follows_the_permutation():
    ss = structure("deterministic_private_neighbor", neighbor=(2, 0, 1))
    recs = sample_signals(ss, [0.1, 0.5, 0.9], stream_generator(0))
    assert [r.private for r in recs] == [0.9, 0.1, 0.5]
    assert all(r.public is None for r in recs)


def test_neighbor_map_must_be_a_fixed_point_free_permutation():
    with pytest.raises(ValueError, match="permutation"):
        structure("private_neighbor", neighbor=(1, 1, 0))
    with pytest.raises(ValueError, match="fixed point"):
        structure("private_neighbor", neighbor=(0, 2, 1))


def test_noisy_public_signal_is_common_to_all_agents():
    recs = sample_signals(structure("noisy_public_sum"), [0.5, 0.5, 0.5], stream_generator(3))
    vals = {r.public for r in recs}
    assert len(vals) == 1
    lo, hi = structure("noisy_public_sum").support()
    assert lo <= recs[0].public <= hi


def test_actions_outside_unit_interval_rejected():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        sample_signals(structure("perfect"), [0.5, 1.2, 0.0], stream_generator(0))


@given(
    y=st.floats(0.0, 3.0),
    shape=st.sampled_from(["triangular", "truncated_gaussian"]),
    seed=st.integers(0, 2**32),
)
@settings(max_examples=60, deadline=None)
def test_noise_mean_is_exact_and_support_is_respected(y, shape, seed):
    fam = NoiseFamily(shape=shape)
    lo, hi = -0.05, 3.05
    if shape == "truncated_gaussian" and not lo < y < hi:
        y = min(max(y, lo + 1e-6), hi - 1e-6)
    params = fam.params(y, lo, hi)
    # the parametric mean is exact by construction; a quadrature check
    u = (np.arange(200_000) + 0.5) / 200_000
    draws = fam.ppf(u, y, lo, hi)
    assert np.all(draws >= lo - 1e-12) and np.all(draws <= hi + 1e-12)
    assert abs(draws.mean() - y) < 5e-4
    assert fam.params(y, lo, hi) == params  # stable, hashable, comparable


class TestClassification:
    def test_flags_by_kind(self):
        flags = {k: classify_structure(structure(k)) for k in MONITORING_KINDS}
        assert flags["perfect"] == {
            "public": True,
            "private": False,
            "noisy": False,
            "deterministic": True,
            "anonymous": False,
        }
        assert flags["noisy_public_sum"]["anonymous"]
        assert flags["deterministic_public_sum"]["anonymous"]
        assert not flags["private_neighbor"]["anonymous"]
        assert flags["private_neighbor"]["private"]
        assert flags["deterministic_private_neighbor"]["deterministic"]


class TestAuditSuites:
    def test_mean_correctness_on_noisy_kinds(self):
        for kind in ("noisy_public_sum", "private_neighbor"):
            out = mean_correctness_suite(structure(kind), n=4_000, n_grid=8, seed=1)
            assert out["ok"], out
            assert out["worst_error_over_bound"] <= 1.0

    def test_mean_correctness_skips_deterministic_kinds(self):
        out = mean_correctness_suite(structure("perfect"), n=10, seed=1)
        assert out["ok"] and out.get("skipped")

    def test_support_suite(self):
        ss = structure("noisy_public_sum", noise=NoiseFamily("truncated_gaussian", 0.3))
        out = support_suite(ss, n=50_000, seed=2)
        assert out["ok"] and out["n_escapes"] == 0
        lo, hi = ss.support()
        assert lo <= out["min_seen"] and out["max_seen"] <= hi

    def test_conditional_independence(self):
        # fixed-seed audit: the 0.02 cap sits at ~2 sampling sd per pair for
        # n = 1e4, so the suite is meaningful only with a recorded seed
        out = conditional_independence_suite(structure("private_neighbor"), n=10_000, seed=1)
        assert out["ok"]
        assert out["max_abs_correlation"] <= 0.02

    def test_conditional_independence_only_applies_to_private_noise(self):
        out = conditional_independence_suite(structure("noisy_public_sum"), n=10, seed=3)
        assert out["ok"] and out.get("skipped")

    def test_permutation_invariance_matches_anonymity(self):
        for kind in MONITORING_KINDS:
            out = permutation_invariance_suite(structure(kind), seed=11)
            assert out["ok"], (kind, out)
            assert out["anonymous"] == (kind in ("deterministic_public_sum", "noisy_public_sum"))
