import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zslenergy.synthgen import (
    METRICS,
    TYPES,
    TargetFn,
    TypeProfile,
    child_seed,
    default_profiles,
    generate,
    load_profiles,
    save_profiles,
)
from zslenergy.tabular import CATEGORICAL, Feature, save_csv
from zslenergy.zsl import default_expert_signatures


def simple_profile(class_id, c=1.0, noise=0.0, mean=0.0):
    feats = (Feature("x"), Feature("k", CATEGORICAL, ("u", "v")))
    return TypeProfile(class_id, feats, {"x": (mean, 1.0)}, {"k": (0.5, 0.5)},
                       {"T": TargetFn(c, noise_std=noise)})


@given(st.floats(-1e6, 1e6), st.integers(1, 40))
@settings(max_examples=30, deadline=None)
def test_constant_target(c, n):
    d = generate([simple_profile("A", c), simple_profile("B", c)], n, seed=1)
    assert np.all(d.targets["T"] == c)


def test_counts():
    d = generate([simple_profile("A"), simple_profile("B")], 50, seed=0)
    assert len(d) == 100
    assert {c: int(np.sum(d.labels == c)) for c in "AB"} == {"A": 50, "B": 50}


def test_csv_bytes_deterministic(tmp_path):
    for name in ("a", "b"):
        save_csv(generate(default_profiles(), 30, seed=4), tmp_path / f"{name}.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_class_stream_independent_of_other_profiles():
    a = generate([simple_profile("A"), simple_profile("B")], 20, seed=3).where_class("A")
    b = generate([simple_profile("C"), simple_profile("A")], 20, seed=3).where_class("A")
    assert np.array_equal(a.features["x"], b.features["x"])


def test_child_seed_formula():
    import hashlib

    raw = hashlib.sha256(b"7:OF").digest()[:8]
    assert child_seed(7, "OF") == int.from_bytes(raw, "big") & (2**63 - 1)
    assert child_seed(7, "OF") != child_seed(8, "OF")


def test_mismatched_profiles_rejected():
    other = TypeProfile("B", (Feature("y"),), {"y": (0.0, 1.0)}, {}, {"T": TargetFn(0.0)})
    with pytest.raises(ValueError, match="schema"):
        generate([simple_profile("A"), other], 5, 0)


def test_probabilities_validated():
    with pytest.raises(ValueError, match="sum to 1"):
        TypeProfile("A", (Feature("k", CATEGORICAL, ("u", "v")),), {}, {"k": (0.5, 0.6)},
                    {"T": TargetFn(0.0)})


def test_target_function_terms():
    fn = TargetFn(1.0, {"x": 2.0}, (("x", "x", 0.5),), {"k": {"v": 10.0}}, reference={"x": (1.0, 2.0)})
    feats = {"x": np.array([1.0, 3.0]), "k": np.array(["u", "v"])}
    # z = (0, 1): 1 + 0 + 0 + 0 ; 1 + 2 + 0.5 + 10
    np.testing.assert_allclose(fn.mean(feats), [1.0, 13.5])


def test_profiles_round_trip(tmp_path):
    profiles = default_profiles()
    save_profiles(profiles, tmp_path / "p.json")
    back = load_profiles(tmp_path / "p.json")
    assert back == profiles
    a = generate(profiles, 10, 2)
    assert a.equals(generate(back, 10, 2))


class TestDefaultWorld:
    def test_five_types_three_metrics(self):
        profiles = default_profiles()
        assert [p.class_id for p in profiles] == list(TYPES)
        assert all(set(p.metrics) == {"TGAS", "COOL", "PFAC"} for p in profiles)
        assert len({p.signature() for p in profiles}) == 1

    def test_sample_means_converge(self):
        n = 10_000
        ds = generate(default_profiles(), n, seed=0)
        checks = []
        for p in default_profiles():
            part = ds.where_class(p.class_id)
            for name, (mean, std) in p.continuous.items():
                checks.append(abs(part.features[name].mean() - mean) <= 5 * std / np.sqrt(n))
        assert np.mean(checks) >= 0.99

    def test_class_means_differ_beyond_noise(self):
        ds = generate(default_profiles(), 4000, seed=1)
        noise = {m: max(p.targets[m].noise_std for p in default_profiles()) for m in METRICS}
        for m in METRICS:
            means = [ds.where_class(t).targets[m].mean() for t in TYPES]
            assert max(abs(a - b) for a, b in itertools.combinations(means, 2)) > 3 * noise[m]

    def test_targets_positive(self):
        ds = generate(default_profiles(), 4000, seed=2)
        for m in METRICS:
            assert ds.targets[m].min() > 0

    def test_expert_signatures_mirror_neighbourhoods(self):
        # nearest signature column of every type is an adjacent type on the generative order
        continuum = ("ED", "OF", "MU", "RS", "RL")
        sig = default_expert_signatures()
        assert set(sig.types) == set(TYPES)
        for t in sig.types:
            others = [u for u in sig.types if u != t]
            nearest = min(others, key=lambda u: np.linalg.norm(sig.column(t) - sig.column(u)))
            assert abs(continuum.index(nearest) - continuum.index(t)) == 1

    def test_expert_signatures_full_rank_on_every_fold(self):
        sig = default_expert_signatures()
        for held in sig.types:
            S = sig.drop_columns([held]).values
            assert np.linalg.matrix_rank(S) == S.shape[1]
