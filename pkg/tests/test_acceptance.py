"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

The lines are repeated in the terminal summary. Criteria 6-8 share one
full-size evaluation (5 types x 10,000 records, default grid), which takes
several minutes on one core.
"""

import math
import time

import numpy as np
import pytest

from zslenergy.cli import main as cli_main
from zslenergy.evaluation import BASELINE, ZSL_D, ZSL_S, EvalConfig, identification_rate, leave_one_type_out
from zslenergy.linalg import softmax, solve_right_factor, svd
from zslenergy.models.gbrt import GbrtModel, Hyperparams
from zslenergy.models.logistic import LogisticModel, add_bias, objective
from zslenergy.synthgen import TYPES, default_profiles, generate
from zslenergy.tabular import Dataset, Encoder, Feature, FeatureSchema
from zslenergy.zsl import (
    CompatibilityModel,
    SignatureMatrix,
    TypeRegressor,
    ZslConfig,
    ZslEnsemble,
    default_expert_signatures,
    predict,
    train,
)

RESULTS: list[str] = []

FULL_N = 10_000
FULL_SEED = 0
IDENT_THRESHOLD = 0.90


def record(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_factorization_exactness():
    t0 = time.perf_counter()
    data = generate(default_profiles(), 300, seed=11)
    sig = default_expert_signatures()
    cfg = ZslConfig(grid=(Hyperparams(2, 0.3, 5),), seed=11)
    residuals = {}
    for b in TYPES:
        known = sig.drop_columns([b])
        assert len(sig.parameters) >= len(known.types)
        assert np.linalg.matrix_rank(known.values) == len(known.types)
        ens = train(data.without_class(b), sig, {b}, cfg)
        residuals[b] = ens.factor_residual()
    elapsed = time.perf_counter() - t0
    worst = max(residuals.values())
    record(1, "||VS - W||_F / ||W||_F <= 1e-8", worst <= 1e-8 and elapsed < 10,
           f"worst residual {worst:.2e} over {len(residuals)} ensembles, {elapsed:.1f} s (< 10 s)")


def test_criterion_2_linear_algebra_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_rec = worst_orth = 0.0
    for _ in range(1000):
        r, c = rng.integers(1, 21, size=2)
        M = rng.normal(size=(r, c)) * 10.0 ** rng.uniform(-2, 2)
        U, s, Vt = svd(M)
        scale = max(1.0, float(np.abs(M).max()))
        k = len(s)
        worst_rec = max(worst_rec, float(np.abs(U @ np.diag(s) @ Vt - M).max()) / scale)
        worst_orth = max(worst_orth, float(np.abs(U.T @ U - np.eye(k)).max()),
                         float(np.abs(Vt @ Vt.T - np.eye(k)).max()))

    worst_sum = worst_shift = 0.0
    for _ in range(1000):
        x = rng.normal(size=rng.integers(1, 21)) * 10
        w = softmax(x)
        worst_sum = max(worst_sum, abs(float(w.sum()) - 1.0))
        worst_shift = max(worst_shift, float(np.abs(softmax(x + rng.normal() * 100) - w).max()))

    W = rng.normal(size=(8, 5))
    S = rng.normal(size=(6, 5))
    V = solve_right_factor(W, S)
    best = np.linalg.norm(V @ S - W)
    beaten = sum(np.linalg.norm((V + rng.normal(size=V.shape) * 10.0 ** rng.uniform(-6, 0)) @ S - W) < best
                 for _ in range(1000))
    elapsed = time.perf_counter() - t0
    ok = (worst_rec <= 1e-10 and worst_orth <= 1e-10 and worst_sum <= 1e-12 and worst_shift <= 1e-12
          and beaten == 0 and elapsed < 60)
    record(2, "SVD / softmax / pseudoinverse oracles", ok,
           f"reconstruction {worst_rec:.1e}, orthogonality {worst_orth:.1e}, softmax sum {worst_sum:.1e}, "
           f"shift {worst_shift:.1e}, perturbations beating lstsq {beaten}/1000, {elapsed:.1f} s (< 60 s)")


def test_criterion_3_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    h = 1e-6
    for _ in range(50):
        n, d, z = rng.integers(3, 15), rng.integers(1, 6), rng.integers(2, 6)
        Xb = add_bias(rng.normal(size=(n, d)))
        Y = np.eye(z)[rng.integers(0, z, n)]
        W = rng.normal(size=(d + 1, z))
        l2 = float(rng.uniform(0, 0.5))
        _, g = objective(W, Xb, Y, l2)
        fd = np.zeros_like(W)
        for idx in np.ndindex(*W.shape):
            E = np.zeros_like(W)
            E[idx] = h
            fd[idx] = (objective(W + E, Xb, Y, l2)[0] - objective(W - E, Xb, Y, l2)[0]) / (2 * h)
        worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)))
    elapsed = time.perf_counter() - t0
    record(3, "analytic vs central-difference gradient", worst <= 1e-5 and elapsed < 30,
           f"worst relative error {worst:.1e} on 50 instances, {elapsed:.2f} s (< 30 s)")


def test_criterion_4_prediction_micro_oracle():
    t0 = time.perf_counter()
    schema = FeatureSchema((Feature("x"),), ("T",), classes=("A", "B", "C"))
    enc = Encoder(schema.features, {"x": (0.0, 1.0)})
    sig = SignatureMatrix(("p1", "p2"), ("A", "B", "C"), np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]))
    W = np.array([[1.0, -1.0], [0.5, 0.0]])  # rows: x, bias
    V = solve_right_factor(W, sig.select(("A", "B")).values)
    e = {"A": 10.0, "B": 20.0}
    regs = {(t, "T"): TypeRegressor(GbrtModel((), 1.0, e[t], 1), Hyperparams()) for t in e}
    ens = ZslEnsemble(CompatibilityModel(V, ("A", "B"), enc, LogisticModel(W, ("A", "B"))),
                      regs, sig, ("C",), schema, ZslConfig())
    xs = np.array([-2.0, -0.25, 0.0, 1.0, 3.0])
    test = Dataset(schema, {"x": xs}, np.array(["C"] * len(xs)), {"T": np.zeros(len(xs))})
    got = [p.value["T"] for p in predict(ens, test, "C", 2)]
    # by hand: score_A = x + 0.5, score_B = -x; P = (e^sA * 10 + e^sB * 20) / (e^sA + e^sB)
    want = [(math.exp(x + 0.5) * 10 + math.exp(-x) * 20) / (math.exp(x + 0.5) + math.exp(-x)) for x in xs]
    err = max(abs(a - b) for a, b in zip(got, want))
    elapsed = time.perf_counter() - t0
    record(4, "softmax-weighted P vs hand computation", err <= 1e-6 and elapsed < 1,
           f"max |P - P_hand| {err:.1e} on {len(xs)} records, {elapsed:.3f} s (< 1 s)")


def test_criterion_5_identification_sanity():
    t0 = time.perf_counter()
    cfg = ZslConfig(grid=(Hyperparams(3, 0.3, 20),), seed=5)
    rates = {t: identification_rate(default_profiles(), default_expert_signatures(), t, 2000, 5, cfg)
             for t in TYPES}
    elapsed = time.perf_counter() - t0
    ok = min(rates.values()) >= IDENT_THRESHOLD and elapsed < 300
    record(5, f"clone matched to source at k=1 for >= {IDENT_THRESHOLD:.0%}", ok,
           ", ".join(f"{t} {r:.1%}" for t, r in rates.items()) + f"; {elapsed:.0f} s (< 300 s)")


@pytest.fixture(scope="module")
def full_run():
    t0 = time.perf_counter()
    data = generate(default_profiles(), FULL_N, FULL_SEED)
    report = leave_one_type_out(data, default_expert_signatures(), EvalConfig(seed=FULL_SEED),
                                keep_predictions=True)
    return report, time.perf_counter() - t0


def test_criterion_6_directional_comparison(full_run):
    report, elapsed = full_run
    print()
    print(report.to_text())
    wins = [r.unknown_type for r in report.rows if r.average[ZSL_D] >= r.average[BASELINE]]
    detail = "; ".join(f"{r.unknown_type} {r.average[ZSL_D]:.2f} vs {r.average[BASELINE]:.2f}" for r in report.rows)
    record(6, "ZSL_d avg >= Baseline avg for >= 3 of 5 types", len(wins) >= 3 and elapsed < 1800,
           f"{len(wins)}/5 ({detail}); {elapsed:.0f} s (< 1800 s)")


def test_criterion_7_determinism(full_run, tmp_path):
    report, _ = full_run
    t0 = time.perf_counter()
    assert cli_main(["generate", "--n", str(FULL_N), "--seed", str(FULL_SEED), "--out", str(tmp_path)]) == 0
    assert cli_main(["evaluate", "--data", str(tmp_path / "data.csv"),
                     "--signatures", str(tmp_path / "signatures.json"), "--seed", str(FULL_SEED),
                     "--out-json", str(tmp_path / "report.json"), "--out-text", str(tmp_path / "report.txt")]) == 0
    elapsed = time.perf_counter() - t0
    first = report.to_json().encode()
    second = (tmp_path / "report.json").read_bytes()
    record(7, "two evaluate runs give byte-identical JSON", first == second and elapsed < 1800,
           f"{len(first)} vs {len(second)} bytes, identical={first == second} "
           f"(in-process run vs CLI run from CSV); second run {elapsed:.0f} s (< 1800 s)")


def test_criterion_8_convexity(full_run):
    report, _ = full_run
    total = bad = 0
    for kept in report.predictions.values():
        for meth in (ZSL_D, ZSL_S):
            for p in kept[meth]:
                for m, e in p.estimates.items():
                    total += 1
                    bad += not (e.min() <= p.value[m] <= e.max())
    record(8, "min_j e_j <= P <= max_j e_j", bad == 0 and total > 0,
           f"{total - bad}/{total} (prediction, metric) pairs inside the hull")
