"""Leave-one-type-out comparison of the pooled baseline and zero-shot variants."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .io import FORMAT_VERSION, atomic_write_text, load_versioned
from .models.gbrt import Hyperparams, default_grid
from .models.tuning import fit_baseline, regressor_matrix
from .synthgen import child_seed
from .tabular import Dataset, split
from .zsl import (
    SignatureMatrix,
    ZslConfig,
    fit_compatibility,
    fit_type_regressors,
    predict,
    svd_signatures,
    train,
)

log = logging.getLogger(__name__)

BASELINE = "Baseline"
ZSL_D = "ZSL_d"
ZSL_S = "ZSL_s"
METHODS = (BASELINE, ZSL_D, ZSL_S)
ACCURACY_EPS = 1e-9


def accuracy(predicted, actual) -> float:
    """Mean clipped relative accuracy in percent.

    Each record scores ``max(0, 1 - |pred - y| / max(|y|, 1e-9))``.
    """
    p = np.asarray(predicted, dtype=np.float64)
    y = np.asarray(actual, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    if len(y) == 0:
        raise ValueError("accuracy of an empty vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("actual values must be finite")
    rel = np.abs(p - y) / np.maximum(np.abs(y), ACCURACY_EPS)
    return float(np.mean(np.maximum(0.0, 1.0 - rel)) * 100.0)


@dataclass(frozen=True)
class EvalConfig:
    k: int | None = None
    seed: int = 0
    ratio: float = 0.9
    grid: tuple[Hyperparams, ...] = field(default_factory=lambda: tuple(default_grid()))
    folds: int = 5
    l2: float = 1e-2
    max_iter: int = 10_000
    n_params: int | None = None

    def zsl(self) -> ZslConfig:
        return ZslConfig(self.l2, self.max_iter, self.grid, self.folds, self.seed)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "seed": self.seed, "ratio": self.ratio,
            "grid": [hp.to_dict() for hp in self.grid], "folds": self.folds,
            "l2": self.l2, "max_iter": self.max_iter, "n_params": self.n_params,
        }


@dataclass(frozen=True)
class ReportRow:
    unknown_type: str
    n_records: int
    k: int
    accuracy: dict[str, dict[str, float]]

    @property
    def average(self) -> dict[str, float]:
        return {meth: float(np.mean(list(acc.values()))) for meth, acc in self.accuracy.items()}

    def best(self, metric: str | None = None) -> list[str]:
        """Methods attaining the row maximum for ``metric`` (``None``: the average)."""
        vals = self.average if metric is None else {m: a[metric] for m, a in self.accuracy.items()}
        top = max(vals.values())
        return [m for m in METHODS if m in vals and vals[m] == top]


@dataclass
class EvalReport:
    rows: list[ReportRow]
    metrics: tuple[str, ...]
    config: EvalConfig
    # not serialised: per unknown type, method -> list of ScoredPrediction
    predictions: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": "eval_report",
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "methods": list(METHODS),
            "metrics": list(self.metrics),
            "rows": [
                {
                    "unknown_type": r.unknown_type,
                    "n_records": r.n_records,
                    "k": r.k,
                    "accuracy": {m: {q: r.accuracy[m][q] for q in self.metrics} for m in METHODS},
                    "average": {m: r.average[m] for m in METHODS},
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    def save_json(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        c = d["config"]
        cfg = EvalConfig(c["k"], c["seed"], c["ratio"], tuple(Hyperparams(**g) for g in c["grid"]),
                         c["folds"], c["l2"], c["max_iter"], c["n_params"])
        rows = [ReportRow(r["unknown_type"], r["n_records"], r["k"], r["accuracy"]) for r in d["rows"]]
        return cls(rows, tuple(d["metrics"]), cfg)

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls.from_dict(load_versioned(path, "eval_report"))

    def to_text(self) -> str:
        """Column-aligned table; ``*`` marks the best method per group."""
        short = {BASELINE: "Base", ZSL_D: "ZSL_d", ZSL_S: "ZSL_s"}
        groups = list(self.metrics) + ["Avg."]
        cell = 8
        head1 = f"{'Unknown':<8} {'Records':>8} " + " | ".join(
            f"{g:^{3 * cell + 2}}" for g in groups)
        head2 = f"{'type':<8} {'':>8} " + " | ".join(
            " ".join(f"{short[m]:>{cell}}" for m in METHODS) for _ in groups)
        lines = [head1, head2, "-" * len(head2)]
        for r in self.rows:
            parts = []
            for g in groups:
                vals = r.average if g == "Avg." else {m: r.accuracy[m][g] for m in METHODS}
                best = set(r.best(None if g == "Avg." else g))
                parts.append(" ".join(
                    f"{vals[m]:>{cell - 1}.2f}{'*' if m in best else ' '}" for m in METHODS))
            lines.append(f"{r.unknown_type:<8} {r.n_records:>8,} " + " | ".join(parts))
        return "\n".join(lines) + "\n"


def default_k(n_known: int) -> int:
    return n_known


def leave_one_type_out(dataset: Dataset, expert: SignatureMatrix, config: EvalConfig = EvalConfig(),
                       keep_predictions: bool = False) -> EvalReport:
    """Hold out each type in turn; compare Baseline, ZSL_d and ZSL_s on its test split.

    One stratified split is shared by all methods and all held-out types.
    Per-type regressors only see their own type's training records, so they
    are fitted once and reused by every fold in which that type is known.
    """
    types = list(expert.types)
    if len(types) < 3:
        raise ValueError("leave-one-type-out needs at least three types")
    labels = set(dataset.labels.tolist())
    if labels - set(types):
        raise ValueError(f"types {sorted(labels - set(types))} have no expert signature")
    if set(types) - labels:
        raise ValueError(f"expert signatures name types {sorted(set(types) - labels)} absent from the data")
    metrics = dataset.schema.target_metrics
    zcfg = config.zsl()
    n_params = config.n_params or len(expert.parameters)

    train_all, test_all = split(dataset, config.ratio, config.seed)
    log.info("fitting per-type regressors")
    regressors = fit_type_regressors(train_all, types, zcfg)

    rows, preds = [], {}
    for b in types:
        known = [t for t in types if t != b]
        k = config.k if config.k is not None else default_k(len(known))
        train_known = train_all.without_class(b)
        test_b = test_all.where_class(b)
        log.info("held-out %s: %d train / %d test records", b, len(train_known), len(test_b))

        base_X = regressor_matrix(test_b)
        baseline = {
            m: fit_baseline(train_known, m, config.grid, config.folds, child_seed(config.seed, f"baseline/{b}/{m}"))
            .predict(base_X)
            for m in metrics
        }
        compat = fit_compatibility(train_known, known, zcfg)
        regs = {key: r for key, r in regressors.items() if key[0] != b}
        ens_d = train(train_known, expert, {b}, zcfg, regressors=regs, compatibility=compat)

        # the held-out type contributes only feature data to its own column
        per_type = {t: train_all.where_class(t) for t in types}
        svd_sigs = svd_signatures(per_type, compat[0], n_params)
        ens_s = train(train_known, svd_sigs, {b}, zcfg, regressors=regs, compatibility=compat)

        p_d = predict(ens_d, test_b, b, k)
        p_s = predict(ens_s, test_b, b, k)
        acc = {
            BASELINE: {m: accuracy(baseline[m], test_b.targets[m]) for m in metrics},
            ZSL_D: {m: accuracy([p.value[m] for p in p_d], test_b.targets[m]) for m in metrics},
            ZSL_S: {m: accuracy([p.value[m] for p in p_s], test_b.targets[m]) for m in metrics},
        }
        rows.append(ReportRow(b, int(np.sum(dataset.labels == b)), k, acc))
        if keep_predictions:
            preds[b] = {BASELINE: baseline, ZSL_D: p_d, ZSL_S: p_s, "ensembles": (ens_d, ens_s)}
    return EvalReport(rows, metrics, config, preds)


CLONE_ID = "CLONE"


def identification_rate(profiles, signatures: SignatureMatrix, source: str, n_per_class: int = 2000,
                        seed: int = 0, config: ZslConfig = ZslConfig(), ratio: float = 0.9) -> float:
    """Share of test records of a clone of ``source`` whose single closest type is ``source``.

    The clone is generated from ``source``'s profile under a new class id and
    receives ``source``'s signature column; every original type stays known.
    """
    import dataclasses

    from .synthgen import generate

    by_id = {p.class_id: p for p in profiles}
    if source not in by_id:
        raise ValueError(f"no profile for {source!r}")
    clone = dataclasses.replace(by_id[source], class_id=CLONE_ID)
    data = generate(list(profiles) + [clone], n_per_class, seed)
    types = tuple(signatures.types) + (CLONE_ID,)
    values = np.column_stack([signatures.values, signatures.column(source)])
    sig = SignatureMatrix(signatures.parameters, types, values, signatures.source)
    train_all, test_all = split(data, ratio, seed)
    ens = train(train_all.without_class(CLONE_ID), sig, {CLONE_ID}, config)
    preds = predict(ens, test_all.where_class(CLONE_ID), CLONE_ID, 1)
    return float(np.mean([p.ranked[0][0] == source for p in preds]))
