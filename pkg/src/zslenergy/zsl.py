"""Zero-shot transfer of per-type regressors to an unseen building type.

Training learns a linear class-compatibility matrix ``W`` (logistic
regression over the known types), factors it through the known-type
columns ``S`` of a signature matrix as ``W ~ V @ S``, and fits one tuned
GBRT per (known type, metric). At inference the unseen type's signature
column is appended, every test row is scored against all columns of
``V @ S'``, the unseen type's own score is dropped, and the predictions of
the ``k`` best-scoring known types are averaged with softmax weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .io import FORMAT_VERSION, dump_json, load_versioned
from .linalg import softmax, solve_right_factor, svd
from .models.gbrt import GbrtModel, Hyperparams, default_grid
from .models.logistic import LogisticModel, add_bias, fit_logistic
from .models.tuning import fit_tuned, regressor_matrix
from .synthgen import child_seed
from .tabular import Dataset, EncodedMatrix, Encoder, FeatureSchema, fit_encoder

EXPERT = "expert"
SVD = "svd"


@dataclass(frozen=True)
class SignatureMatrix:
    """Side information: one row per parameter, one column per building type."""

    parameters: tuple[str, ...]
    types: tuple[str, ...]
    values: np.ndarray
    source: str = EXPERT

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "types", tuple(self.types))
        if len(set(self.parameters)) != len(self.parameters):
            raise ValueError("duplicate parameter names in signature matrix")
        if len(set(self.types)) != len(self.types):
            raise ValueError("duplicate type ids in signature matrix")
        if values.shape != (len(self.parameters), len(self.types)):
            raise ValueError(
                f"signature values have shape {values.shape}, expected "
                f"({len(self.parameters)}, {len(self.types)})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("signature matrix contains non-finite values")
        if self.source not in (EXPERT, SVD):
            raise ValueError(f"unknown signature source {self.source!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def column(self, type_id: str) -> np.ndarray:
        if type_id not in self.types:
            raise KeyError(f"no signature column for type {type_id!r}")
        return self.values[:, self.types.index(type_id)]

    def select(self, types: Sequence[str]) -> "SignatureMatrix":
        """Columns for ``types`` in the given order."""
        return SignatureMatrix(
            self.parameters, tuple(types),
            np.stack([self.column(t) for t in types], axis=1) if types else np.zeros((len(self.parameters), 0)),
            self.source,
        )

    def drop_columns(self, drop: Iterable[str]) -> "SignatureMatrix":
        drop = set(drop)
        unknown = drop - set(self.types)
        if unknown:
            raise KeyError(f"cannot drop unknown types {sorted(unknown)}")
        return self.select([t for t in self.types if t not in drop])

    def to_dict(self) -> dict:
        return {
            "kind": "signatures",
            "format_version": FORMAT_VERSION,
            "source": self.source,
            "parameters": list(self.parameters),
            "types": list(self.types),
            # column-major: one list per type
            "values": [[float(v) for v in self.values[:, j]] for j in range(len(self.types))],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureMatrix":
        cols = np.array(d["values"], dtype=np.float64).reshape(len(d["types"]), len(d["parameters"]))
        return cls(tuple(d["parameters"]), tuple(d["types"]), cols.T, d.get("source", EXPERT))

    def save(self, path) -> None:
        dump_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "SignatureMatrix":
        return cls.from_dict(load_versioned(path, "signatures"))


def default_expert_signatures() -> SignatureMatrix:
    """Hand-set side information for the default synthetic types.

    Columns mirror the generative similarity: RL close to RS, MU between
    OF and RS, ED closest to OF.
    """
    params = (
        "occupancy_schedule", "internal_gains", "glazing_exposure",
        "heating_dominance", "cooling_dominance", "peak_load_factor",
    )
    cols = {
        "ED": (0.60, 0.50, 0.40, 0.90, 0.30, 0.45),
        "MU": (0.65, 0.60, 0.55, 0.55, 0.62, 0.65),
        "OF": (0.50, 0.55, 0.50, 0.70, 0.50, 0.60),
        "RS": (0.80, 0.65, 0.60, 0.40, 0.75, 0.70),
        "RL": (0.85, 0.70, 0.65, 0.35, 0.80, 0.72),
    }
    types = ("ED", "MU", "OF", "RS", "RL")
    return SignatureMatrix(params, types, np.array([cols[t] for t in types]).T, EXPERT)


def svd_signature(X, n_params: int) -> np.ndarray:
    """Leading ``n_params`` singular values of one type's encoded feature matrix.

    Zero-padded when the matrix has fewer singular values than ``n_params``.
    """
    X = X.values if isinstance(X, EncodedMatrix) else np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("svd_signature needs a non-empty data matrix")
    if n_params < 1:
        raise ValueError("n_params must be at least 1")
    _, sigma, _ = svd(X)
    col = np.zeros(n_params)
    m = min(n_params, len(sigma))
    col[:m] = sigma[:m]
    return col


def svd_signatures(per_type: Mapping[str, Dataset], encoder: Encoder, n_params: int) -> SignatureMatrix:
    """Signature matrix whose column for each type is :func:`svd_signature` of its data.

    All types are encoded with the same (training-fitted) ``encoder``.
    """
    types = tuple(per_type)
    cols = [svd_signature(encoder.transform(per_type[t]), n_params) for t in types]
    params = tuple(f"sv{i + 1}" for i in range(n_params))
    return SignatureMatrix(params, types, np.stack(cols, axis=1), SVD)


@dataclass(frozen=True)
class ZslConfig:
    l2: float = 1e-2
    max_iter: int = 10_000
    grid: tuple[Hyperparams, ...] = field(default_factory=lambda: tuple(default_grid()))
    folds: int = 5
    seed: int = 0

    def to_dict(self) -> dict:
        return {"l2": self.l2, "max_iter": self.max_iter, "grid": [hp.to_dict() for hp in self.grid],
                "folds": self.folds, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ZslConfig":
        return cls(float(d["l2"]), int(d["max_iter"]), tuple(Hyperparams(**g) for g in d["grid"]),
                   int(d["folds"]), int(d["seed"]))


@dataclass(frozen=True)
class CompatibilityModel:
    V: np.ndarray
    class_order: tuple[str, ...]
    encoder: Encoder
    logistic: LogisticModel

    @property
    def W(self) -> np.ndarray:
        return self.logistic.W


@dataclass(frozen=True)
class TypeRegressor:
    model: GbrtModel
    hyperparams: Hyperparams


@dataclass(frozen=True)
class ZslEnsemble:
    compat: CompatibilityModel
    regressors: dict[tuple[str, str], TypeRegressor]
    signatures: SignatureMatrix
    unknown_types: tuple[str, ...]
    schema: FeatureSchema
    config: ZslConfig

    @property
    def known_types(self) -> tuple[str, ...]:
        return self.compat.class_order

    @property
    def metrics(self) -> tuple[str, ...]:
        return self.schema.target_metrics

    def factor_residual(self) -> float:
        """``||V S - W||_F / ||W||_F`` on the known-type columns."""
        S = self.signatures.select(self.known_types).values
        W = self.compat.W
        return float(np.linalg.norm(self.compat.V @ S - W) / max(np.linalg.norm(W), 1e-300))


@dataclass(frozen=True)
class ScoredPrediction:
    """Outcome for one test record.

    ``ranked`` lists the k closest known types with their scores, best
    first; ``weights`` are the softmax of those scores; ``estimates[m][j]``
    is the prediction of type ``ranked[j]``'s regressor for metric ``m`` and
    ``value[m]`` the weighted average.
    """

    ranked: tuple[tuple[str, float], ...]
    weights: np.ndarray
    estimates: dict[str, np.ndarray]
    value: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "closest": [{"type": t, "score": float(s)} for t, s in self.ranked],
            "weights": [float(w) for w in self.weights],
            "estimates": {m: [float(v) for v in e] for m, e in self.estimates.items()},
            "prediction": {m: float(v) for m, v in self.value.items()},
        }


# --- training ---------------------------------------------------------------


def fit_type_regressors(train_data: Dataset, types: Sequence[str], config: ZslConfig) -> dict:
    """Tuned GBRT per (type, metric), each on that type's records only.

    The CV seed of each pair is ``child_seed(config.seed, f"{type}/{metric}")``
    so a pair's model does not depend on which other types are present.
    """
    out = {}
    for t in types:
        part = train_data.where_class(t)
        if len(part) == 0:
            raise ValueError(f"known type {t!r} has no training records")
        X = regressor_matrix(part)
        for m in train_data.schema.target_metrics:
            model, hp = fit_tuned(X, part.targets[m], config.grid, config.folds,
                                  child_seed(config.seed, f"{t}/{m}"))
            out[(t, m)] = TypeRegressor(model, hp)
    return out


def fit_compatibility(train_data: Dataset, known: Sequence[str], config: ZslConfig) -> tuple[Encoder, LogisticModel]:
    encoder = fit_encoder(train_data)
    X = encoder.transform(train_data).values
    logistic = fit_logistic(X, train_data.labels, config.l2, config.max_iter, class_order=known)
    return encoder, logistic


def train(
    train_data: Dataset,
    signatures: SignatureMatrix,
    unknown_types: Iterable[str],
    config: ZslConfig = ZslConfig(),
    *,
    regressors: Mapping[tuple[str, str], TypeRegressor] | None = None,
    compatibility: tuple[Encoder, LogisticModel] | None = None,
) -> ZslEnsemble:
    """Fit the zero-shot ensemble on known-type records.

    ``regressors`` and ``compatibility`` accept results of
    :func:`fit_type_regressors` / :func:`fit_compatibility` computed on the
    same data, so callers can share them between signature variants.
    """
    unknown = tuple(t for t in signatures.types if t in set(unknown_types))
    if set(unknown) != set(unknown_types):
        raise ValueError(f"unknown types {sorted(set(unknown_types) - set(unknown))} have no signature column")
    known = tuple(t for t in signatures.types if t not in unknown)
    if len(known) < 2:
        raise ValueError("need at least two known types")
    if not unknown:
        raise ValueError("no unknown types given")
    labels = set(train_data.labels.tolist())
    if labels & set(unknown):
        raise ValueError(f"training data contains unknown-type records: {sorted(labels & set(unknown))}")
    if labels - set(known):
        raise ValueError(f"training labels {sorted(labels - set(known))} have no signature column")
    absent = [t for t in known if t not in labels]
    if absent:
        raise ValueError(f"known types {absent} have signatures but no training records")

    if compatibility is None:
        compatibility = fit_compatibility(train_data, known, config)
    encoder, logistic = compatibility
    if logistic.class_order != known:
        raise ValueError("compatibility model was fitted on a different class order")
    S = signatures.select(known).values
    V = solve_right_factor(logistic.W, S)

    if regressors is None:
        regressors = fit_type_regressors(train_data, known, config)
    need = {(t, m) for t in known for m in train_data.schema.target_metrics}
    missing = need - set(regressors)
    if missing:
        raise ValueError(f"missing regressors for {sorted(missing)}")
    regs = {key: regressors[key] for key in sorted(need, key=lambda k: (known.index(k[0]), k[1]))}
    return ZslEnsemble(CompatibilityModel(V, known, encoder, logistic), regs, signatures, unknown,
                       train_data.schema, config)


# --- inference ----------------------------------------------------------------


def score_types(ensemble: ZslEnsemble, X: EncodedMatrix, unknown_type: str) -> tuple[np.ndarray, tuple[str, ...]]:
    """Scores of every test row against the known types and ``unknown_type``.

    Returns ``(X_b @ V @ S', order)`` where ``X_b`` is ``X`` with the bias
    column and ``order`` lists the known types then ``unknown_type``.
    """
    if unknown_type not in ensemble.unknown_types:
        raise ValueError(f"{unknown_type!r} is not one of the ensemble's unknown types")
    if unknown_type not in ensemble.signatures.types:
        raise ValueError(f"{unknown_type!r} has no signature column")
    if isinstance(X, EncodedMatrix):
        if X.encoder != ensemble.compat.encoder:
            raise ValueError("test matrix was not encoded with the training encoder")
        X = X.values
    order = ensemble.known_types + (unknown_type,)
    S_prime = ensemble.signatures.select(order).values
    W_prime = ensemble.compat.V @ S_prime
    return add_bias(X) @ W_prime, order


def k_closest(scores: Sequence[float], type_order: Sequence[str], unknown_type: str, k: int) -> list[tuple[str, float]]:
    """Top-``k`` types by score after dropping ``unknown_type``; ties keep ``type_order``."""
    candidates = [(t, float(s)) for t, s in zip(type_order, scores) if t != unknown_type]
    if not 1 <= k <= len(candidates):
        raise ValueError(f"k must lie in [1, {len(candidates)}], got {k}")
    ranked = sorted(range(len(candidates)), key=lambda j: (-candidates[j][1], j))
    return [candidates[j] for j in ranked[:k]]


def combine(scores: Sequence[float], estimates: Sequence[float]) -> float:
    """Softmax-weighted average of ``estimates``."""
    return float(softmax(scores) @ np.asarray(estimates, dtype=np.float64))


def predict(ensemble: ZslEnsemble, test: Dataset, unknown_type: str, k: int) -> list[ScoredPrediction]:
    """Zero-shot predictions of every target metric for each record of ``test``.

    Only feature columns are read; labels and targets of ``test`` are ignored.
    """
    if not 1 <= k <= len(ensemble.known_types):
        raise ValueError(f"k must lie in [1, {len(ensemble.known_types)}], got {k}")
    Y, order = score_types(ensemble, ensemble.compat.encoder.transform(test), unknown_type)
    R = regressor_matrix(test)
    per_type = {
        (t, m): ensemble.regressors[(t, m)].model.predict(R)
        for t in ensemble.known_types for m in ensemble.metrics
    }
    out = []
    for i in range(len(test)):
        ranked = k_closest(Y[i], order, unknown_type, k)
        s = np.array([sc for _, sc in ranked])
        w = softmax(s)
        est = {m: np.array([per_type[(t, m)][i] for t, _ in ranked]) for m in ensemble.metrics}
        out.append(ScoredPrediction(tuple(ranked), w, est, {m: float(w @ e) for m, e in est.items()}))
    return out


# --- persistence ----------------------------------------------------------------


def save_ensemble(ensemble: ZslEnsemble, directory) -> None:
    """Write the ensemble as versioned JSON files under ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dump_json(d / "config.json", {
        "kind": "zsl_config", "format_version": FORMAT_VERSION,
        "config": ensemble.config.to_dict(),
        "unknown_types": list(ensemble.unknown_types),
        "schema": ensemble.schema.to_dict(),
    })
    dump_json(d / "compat.json", {
        "kind": "compat", "format_version": FORMAT_VERSION,
        "class_order": list(ensemble.compat.class_order),
        "V_shape": list(ensemble.compat.V.shape),
        "V": [float(v) for v in ensemble.compat.V.ravel()],
        "encoder": ensemble.compat.encoder.to_dict(),
        "logistic": ensemble.compat.logistic.to_dict(),
    })
    ensemble.signatures.save(d / "signatures.json")
    dump_json(d / "regressors.json", {
        "kind": "regressors", "format_version": FORMAT_VERSION,
        "models": [
            {"type": t, "metric": m, "hyperparams": r.hyperparams.to_dict(), "model": r.model.to_dict()}
            for (t, m), r in ensemble.regressors.items()
        ],
    })


def load_ensemble(directory) -> ZslEnsemble:
    d = Path(directory)
    cfg = load_versioned(d / "config.json", "zsl_config")
    comp = load_versioned(d / "compat.json", "compat")
    regs = load_versioned(d / "regressors.json", "regressors")
    sigs = SignatureMatrix.load(d / "signatures.json")
    compat = CompatibilityModel(
        np.array(comp["V"], dtype=np.float64).reshape(comp["V_shape"]),
        tuple(comp["class_order"]),
        Encoder.from_dict(comp["encoder"]),
        LogisticModel.from_dict(comp["logistic"]),
    )
    regressors = {
        (r["type"], r["metric"]): TypeRegressor(GbrtModel.from_dict(r["model"]), Hyperparams(**r["hyperparams"]))
        for r in regs["models"]
    }
    return ZslEnsemble(compat, regressors, sigs, tuple(cfg["unknown_types"]),
                       FeatureSchema.from_dict(cfg["schema"]), ZslConfig.from_dict(cfg["config"]))
