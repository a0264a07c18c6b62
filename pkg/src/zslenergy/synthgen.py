"""Parametric Monte-Carlo stand-in for simulated building energy data.

Each building type is a :class:`TypeProfile`: independent Gaussian design
parameters (rounded to a realistic resolution), categorical parameters drawn
from per-type level probabilities, and one affine-plus-interaction target
function per energy metric with Gaussian noise.

Per-class random streams use ``child_seed(seed, class_id)``: the first 8
bytes of ``sha256(f"{seed}:{class_id}")`` read big-endian, masked to 63 bits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .io import atomic_write_text
from .tabular import CATEGORICAL, CONTINUOUS, Dataset, Feature, FeatureSchema

CLASS_COLUMN = "building_type"
METRICS = ("TGAS", "COOL", "PFAC")
TYPES = ("ED", "MU", "OF", "RS", "RL")


def child_seed(seed: int, class_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{class_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


@dataclass(frozen=True)
class TargetFn:
    """``y = intercept + sum b_f z_f + sum c_fg z_f z_g + effect[level] + noise``.

    ``z_f = (x_f - center_f) / scale_f`` with ``reference[f] = (center, scale)``;
    features absent from ``reference`` enter unscaled.
    """

    intercept: float
    linear: dict[str, float] = field(default_factory=dict)
    interactions: tuple[tuple[str, str, float], ...] = ()
    categorical: dict[str, dict[str, float]] = field(default_factory=dict)
    noise_std: float = 0.0
    reference: dict[str, tuple[float, float]] = field(default_factory=dict)

    def _z(self, features: dict[str, np.ndarray], name: str) -> np.ndarray:
        center, scale = self.reference.get(name, (0.0, 1.0))
        return (np.asarray(features[name], dtype=np.float64) - center) / scale

    def mean(self, features: dict[str, np.ndarray]) -> np.ndarray:
        """Noise-free target for column-stored ``features``."""
        n = len(next(iter(features.values())))
        y = np.full(n, float(self.intercept))
        for f, b in self.linear.items():
            y = y + b * self._z(features, f)
        for f, g, c in self.interactions:
            y = y + c * self._z(features, f) * self._z(features, g)
        for f, effects in self.categorical.items():
            col = np.asarray(features[f])
            for level, e in effects.items():
                y = y + e * (col == level)
        return y

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "linear": dict(self.linear),
            "interactions": [list(t) for t in self.interactions],
            "categorical": {k: dict(v) for k, v in self.categorical.items()},
            "noise_std": self.noise_std,
            "reference": {k: list(v) for k, v in self.reference.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetFn":
        return cls(
            float(d["intercept"]),
            {k: float(v) for k, v in d.get("linear", {}).items()},
            tuple((a, b, float(c)) for a, b, c in d.get("interactions", [])),
            {k: {lv: float(e) for lv, e in v.items()} for k, v in d.get("categorical", {}).items()},
            float(d.get("noise_std", 0.0)),
            {k: (float(v[0]), float(v[1])) for k, v in d.get("reference", {}).items()},
        )


@dataclass(frozen=True)
class TypeProfile:
    class_id: str
    features: tuple[Feature, ...]
    continuous: dict[str, tuple[float, float]]
    categorical: dict[str, tuple[float, ...]]
    targets: dict[str, TargetFn]
    resolution: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for f in self.features:
            if f.is_categorical:
                probs = np.asarray(self.categorical.get(f.name, ()), dtype=np.float64)
                if probs.shape != (len(f.levels),):
                    raise ValueError(f"{self.class_id}: {f.name!r} needs {len(f.levels)} probabilities")
                if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                    raise ValueError(f"{self.class_id}: probabilities of {f.name!r} must be >= 0 and sum to 1")
            else:
                if f.name not in self.continuous:
                    raise ValueError(f"{self.class_id}: no distribution for {f.name!r}")
                mean, std = self.continuous[f.name]
                if not (np.isfinite(mean) and np.isfinite(std)) or std < 0:
                    raise ValueError(f"{self.class_id}: bad (mean, std) for {f.name!r}")
        if not self.targets:
            raise ValueError(f"{self.class_id}: no target functions")
        for m, fn in self.targets.items():
            if fn.noise_std < 0:
                raise ValueError(f"{self.class_id}: negative noise for {m!r}")

    @property
    def metrics(self) -> tuple[str, ...]:
        return tuple(self.targets)

    def signature(self) -> tuple:
        """What must agree across profiles for them to share a dataset."""
        return (self.features, self.metrics)

    def sample(self, n: int, seed: int) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        rng = np.random.default_rng(child_seed(seed, self.class_id))
        feats: dict[str, np.ndarray] = {}
        for f in self.features:
            if f.is_categorical:
                idx = rng.choice(len(f.levels), size=n, p=np.asarray(self.categorical[f.name]))
                feats[f.name] = np.array(f.levels)[idx]
            else:
                mean, std = self.continuous[f.name]
                x = rng.normal(mean, std, size=n) if std > 0 else np.full(n, float(mean))
                step = self.resolution.get(f.name, 0.0)
                if step > 0:
                    x = np.round(x / step) * step
                feats[f.name] = x
        targets = {}
        for m, fn in self.targets.items():
            y = fn.mean(feats)
            if fn.noise_std > 0:
                y = y + rng.normal(0.0, fn.noise_std, size=n)
            targets[m] = y
        return feats, targets

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "features": [
                {"name": f.name, "kind": f.kind, **({"levels": list(f.levels)} if f.is_categorical else {})}
                for f in self.features
            ],
            "continuous": {k: list(v) for k, v in self.continuous.items()},
            "categorical": {k: list(v) for k, v in self.categorical.items()},
            "targets": {m: fn.to_dict() for m, fn in self.targets.items()},
            "resolution": dict(self.resolution),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TypeProfile":
        feats = tuple(Feature(f["name"], f.get("kind", CONTINUOUS), tuple(f.get("levels", ()))) for f in d["features"])
        return cls(
            d["class_id"],
            feats,
            {k: (float(v[0]), float(v[1])) for k, v in d["continuous"].items()},
            {k: tuple(float(p) for p in v) for k, v in d.get("categorical", {}).items()},
            {m: TargetFn.from_dict(fn) for m, fn in d["targets"].items()},
            {k: float(v) for k, v in d.get("resolution", {}).items()},
        )


def schema_for(profiles: Sequence[TypeProfile], class_column: str = CLASS_COLUMN) -> FeatureSchema:
    if len(profiles) < 1:
        raise ValueError("no profiles")
    first = profiles[0]
    for p in profiles[1:]:
        if p.signature() != first.signature():
            raise ValueError(f"profile {p.class_id!r} does not share the schema of {first.class_id!r}")
    return FeatureSchema(first.features, first.metrics, class_column, tuple(p.class_id for p in profiles))


def generate(profiles: Sequence[TypeProfile], n_per_class: int, seed: int = 0) -> Dataset:
    """``n_per_class`` records per profile, grouped by class in profile order."""
    if len(profiles) < 2:
        raise ValueError("need at least two profiles")
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    ids = [p.class_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate class ids among profiles")
    schema = schema_for(profiles)
    parts = [p.sample(n_per_class, seed) for p in profiles]
    return Dataset(
        schema,
        {f: np.concatenate([feats[f] for feats, _ in parts]) for f in schema.feature_names},
        np.repeat(np.array(ids), n_per_class),
        {m: np.concatenate([t[m] for _, t in parts]) for m in schema.target_metrics},
    )


def save_profiles(profiles: Sequence[TypeProfile], path) -> None:
    atomic_write_text(path, json.dumps({"profiles": [p.to_dict() for p in profiles]}, indent=1) + "\n")


def load_profiles(path) -> list[TypeProfile]:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return [TypeProfile.from_dict(p) for p in d["profiles"]]


# --- default five-type world ----------------------------------------------

# Building design parameters, identically distributed for every type:
# (mean, std, resolution).
_DESIGN = {
    "floor_area": (5000.0, 1500.0, 10.0),
    "window_wall_ratio": (0.35, 0.08, 0.005),
    "wall_u_value": (0.45, 0.10, 0.005),
    "cooling_setpoint": (24.0, 0.9, 0.05),
}
# Usage-profile parameters whose means depend on the type; values are the
# reference (OF) mean, common std and resolution.
_USAGE = {
    "occupancy_density": (6.0, 1.5, 0.05),
    "operating_hours": (11.0, 1.6, 0.1),
    "plug_load": (10.0, 2.5, 0.05),
    "ventilation_rate": (8.0, 1.2, 0.05),
    "hot_water_use": (3.0, 0.6, 0.01),
}
_CATEGORICAL = {
    "climate_zone": ("hot", "mixed", "cold"),
    "hvac_system": ("vav", "packaged_rtu", "fan_coil"),
}

# Types sit at steps 0..4 of a usage continuum running from education to
# strip-mall retail. Usage means move 5 std per step along an oblique
# direction of the usage space.
_ORDER = ("ED", "OF", "MU", "RS", "RL")
_STEP = 5.0
_DIRECTION = np.array([1.0, 1.0, 1.0, 1.0, 1.0]) / np.sqrt(5.0)
_CLIMATE = (0.35, 0.35, 0.30)
_HVAC = {
    "ED": (0.45, 0.20, 0.35), "OF": (0.45, 0.30, 0.25), "MU": (0.40, 0.35, 0.25),
    "RS": (0.30, 0.45, 0.25), "RL": (0.30, 0.50, 0.20),
}
# Shared per-std effect of each usage parameter on every metric.
_USAGE_EFFECT = {"TGAS": 0.5, "COOL": 0.5, "PFAC": 0.8}

# Design-parameter coefficients at the two ends of the continuum; a type at
# step t uses the blend with weight t / 4 on the retail end.
_ENDS = {
    "institutional": {
        "TGAS": dict(intercept=150.0, lin=(8.0, -4.0, 16.0, -2.0), inter=(("wall_u_value", "floor_area", 5.0),),
                     climate=(-30.0, 0.0, 38.0), hvac=(0.0, 6.0, -6.0), noise=3.0),
        "COOL": dict(intercept=80.0, lin=(10.0, 7.0, 3.0, -6.0), inter=(("window_wall_ratio", "floor_area", 3.0),),
                     climate=(22.0, 0.0, -18.0), hvac=(0.0, 5.0, -4.0), noise=3.0),
        "PFAC": dict(intercept=140.0, lin=(16.0, 4.0, 2.0, -3.0), inter=(("floor_area", "cooling_setpoint", -3.0),),
                     climate=(8.0, 0.0, -5.0), hvac=(0.0, 4.0, 3.0), noise=4.0),
    },
    "retail": {
        "TGAS": dict(intercept=80.0, lin=(3.0, 2.0, 6.0, -1.0), inter=(("wall_u_value", "window_wall_ratio", 5.0),),
                     climate=(-12.0, 0.0, 15.0), hvac=(0.0, 12.0, 4.0), noise=3.0),
        "COOL": dict(intercept=150.0, lin=(6.0, 16.0, 5.0, -14.0), inter=(("window_wall_ratio", "cooling_setpoint", -5.0),),
                     climate=(40.0, 0.0, -30.0), hvac=(0.0, 10.0, 2.0), noise=3.0),
        "PFAC": dict(intercept=220.0, lin=(26.0, 12.0, 3.0, -7.0), inter=(("floor_area", "window_wall_ratio", 5.0),),
                     climate=(16.0, 0.0, -9.0), hvac=(0.0, 9.0, 2.0), noise=4.0),
    },
}


def _blend(a: dict, b: dict, w: float) -> dict:
    """Coefficient set ``(1 - w) * a + w * b``; interaction terms are kept from both, scaled."""
    mix = lambda x, y: tuple((1 - w) * xi + w * yi for xi, yi in zip(x, y))
    return dict(
        intercept=(1 - w) * a["intercept"] + w * b["intercept"],
        lin=mix(a["lin"], b["lin"]),
        inter=tuple((f, g, (1 - w) * c) for f, g, c in a["inter"]) + tuple((f, g, w * c) for f, g, c in b["inter"]),
        climate=mix(a["climate"], b["climate"]),
        hvac=mix(a["hvac"], b["hvac"]),
        noise=(1 - w) * a["noise"] + w * b["noise"],
    )


def _coefficients(class_id: str, metric: str) -> dict:
    w = _ORDER.index(class_id) / (len(_ORDER) - 1)
    return _blend(_ENDS["institutional"][metric], _ENDS["retail"][metric], w)


def default_features() -> tuple[Feature, ...]:
    return (
        tuple(Feature(n) for n in _DESIGN)
        + tuple(Feature(n) for n in _USAGE)
        + tuple(Feature(n, CATEGORICAL, levels) for n, levels in _CATEGORICAL.items())
    )


def default_profiles() -> list[TypeProfile]:
    """Five building types ED, MU, OF, RS, RL with metrics TGAS, COOL, PFAC.

    Design parameters share one distribution across types. Usage parameters
    shift with the type's step on the ED-OF-MU-RS-RL continuum, and so do
    the target coefficients on the design parameters, which blend an
    institutional and a retail end. Neighbouring types are therefore close
    both in usage space and in how design drives energy. A small usage
    effect is common to all types.
    """
    ref = {n: (m, s) for n, (m, s, _) in {**_DESIGN, **_USAGE}.items()}
    resolution = {n: r for n, (_, _, r) in {**_DESIGN, **_USAGE}.items()}
    design, usage = list(_DESIGN), list(_USAGE)
    features = default_features()
    profiles = []
    for t in TYPES:
        # OF (step 1) sits at the reference usage means
        shift = (_ORDER.index(t) - 1) * _STEP * _DIRECTION
        cont = {n: ref[n] for n in design}
        cont.update({n: (ref[n][0] + shift[i] * ref[n][1], ref[n][1]) for i, n in enumerate(usage)})
        targets = {}
        for m in METRICS:
            c = _coefficients(t, m)
            linear = {n: float(v) for n, v in zip(design, c["lin"])}
            linear.update({n: _USAGE_EFFECT[m] for n in usage})
            targets[m] = TargetFn(
                intercept=float(c["intercept"]),
                linear=linear,
                interactions=tuple((f, g, float(v)) for f, g, v in c["inter"]),
                categorical={
                    "climate_zone": dict(zip(_CATEGORICAL["climate_zone"], map(float, c["climate"]))),
                    "hvac_system": dict(zip(_CATEGORICAL["hvac_system"], map(float, c["hvac"]))),
                },
                noise_std=float(c["noise"]),
                reference=ref,
            )
        profiles.append(TypeProfile(
            t, features, cont,
            {"climate_zone": _CLIMATE, "hvac_system": _HVAC[t]},
            targets, resolution,
        ))
    return profiles
