"""Command-line entry point: generate, train, predict, evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .evaluation import EvalConfig, leave_one_type_out
from .io import atomic_write_text, dump_json, load_versioned
from .models.gbrt import Hyperparams, default_grid
from .synthgen import default_profiles, generate, load_profiles, save_profiles
from .tabular import FeatureSchema, SchemaError, load_csv, save_csv
from .zsl import (
    SignatureMatrix,
    ZslConfig,
    default_expert_signatures,
    load_ensemble,
    predict,
    save_ensemble,
    train,
)

log = logging.getLogger("zslenergy")


class CliError(Exception):
    pass


def _grid(name: str, n_rounds: int | None) -> tuple[Hyperparams, ...]:
    if name == "default":
        return tuple(default_grid(n_rounds or 200))
    if name == "fast":
        return (Hyperparams(3, 0.1, n_rounds or 100),)
    raise CliError(f"unknown grid {name!r}")


def _require(path: str | None, what: str) -> Path:
    if path is None:
        raise CliError(f"missing {what}")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _schema_path(data: Path, schema: str | None) -> Path:
    return _require(schema or str(data.with_suffix(".schema.json")), "schema sidecar")


def cmd_generate(args) -> None:
    out = Path(args.out)
    if args.profiles:
        profiles = load_profiles(_require(args.profiles, "profiles file"))
        sig_path = Path(args.signatures) if args.signatures else None
        signatures = SignatureMatrix.load(_require(str(sig_path), "signature file")) if sig_path else None
    else:
        profiles = default_profiles()
        signatures = default_expert_signatures()
    data = generate(profiles, args.n, args.seed)
    save_csv(data, out / "data.csv")
    data.schema.save(out / "data.schema.json")
    if signatures is not None:
        signatures.save(out / "signatures.json")
    else:
        log.warning("no expert signatures supplied for custom profiles; signatures.json not written")
    if args.dump_profiles:
        save_profiles(profiles, out / "profiles.json")
    print(f"wrote {len(data)} records for {len(profiles)} types to {out}")


def cmd_train(args) -> None:
    data_path = _require(args.data, "data file")
    schema = FeatureSchema.load(_schema_path(data_path, args.schema))
    data = load_csv(data_path, schema)
    signatures = SignatureMatrix.load(_require(args.signatures, "signature file"))
    unknown = list(args.unknown)
    missing = [u for u in unknown if u not in signatures.types]
    if missing:
        raise CliError(f"unknown types {missing} have no signature column")
    known_data = data.without_class(unknown)
    config = ZslConfig(l2=args.l2, grid=_grid(args.grid, args.n_rounds), folds=args.folds, seed=args.seed)
    ensemble = train(known_data, signatures, unknown, config)
    out = Path(args.out)
    save_ensemble(ensemble, out)
    k = args.k if args.k is not None else len(ensemble.known_types)
    dump_json(out / "inference.json", {"kind": "inference", "format_version": 1, "default_k": k})
    print(f"trained on {len(known_data)} records of {list(ensemble.known_types)}; "
          f"factor residual {ensemble.factor_residual():.3e}; saved to {out}")


def cmd_predict(args) -> None:
    ens_dir = _require(args.ensemble, "ensemble directory")
    ensemble = load_ensemble(ens_dir)
    k = args.k
    if k is None:
        k = load_versioned(ens_dir / "inference.json", "inference")["default_k"]
    data = load_csv(_require(args.data, "test data file"), ensemble.schema)
    unknown = args.type or (ensemble.unknown_types[0] if len(ensemble.unknown_types) == 1 else None)
    if unknown is None:
        raise CliError("--type is required when the ensemble has several unknown types")
    if args.rows == "type":
        data = data.where_class(unknown)
    if len(data) == 0:
        raise CliError(f"no records to predict for type {unknown!r}")
    preds = predict(ensemble, data, unknown, k)
    lines = [json.dumps({"row": i, **p.to_dict()}) for i, p in enumerate(preds)]
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
        print(f"wrote {len(preds)} predictions to {args.out}")
    else:
        sys.stdout.write(text)


def cmd_evaluate(args) -> None:
    data_path = _require(args.data, "data file")
    schema = FeatureSchema.load(_schema_path(data_path, args.schema))
    data = load_csv(data_path, schema)
    signatures = SignatureMatrix.load(_require(args.signatures, "signature file"))
    config = EvalConfig(k=args.k, seed=args.seed, ratio=args.ratio, grid=_grid(args.grid, args.n_rounds),
                        folds=args.folds, l2=args.l2, n_params=args.n_params)
    report = leave_one_type_out(data, signatures, config)
    text = report.to_text()
    if args.out_json:
        report.save_json(args.out_json)
    if args.out_text:
        atomic_write_text(args.out_text, text)
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zslenergy", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fitting=True):
        p.add_argument("--seed", type=int, default=0)
        if fitting:
            p.add_argument("--grid", choices=("default", "fast"), default="default",
                           help="'default': depth {3,5,7} x rate {0.05,0.1,0.3}; 'fast': one small config")
            p.add_argument("--n-rounds", type=int, default=None)
            p.add_argument("--folds", type=int, default=5)
            p.add_argument("--l2", type=float, default=1e-2)

    g = sub.add_parser("generate", help="write a synthetic dataset, schema and expert signatures")
    common(g, fitting=False)
    g.add_argument("--n", type=int, default=1000, help="records per type")
    g.add_argument("--profiles", help="profiles JSON (default: built-in five types)")
    g.add_argument("--signatures", help="expert signature JSON to copy alongside custom profiles")
    g.add_argument("--dump-profiles", action="store_true", help="also write profiles.json")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a zero-shot ensemble with some types held out")
    common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--schema", help="schema sidecar (default: <data>.schema.json)")
    t.add_argument("--signatures", required=True)
    t.add_argument("--unknown", action="append", required=True, help="held-out type (repeatable)")
    t.add_argument("--k", type=int, default=None, help="default k stored with the ensemble")
    t.add_argument("--out", required=True, help="ensemble directory")
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="zero-shot predictions as JSON lines")
    common(p, fitting=False)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--type", help="unknown type to predict for")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--rows", choices=("type", "all"), default="type",
                   help="'type': only records labelled with --type; 'all': every record")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="leave-one-type-out comparison table")
    common(e)
    e.add_argument("--data", required=True)
    e.add_argument("--schema")
    e.add_argument("--signatures", required=True)
    e.add_argument("--k", type=int, default=None)
    e.add_argument("--ratio", type=float, default=0.9)
    e.add_argument("--n-params", type=int, default=None)
    e.add_argument("--out-json")
    e.add_argument("--out-text")
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"zslenergy: missing file: {exc}", file=sys.stderr)
        return 3
    except SchemaError as exc:
        print(f"zslenergy: schema violation: {exc}", file=sys.stderr)
        return 4
    except CliError as exc:
        print(f"zslenergy: usage: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"zslenergy: invalid input: {exc}", file=sys.stderr)
        return 5
    return 0


if __name__ == "__main__":
    sys.exit(main())
