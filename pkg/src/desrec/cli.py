"""Command-line interface.

Subcommands: synth, grid, metafeatures, build-mt, train, recommend, lodo,
report. Global flags control the seed, pool size, region size, worker count
and the structured config file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .config import DEFAULT_CONFIG, RunConfig
from .datasets import (
    dataset_from_manifest_record,
    default_corpus_manifest,
    load_dataset,
    read_manifest,
    save_dataset_csv,
    write_manifest,
)
from .grids import grid_for_dataset
from .harness import read_report, run_lodo_suite, write_report
from .metafeatures import MF_NAMES
from .pools import PoolScheme
from .recommend import (
    MetaDataset,
    MetaRow,
    MetaTarget,
    Scenario,
    build_meta_dataset,
    dataset_meta_features,
    recommend,
    train_recommender,
)
from .metafeatures import MetaFeatureVector, SCHEMA_VERSION
from .registry import load_json, recommender_from_dict, recommender_to_dict, save_json
from .selection import DsMethod

import numpy as np


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="desrec")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pool-size", type=int, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--out", type=Path, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic corpus")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--count", type=int, default=None)

    p = sub.add_parser("grid", help="evaluate all (pool, DS) cells on one dataset")
    p.add_argument("dataset", type=Path)

    p = sub.add_parser("metafeatures", help="extract a dataset's meta-feature row")
    p.add_argument("dataset", type=Path)

    p = sub.add_parser("build-mt", help="build the meta-dataset for a corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    p.add_argument("--fixed", default=None)

    p = sub.add_parser("train", help="train a recommender from a meta-dataset CSV")
    p.add_argument("metadataset", type=Path)

    p = sub.add_parser("recommend", help="recommend a configuration for a dataset")
    p.add_argument("model", type=Path)
    p.add_argument("dataset", type=Path)

    p = sub.add_parser("lodo", help="leave-one-dataset-out evaluation")
    p.add_argument("corpus", type=Path)
    p.add_argument("--scenario", choices=[s.value for s in Scenario] + ["all"], default="all")
    p.add_argument("--fixed", default=None)

    p = sub.add_parser("report", help="render markdown tables from a report JSON")
    p.add_argument("report", type=Path)
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else DEFAULT_CONFIG
    if args.pool_size is not None:
        config = config.replace(pool_size=args.pool_size)
    if args.k is not None:
        config = config.replace(roc_k=args.k)
    return config


def _parse_fixed(scenario: Scenario, raw: str | None):
    if raw is None:
        return None
    if scenario is Scenario.POOL:
        return DsMethod(raw)
    if scenario is Scenario.DS:
        return PoolScheme(raw)
    return None


def _load_corpus(path: Path):
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise SystemExit(f"no CSV files under {path}")
        return [load_dataset(f) for f in files]
    return [load_dataset(path)]


def _out_dir(args, default: str = ".") -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args, config: RunConfig) -> int:
    out = _out_dir(args, "corpus")
    if args.manifest is not None:
        records = read_manifest(args.manifest)
    elif args.count is not None:
        records = default_corpus_manifest(args.count, args.seed)
        write_manifest(records, out / "manifest.json")
    else:
        raise SystemExit("synth needs --manifest or --count")
    for record in records:
        ds = dataset_from_manifest_record(record)
        save_dataset_csv(ds, out / f"{ds.id}.csv")
    print(f"wrote {len(records)} datasets to {out}")
    return 0


def cmd_grid(args, config: RunConfig) -> int:
    ds = load_dataset(args.dataset)
    grid = grid_for_dataset(
        ds, args.seed, config.pool_size, config.roc_k,
        config=config, workers=args.workers,
        cache_dir=args.out / "cache" if args.out else None,
    )
    text = grid.to_json()
    if args.out:
        path = _out_dir(args) / f"grid_{ds.id}.json"
        path.write_text(text)
        print(str(path))
    else:
        sys.stdout.write(text)
    return 0


def _mf_csv_row(ds_id: str, mf) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["dataset_id", "schema_version", *MF_NAMES])
    writer.writerow([ds_id, mf.schema_version, *[repr(float(v)) for v in mf.values]])
    return buf.getvalue()


def cmd_metafeatures(args, config: RunConfig) -> int:
    ds = load_dataset(args.dataset)
    mf = dataset_meta_features(ds, args.seed, config)
    text = _mf_csv_row(ds.id, mf)
    if args.out:
        path = _out_dir(args) / f"metafeatures_{ds.id}.csv"
        path.write_text(text)
        print(str(path))
    else:
        sys.stdout.write(text)
    return 0


def cmd_build_mt(args, config: RunConfig) -> int:
    from .harness import prepare_corpus

    scenario = Scenario(args.scenario)
    fixed = _parse_fixed(scenario, args.fixed)
    if scenario is not Scenario.PAIR and fixed is None:
        raise SystemExit(f"scenario {scenario.value!r} needs --fixed")
    corpus = _load_corpus(args.corpus)
    out = _out_dir(args, "mt")
    grids, mfs = prepare_corpus(
        corpus, args.seed, config.pool_size, config.roc_k,
        config=config, workers=args.workers, cache_dir=out / "cache",
    )
    mt, exclusions = build_meta_dataset(
        corpus, scenario, fixed, seed=args.seed, grids=grids,
        meta_features=mfs, config=config,
    )
    path = out / "metadataset.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset_id", "schema_version", *MF_NAMES, "target_pool", "target_ds"])
        for row in mt.rows:
            writer.writerow(
                [row.dataset_id, row.vector.schema_version,
                 *[repr(float(v)) for v in row.vector.values],
                 row.target.pool.value if row.target.pool else "",
                 row.target.ds.value if row.target.ds else ""]
            )
    meta = {"scenario": scenario.value, "fixed": args.fixed,
            "exclusions": [list(e) for e in exclusions]}
    (out / "metadataset.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(str(path))
    return 0


def _read_mt_csv(path: Path) -> MetaDataset:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    n_mf = len(MF_NAMES)
    assert header[2 : 2 + n_mf] == list(MF_NAMES), "meta-dataset schema mismatch"
    mt_rows = []
    has_pool = any(r[2 + n_mf] for r in data)
    has_ds = any(r[3 + n_mf] for r in data)
    for r in data:
        values = np.array([float(v) for v in r[2 : 2 + n_mf]])
        vector = MetaFeatureVector(values, r[1], MF_NAMES, np.zeros(n_mf, dtype=bool))
        target = MetaTarget(
            PoolScheme(r[2 + n_mf]) if r[2 + n_mf] else None,
            DsMethod(r[3 + n_mf]) if r[3 + n_mf] else None,
        )
        mt_rows.append(MetaRow(r[0], vector, target))
    if has_pool and has_ds:
        scenario = Scenario.PAIR
    elif has_pool:
        scenario = Scenario.POOL
    else:
        scenario = Scenario.DS
    return MetaDataset(mt_rows, scenario, None, SCHEMA_VERSION)


def cmd_train(args, config: RunConfig) -> int:
    mt = _read_mt_csv(args.metadataset)
    model = train_recommender(mt, seed=args.seed, config=config)
    out = _out_dir(args)
    path = out / "recommender.json"
    save_json(recommender_to_dict(model), path)
    print(str(path))
    return 0


def cmd_recommend(args, config: RunConfig) -> int:
    model = recommender_from_dict(load_json(args.model))
    ds = load_dataset(args.dataset)
    mf = dataset_meta_features(ds, args.seed, config)
    target = recommend(model, mf)
    print(json.dumps({"dataset_id": ds.id, **target.as_dict()}))
    return 0


def cmd_lodo(args, config: RunConfig) -> int:
    corpus = _load_corpus(args.corpus)
    out = _out_dir(args, "lodo")
    scenarios = list(Scenario) if args.scenario == "all" else [Scenario(args.scenario)]
    fixed = None
    if args.fixed is not None and scenarios[0] is not Scenario.PAIR:
        fixed = {scenarios[0]: [_parse_fixed(scenarios[0], args.fixed)]}
    report = run_lodo_suite(
        corpus, scenarios, seed=args.seed, pool_size=config.pool_size,
        k=config.roc_k, workers=args.workers, config=config,
        cache_dir=out / "cache", fixed=fixed,
    )
    paths = write_report(report, out)
    for p in paths:
        print(str(p))
    return 0


def cmd_report(args, config: RunConfig) -> int:
    report = read_report(args.report)
    out = _out_dir(args, "report")
    paths = write_report(report, out)
    for p in paths:
        print(str(p))
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "grid": cmd_grid,
    "metafeatures": cmd_metafeatures,
    "build-mt": cmd_build_mt,
    "train": cmd_train,
    "recommend": cmd_recommend,
    "lodo": cmd_lodo,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _load_config(args)
    return _COMMANDS[args.command](args, config)


if __name__ == "__main__":
    raise SystemExit(main())
