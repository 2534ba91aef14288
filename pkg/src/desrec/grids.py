"""Per-dataset grid evaluation: every (pool scheme, DS method) cell scored
on one stratified holdout split, with deterministic per-task seeding so the
worker count never changes the result."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import derive_seed
from .config import DEFAULT_CONFIG, RunConfig
from .datasets import Dataset, stratified_split, zscore_fit_apply
from .errors import DegeneratePool, SingleMetaClass
from .pools import POOL_SCHEMES, PoolScheme, generate_pool
from .selection import (
    DS_METHODS,
    DselContext,
    DsMethod,
    ds_predict_batch,
    metades_fit,
)


@dataclass(frozen=True)
class CellResult:
    status: str  # "ok" | "excluded"
    accuracy: float | None = None
    reason: str | None = None

    def to_dict(self) -> dict:
        if self.status == "ok":
            return {"status": "ok", "accuracy": self.accuracy}
        return {"status": "excluded", "reason": self.reason}

    @classmethod
    def from_dict(cls, raw: dict) -> "CellResult":
        if raw["status"] == "ok":
            return cls("ok", accuracy=float(raw["accuracy"]))
        return cls("excluded", reason=raw["reason"])


@dataclass
class GridResult:
    """A 7x7 accuracy table for one dataset, pool schemes by DS methods."""

    dataset_id: str
    seed: int
    pool_size: int
    k: int
    cells: dict[tuple[PoolScheme, DsMethod], CellResult]

    def cell(self, scheme: PoolScheme, method: DsMethod) -> CellResult | None:
        return self.cells.get((scheme, method))

    def excluded_schemes(self) -> list[tuple[PoolScheme, str]]:
        seen = {}
        for (scheme, _method), cell in self.cells.items():
            if cell.status == "excluded" and scheme not in seen:
                seen[scheme] = cell.reason
        return sorted(seen.items(), key=lambda kv: POOL_SCHEMES.index(kv[0]))

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "seed": self.seed,
            "pool_size": self.pool_size,
            "k": self.k,
            "schemes": [s.value for s in POOL_SCHEMES],
            "methods": [m.value for m in DS_METHODS],
            "cells": [
                [self.cells[(s, m)].to_dict() for m in DS_METHODS] for s in POOL_SCHEMES
            ],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GridResult":
        cells = {}
        for i, s in enumerate(POOL_SCHEMES):
            for j, m in enumerate(DS_METHODS):
                cells[(s, m)] = CellResult.from_dict(raw["cells"][i][j])
        return cls(raw["dataset_id"], raw["seed"], raw["pool_size"], raw["k"], cells)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GridResult":
        return cls.from_dict(json.loads(text))


def _scheme_row(args) -> tuple[str, list[dict]]:
    """Evaluate one pool scheme against all DS methods (top level so it can
    cross a process boundary)."""
    (scheme_name, train, test, dataset_id, pool_size, k, seed, config) = args
    scheme = PoolScheme(scheme_name)
    try:
        pool = generate_pool(
            scheme, train, size=pool_size,
            seed=derive_seed(seed, dataset_id, scheme.value), config=config,
        )
    except DegeneratePool as exc:
        return scheme_name, [
            CellResult("excluded", reason=str(exc)).to_dict() for _ in DS_METHODS
        ]

    context = DselContext.build(pool, train)
    row = []
    for method in DS_METHODS:
        meta = None
        if method is DsMethod.META_DES:
            try:
                meta = metades_fit(
                    pool, train, k=k, kp=config.metades_kp,
                    seed=derive_seed(seed, dataset_id, scheme.value, method.value),
                    threshold=config.metades_threshold,
                )
            except SingleMetaClass:
                # untrainable meta-level: the thresholded selector degenerates
                # to the whole pool either way, so score that vote directly
                preds = pool.aggregate_predict(test.features)
                acc = float(np.mean(preds == test.labels))
                row.append(CellResult("ok", accuracy=acc).to_dict())
                continue
        labels = ds_predict_batch(
            method, pool, train, test.features, k=k, meta=meta, context=context,
            des_mi_share=config.des_mi_share,
        )
        acc = float(np.mean(labels == test.labels))
        row.append(CellResult("ok", accuracy=acc).to_dict())
    return scheme_name, row


def run_grid(
    ds: Dataset,
    pool_size: int = 100,
    k: int = 7,
    seed: int = 0,
    workers: int = 1,
    config: RunConfig = DEFAULT_CONFIG,
) -> GridResult:
    """Evaluate all 49 (scheme, method) cells on one stratified split.

    Each pool is generated once and reused across the seven DS methods; a
    degenerate pool excludes its whole row with a reason.
    """
    split = stratified_split(ds, config.train_ratio, derive_seed(seed, ds.id, "split"))
    _, (train, test) = zscore_fit_apply(split.train, [split.test])

    tasks = [
        (s.value, train, test, ds.id, pool_size, k, seed, config) for s in POOL_SCHEMES
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool_exec:
            results = dict(pool_exec.map(_scheme_row, tasks))
    else:
        results = dict(map(_scheme_row, tasks))

    cells = {}
    for s in POOL_SCHEMES:
        row = results[s.value]
        for m, raw in zip(DS_METHODS, row):
            cells[(s, m)] = CellResult.from_dict(raw)
    return GridResult(ds.id, seed, pool_size, k, cells)


# --- disk cache -------------------------------------------------------------


def grid_cache_key(dataset_id: str, seed: int, pool_size: int, k: int, config: RunConfig) -> str:
    fingerprint = derive_seed(dataset_id, seed, pool_size, k, config.fingerprint())
    return f"{dataset_id}_{fingerprint:016x}"


def load_cached_grid(cache_dir: str | Path, key: str) -> GridResult | None:
    path = Path(cache_dir) / f"{key}.json"
    if not path.exists():
        return None
    return GridResult.from_json(path.read_text())


def store_grid(cache_dir: str | Path, key: str, grid: GridResult) -> Path:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{key}.json"
    if not path.exists():  # write-once per key
        path.write_text(grid.to_json())
    return path


def grid_for_dataset(
    ds: Dataset,
    seed: int,
    pool_size: int,
    k: int,
    config: RunConfig = DEFAULT_CONFIG,
    workers: int = 1,
    cache_dir: str | Path | None = None,
) -> GridResult:
    """run_grid behind the disk cache."""
    if cache_dir is not None:
        key = grid_cache_key(ds.id, seed, pool_size, k, config)
        cached = load_cached_grid(cache_dir, key)
        if cached is not None:
            return cached
    grid = run_grid(ds, pool_size=pool_size, k=k, seed=seed, workers=workers, config=config)
    if cache_dir is not None:
        store_grid(cache_dir, key, grid)
    return grid
