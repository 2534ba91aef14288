"""Meta-level recommendation: target labelling, meta-dataset assembly, the
scenario-specific meta-models and the two reference baselines.

Scenario "pool" recommends a pool scheme for a user-fixed DS method (random
forest meta-model); scenario "ds" recommends a DS method for a fixed pool
(2-NN meta-model); scenario "pair" chains two 2-NN stages, pool first, the
predicted pool entering stage two as a 7-slot one-hot block.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._util import derive_seed
from .config import DEFAULT_CONFIG, RunConfig
from .datasets import Dataset, stratified_split
from .errors import CorpusTooSmall, EmptyMetaDataset, IncompleteGrid, SchemaMismatch
from .metafeatures import MetaFeatureVector, extract_meta_features
from .models import TreeModel, train_tree
from .pools import POOL_SCHEMES, PoolScheme
from .selection import DS_METHODS, DsMethod


class Scenario(enum.Enum):
    POOL = "pool"
    DS = "ds"
    PAIR = "pair"


@dataclass(frozen=True)
class MetaTarget:
    pool: PoolScheme | None = None
    ds: DsMethod | None = None

    def as_dict(self) -> dict:
        return {
            "pool": self.pool.value if self.pool else None,
            "ds": self.ds.value if self.ds else None,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MetaTarget":
        return cls(
            PoolScheme(raw["pool"]) if raw.get("pool") else None,
            DsMethod(raw["ds"]) if raw.get("ds") else None,
        )


@dataclass(frozen=True)
class MetaRow:
    dataset_id: str
    vector: MetaFeatureVector
    target: MetaTarget


@dataclass
class MetaDataset:
    rows: list[MetaRow]
    scenario: Scenario
    fixed: PoolScheme | DsMethod | None
    schema_version: str

    def __len__(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        return np.stack([r.vector.values for r in self.rows])


def candidate_cells(scenario: Scenario, fixed=None):
    """The grid cells a scenario chooses between, in canonical order."""
    if scenario is Scenario.POOL:
        if not isinstance(fixed, DsMethod):
            raise ValueError("scenario 'pool' needs a fixed DS method")
        return [(s, fixed) for s in POOL_SCHEMES]
    if scenario is Scenario.DS:
        if not isinstance(fixed, PoolScheme):
            raise ValueError("scenario 'ds' needs a fixed pool scheme")
        return [(fixed, m) for m in DS_METHODS]
    return [(s, m) for s in POOL_SCHEMES for m in DS_METHODS]


def label_meta_target(grid, scenario: Scenario, fixed=None, tol: float = 1e-12) -> MetaTarget:
    """Best-performing candidate for a dataset; ties go to canonical order."""
    cells = candidate_cells(scenario, fixed)
    accs = []
    for scheme, method in cells:
        cell = grid.cell(scheme, method)
        if cell is None or cell.status != "ok":
            reason = cell.reason if cell is not None else "missing"
            raise IncompleteGrid(f"{grid.dataset_id}: cell ({scheme.value}, {method.value}) {reason}")
        accs.append(cell.accuracy)
    best = max(accs)
    for (scheme, method), acc in zip(cells, accs):
        if acc >= best - tol:
            if scenario is Scenario.POOL:
                return MetaTarget(pool=scheme)
            if scenario is Scenario.DS:
                return MetaTarget(ds=method)
            return MetaTarget(pool=scheme, ds=method)
    raise AssertionError("unreachable: max exists")


def canonical_split_seed(master_seed: int, dataset_id: str) -> int:
    return derive_seed(master_seed, dataset_id, "split")


def extraction_seed(master_seed: int, dataset_id: str) -> int:
    return derive_seed(master_seed, dataset_id, "metafeatures")


def dataset_meta_features(
    ds: Dataset, master_seed: int, config: RunConfig = DEFAULT_CONFIG
) -> MetaFeatureVector:
    """Meta-features of a dataset's canonical train partition only."""
    split = stratified_split(ds, config.train_ratio, canonical_split_seed(master_seed, ds.id))
    return extract_meta_features(split.train, extraction_seed(master_seed, ds.id), config)


def build_meta_dataset(
    datasets: list[Dataset],
    scenario: Scenario,
    fixed=None,
    seed: int = 0,
    grids: dict | None = None,
    meta_features: dict[str, MetaFeatureVector] | None = None,
    config: RunConfig = DEFAULT_CONFIG,
    tol: float | None = None,
) -> tuple[MetaDataset, list[tuple[str, str]]]:
    """One meta-row per dataset; datasets whose candidate cells are excluded
    (degenerate pools) are reported instead of silently dropped."""
    if len(datasets) < 2:
        raise CorpusTooSmall("need at least 2 datasets to build a meta-dataset")
    if grids is None:
        raise ValueError("grids must be supplied (use the harness to compute them)")
    tol = config.tie_tolerance if tol is None else tol
    rows: list[MetaRow] = []
    exclusions: list[tuple[str, str]] = []
    for ds in datasets:
        grid = grids[ds.id]
        try:
            target = label_meta_target(grid, scenario, fixed, tol)
        except IncompleteGrid as exc:
            exclusions.append((ds.id, str(exc)))
            continue
        mf = (meta_features or {}).get(ds.id) or dataset_meta_features(ds, seed, config)
        rows.append(MetaRow(ds.id, mf, target))
    schema = rows[0].vector.schema_version if rows else "empty"
    return MetaDataset(rows, scenario, fixed, schema), exclusions


# --- meta-models -----------------------------------------------------------


@dataclass
class _MetaScaler:
    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, M: np.ndarray) -> "_MetaScaler":
        means = M.mean(axis=0)
        stds = np.sqrt(np.mean((M - means) ** 2, axis=0))
        return cls(means, np.where(stds > 0.0, stds, 1.0))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (v - self.means) / self.stds


@dataclass
class MetaModel:
    """A fitted meta-classifier over meta-feature vectors.

    kind 'random_forest': majority vote of depth-limited trees.
    kind 'knn': distance-weighted 2-NN; residual ties go to the nearer row.
    """

    kind: str
    label_kind: str  # "pool" | "ds"
    schema_version: str
    scaler: _MetaScaler
    n_inputs: int
    trees: list[TreeModel] | None = None
    train_X: np.ndarray | None = None
    train_y: np.ndarray | None = None
    k: int = 2
    clamped: bool = False

    def predict_index(self, vector: np.ndarray) -> int:
        v = self.scaler.apply(np.asarray(vector, dtype=np.float64))
        if self.kind == "random_forest":
            votes = np.array([int(t.predict(v.reshape(1, -1))[0]) for t in self.trees])
            return int(np.argmax(np.bincount(votes, minlength=self._n_labels())))
        return self._knn_vote(v)

    def _n_labels(self) -> int:
        return len(POOL_SCHEMES) if self.label_kind == "pool" else len(DS_METHODS)

    def _knn_vote(self, v: np.ndarray) -> int:
        dist = np.sqrt(np.sum((self.train_X - v) ** 2, axis=1))
        order = np.argsort(dist, kind="stable")[: min(self.k, dist.size)]
        labels = self.train_y[order]
        d = dist[order]
        if d[0] == 0.0:
            return int(labels[0])
        weights = 1.0 / d
        tallies = np.bincount(labels, weights=weights, minlength=self._n_labels())
        best = tallies.max()
        tied = np.nonzero(tallies == best)[0]
        if tied.size > 1:
            for lab in labels:  # nearest first
                if lab in tied:
                    return int(lab)
        return int(tied[0])


@dataclass
class ChainModel:
    """Two-stage chained recommender: pool first, then the DS method with the
    pool decision appended as a one-hot block."""

    stage1: MetaModel
    stage2: MetaModel
    schema_version: str

    @staticmethod
    def stage2_input(vector: np.ndarray, pool_index: int) -> np.ndarray:
        onehot = np.zeros(len(POOL_SCHEMES))
        onehot[pool_index] = 1.0
        return np.concatenate([np.asarray(vector, dtype=np.float64), onehot])

    def predict(self, vector: np.ndarray) -> MetaTarget:
        pool_idx = self.stage1.predict_index(vector)
        ds_idx = self.stage2.predict_index(self.stage2_input(vector, pool_idx))
        return MetaTarget(POOL_SCHEMES[pool_idx], DS_METHODS[ds_idx])


def _target_indices(mt: MetaDataset) -> tuple[np.ndarray | None, np.ndarray | None]:
    pools = ds = None
    if mt.scenario in (Scenario.POOL, Scenario.PAIR):
        pools = np.array([POOL_SCHEMES.index(r.target.pool) for r in mt.rows])
    if mt.scenario in (Scenario.DS, Scenario.PAIR):
        ds = np.array([DS_METHODS.index(r.target.ds) for r in mt.rows])
    return pools, ds


def train_recommender(mt: MetaDataset, seed: int = 0, config: RunConfig = DEFAULT_CONFIG):
    """Fit the scenario's meta-model on a meta-dataset."""
    if len(mt) == 0:
        raise EmptyMetaDataset("meta-dataset has no rows")
    M = mt.matrix()
    pool_y, ds_y = _target_indices(mt)

    if mt.scenario is Scenario.POOL:
        return _fit_random_forest(M, pool_y, "pool", mt.schema_version, seed, config)
    if mt.scenario is Scenario.DS:
        return _fit_knn(M, ds_y, "ds", mt.schema_version, config)

    stage1 = _fit_knn(M, pool_y, "pool", mt.schema_version, config)
    chained = np.stack(
        [ChainModel.stage2_input(M[i], pool_y[i]) for i in range(M.shape[0])]
    )
    stage2 = _fit_knn(chained, ds_y, "ds", mt.schema_version, config, onehot_tail=True)
    return ChainModel(stage1, stage2, mt.schema_version)


def _fit_knn(M, y, label_kind, schema_version, config, onehot_tail: bool = False) -> MetaModel:
    scaler = _MetaScaler.fit(M)
    if onehot_tail:
        # the chained one-hot block stays raw 0/1
        n_pools = len(POOL_SCHEMES)
        scaler.means[-n_pools:] = 0.0
        scaler.stds[-n_pools:] = 1.0
    k = config.meta_knn_k
    clamped = M.shape[0] < k
    if clamped:
        warnings.warn(f"meta-dataset has {M.shape[0]} row(s); clamping k={k}")
    return MetaModel(
        kind="knn", label_kind=label_kind, schema_version=schema_version,
        scaler=scaler, n_inputs=M.shape[1],
        train_X=scaler.apply(M), train_y=np.asarray(y, dtype=np.int64),
        k=k, clamped=clamped,
    )


def _fit_random_forest(M, y, label_kind, schema_version, seed, config) -> MetaModel:
    scaler = _MetaScaler.fit(M)
    Ms = scaler.apply(M)
    n, D = Ms.shape
    subsample = min(D, math.ceil(math.sqrt(D)))
    n_labels = len(POOL_SCHEMES) if label_kind == "pool" else len(DS_METHODS)
    trees = []
    for t in range(config.meta_rf_trees):
        rng = np.random.default_rng(derive_seed(seed, "meta-rf", t))
        idx = rng.integers(0, n, size=n)
        trees.append(
            train_tree(
                Ms[idx], y[idx], max_depth=config.meta_rf_depth,
                feature_subsample=subsample,
                seed=derive_seed(seed, "meta-rf-split", t), n_classes=n_labels,
            )
        )
    return MetaModel(
        kind="random_forest", label_kind=label_kind, schema_version=schema_version,
        scaler=scaler, n_inputs=D, trees=trees,
    )


def recommend(model, mf: MetaFeatureVector) -> MetaTarget:
    """Apply a fitted meta-model to one meta-feature vector."""
    schema = getattr(model, "schema_version", None)
    if schema != mf.schema_version:
        raise SchemaMismatch(f"model schema {schema!r} != vector schema {mf.schema_version!r}")
    if isinstance(model, ChainModel):
        if mf.values.shape[0] != model.stage1.n_inputs:
            raise SchemaMismatch("vector length does not match the trained schema")
        return model.predict(mf.values)
    if mf.values.shape[0] != model.n_inputs:
        raise SchemaMismatch("vector length does not match the trained schema")
    idx = model.predict_index(mf.values)
    if model.label_kind == "pool":
        return MetaTarget(pool=POOL_SCHEMES[idx])
    return MetaTarget(ds=DS_METHODS[idx])


# --- baselines -------------------------------------------------------------


def baseline_majority(mt: MetaDataset) -> MetaTarget:
    """Modal meta-target; for the pair scenario the modal pool first, then
    the modal DS method among rows carrying that pool."""
    if len(mt) == 0:
        raise EmptyMetaDataset("meta-dataset has no rows")
    if mt.scenario is Scenario.POOL:
        return MetaTarget(pool=POOL_SCHEMES[_mode([POOL_SCHEMES.index(r.target.pool) for r in mt.rows], len(POOL_SCHEMES))])
    if mt.scenario is Scenario.DS:
        return MetaTarget(ds=DS_METHODS[_mode([DS_METHODS.index(r.target.ds) for r in mt.rows], len(DS_METHODS))])
    pool_idx = _mode([POOL_SCHEMES.index(r.target.pool) for r in mt.rows], len(POOL_SCHEMES))
    pool = POOL_SCHEMES[pool_idx]
    among = [DS_METHODS.index(r.target.ds) for r in mt.rows if r.target.pool is pool]
    return MetaTarget(pool=pool, ds=DS_METHODS[_mode(among, len(DS_METHODS))])


def _mode(indices: list[int], n_labels: int) -> int:
    return int(np.argmax(np.bincount(np.asarray(indices, dtype=np.int64), minlength=n_labels)))


def dataset_wins(grid, scenario: Scenario, fixed=None, tol: float = 1e-12) -> list[bool]:
    """Win flag per candidate cell: accuracy ties the dataset's best."""
    cells = candidate_cells(scenario, fixed)
    accs = [grid.cell(s, m).accuracy for s, m in cells]
    best = max(accs)
    return [a >= best - tol for a in accs]


def baseline_average(grids: list, scenario: Scenario, fixed=None, tol: float = 1e-12) -> float:
    """Mean over candidate choices of their per-dataset win rates."""
    if not grids:
        raise ValueError("grids must be nonempty")
    cells = candidate_cells(scenario, fixed)
    wins = np.zeros(len(cells))
    for grid in grids:
        wins += np.array(dataset_wins(grid, scenario, fixed, tol), dtype=np.float64)
    return float(np.mean(wins / len(grids)))


def average_interpretations(grids: list, scenario: Scenario, fixed=None, tol: float = 1e-12) -> dict:
    """Both readings of the 'average over configurations' baseline: the mean
    win rate and the mean accuracy, plus the raw mean win count."""
    cells = candidate_cells(scenario, fixed)
    wins = np.zeros(len(cells))
    acc_sum = np.zeros(len(cells))
    for grid in grids:
        wins += np.array(dataset_wins(grid, scenario, fixed, tol), dtype=np.float64)
        acc_sum += np.array([grid.cell(s, m).accuracy for s, m in cells])
    n = len(grids)
    return {
        "win_rate_average": float(np.mean(wins / n)),
        "mean_win_count": float(np.mean(wins)),
        "accuracy_average": float(np.mean(acc_sum / n)),
        "total_wins": int(wins.sum()),
        "n_candidates": len(cells),
    }
