"""Dataset container, CSV ingestion, synthetic corpus generation, stratified
splitting and z-score normalization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import rng_from
from .errors import (
    ClassTooSmall,
    InvalidSpec,
    MissingHeader,
    NonNumericFeature,
    RaggedRow,
    SingleClass,
)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable feature matrix with dense integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    id: str

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("features must be (n, d) with one label per row")
        if X.shape[0] < 2:
            raise ValueError("a dataset needs at least two rows")
        if not np.isfinite(X).all():
            raise ValueError("all feature values must be finite")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length must match the column count")
        n_classes = int(y.max()) + 1 if y.size else 0
        if n_classes < 2:
            raise SingleClass("a dataset needs at least two classes")
        present = np.bincount(y, minlength=n_classes)
        if y.min() < 0 or (present == 0).any():
            raise ValueError("labels must be dense integers 0..L-1, all present")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        X.setflags(write=False)
        y.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def with_features(self, features: np.ndarray, id: str | None = None) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names, id or self.id)


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int


@dataclass(frozen=True)
class ScalerParams:
    """Per-column z-score parameters fitted from a train partition only."""

    means: np.ndarray
    stds: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds


@dataclass(frozen=True)
class SynthSpec:
    n: int
    d: int
    classes: int
    cluster_std: float
    imbalance: float
    label_noise: float
    informative: int

    def validate(self) -> None:
        if self.classes < 2:
            raise InvalidSpec("classes must be >= 2")
        if self.n < 2 * self.classes:
            raise InvalidSpec("n must be >= 2 * classes")
        if self.d < 1:
            raise InvalidSpec("d must be >= 1")
        if not (1 <= self.informative <= self.d):
            raise InvalidSpec("informative must be in [1, d]")
        if self.cluster_std < 0:
            raise InvalidSpec("cluster_std must be >= 0")
        if not (0.0 <= self.imbalance <= 1.0):
            raise InvalidSpec("imbalance must be in [0, 1]")
        if not (0.0 <= self.label_noise <= 1.0):
            raise InvalidSpec("label_noise must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "classes": self.classes,
            "cluster_std": self.cluster_std,
            "imbalance": self.imbalance,
            "label_noise": self.label_noise,
            "informative": self.informative,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthSpec":
        return cls(**{k: raw[k] for k in (
            "n", "d", "classes", "cluster_std", "imbalance", "label_noise", "informative")})


def load_dataset(path: str | Path) -> Dataset:
    """Read a CSV file (header row, numeric features, label in the last column).

    Labels are re-encoded to dense integers in first-appearance order and the
    dataset id is the file stem.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise MissingHeader(f"{path.name}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise MissingHeader(f"{path.name}: header must name features and a label")
    if all(_parses_as_float(cell) for cell in header[:-1]):
        raise MissingHeader(f"{path.name}: first row looks like data, not a header")

    n_cols = len(header)
    feats: list[list[float]] = []
    raw_labels: list[str] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != n_cols:
            raise RaggedRow(line_no)
        parsed = []
        for name, cell in zip(header[:-1], row[:-1]):
            try:
                value = float(cell)
            except ValueError:
                raise NonNumericFeature(name, line_no) from None
            if not math.isfinite(value):
                raise NonNumericFeature(name, line_no)
            parsed.append(value)
        feats.append(parsed)
        raw_labels.append(row[-1])

    encoding: dict[str, int] = {}
    for lab in raw_labels:
        if lab not in encoding:
            encoding[lab] = len(encoding)
    if len(encoding) < 2:
        raise SingleClass(f"{path.name}: label column has fewer than two distinct values")
    labels = np.array([encoding[lab] for lab in raw_labels], dtype=np.int64)
    return Dataset(np.array(feats, dtype=np.float64), labels, tuple(header[:-1]), path.stem)


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def save_dataset_csv(ds: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + ["label"])
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def synth_dataset(spec: SynthSpec, seed: int, id: str | None = None) -> Dataset:
    """Generate Gaussian class clusters. Deterministic in (spec, seed)."""
    spec.validate()
    rng = np.random.default_rng(seed)
    counts = _class_counts(spec, rng)
    n, d, L = spec.n, spec.d, spec.classes

    centers = rng.normal(0.0, 3.0, size=(L, spec.informative))
    labels = np.repeat(np.arange(L), counts)
    X = rng.normal(0.0, 1.0, size=(n, d))
    X[:, : spec.informative] *= spec.cluster_std
    X[:, : spec.informative] += centers[labels]

    order = rng.permutation(n)
    X, labels = X[order], labels[order]

    flips = int(round(spec.label_noise * n))
    if flips:
        idx = rng.choice(n, size=flips, replace=False)
        labels[idx] = rng.integers(0, L, size=flips)
    labels = _repair_missing_classes(labels, L)

    names = tuple(f"f{j}" for j in range(d))
    return Dataset(X, labels, names, id or f"synth-{seed}")


def _class_counts(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    ratio = 1.0 - spec.imbalance
    priors = np.array([ratio**c for c in range(spec.classes)], dtype=np.float64)
    priors /= priors.sum()
    counts = _largest_remainder(priors * spec.n, spec.n)
    # every class must appear at least once
    while (counts == 0).any():
        counts[int(np.argmin(counts))] += 1
        counts[int(np.argmax(counts))] -= 1
    return counts


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    extra = total - int(base.sum())
    if extra:
        frac = quotas - base
        order = np.lexsort((np.arange(len(quotas)), -frac))
        base[order[:extra]] += 1
    return base


def _repair_missing_classes(labels: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=n_classes)
    for c in range(n_classes):
        if counts[c] == 0:
            donor = int(np.argmax(counts))
            row = int(np.nonzero(labels == donor)[0][-1])
            labels[row] = c
            counts[donor] -= 1
            counts[c] += 1
    return labels


def stratified_split(ds: Dataset, train_ratio: float, seed: int) -> SplitPair:
    """Seeded stratified holdout split with largest-remainder allocation."""
    if not (0.0 < train_ratio < 1.0):
        raise ValueError("train_ratio must be in (0, 1)")
    counts = ds.class_counts()
    for c, cnt in enumerate(counts):
        if math.floor(train_ratio * cnt) < 1:
            raise ClassTooSmall(c)
    target = int(math.floor(train_ratio * ds.n_rows + 0.5))
    quotas = train_ratio * counts
    alloc = _largest_remainder(quotas, target)
    for c, (a, cnt) in enumerate(zip(alloc, counts)):
        if a < 1 or a > cnt - 1:
            raise ClassTooSmall(c)

    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n_rows)
    taken = np.zeros(ds.n_classes, dtype=np.int64)
    train_rows, test_rows = [], []
    for row in order:
        c = ds.labels[row]
        if taken[c] < alloc[c]:
            train_rows.append(row)
            taken[c] += 1
        else:
            test_rows.append(row)
    train_idx = np.array(train_rows, dtype=np.int64)
    test_idx = np.array(test_rows, dtype=np.int64)
    train = Dataset(ds.features[train_idx], ds.labels[train_idx], ds.feature_names, f"{ds.id}/train")
    test = Dataset(ds.features[test_idx], ds.labels[test_idx], ds.feature_names, f"{ds.id}/test")
    return SplitPair(train, test, seed)


def zscore_fit_apply(train: Dataset, others: list[Dataset]) -> tuple[ScalerParams, list[Dataset]]:
    """Fit z-score parameters on train only; transform train and the others.

    Population standard deviation; zero-variance columns pass through centered.
    """
    X = train.features
    means = X.mean(axis=0)
    stds = np.sqrt(np.mean((X - means) ** 2, axis=0))
    stds = np.where(stds > 0.0, stds, 1.0)
    params = ScalerParams(means, stds)
    transformed = [ds.with_features(params.apply(ds.features)) for ds in [train, *others]]
    return params, transformed


# --- synthetic corpus -------------------------------------------------------

# Template families deliberately span easy/hard, balanced/skewed, clean/noisy
# problems; corpus instances jitter around a family so nearest-neighbour
# recommendation has structure to latch onto.
_CORPUS_TEMPLATES: tuple[dict, ...] = (
    dict(d=2, classes=2, cluster_std=0.7, imbalance=0.0, label_noise=0.03, informative=2),
    dict(d=2, classes=3, cluster_std=1.6, imbalance=0.2, label_noise=0.05, informative=2),
    dict(d=4, classes=2, cluster_std=1.0, imbalance=0.45, label_noise=0.10, informative=3),
    dict(d=4, classes=4, cluster_std=2.2, imbalance=0.0, label_noise=0.05, informative=4),
    dict(d=6, classes=2, cluster_std=2.8, imbalance=0.3, label_noise=0.15, informative=2),
    dict(d=6, classes=3, cluster_std=0.9, imbalance=0.55, label_noise=0.08, informative=5),
    dict(d=8, classes=2, cluster_std=1.8, imbalance=0.0, label_noise=0.20, informative=4),
    dict(d=8, classes=4, cluster_std=1.2, imbalance=0.35, label_noise=0.04, informative=6),
    dict(d=10, classes=3, cluster_std=2.4, imbalance=0.15, label_noise=0.12, informative=4),
    dict(d=12, classes=2, cluster_std=1.1, imbalance=0.6, label_noise=0.06, informative=6),
    dict(d=3, classes=3, cluster_std=3.0, imbalance=0.1, label_noise=0.18, informative=3),
    dict(d=5, classes=2, cluster_std=0.5, imbalance=0.25, label_noise=0.10, informative=2),
)


def default_corpus_manifest(count: int, seed: int, n_min: int = 110, n_max: int = 170) -> list[dict]:
    """Build a manifest of synthetic dataset specs spanning the template families."""
    records = []
    for i in range(count):
        tpl = dict(_CORPUS_TEMPLATES[i % len(_CORPUS_TEMPLATES)])
        rng = rng_from(seed, "corpus", i)
        n = int(rng.integers(n_min, n_max + 1))
        tpl["cluster_std"] = float(round(tpl["cluster_std"] * rng.uniform(0.85, 1.15), 4))
        tpl["label_noise"] = float(round(min(1.0, tpl["label_noise"] * rng.uniform(0.8, 1.2)), 4))
        spec = SynthSpec(n=n, **tpl)
        records.append({"id": f"syn-{i:03d}", **spec.to_dict(), "seed": int(rng.integers(0, 2**63 - 1))})
    return records


def dataset_from_manifest_record(record: dict) -> Dataset:
    spec = SynthSpec.from_dict(record)
    return synth_dataset(spec, int(record["seed"]), id=str(record["id"]))


def write_manifest(records: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text())
