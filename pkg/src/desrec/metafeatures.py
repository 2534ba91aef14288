"""Dataset characterization: a fixed, versioned 55-entry vector.

Groups: general, statistical, information-theoretic, model-based (decision
tree structure), landmarking (cross-validated accuracies of cheap models)
and complexity measures. Multi-valued measures are summarized as population
mean and standard deviation. Extraction reads only the partition it is
given; non-finite entries are imputed to zero with a recorded mask.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import minimum_spanning_tree

from ._util import derive_seed, population_sd
from .config import DEFAULT_CONFIG, RunConfig
from .datasets import Dataset
from .models import knn_neighbors, train_gaussian_nb, train_tree

SCHEMA_VERSION = "mfs-1"

_SUMMARIZED = lambda base: (f"{base}.mean", f"{base}.sd")  # noqa: E731

GENERAL_NAMES = ("nr_inst", "nr_attr", "nr_class", "attr_to_inst",
                 *_SUMMARIZED("freq_class"))
STATISTICAL_NAMES = (
    *_SUMMARIZED("mean"), *_SUMMARIZED("sd"), *_SUMMARIZED("skewness"),
    *_SUMMARIZED("kurtosis"), *_SUMMARIZED("cor_abs"), *_SUMMARIZED("iq_range"),
    *_SUMMARIZED("var"), *_SUMMARIZED("range"), *_SUMMARIZED("sparsity"),
    "nr_outliers", "nr_cor_attr",
)
INFO_THEORY_NAMES = (
    *_SUMMARIZED("attr_ent"), "class_ent", *_SUMMARIZED("joint_ent"),
    *_SUMMARIZED("mut_inf"), "eq_num_attr", "ns_ratio",
)
MODEL_BASED_NAMES = ("leaves", "nodes", *_SUMMARIZED("tree_depth"),
                     *_SUMMARIZED("leaves_per_class"), "nodes_per_attr")
LANDMARKING_NAMES = ("best_node", "worst_node", "random_node", "one_nn", "naive_bayes")
COMPLEXITY_NAMES = ("f1", "f2", "f3", "n1", "n3", "t2", "c1", "c2")

MF_NAMES: tuple[str, ...] = (
    GENERAL_NAMES + STATISTICAL_NAMES + INFO_THEORY_NAMES
    + MODEL_BASED_NAMES + LANDMARKING_NAMES + COMPLEXITY_NAMES
)
SCHEMA_LENGTH = len(MF_NAMES)


@dataclass(frozen=True)
class MetaFeatureVector:
    values: np.ndarray
    schema_version: str
    names: tuple[str, ...]
    imputed_mask: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, (float(v) for v in self.values)))


def summarize_values(values) -> tuple[float, float]:
    """Population mean and sd; empty input summarizes to (0, 0)."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        return 0.0, 0.0
    return float(v.mean()), population_sd(v)


def impute_vector(raw) -> tuple[np.ndarray, np.ndarray]:
    """Replace NaN and infinities with zero; return (values, mask)."""
    raw = np.asarray(raw, dtype=np.float64)
    mask = ~np.isfinite(raw)
    values = np.where(mask, 0.0, raw)
    return values, mask


def extract_meta_features(
    train: Dataset, seed: int, config: RunConfig = DEFAULT_CONFIG
) -> MetaFeatureVector:
    """Compute the full schema from a train partition. Deterministic in
    (train, seed) and invariant to row order."""
    X, y = train.features, train.labels
    n, d = X.shape
    L = train.n_classes
    entries: list[float] = []

    # general
    freqs = train.class_counts() / n
    entries += [n, d, L, d / n, *summarize_values(freqs)]

    # statistical
    means = X.mean(axis=0)
    sds = np.array([population_sd(X[:, j]) for j in range(d)])
    entries += [*summarize_values(means), *summarize_values(sds)]
    entries += [*summarize_values([_skewness(X[:, j]) for j in range(d)])]
    entries += [*summarize_values([_kurtosis(X[:, j]) for j in range(d)])]
    cors = _pairwise_abs_correlations(X)
    entries += [*summarize_values(cors)]
    q1, q3 = np.percentile(X, [25, 75], axis=0)
    entries += [*summarize_values(q3 - q1)]
    entries += [*summarize_values(sds**2)]
    entries += [*summarize_values(X.max(axis=0) - X.min(axis=0))]
    entries += [*summarize_values(_sparsity(X))]
    iqr = q3 - q1
    low, high = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    entries.append(float(np.sum(((X < low) | (X > high)).any(axis=0))))
    entries.append(float(np.sum(cors > config.high_corr_threshold)) if cors.size else 0.0)

    # information-theoretic (base-2 entropies over equal-width bins)
    binned = _equal_width_bins(X, config.entropy_bins)
    attr_ent = np.array([_entropy(binned[:, j]) for j in range(d)])
    class_ent = _entropy(y)
    joint_ent = np.array(
        [_entropy(binned[:, j] * (L + 1) + y) for j in range(d)]
    )
    mut_inf = attr_ent + class_ent - joint_ent
    entries += [*summarize_values(attr_ent), class_ent, *summarize_values(joint_ent)]
    entries += [*summarize_values(mut_inf)]
    mean_mi = float(mut_inf.mean())
    with np.errstate(divide="ignore", invalid="ignore"):
        entries.append(class_ent / mean_mi if mean_mi != 0.0 else np.inf)
        entries.append(
            (float(attr_ent.mean()) - mean_mi) / mean_mi if mean_mi != 0.0 else np.inf
        )

    # model-based
    entries += _tree_structure_features(X, y, L, d)

    # landmarking
    entries += _landmarking_accuracies(X, y, L, mut_inf, seed, config.landmark_folds)

    # complexity
    entries += [
        _fisher_ratio(X, y, L),
        _overlap_volume(X, y, L),
        _max_individual_efficiency(X, y, L),
        _borderline_fraction(X, y),
        _loo_1nn_error(X, y),
        d / n,
        _class_entropy_normalized(y, L),
        _imbalance_ratio(y, L),
    ]

    raw = np.array(entries, dtype=np.float64)
    if raw.shape[0] != SCHEMA_LENGTH:
        raise RuntimeError(f"schema drift: built {raw.shape[0]} of {SCHEMA_LENGTH} entries")
    values, mask = impute_vector(raw)
    return MetaFeatureVector(values, SCHEMA_VERSION, MF_NAMES, mask)


# --- statistical helpers ------------------------------------------------------


def _skewness(v: np.ndarray) -> float:
    m = v.mean()
    m2 = np.mean((v - m) ** 2)
    if m2 <= 1e-300:
        return np.nan
    return float(np.mean((v - m) ** 3) / m2**1.5)


def _kurtosis(v: np.ndarray) -> float:
    m = v.mean()
    m2 = np.mean((v - m) ** 2)
    if m2 <= 1e-300:
        return np.nan
    return float(np.mean((v - m) ** 4) / m2**2 - 3.0)


def _pairwise_abs_correlations(X: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    if d < 2:
        return np.array([])
    sd = X.std(axis=0)
    centered = X - X.mean(axis=0)
    out = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(d):
            for b in range(a + 1, d):
                cov = float(np.mean(centered[:, a] * centered[:, b]))
                out.append(abs(cov / (sd[a] * sd[b])))
    return np.array(out)


def _sparsity(X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    if n <= 1:
        return np.zeros(X.shape[1])
    out = []
    for j in range(X.shape[1]):
        distinct = np.unique(X[:, j]).size
        out.append((n / distinct - 1.0) / (n - 1.0))
    return np.array(out)


def _equal_width_bins(X: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = X.min(axis=0), X.max(axis=0)
    width = np.where(hi > lo, (hi - lo) / bins, 1.0)
    idx = np.floor((X - lo) / width).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _entropy(codes: np.ndarray) -> float:
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


# --- model-based helpers --------------------------------------------------------


def _tree_structure_features(X, y, L, d) -> list[float]:
    tree = train_tree(X, y, n_classes=L)
    depths, leaf_classes = [], []
    n_leaves = n_internal = 0
    for node, depth in tree.walk():
        depths.append(depth)
        if node.is_leaf:
            n_leaves += 1
            leaf_classes.append(int(np.argmax(node.counts)))
        else:
            n_internal += 1
    per_class = np.bincount(np.array(leaf_classes), minlength=L) / n_leaves
    return [
        float(n_leaves), float(n_internal),
        *summarize_values(depths), *summarize_values(per_class),
        n_internal / d,
    ]


# --- landmarking helpers ---------------------------------------------------------


def _content_fold_assignment(X, y, seed, folds) -> np.ndarray:
    """Stratified fold ids keyed by a content hash of each row, so the
    assignment survives row permutations."""
    n = X.shape[0]
    hashes = np.array(
        [derive_seed(seed, X[i].tobytes(), int(y[i])) for i in range(n)],
        dtype=np.uint64,
    )
    fold = np.empty(n, dtype=np.int64)
    for c in np.unique(y):
        rows = np.nonzero(y == c)[0]
        ranked = rows[np.argsort(hashes[rows], kind="stable")]
        fold[ranked] = np.arange(ranked.size) % folds
    return fold


def _landmarking_accuracies(X, y, L, mut_inf, seed, folds) -> list[float]:
    fold = _content_fold_assignment(X, y, seed, folds)
    best_attr = int(np.argmax(mut_inf))
    worst_attr = int(np.argmin(mut_inf))
    rng = np.random.default_rng(derive_seed(seed, "random-node"))
    random_attr = int(rng.integers(0, X.shape[1]))

    landmarks = {
        "best_node": lambda tr, te: _stump_accuracy(X, y, L, tr, te, best_attr),
        "worst_node": lambda tr, te: _stump_accuracy(X, y, L, tr, te, worst_attr),
        "random_node": lambda tr, te: _stump_accuracy(X, y, L, tr, te, random_attr),
        "one_nn": lambda tr, te: _one_nn_accuracy(X, y, tr, te),
        "naive_bayes": lambda tr, te: _nb_accuracy(X, y, L, tr, te),
    }
    correct = {name: 0 for name in landmarks}
    total = {name: 0 for name in landmarks}
    for f in range(folds):
        te = np.nonzero(fold == f)[0]
        tr = np.nonzero(fold != f)[0]
        if te.size == 0 or tr.size == 0:
            continue
        for name, fn in landmarks.items():
            try:
                hits = fn(tr, te)
            except Exception:
                continue
            correct[name] += hits
            total[name] += te.size
    return [
        correct[name] / total[name] if total[name] else np.nan
        for name in ("best_node", "worst_node", "random_node", "one_nn", "naive_bayes")
    ]


def _stump_accuracy(X, y, L, tr, te, attr) -> int:
    model = train_tree(X[tr][:, [attr]], y[tr], max_depth=1, n_classes=L)
    return int(np.sum(model.predict(X[te][:, [attr]]) == y[te]))


def _one_nn_accuracy(X, y, tr, te) -> int:
    hits = 0
    for row in te:
        nn = knn_neighbors(X[tr], X[row], 1)
        hits += int(y[tr][nn.indices[0]] == y[row])
    return hits


def _nb_accuracy(X, y, L, tr, te) -> int:
    model = train_gaussian_nb(X[tr], y[tr], n_classes=L)
    return int(np.sum(model.predict(X[te]) == y[te]))


# --- complexity helpers ------------------------------------------------------------


def _fisher_ratio(X, y, L) -> float:
    """Max over attributes of between-class / within-class variance."""
    overall = X.mean(axis=0)
    between = np.zeros(X.shape[1])
    within = np.zeros(X.shape[1])
    for c in range(L):
        Xc = X[y == c]
        mu = Xc.mean(axis=0)
        between += Xc.shape[0] * (mu - overall) ** 2
        within += np.sum((Xc - mu) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = between / within
    return float(np.nanmax(ratio)) if np.isfinite(ratio).any() else np.inf


def _class_extents(X, y, L):
    lo = np.stack([X[y == c].min(axis=0) for c in range(L)])
    hi = np.stack([X[y == c].max(axis=0) for c in range(L)])
    return lo.max(axis=0), hi.min(axis=0)  # overlap interval per attribute


def _overlap_volume(X, y, L) -> float:
    over_lo, over_hi = _class_extents(X, y, L)
    width = np.maximum(0.0, over_hi - over_lo)
    span = X.max(axis=0) - X.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = width / span
    return float(np.prod(factors))


def _max_individual_efficiency(X, y, L) -> float:
    over_lo, over_hi = _class_extents(X, y, L)
    inside = (X >= over_lo) & (X <= over_hi) & (over_hi >= over_lo)
    efficiency = 1.0 - inside.mean(axis=0)
    return float(efficiency.max())


def _borderline_fraction(X, y) -> float:
    """Fraction of points incident to an opposite-class edge of the
    Euclidean minimum spanning tree."""
    n = X.shape[0]
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    mst = minimum_spanning_tree(csr_matrix(np.triu(dist + 1e-12, k=1))).tocoo()
    marked = np.zeros(n, dtype=bool)
    for a, b in zip(mst.row, mst.col):
        if y[a] != y[b]:
            marked[a] = marked[b] = True
    return float(marked.mean())


def _loo_1nn_error(X, y) -> float:
    n = X.shape[0]
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    np.fill_diagonal(dist, np.inf)
    nearest = np.argmin(dist, axis=1)  # first minimum = lowest index on ties
    return float(np.mean(y[nearest] != y))


def _class_entropy_normalized(y, L) -> float:
    p = np.bincount(y, minlength=L) / y.size
    p = p[p > 0]
    return float(-(p * np.log(p)).sum() / np.log(L))


def _imbalance_ratio(y, L) -> float:
    n = y.size
    counts = np.bincount(y, minlength=L)
    ir = (L - 1.0) / L * float(np.sum(counts / (n - counts)))
    return 1.0 - 1.0 / ir
