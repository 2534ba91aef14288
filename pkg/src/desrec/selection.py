"""The seven dynamic-selection methods.

Each method maps (pool, DSEL, query) to a label through a K-nearest region
of competence. Competence kernels are pure functions of correctness tables
so they can be checked against brute-force oracles; the wrappers compute
the tables from live pools. Tie rules are total: competence ties resolve to
the lowest model index, vote ties to the lowest class index.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import DselTooSmall, MissingMetaModel, SingleMetaClass
from .models import GaussianNBModel, knn_neighbors, train_gaussian_nb
from .pools import Pool, profile_similarity


class DsMethod(enum.Enum):
    OLA = "OLA"
    MLA = "MLA"
    KNORA_E = "KNORA_E"
    KNORA_U = "KNORA_U"
    META_DES = "META_DES"
    DES_MI = "DES_MI"
    DES_P = "DES_P"


DS_METHODS: tuple[DsMethod, ...] = tuple(DsMethod)


@dataclass(frozen=True)
class RegionOfCompetence:
    """The K nearest DSEL rows to a query, with their labels and features."""

    indices: np.ndarray
    distances: np.ndarray
    labels: np.ndarray
    features: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]


def region_of_competence(dsel: Dataset, x: np.ndarray, k: int = 7) -> RegionOfCompetence:
    if dsel.n_rows < k:
        raise DselTooSmall(f"DSEL has {dsel.n_rows} rows, need at least {k}")
    nn = knn_neighbors(dsel, x, k)
    return RegionOfCompetence(
        nn.indices, nn.distances, dsel.labels[nn.indices], dsel.features[nn.indices]
    )


@dataclass
class DselContext:
    """Pool predictions cached over a DSEL set so per-query work stays small."""

    predictions: np.ndarray  # (n_models, n_dsel)

    @classmethod
    def build(cls, pool: Pool, dsel: Dataset) -> "DselContext":
        return cls(pool.member_predictions(dsel.features).T)


def correctness_table(pool: Pool, roc: RegionOfCompetence, context: DselContext | None = None) -> np.ndarray:
    """Boolean (n_models, K) table: member i correct on roc neighbor j."""
    if context is not None:
        return context.predictions[:, roc.indices] == roc.labels
    preds = pool.member_predictions(roc.features)  # (K, M)
    return preds.T == roc.labels


# --- competence kernels (pure, oracle-testable) -----------------------------


def ola_pick(correct: np.ndarray) -> int:
    """Index of the model with the highest local accuracy."""
    return int(np.argmax(correct.mean(axis=1)))


def mla_pick(correct: np.ndarray, distances: np.ndarray) -> int:
    """Like OLA but neighbors weigh in with inverse distance."""
    w = 1.0 / (distances + 1e-12)
    competence = (correct * w).sum(axis=1) / w.sum()
    return int(np.argmax(competence))


def knora_e_pick(correct: np.ndarray) -> np.ndarray:
    """Models correct on all k' nearest neighbors, for the largest k' with
    any survivor; the whole pool when even k'=1 leaves nobody."""
    n_models, k = correct.shape
    for kp in range(k, 0, -1):
        mask = correct[:, :kp].all(axis=1)
        if mask.any():
            return np.nonzero(mask)[0]
    return np.arange(n_models)


def knora_u_weights(correct: np.ndarray) -> np.ndarray:
    """One vote weight per model: how many neighbors it got right."""
    return correct.sum(axis=1).astype(np.float64)


def des_p_pick(correct: np.ndarray, n_classes: int) -> np.ndarray:
    """Models strictly above chance locally; whole pool when none are."""
    competence = correct.mean(axis=1) - 1.0 / n_classes
    chosen = np.nonzero(competence > 0.0)[0]
    return chosen if chosen.size else np.arange(correct.shape[0])


def des_mi_pick(correct: np.ndarray, neighbor_labels: np.ndarray, share: float = 0.4) -> np.ndarray:
    """Top ceil(share * pool) models by class-rebalanced local accuracy.

    Each neighbor's weight is inversely proportional to how often its class
    appears in the region, so minority-class neighbors count more.
    """
    if not (0.0 < share <= 1.0):
        raise ValueError("share must be in (0, 1]")
    counts = np.bincount(neighbor_labels)
    u = 1.0 / counts[neighbor_labels]
    u = u / u.sum()
    competence = (correct * u).sum(axis=1)
    n_sel = math.ceil(share * correct.shape[0])
    order = np.lexsort((np.arange(correct.shape[0]), -competence))
    return np.sort(order[:n_sel])


def majority_vote(predictions: np.ndarray, n_classes: int, weights: np.ndarray | None = None) -> int:
    tallies = np.bincount(
        predictions, weights=weights, minlength=n_classes
    )
    return int(np.argmax(tallies))


# --- spec-level wrappers ------------------------------------------------------


def ola_select(pool: Pool, roc: RegionOfCompetence, context: DselContext | None = None) -> int:
    return ola_pick(correctness_table(pool, roc, context))


def mla_select(pool: Pool, roc: RegionOfCompetence, context: DselContext | None = None) -> int:
    return mla_pick(correctness_table(pool, roc, context), roc.distances)


def knora_e_select(pool: Pool, roc: RegionOfCompetence, context: DselContext | None = None) -> np.ndarray:
    return knora_e_pick(correctness_table(pool, roc, context))


def knora_u_vote(
    pool: Pool, roc: RegionOfCompetence, x: np.ndarray, context: DselContext | None = None
) -> int:
    weights = knora_u_weights(correctness_table(pool, roc, context))
    preds = pool.member_predictions(np.asarray(x).reshape(1, -1))[0]
    if weights.sum() == 0.0:
        return majority_vote(preds, pool.n_classes)
    return majority_vote(preds, pool.n_classes, weights)


def des_p_select(pool: Pool, roc: RegionOfCompetence, context: DselContext | None = None) -> np.ndarray:
    return des_p_pick(correctness_table(pool, roc, context), pool.n_classes)


def des_mi_select(
    pool: Pool, roc: RegionOfCompetence, share: float = 0.4, context: DselContext | None = None
) -> np.ndarray:
    return des_mi_pick(correctness_table(pool, roc, context), roc.labels, share)


# --- META-DES -----------------------------------------------------------------


@dataclass
class MetaDesModel:
    """Meta-level competence model plus the DSEL statistics it needs at query
    time: output profiles, per-model correctness and true-class posteriors."""

    nb: GaussianNBModel
    k: int
    kp: int
    threshold: float
    dsel_profiles: np.ndarray     # (n_dsel, n_models)
    dsel_correct: np.ndarray      # (n_models, n_dsel)
    dsel_true_proba: np.ndarray   # (n_models, n_dsel)

    @property
    def n_meta_features(self) -> int:
        return 2 * self.k + self.kp + 2


def metades_fit(
    pool: Pool,
    dsel: Dataset,
    k: int = 7,
    kp: int = 5,
    seed: int = 0,
    threshold: float = 0.5,
) -> MetaDesModel:
    """Build one meta-example per (model, DSEL instance) and fit a Gaussian
    Naive Bayes over them.

    The feature layout is [f1 (K correctness flags), f2 (K true-class
    posteriors), f3 (mean of f1), f4 (Kp profile-neighbour correctness
    flags), f5 (max posterior at the instance)]; the meta-label says whether
    the model classifies the instance correctly. Instance j is excluded from
    its own neighbour and profile candidates.
    """
    n = dsel.n_rows
    if n < max(k, kp) + 1:
        raise DselTooSmall(f"DSEL has {n} rows, need at least {max(k, kp) + 1}")
    X, y = dsel.features, dsel.labels
    M = len(pool)

    proba = pool.member_probabilities(X)              # (M, n, L)
    preds = np.argmax(proba, axis=2)                  # (M, n)
    correct = preds == y                              # (M, n)
    profiles = preds.T                                # (n, M)
    true_proba = proba[:, np.arange(n), y]            # (M, n)

    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    np.fill_diagonal(dist, np.inf)
    knn_rows = np.argsort(dist, axis=1, kind="stable")[:, :k]           # (n, k)

    sims = np.stack([profile_similarity(profiles[j], profiles) for j in range(n)])
    np.fill_diagonal(sims, -1)
    prof_rows = np.argsort(-sims, axis=1, kind="stable")[:, :kp]        # (n, kp)

    feats = _meta_feature_block(correct, true_proba, proba, knn_rows, prof_rows, y)
    labels = correct.reshape(-1).astype(np.int64)
    if labels.min() == labels.max():
        raise SingleMetaClass(
            "every (model, instance) pair has the same outcome on the DSEL"
        )
    nb = train_gaussian_nb(feats, labels, n_classes=2)
    return MetaDesModel(nb, k, kp, threshold, profiles, correct, true_proba)


def _meta_feature_block(correct, true_proba, proba, knn_rows, prof_rows, y):
    """Assemble the (M * n, 2k + kp + 2) meta-feature matrix."""
    M, n = correct.shape
    k = knn_rows.shape[1]
    kp = prof_rows.shape[1]
    out = np.empty((M * n, 2 * k + kp + 2))
    for i in range(M):
        f1 = correct[i][knn_rows]                     # (n, k)
        f2 = true_proba[i][knn_rows]                  # (n, k)
        f3 = f1.mean(axis=1, keepdims=True)
        f4 = correct[i][prof_rows]                    # (n, kp)
        f5 = proba[i].max(axis=1, keepdims=True)
        out[i * n : (i + 1) * n] = np.hstack([f1, f2, f3, f4, f5])
    return out


def metades_query_features(
    meta: MetaDesModel, pool: Pool, dsel: Dataset, x: np.ndarray
) -> np.ndarray:
    """The (n_models, 21) meta-feature matrix for one query point."""
    roc = region_of_competence(dsel, x, meta.k)
    x_row = np.asarray(x, dtype=np.float64).reshape(1, -1)
    proba_x = pool.member_probabilities(x_row)[:, 0, :]        # (M, L)
    profile_x = np.argmax(proba_x, axis=1)                     # (M,)
    sims = profile_similarity(profile_x, meta.dsel_profiles)
    prof_rows = np.argsort(-sims, kind="stable")[: meta.kp]

    f1 = meta.dsel_correct[:, roc.indices]
    f2 = meta.dsel_true_proba[:, roc.indices]
    f3 = f1.mean(axis=1, keepdims=True)
    f4 = meta.dsel_correct[:, prof_rows]
    f5 = proba_x.max(axis=1, keepdims=True)
    return np.hstack([f1, f2, f3, f4, f5])


def metades_select(meta: MetaDesModel, pool: Pool, dsel: Dataset, x: np.ndarray) -> np.ndarray:
    """Members whose competence posterior clears the threshold; the whole
    pool when the selection comes back empty."""
    feats = metades_query_features(meta, pool, dsel, x)
    p_competent = meta.nb.predict_proba(feats)[:, 1]
    chosen = np.nonzero(p_competent > meta.threshold)[0]
    return chosen if chosen.size else np.arange(len(pool))


# --- dispatch -----------------------------------------------------------------


def ds_predict(
    method: DsMethod,
    pool: Pool,
    dsel: Dataset,
    x: np.ndarray,
    k: int = 7,
    meta: MetaDesModel | None = None,
    context: DselContext | None = None,
    des_mi_share: float = 0.4,
) -> int:
    """Label one query with the given DS method."""
    if method is DsMethod.META_DES and meta is None:
        raise MissingMetaModel("META_DES requires a fitted meta-model")
    roc = region_of_competence(dsel, x, k)
    x_row = np.asarray(x, dtype=np.float64).reshape(1, -1)

    if method is DsMethod.OLA:
        return int(pool.models[ola_select(pool, roc, context)].predict(x_row)[0])
    if method is DsMethod.MLA:
        return int(pool.models[mla_select(pool, roc, context)].predict(x_row)[0])
    if method is DsMethod.KNORA_U:
        return knora_u_vote(pool, roc, x, context)

    if method is DsMethod.KNORA_E:
        chosen = knora_e_select(pool, roc, context)
    elif method is DsMethod.DES_P:
        chosen = des_p_select(pool, roc, context)
    elif method is DsMethod.DES_MI:
        chosen = des_mi_select(pool, roc, des_mi_share, context)
    elif method is DsMethod.META_DES:
        chosen = metades_select(meta, pool, dsel, x)
    else:
        raise ValueError(f"unknown method {method!r}")
    preds = np.array([int(pool.models[i].predict(x_row)[0]) for i in chosen])
    return majority_vote(preds, pool.n_classes)


def ds_predict_batch(
    method: DsMethod,
    pool: Pool,
    dsel: Dataset,
    X: np.ndarray,
    k: int = 7,
    meta: MetaDesModel | None = None,
    context: DselContext | None = None,
    des_mi_share: float = 0.4,
) -> np.ndarray:
    """Vectorised companion to ds_predict for a whole query matrix."""
    context = context or DselContext.build(pool, dsel)
    return np.array(
        [
            ds_predict(method, pool, dsel, x, k=k, meta=meta, context=context,
                       des_mi_share=des_mi_share)
            for x in np.asarray(X, dtype=np.float64)
        ],
        dtype=np.int64,
    )
