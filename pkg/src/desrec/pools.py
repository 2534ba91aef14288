"""The seven pool-generation schemes and output-profile computation.

Canonical scheme order is fixed (BP, BDT, BSP, BSDT, RF, FLT, LIT) and used
for every tie-break downstream.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from ._util import derive_seed
from .config import DEFAULT_CONFIG, RunConfig
from .datasets import Dataset
from .errors import DegeneratePool
from .models import (
    BaseModel,
    LogisticModel,
    TreeModel,
    train_logistic,
    train_perceptron,
    train_tree,
)


class PoolScheme(enum.Enum):
    BP = "BP"
    BDT = "BDT"
    BSP = "BSP"
    BSDT = "BSDT"
    RF = "RF"
    FLT = "FLT"
    LIT = "LIT"


POOL_SCHEMES: tuple[PoolScheme, ...] = tuple(PoolScheme)


@dataclass
class Pool:
    scheme: PoolScheme
    models: list[BaseModel]
    seed: int
    boost_weights: list[float] | None = None
    bootstrap_indices: list[np.ndarray] | None = None

    def __post_init__(self):
        if len(self.models) < 2:
            raise DegeneratePool(
                f"{self.scheme.value}: produced {len(self.models)} model(s), need at least 2"
            )
        classes = {m.n_classes for m in self.models}
        if len(classes) != 1:
            raise ValueError("all pool members must share n_classes")

    @property
    def n_classes(self) -> int:
        return self.models[0].n_classes

    def __len__(self) -> int:
        return len(self.models)

    def member_predictions(self, X: np.ndarray) -> np.ndarray:
        """Hard predictions of every member, shape (n_rows, n_models)."""
        return np.stack([m.predict(X) for m in self.models], axis=1)

    def member_probabilities(self, X: np.ndarray) -> np.ndarray:
        """Posteriors of every member, shape (n_models, n_rows, n_classes)."""
        return np.stack([m.predict_proba(X) for m in self.models], axis=0)

    def aggregate_predict(self, X: np.ndarray) -> np.ndarray:
        """Pool-level prediction: boosting uses alpha-weighted votes, anything
        else a plain majority vote; ties go to the lowest class index."""
        preds = self.member_predictions(X)
        weights = (
            np.asarray(self.boost_weights)
            if self.boost_weights is not None
            else np.ones(len(self.models))
        )
        tallies = np.zeros((preds.shape[0], self.n_classes))
        rows = np.arange(preds.shape[0])
        for m in range(preds.shape[1]):
            np.add.at(tallies, (rows, preds[:, m]), weights[m])
        return np.argmax(tallies, axis=1)


def generate_pool(
    scheme: PoolScheme,
    train: Dataset,
    size: int = 100,
    seed: int = 0,
    config: RunConfig = DEFAULT_CONFIG,
) -> Pool:
    """Generate a pool of ``size`` base models on the train partition.

    Per-model randomness is keyed by (seed, model index) so bagging-family
    schemes can be evaluated in any order or in parallel.
    """
    if size < 2:
        raise ValueError("pool size must be >= 2")
    X, y, L = train.features, train.labels, train.n_classes
    n, d = X.shape

    if scheme in (PoolScheme.BP, PoolScheme.BDT):
        models, picks = [], []
        for m in range(size):
            rng = np.random.default_rng(derive_seed(seed, "bag", m))
            idx = rng.integers(0, n, size=n)
            picks.append(idx)
            if scheme is PoolScheme.BP:
                models.append(
                    train_perceptron(
                        X[idx], y[idx],
                        epochs=config.perceptron_epochs, lr=config.perceptron_lr,
                        seed=derive_seed(seed, "perceptron", m), n_classes=L,
                    )
                )
            else:
                models.append(train_tree(X[idx], y[idx], n_classes=L))
        return Pool(scheme, models, seed, bootstrap_indices=picks)

    if scheme in (PoolScheme.BSP, PoolScheme.BSDT):
        base = "perceptron" if scheme is PoolScheme.BSP else "stump"
        return adaboost_samme(base, train, T=size, seed=seed, config=config, scheme=scheme)

    if scheme is PoolScheme.RF:
        subsample = math.ceil(math.sqrt(d))
        models, picks = [], []
        for m in range(size):
            rng = np.random.default_rng(derive_seed(seed, "bag", m))
            idx = rng.integers(0, n, size=n)
            picks.append(idx)
            models.append(
                train_tree(
                    X[idx], y[idx],
                    feature_subsample=subsample,
                    seed=derive_seed(seed, "rf-split", m),
                    n_classes=L,
                )
            )
        return Pool(scheme, models, seed, bootstrap_indices=picks)

    if scheme is PoolScheme.FLT:
        sigma = _flt_sigma(X, seed, config.flt_sigma_sample)
        models = []
        for m in range(size):
            rng = np.random.default_rng(derive_seed(seed, "flt-anchor", m))
            anchor = int(rng.integers(0, n))
            w = flt_weights(train, anchor, sigma)
            models.append(train_tree(X, y, weights=w, n_classes=L))
        return Pool(scheme, models, seed)

    if scheme is PoolScheme.LIT:
        return lit_train_pool(train, size, lam=config.lit_penalty, seed=seed, config=config)

    raise ValueError(f"unknown scheme {scheme!r}")


def adaboost_samme(
    base_kind: str,
    train: Dataset,
    T: int = 100,
    seed: int = 0,
    config: RunConfig = DEFAULT_CONFIG,
    scheme: PoolScheme | None = None,
) -> Pool:
    """Multiclass SAMME boosting with perceptron or stump weak learners.

    A round whose weighted error hits 0 or 1 - 1/L stops the loop without
    contributing a model, so every retained alpha is strictly positive.
    Fewer than two retained models raise DegeneratePool.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    X, y, L = train.features, train.labels, train.n_classes
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    models: list[BaseModel] = []
    alphas: list[float] = []
    for t in range(T):
        if base_kind == "perceptron":
            model = train_perceptron(
                X, y,
                epochs=config.perceptron_epochs, lr=config.perceptron_lr,
                seed=derive_seed(seed, "boost", t), n_classes=L, sample_weight=w,
            )
        elif base_kind == "stump":
            model = train_tree(X, y, weights=w, max_depth=1, n_classes=L)
        else:
            raise ValueError(f"unknown base kind {base_kind!r}")
        miss = model.predict(X) != y
        err = float(w[miss].sum())
        if err <= 0.0 or err >= 1.0 - 1.0 / L:
            break
        alpha = math.log((1.0 - err) / err) + math.log(L - 1.0)
        models.append(model)
        alphas.append(alpha)
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    if len(models) < 2:
        raise DegeneratePool(
            f"{(scheme or base_kind)}: boosting stopped after {len(models)} model(s)"
        )
    resolved = scheme or (PoolScheme.BSP if base_kind == "perceptron" else PoolScheme.BSDT)
    return Pool(resolved, models, seed, boost_weights=alphas)


def flt_weights(train: Dataset, anchor_index: int, sigma: float) -> np.ndarray:
    """Gaussian kernel weights centred on one training row."""
    if sigma <= 0.0:
        raise ValueError("sigma must be > 0")
    diff = train.features - train.features[anchor_index]
    sq = np.sum(diff**2, axis=1)
    return np.exp(-sq / (2.0 * sigma**2))


def _flt_sigma(X: np.ndarray, seed: int, max_sample: int) -> float:
    rng = np.random.default_rng(derive_seed(seed, "flt-sigma"))
    n = X.shape[0]
    rows = rng.choice(n, size=min(n, max_sample), replace=False) if n > max_sample else np.arange(n)
    med = float(np.median(pdist(X[rows]))) if rows.size > 1 else 0.0
    return med if med > 0.0 else 1.0


def cos_squared(u: np.ndarray, v: np.ndarray) -> float:
    """Squared cosine between two vectors; zero when either is zero."""
    nu = float(np.dot(u, u))
    nv = float(np.dot(v, v))
    if nu <= 0.0 or nv <= 0.0:
        return 0.0
    dot = float(np.dot(u, v))
    return dot * dot / (nu * nv)


def gradient_repulsion_penalty(frozen: list[LogisticModel]):
    """Penalty pushing a new linear model's input gradients away from the
    frozen models' gradients.

    For a linear model the input gradient of the predicted-class logit at x
    is simply the weight row of the predicted class, so the penalty is
    sum over frozen models of mean_j cos^2(W[c_j], u_j) with the predicted
    class c_j treated as constant during differentiation.
    """

    def penalty(W: np.ndarray, X: np.ndarray):
        n = X.shape[0]
        pred = np.argmax(X @ W.T, axis=1)
        value = 0.0
        grad = np.zeros_like(W)
        for other in frozen:
            other_pred = np.argmax(X @ other.W.T, axis=1)
            U = other.W[other_pred]  # frozen gradient per row
            for c in np.unique(pred):
                rows = np.nonzero(pred == c)[0]
                wc = W[c]
                nw = float(np.dot(wc, wc))
                if nw <= 0.0:
                    continue
                Uc = U[rows]
                nu = np.sum(Uc**2, axis=1)
                ok = nu > 0.0
                if not ok.any():
                    continue
                Uc, nu = Uc[ok], nu[ok]
                dots = Uc @ wc
                value += float(np.sum(dots**2 / (nw * nu))) / n
                # d/dw [ (w.u)^2 / (|w|^2 |u|^2) ]
                coeff = 2.0 * dots / (nw * nu)
                term = coeff[:, None] * (Uc - np.outer(dots / nw, wc))
                grad[c] += term.sum(axis=0) / n
        return value, grad

    return penalty


def lit_train_pool(
    train: Dataset,
    size: int,
    lam: float = 1.0,
    seed: int = 0,
    config: RunConfig = DEFAULT_CONFIG,
) -> Pool:
    """Sequentially trained logistic models whose input gradients are pushed
    apart; earlier models are frozen while later ones train."""
    if size < 2:
        raise ValueError("pool size must be >= 2")
    X, y, L = train.features, train.labels, train.n_classes
    models: list[LogisticModel] = []
    for m in range(size):
        penalty = gradient_repulsion_penalty(models) if (lam > 0.0 and models) else None
        models.append(
            train_logistic(
                X, y,
                epochs=config.logistic_epochs, lr=config.logistic_lr,
                penalty=penalty, lam=lam if penalty is not None else 0.0,
                seed=derive_seed(seed, "lit", m), n_classes=L,
            )
        )
    return Pool(PoolScheme.LIT, models, seed)


def output_profiles(pool: Pool, ds: Dataset) -> np.ndarray:
    """Hard predictions of every pool member per row, shape (n_rows, n_models)."""
    return pool.member_predictions(ds.features)


def profile_similarity(profile: np.ndarray, profiles: np.ndarray) -> np.ndarray:
    """Count of matching entries between one profile and each row of a bank."""
    return np.sum(profiles == profile, axis=1)
