"""From-scratch base learners used by pools, selection internals, landmarking
and the meta-level models.

Every trained model exposes ``predict`` / ``predict_proba`` with the same
contract: probabilities are a simplex over the class ids and ``predict`` is
the argmax with ties resolved to the lowest class index.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .errors import AllZeroWeights, KTooLarge


class BaseModel:
    kind: str = ""
    n_classes: int = 0

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


# --- decision tree -----------------------------------------------------------


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None  # weighted class counts at a leaf

    @property
    def is_leaf(self) -> bool:
        return self.counts is not None


class TreeModel(BaseModel):
    kind = "tree"

    def __init__(self, root: TreeNode, n_classes: int):
        self.root = root
        self.n_classes = n_classes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X)
        out = np.empty((X.shape[0], self.n_classes), dtype=np.float64)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if node.is_leaf:
                out[rows] = node.counts / node.counts.sum()
            else:
                go_left = X[rows, node.feature] <= node.threshold
                stack.append((node.left, rows[go_left]))
                stack.append((node.right, rows[~go_left]))
        return out

    def walk(self):
        """Yield (node, depth) over the whole tree, root first."""
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            if not node.is_leaf:
                stack.append((node.right, depth + 1))
                stack.append((node.left, depth + 1))


def train_tree(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
    max_depth: int | None = None,
    feature_subsample: int | None = None,
    seed: int = 0,
    n_classes: int | None = None,
) -> TreeModel:
    """Fit a CART classifier: Gini impurity, midpoint thresholds.

    A node becomes a leaf at purity, at ``max_depth``, or when its total
    weight drops below 2. Zero-weight rows are equivalent to deleted rows.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    keep = w > 0
    if not keep.any():
        raise AllZeroWeights("all training weights are zero")
    X, y, w = X[keep], y[keep], w[keep]
    L = n_classes if n_classes is not None else int(y.max()) + 1
    rng = np.random.default_rng(seed)

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        counts = np.bincount(y[rows], weights=w[rows], minlength=L)
        total = counts.sum()
        pure = np.count_nonzero(counts) == 1
        if pure or total < 2.0 or (max_depth is not None and depth >= max_depth):
            return TreeNode(counts=counts)
        if feature_subsample is not None and feature_subsample < d:
            candidates = np.sort(rng.choice(d, size=feature_subsample, replace=False))
        else:
            candidates = np.arange(d)
        split = _best_split(X, y, w, rows, candidates, L)
        if split is None:
            return TreeNode(counts=counts)
        feat, thr = split
        go_left = X[rows, feat] <= thr
        return TreeNode(
            feature=feat,
            threshold=thr,
            left=grow(rows[go_left], depth + 1),
            right=grow(rows[~go_left], depth + 1),
        )

    root = grow(np.arange(X.shape[0]), 0)
    return TreeModel(root, L)


def _best_split(X, y, w, rows, candidates, L):
    best = None  # (cost, feature, threshold)
    y_rows = y[rows]
    w_rows = w[rows]
    total_w = w_rows.sum()
    for feat in candidates:
        v = X[rows, feat]
        order = np.argsort(v, kind="stable")
        vs, ws, ys = v[order], w_rows[order], y_rows[order]
        bounds = np.nonzero(np.diff(vs) > 0)[0]
        if bounds.size == 0:
            continue
        onehot = np.zeros((vs.size, L))
        onehot[np.arange(vs.size), ys] = ws
        cum = np.cumsum(onehot, axis=0)
        left = cum[bounds]
        right = cum[-1] - left
        wl = left.sum(axis=1)
        wr = right.sum(axis=1)
        gini_l = 1.0 - np.sum((left / wl[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right / wr[:, None]) ** 2, axis=1)
        cost = (wl * gini_l + wr * gini_r) / total_w
        i = int(np.argmin(cost))
        if best is None or cost[i] < best[0]:
            best = (cost[i], int(feat), float((vs[bounds[i]] + vs[bounds[i] + 1]) / 2.0))
    if best is None:
        return None
    return best[1], best[2]


# --- perceptron ---------------------------------------------------------------


class PerceptronModel(BaseModel):
    kind = "perceptron"

    def __init__(self, W: np.ndarray, b: np.ndarray):
        self.W = W
        self.b = b
        self.n_classes = W.shape[0]

    def scores(self, X: np.ndarray) -> np.ndarray:
        return _as_matrix(X) @ self.W.T + self.b

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def train_perceptron(
    X: np.ndarray,
    y: np.ndarray,
    epochs: int = 100,
    lr: float = 1.0,
    seed: int = 0,
    n_classes: int | None = None,
    sample_weight: np.ndarray | None = None,
) -> PerceptronModel:
    """One-vs-rest perceptrons with a seeded per-epoch row shuffle.

    ``sample_weight`` scales the mistake update by n * w_i so that uniform
    weights reproduce the unweighted learner; boosting relies on this.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    L = n_classes if n_classes is not None else int(y.max()) + 1
    scale = np.ones(n) if sample_weight is None else n * np.asarray(sample_weight, dtype=np.float64)
    W = np.zeros((L, d))
    b = np.zeros(L)
    rng = np.random.default_rng(seed)
    targets = np.full((n, L), -1.0)
    targets[np.arange(n), y] = 1.0
    for _ in range(epochs):
        order = rng.permutation(n)
        mistakes = 0
        for i in order:
            s = W @ X[i] + b
            t = targets[i]
            wrong = t * s <= 0.0
            if wrong.any():
                mistakes += 1
                step = lr * scale[i] * t[wrong]
                W[wrong] += step[:, None] * X[i]
                b[wrong] += step
        if mistakes == 0:
            break
    return PerceptronModel(W, b)


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


# --- gaussian naive bayes ------------------------------------------------------


class GaussianNBModel(BaseModel):
    kind = "gaussian_nb"

    def __init__(self, theta: np.ndarray, var: np.ndarray, priors: np.ndarray):
        self.theta = theta
        self.var = var
        self.priors = priors
        self.n_classes = theta.shape[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X)
        # joint log-likelihood per class; absent classes carry prior 0
        log_j = np.full((X.shape[0], self.n_classes), -np.inf)
        for c in range(self.n_classes):
            if self.priors[c] <= 0.0:
                continue
            diff = X - self.theta[c]
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var[c]) + diff**2 / self.var[c], axis=1)
            log_j[:, c] = np.log(self.priors[c]) + ll
        log_j -= log_j.max(axis=1, keepdims=True)
        P = np.exp(log_j)
        return P / P.sum(axis=1, keepdims=True)


def train_gaussian_nb(X: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> GaussianNBModel:
    """Per-class, per-feature Gaussians with variance smoothing
    1e-9 * max feature variance; empirical class priors."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    L = n_classes if n_classes is not None else int(y.max()) + 1
    global_var = np.mean((X - X.mean(axis=0)) ** 2, axis=0)
    eps = 1e-9 * max(float(global_var.max()) if d else 0.0, 1e-12)
    theta = np.zeros((L, d))
    var = np.ones((L, d))
    priors = np.zeros(L)
    for c in range(L):
        rows = y == c
        cnt = int(rows.sum())
        priors[c] = cnt / n
        if cnt == 0:
            continue
        Xc = X[rows]
        theta[c] = Xc.mean(axis=0)
        var[c] = np.mean((Xc - theta[c]) ** 2, axis=0) + eps
    return GaussianNBModel(theta, var, priors)


# --- logistic regression --------------------------------------------------------


class LogisticModel(BaseModel):
    kind = "logistic"

    def __init__(self, W: np.ndarray, b: np.ndarray):
        self.W = W
        self.b = b
        self.n_classes = W.shape[0]

    def scores(self, X: np.ndarray) -> np.ndarray:
        return _as_matrix(X) @ self.W.T + self.b

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.scores(X))


def cross_entropy_and_grad(W, b, X, y):
    """Mean cross-entropy of a multinomial logistic model plus gradients."""
    n = X.shape[0]
    P = softmax(X @ W.T + b)
    eps = 1e-300
    loss = -float(np.mean(np.log(P[np.arange(n), y] + eps)))
    G = P.copy()
    G[np.arange(n), y] -= 1.0
    return loss, (G.T @ X) / n, G.mean(axis=0)


def total_loss_and_grad(W, b, X, y, penalty=None, lam: float = 0.0):
    """Cross-entropy plus ``lam * penalty``; the penalty callable receives the
    weight matrix and inputs and returns (value, grad_wrt_W)."""
    loss, dW, db = cross_entropy_and_grad(W, b, X, y)
    if penalty is not None and lam > 0.0:
        val, gW = penalty(W, X)
        loss += lam * val
        dW = dW + lam * gW
    return loss, dW, db


def train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    epochs: int = 200,
    lr: float = 0.01,
    penalty=None,
    lam: float = 0.0,
    seed: int = 0,
    n_classes: int | None = None,
) -> LogisticModel:
    """Full-batch gradient descent on cross-entropy + lam * penalty.

    Weights start at zero, so training is deterministic; ``seed`` is accepted
    for interface uniformity with the other trainers.
    """
    if lam < 0.0:
        raise ValueError("lam must be >= 0")
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    L = n_classes if n_classes is not None else int(y.max()) + 1
    W = np.zeros((L, X.shape[1]))
    b = np.zeros(L)
    for _ in range(epochs):
        _, dW, db = total_loss_and_grad(W, b, X, y, penalty, lam)
        W -= lr * dW
        b -= lr * db
    return LogisticModel(W, b)


# --- nearest neighbors ------------------------------------------------------------


@dataclass(frozen=True)
class NeighborList:
    """Indices and distances sorted ascending; ties go to the lower index."""

    indices: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]


def knn_neighbors(reference, query: np.ndarray, k: int) -> NeighborList:
    """Exhaustive Euclidean k-nearest-neighbour scan over the reference rows."""
    X = reference.features if isinstance(reference, Dataset) else _as_matrix(reference)
    if not (1 <= k <= X.shape[0]):
        raise KTooLarge(f"k={k} with {X.shape[0]} reference rows")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    dist = np.sqrt(np.sum((X - q) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")[:k]
    return NeighborList(order.astype(np.int64), dist[order])
