"""Versioned JSON serialization for trained models, pools and meta-models."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models import (
    GaussianNBModel,
    LogisticModel,
    PerceptronModel,
    TreeModel,
    TreeNode,
)
from .pools import Pool, PoolScheme
from .recommend import ChainModel, MetaModel, _MetaScaler
from .selection import MetaDesModel

FORMAT = "model-registry/1"


def _arr(a: np.ndarray) -> list:
    return np.asarray(a).tolist()


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"counts": _arr(node.counts)}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(raw: dict) -> TreeNode:
    if "counts" in raw:
        return TreeNode(counts=np.asarray(raw["counts"], dtype=np.float64))
    return TreeNode(
        feature=raw["feature"],
        threshold=raw["threshold"],
        left=_node_from_dict(raw["left"]),
        right=_node_from_dict(raw["right"]),
    )


def model_to_dict(model) -> dict:
    if isinstance(model, TreeModel):
        payload = {"root": _node_to_dict(model.root), "n_classes": model.n_classes}
    elif isinstance(model, (PerceptronModel, LogisticModel)):
        payload = {"W": _arr(model.W), "b": _arr(model.b)}
    elif isinstance(model, GaussianNBModel):
        payload = {"theta": _arr(model.theta), "var": _arr(model.var), "priors": _arr(model.priors)}
    else:
        raise TypeError(f"cannot serialize {type(model)!r}")
    return {"format": FORMAT, "kind": model.kind, "payload": payload}


def model_from_dict(raw: dict):
    _check_format(raw)
    kind, payload = raw["kind"], raw["payload"]
    if kind == "tree":
        return TreeModel(_node_from_dict(payload["root"]), payload["n_classes"])
    if kind == "perceptron":
        return PerceptronModel(np.asarray(payload["W"]), np.asarray(payload["b"]))
    if kind == "logistic":
        return LogisticModel(np.asarray(payload["W"]), np.asarray(payload["b"]))
    if kind == "gaussian_nb":
        return GaussianNBModel(
            np.asarray(payload["theta"]), np.asarray(payload["var"]), np.asarray(payload["priors"])
        )
    raise ValueError(f"unknown model kind {kind!r}")


def _check_format(raw: dict) -> None:
    if raw.get("format") != FORMAT:
        raise ValueError(f"unsupported registry format {raw.get('format')!r}")


def pool_to_dict(pool: Pool) -> dict:
    return {
        "format": FORMAT,
        "kind": "pool",
        "payload": {
            "scheme": pool.scheme.value,
            "seed": pool.seed,
            "boost_weights": pool.boost_weights,
            "models": [model_to_dict(m) for m in pool.models],
        },
    }


def pool_from_dict(raw: dict) -> Pool:
    _check_format(raw)
    payload = raw["payload"]
    return Pool(
        scheme=PoolScheme(payload["scheme"]),
        models=[model_from_dict(m) for m in payload["models"]],
        seed=payload["seed"],
        boost_weights=payload["boost_weights"],
    )


def metades_to_dict(meta: MetaDesModel) -> dict:
    return {
        "format": FORMAT,
        "kind": "metades",
        "payload": {
            "nb": model_to_dict(meta.nb),
            "k": meta.k,
            "kp": meta.kp,
            "threshold": meta.threshold,
            "dsel_profiles": _arr(meta.dsel_profiles),
            "dsel_correct": _arr(meta.dsel_correct.astype(int)),
            "dsel_true_proba": _arr(meta.dsel_true_proba),
        },
    }


def metades_from_dict(raw: dict) -> MetaDesModel:
    _check_format(raw)
    p = raw["payload"]
    return MetaDesModel(
        nb=model_from_dict(p["nb"]),
        k=p["k"],
        kp=p["kp"],
        threshold=p["threshold"],
        dsel_profiles=np.asarray(p["dsel_profiles"], dtype=np.int64),
        dsel_correct=np.asarray(p["dsel_correct"], dtype=np.int64).astype(bool),
        dsel_true_proba=np.asarray(p["dsel_true_proba"], dtype=np.float64),
    )


def recommender_to_dict(model) -> dict:
    if isinstance(model, ChainModel):
        return {
            "format": FORMAT,
            "kind": "chain",
            "payload": {
                "schema_version": model.schema_version,
                "stage1": recommender_to_dict(model.stage1),
                "stage2": recommender_to_dict(model.stage2),
            },
        }
    if not isinstance(model, MetaModel):
        raise TypeError(f"cannot serialize {type(model)!r}")
    payload = {
        "meta_kind": model.kind,
        "label_kind": model.label_kind,
        "schema_version": model.schema_version,
        "scaler": {"means": _arr(model.scaler.means), "stds": _arr(model.scaler.stds)},
        "n_inputs": model.n_inputs,
        "k": model.k,
        "clamped": model.clamped,
    }
    if model.kind == "random_forest":
        payload["trees"] = [model_to_dict(t) for t in model.trees]
    else:
        payload["train_X"] = _arr(model.train_X)
        payload["train_y"] = _arr(model.train_y)
    return {"format": FORMAT, "kind": "meta", "payload": payload}


def recommender_from_dict(raw: dict):
    _check_format(raw)
    if raw["kind"] == "chain":
        p = raw["payload"]
        return ChainModel(
            stage1=recommender_from_dict(p["stage1"]),
            stage2=recommender_from_dict(p["stage2"]),
            schema_version=p["schema_version"],
        )
    if raw["kind"] != "meta":
        raise ValueError(f"unknown recommender kind {raw['kind']!r}")
    p = raw["payload"]
    scaler = _MetaScaler(
        np.asarray(p["scaler"]["means"], dtype=np.float64),
        np.asarray(p["scaler"]["stds"], dtype=np.float64),
    )
    model = MetaModel(
        kind=p["meta_kind"],
        label_kind=p["label_kind"],
        schema_version=p["schema_version"],
        scaler=scaler,
        n_inputs=p["n_inputs"],
        k=p["k"],
        clamped=p["clamped"],
    )
    if p["meta_kind"] == "random_forest":
        model.trees = [model_from_dict(t) for t in p["trees"]]
    else:
        model.train_X = np.asarray(p["train_X"], dtype=np.float64)
        model.train_y = np.asarray(p["train_y"], dtype=np.int64)
    return model


def save_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
