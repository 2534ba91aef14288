"""Run configuration. Every tunable default lives here so experiments can
pin or override them from one structured file."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from ._util import derive_seed


@dataclass(frozen=True)
class RunConfig:
    # protocol
    train_ratio: float = 0.75
    pool_size: int = 100
    roc_k: int = 7
    # base learners
    perceptron_epochs: int = 100
    perceptron_lr: float = 1.0
    logistic_epochs: int = 200
    logistic_lr: float = 0.01
    # pool schemes
    lit_penalty: float = 1.0
    flt_sigma_sample: int = 200
    # dynamic selection
    metades_kp: int = 5
    metades_threshold: float = 0.5
    des_mi_share: float = 0.4
    # meta-features
    entropy_bins: int = 10
    landmark_folds: int = 4
    # recommender
    meta_knn_k: int = 2
    meta_rf_trees: int = 100
    meta_rf_depth: int = 5
    # accounting
    tie_tolerance: float = 1e-12
    high_corr_threshold: float = 0.9

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)

    def fingerprint(self) -> int:
        """Stable hash of the semantic settings, used in grid cache keys."""
        items = sorted(self.to_dict().items())
        return derive_seed(*[x for kv in items for x in kv])

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


DEFAULT_CONFIG = RunConfig()
