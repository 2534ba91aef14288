"""Leave-one-dataset-out evaluation over a corpus, exclusion tracking and
report emission.

Every random stream is derived from (master seed, dataset id, purpose), so
the whole pipeline is a pure function of (corpus, config, seed) and the
worker count only changes the wall clock.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import derive_seed
from .config import DEFAULT_CONFIG, RunConfig
from .datasets import Dataset
from .errors import CorpusTooSmall
from .grids import GridResult, grid_for_dataset
from .metafeatures import MetaFeatureVector
from .pools import POOL_SCHEMES, PoolScheme
from .recommend import (
    MetaDataset,
    MetaTarget,
    Scenario,
    average_interpretations,
    baseline_majority,
    build_meta_dataset,
    candidate_cells,
    dataset_meta_features,
    recommend,
    train_recommender,
)
from .selection import DS_METHODS, DsMethod


def rate_percent(wins: int, n: int) -> str:
    """wins/n as a percentage, truncated (not rounded) to two decimals."""
    if n <= 0:
        return "0.00"
    scaled = (int(wins) * 10000) // int(n)
    return f"{scaled // 100}.{scaled % 100:02d}"


def truncate2(numerator: int, denominator: int) -> str:
    """numerator/denominator truncated to two decimals via integer math."""
    if denominator <= 0:
        return "0.00"
    scaled = (int(numerator) * 100) // int(denominator)
    return f"{scaled // 100}.{scaled % 100:02d}"


def truncate2_float(x: float) -> str:
    scaled = int(math.floor(x * 100 + 1e-9))
    return f"{scaled // 100}.{scaled % 100:02d}"


@dataclass
class DatasetOutcome:
    dataset_id: str
    recommended: MetaTarget
    win: bool
    achieved: float
    best: float
    majority: MetaTarget
    majority_win: bool

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "recommended": self.recommended.as_dict(),
            "win": self.win,
            "achieved": self.achieved,
            "best": self.best,
            "majority": self.majority.as_dict(),
            "majority_win": self.majority_win,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetOutcome":
        return cls(
            raw["dataset_id"],
            MetaTarget.from_dict(raw["recommended"]),
            raw["win"],
            raw["achieved"],
            raw["best"],
            MetaTarget.from_dict(raw["majority"]),
            raw["majority_win"],
        )


@dataclass
class LodoResult:
    """One leave-one-dataset-out run for a (scenario, fixed config) pair."""

    scenario: Scenario
    fixed: str | None
    outcomes: list[DatasetOutcome]
    exclusions: list[tuple[str, str]]
    averages: dict

    @property
    def n_included(self) -> int:
        return len(self.outcomes)

    @property
    def recommender_wins(self) -> int:
        return sum(o.win for o in self.outcomes)

    @property
    def majority_wins(self) -> int:
        return sum(o.majority_win for o in self.outcomes)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "fixed": self.fixed,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "exclusions": [list(e) for e in self.exclusions],
            "averages": self.averages,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LodoResult":
        return cls(
            Scenario(raw["scenario"]),
            raw["fixed"],
            [DatasetOutcome.from_dict(o) for o in raw["outcomes"]],
            [tuple(e) for e in raw["exclusions"]],
            raw["averages"],
        )


@dataclass
class LodoReport:
    seed: int
    pool_size: int
    k: int
    n_datasets: int
    results: list[LodoResult]
    top_pairs: list[tuple[str, str, int]] = field(default_factory=list)

    def for_scenario(self, scenario: Scenario) -> list[LodoResult]:
        return [r for r in self.results if r.scenario is scenario]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "pool_size": self.pool_size,
            "k": self.k,
            "n_datasets": self.n_datasets,
            "results": [r.to_dict() for r in self.results],
            "top_pairs": [list(t) for t in self.top_pairs],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LodoReport":
        return cls(
            raw["seed"],
            raw["pool_size"],
            raw["k"],
            raw["n_datasets"],
            [LodoResult.from_dict(r) for r in raw["results"]],
            [tuple(t) for t in raw["top_pairs"]],
        )


def _dataset_task(args):
    """Grid plus meta-features for one dataset (runs in a worker)."""
    ds, seed, pool_size, k, config, cache_dir = args
    grid = grid_for_dataset(ds, seed, pool_size, k, config=config, cache_dir=cache_dir)
    mf = dataset_meta_features(ds, seed, config)
    return ds.id, grid, mf


def prepare_corpus(
    corpus: list[Dataset],
    seed: int,
    pool_size: int,
    k: int,
    config: RunConfig = DEFAULT_CONFIG,
    workers: int = 1,
    cache_dir: str | Path | None = None,
) -> tuple[dict[str, GridResult], dict[str, MetaFeatureVector]]:
    """Compute (or load) every dataset's grid and meta-feature vector."""
    tasks = [(ds, seed, pool_size, k, config, cache_dir) for ds in corpus]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool_exec:
            rows = list(pool_exec.map(_dataset_task, tasks))
    else:
        rows = list(map(_dataset_task, tasks))
    grids = {ds_id: grid for ds_id, grid, _ in rows}
    mfs = {ds_id: mf for ds_id, _, mf in rows}
    return grids, mfs


def _target_cell(scenario: Scenario, fixed, target: MetaTarget) -> tuple[PoolScheme, DsMethod]:
    if scenario is Scenario.POOL:
        return target.pool, fixed
    if scenario is Scenario.DS:
        return fixed, target.ds
    return target.pool, target.ds


def lodo_evaluate(
    corpus: list[Dataset],
    scenario: Scenario,
    fixed=None,
    seed: int = 0,
    pool_size: int = 100,
    k: int = 7,
    workers: int = 1,
    config: RunConfig = DEFAULT_CONFIG,
    cache_dir: str | Path | None = None,
    prepared: tuple[dict, dict] | None = None,
) -> LodoResult:
    """Leave-one-dataset-out: each dataset in turn is the query; the rest
    build the meta-dataset that trains the recommender."""
    if len(corpus) < 3:
        raise CorpusTooSmall("leave-one-dataset-out needs at least 3 datasets")
    grids, mfs = prepared if prepared is not None else prepare_corpus(
        corpus, seed, pool_size, k, config, workers, cache_dir
    )
    tol = config.tie_tolerance
    cells = candidate_cells(scenario, fixed)

    included: list[Dataset] = []
    exclusions: list[tuple[str, str]] = []
    for ds in corpus:
        grid = grids[ds.id]
        bad = [c for c in cells if grid.cell(*c) is None or grid.cell(*c).status != "ok"]
        if bad:
            s, m = bad[0]
            reason = grid.cell(s, m).reason if grid.cell(s, m) else "missing"
            exclusions.append((ds.id, f"cell ({s.value}, {m.value}) excluded: {reason}"))
        else:
            included.append(ds)

    outcomes: list[DatasetOutcome] = []
    for q in included:
        rest = [ds for ds in included if ds.id != q.id]
        mt, _ = build_meta_dataset(
            rest, scenario, fixed, seed=seed, grids=grids, meta_features=mfs, config=config
        )
        model = train_recommender(mt, seed=derive_seed(seed, "recommender", q.id), config=config)
        rec = recommend(model, mfs[q.id])
        maj = baseline_majority(mt)

        grid = grids[q.id]
        best = max(grid.cell(s, m).accuracy for s, m in cells)
        achieved = grid.cell(*_target_cell(scenario, fixed, rec)).accuracy
        maj_acc = grid.cell(*_target_cell(scenario, fixed, maj)).accuracy
        outcomes.append(
            DatasetOutcome(
                dataset_id=q.id,
                recommended=rec,
                win=achieved >= best - tol,
                achieved=achieved,
                best=best,
                majority=maj,
                majority_win=maj_acc >= best - tol,
            )
        )

    averages = average_interpretations(
        [grids[ds.id] for ds in included], scenario, fixed, tol
    ) if included else {}
    fixed_name = fixed.value if fixed is not None else None
    return LodoResult(scenario, fixed_name, outcomes, exclusions, averages)


def pair_win_counts(grids: dict[str, GridResult], dataset_ids: list[str], tol: float) -> list[tuple[str, str, int]]:
    """Win count per (scheme, method) cell over the given datasets, sorted
    descending with canonical-order tie-break."""
    cells = candidate_cells(Scenario.PAIR)
    wins = np.zeros(len(cells), dtype=np.int64)
    for ds_id in dataset_ids:
        grid = grids[ds_id]
        accs = np.array([grid.cell(s, m).accuracy for s, m in cells])
        wins += accs >= accs.max() - tol
    order = sorted(range(len(cells)), key=lambda i: (-wins[i], i))
    return [(cells[i][0].value, cells[i][1].value, int(wins[i])) for i in order]


def run_lodo_suite(
    corpus: list[Dataset],
    scenarios: list[Scenario],
    seed: int = 0,
    pool_size: int = 100,
    k: int = 7,
    workers: int = 1,
    config: RunConfig = DEFAULT_CONFIG,
    cache_dir: str | Path | None = None,
    fixed: dict[Scenario, list] | None = None,
) -> LodoReport:
    """Run LODO for each scenario; 'pool' iterates the seven fixed DS
    methods, 'ds' the seven fixed pools, 'pair' needs no fixed config."""
    prepared = prepare_corpus(corpus, seed, pool_size, k, config, workers, cache_dir)
    grids, _ = prepared
    results: list[LodoResult] = []
    top_pairs: list[tuple[str, str, int]] = []
    for scenario in scenarios:
        if scenario is Scenario.PAIR:
            fixed_list = [None]
        elif fixed and scenario in fixed:
            fixed_list = fixed[scenario]
        elif scenario is Scenario.POOL:
            fixed_list = list(DS_METHODS)
        else:
            fixed_list = list(POOL_SCHEMES)
        for f in fixed_list:
            result = lodo_evaluate(
                corpus, scenario, f, seed=seed, pool_size=pool_size, k=k,
                workers=workers, config=config, cache_dir=cache_dir, prepared=prepared,
            )
            results.append(result)
            if scenario is Scenario.PAIR:
                ids = [o.dataset_id for o in result.outcomes]
                top_pairs = pair_win_counts(grids, ids, config.tie_tolerance)
    return LodoReport(seed, pool_size, k, len(corpus), results, top_pairs)


# --- report emission ---------------------------------------------------------


_SCENARIO_TITLES = {
    Scenario.POOL: "Pool-scheme recommendation (DS method fixed)",
    Scenario.DS: "DS-method recommendation (pool scheme fixed)",
    Scenario.PAIR: "Full pipeline recommendation",
}


def _result_row(result: LodoResult) -> str:
    n = result.n_included
    rw, mw = result.recommender_wins, result.majority_wins
    avg = result.averages
    avg_cell = (
        f"{truncate2(avg['total_wins'] * 100, avg['n_candidates'] * n)} "
        f"({truncate2(avg['total_wins'], avg['n_candidates'])})"
        if n else "-"
    )
    acc_cell = truncate2_float(avg["accuracy_average"] * 100) if n else "-"
    label = result.fixed if result.fixed is not None else "(none)"
    return (
        f"| {label} | {rate_percent(rw, n)} ({rw}) | {rate_percent(mw, n)} ({mw}) "
        f"| {avg_cell} | {acc_cell} |"
    )


def render_markdown(report: LodoReport) -> dict[str, str]:
    """One markdown table per scenario, mirroring the summary-table layout:
    win percentage with the raw win count in parentheses."""
    out: dict[str, str] = {}
    for scenario in Scenario:
        results = report.for_scenario(scenario)
        if not results:
            continue
        lines = [
            f"# {_SCENARIO_TITLES[scenario]}",
            "",
            f"Corpus: {report.n_datasets} datasets, seed {report.seed}, "
            f"pool size {report.pool_size}, K {report.k}.",
            "",
            "| Fixed | Recommender | Majority | Average (win rate) | Average (accuracy %) |",
            "|---|---|---|---|---|",
        ]
        for result in results:
            lines.append(_result_row(result))
        if scenario is Scenario.PAIR and report.top_pairs:
            n = results[0].n_included
            lines += ["", "Top fixed (pool, DS) pairs:", "",
                      "| Pair | Win rate |", "|---|---|"]
            for scheme, method, wins in report.top_pairs[:4]:
                lines.append(f"| ({scheme}, {method}) | {rate_percent(wins, n)} ({wins}) |")
        lines.append("")
        lines.append("## Exclusions")
        lines.append("")
        all_exclusions = {e for r in results for e in r.exclusions}
        if all_exclusions:
            for ds_id, reason in sorted(all_exclusions):
                lines.append(f"- {ds_id}: {reason}")
        else:
            lines.append("none")
        lines.append("")
        out[scenario.value] = "\n".join(lines)
    return out


def write_report(report: LodoReport, out_dir: str | Path) -> list[Path]:
    """Emit report.json plus one markdown table per scenario."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    paths.append(json_path)
    for name, text in render_markdown(report).items():
        md_path = out_dir / f"scenario_{name}.md"
        md_path.write_text(text)
        paths.append(md_path)
    return paths


def read_report(path: str | Path) -> LodoReport:
    return LodoReport.from_dict(json.loads(Path(path).read_text()))
