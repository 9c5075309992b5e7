"""Ablation sweeps: train/evaluate grids and emit report tables."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .baselines import make_baseline
from .errors import ValidationError
from .evaluate import evaluate, success_evaluator
from .executor import ExecutorConfig
from .labeler import LabelerConfig, auto_label_dataset, train_mode_labeler
from .pipeline import process_dataset
from .policy import TrainConfig
from .sim import EnvConfig
from .trajectory import Dataset

ABLATION_KINDS = ("gamma", "action_space", "noise", "label_fraction",
                  "add_waypoints")


@dataclass
class ExperimentReport:
    name: str
    rows: list = field(default_factory=list)  # one dict per (cell, seed)
    config: dict = field(default_factory=dict)

    def cell_means(self) -> dict:
        """Mean success per cell label across seeds."""
        cells: dict[str, list[float]] = {}
        for row in self.rows:
            cells.setdefault(row["cell"], []).append(row["success"])
        return {k: float(np.mean(v)) for k, v in cells.items()}

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "rows": self.rows,
                           "cell_means": self.cell_means(),
                           "config": self.config}, indent=1)

    def to_text(self) -> str:
        means = self.cell_means()
        width = max(len(k) for k in means) if means else 4
        lines = [f"ablation: {self.name}",
                 f"{'cell'.ljust(width)}  success"]
        for k, v in means.items():
            lines.append(f"{k.ljust(width)}  {v:6.3f}")
        return "\n".join(lines)


def _train_and_eval(variant: str, dataset: Dataset, train_cfg: TrainConfig,
                    env_cfg: EnvConfig, seed: int, eval_episodes: int,
                    exec_cfg: ExecutorConfig = ExecutorConfig()) -> float:
    cfg = replace(train_cfg, seed=seed)
    evaluator = success_evaluator(env_cfg, cfg.eval_episodes, exec_cfg)
    bundle, _ = make_baseline(variant, dataset, cfg, evaluator)
    metrics = evaluate(bundle, env_cfg, eval_episodes, exec_cfg=exec_cfg)
    return metrics.success_rate


def run_ablation(spec: dict, dataset: Dataset, train_cfg: TrainConfig,
                 env_cfg: EnvConfig, seeds: Sequence[int],
                 eval_episodes: int = 50,
                 labeler_cfg: Optional[LabelerConfig] = None
                 ) -> ExperimentReport:
    """Run one sweep; ``spec`` = {"kind": ..., "values": [...]}.

    The dataset must carry clicks; processing (with or without relabeling)
    happens inside each cell as the sweep requires.
    """
    kind = spec.get("kind")
    if kind not in ABLATION_KINDS:
        raise ValidationError(f"unknown ablation kind {kind!r}")
    values = spec.get("values")
    if not values:
        raise ValidationError("ablation spec needs non-empty values")
    report = ExperimentReport(
        name=kind,
        config={"spec": spec, "seeds": list(seeds),
                "train": dataclasses.asdict(train_cfg),
                "env": dataclasses.asdict(env_cfg),
                "eval_episodes": eval_episodes},
    )
    processed = process_dataset(dataset)

    for value in values:
        for seed in seeds:
            for cell, success in _run_cell(kind, value, dataset, processed,
                                           train_cfg, env_cfg, seed,
                                           eval_episodes, labeler_cfg):
                report.rows.append(
                    {"cell": cell, "value": value, "seed": seed,
                     "success": success})
    return report


def _run_cell(kind, value, dataset, processed, train_cfg, env_cfg, seed,
              eval_episodes, labeler_cfg):
    if kind == "gamma":
        cfg = replace(train_cfg, gamma=float(value))
        yield (f"gamma={value}",
               _train_and_eval("hybrid", processed, cfg, env_cfg, seed,
                               eval_episodes))
    elif kind == "action_space":
        variant = str(value)
        cfg = replace(train_cfg, seed=seed)
        bundle, _ = make_baseline(variant, processed, cfg)
        for open_loop, tag in ((True, "with_T"), (False, "without_T")):
            exec_cfg = ExecutorConfig(waypoint_open_loop=open_loop)
            metrics = evaluate(bundle, env_cfg, eval_episodes,
                               exec_cfg=exec_cfg)
            yield f"{variant}/{tag}", metrics.success_rate
    elif kind == "noise":
        for variant in ("bc_rnn", "hybrid"):
            cfg = replace(train_cfg, seed=seed)
            evaluator = success_evaluator(env_cfg, cfg.eval_episodes)
            bundle, _ = make_baseline(variant, processed, cfg, evaluator)
            noisy_env = replace(env_cfg, system_noise_sigma=float(value))
            metrics = evaluate(bundle, noisy_env, eval_episodes)
            yield f"{variant}/noise={value}", metrics.success_rate
    elif kind == "label_fraction":
        fraction = float(value)
        if fraction >= 1.0:
            data = dataset
        else:
            lab_cfg = labeler_cfg or LabelerConfig()
            labeler = train_mode_labeler(dataset, fraction,
                                         replace(lab_cfg, seed=seed))
            keep = round(fraction * len(dataset.demos))
            data = auto_label_dataset(labeler, dataset, keep)
        cell_processed = process_dataset(data)
        yield (f"fraction={value}",
               _train_and_eval("hybrid", cell_processed, train_cfg, env_cfg,
                               seed, eval_episodes))
    elif kind == "add_waypoints":
        cell_processed = process_dataset(dataset, add_waypoints=int(value))
        yield (f"add={value}",
               _train_and_eval("hybrid", cell_processed, train_cfg, env_cfg,
                               seed, eval_episodes))
