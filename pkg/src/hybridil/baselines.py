"""Baseline and ablation policy variants built on the shared training loop.

Variants:
  hybrid      full dual-head policy on the processed (relabeled) dataset
  hybrid_nr   same, but labels rebuilt without action relabeling
  bc          feed-forward behavioral cloning on raw dense actions
  bc_rnn      recurrent behavioral cloning on raw dense actions
  wp_next{N}  waypoint-only head; hindsight targets N steps ahead
  wp_mode     waypoint-only head; targets from the click-derived labels
"""

from __future__ import annotations

import re
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError
from .policy import (DemoArrays, PolicyBundle, TrainConfig, TrainLog,
                     arrays_from_labeled, featurize, train_on_arrays,
                     waypoint_to_offset)
from .segmentation import raw_labeled_steps, segment_demo
from .trajectory import Dataset

VARIANTS = ("hybrid", "hybrid_nr", "bc", "bc_rnn", "wp_mode")
_WP_NEXT = re.compile(r"^wp_next(\d+)$")


def _raw_action_arrays(dataset: Dataset, smoothing: int) -> list[DemoArrays]:
    out = []
    for demo in dataset.demos:
        obs = demo.obs_array()
        t = len(demo.steps)
        out.append(DemoArrays(
            feats=featurize(obs),
            actions=demo.action_array(),
            waypoints=np.zeros((t, 4)),
            modes=np.zeros(t),
            mode_targets=np.zeros(t),
        ))
    return out


def _hindsight_waypoint_arrays(dataset: Dataset, horizon: int) -> list[DemoArrays]:
    out = []
    for demo in dataset.demos:
        obs = demo.obs_array()
        t = len(demo.steps)
        proprio = obs[:, :4]
        idx = np.minimum(np.arange(t) + horizon, t - 1)
        out.append(DemoArrays(
            feats=featurize(obs),
            actions=demo.action_array(),
            waypoints=waypoint_to_offset(proprio[idx], proprio),
            modes=np.zeros(t),
            mode_targets=np.zeros(t),
        ))
    return out


def _mode_waypoint_arrays(dataset: Dataset, smoothing: int) -> list[DemoArrays]:
    labeled = dataset.labeled
    if labeled is None:
        labeled = [tuple(raw_labeled_steps(d, segment_demo(d)))
                   for d in dataset.demos]
    return arrays_from_labeled(labeled, smoothing=smoothing)


def make_baseline(variant: str, dataset: Dataset, cfg: TrainConfig,
                  evaluator: Optional[Callable[[PolicyBundle], float]] = None
                  ) -> tuple[PolicyBundle, TrainLog]:
    """Train one policy variant; returns (bundle, training log)."""
    if not dataset.demos:
        raise ValidationError("empty dataset")
    wp_match = _WP_NEXT.match(variant)
    if variant == "hybrid":
        if dataset.labeled is None:
            raise ValidationError("hybrid needs a processed (labeled) dataset")
        demos = arrays_from_labeled(dataset.labeled, smoothing=cfg.smoothing)
        return train_on_arrays("hybrid", demos, cfg, evaluator)
    if variant == "hybrid_nr":
        labeled = [tuple(raw_labeled_steps(d, segment_demo(d)))
                   for d in dataset.demos]
        demos = arrays_from_labeled(labeled, smoothing=cfg.smoothing)
        return train_on_arrays("hybrid", demos, cfg, evaluator,
                               meta={"variant": "hybrid_nr"})
    if variant == "bc":
        return train_on_arrays("bc", _raw_action_arrays(dataset, cfg.smoothing),
                               cfg, evaluator)
    if variant == "bc_rnn":
        return train_on_arrays("bc_rnn",
                               _raw_action_arrays(dataset, cfg.smoothing),
                               cfg, evaluator)
    if wp_match:
        horizon = int(wp_match.group(1))
        if horizon < 1:
            raise ValidationError("wp_next horizon must be >= 1")
        demos = _hindsight_waypoint_arrays(dataset, horizon)
        return train_on_arrays("waypoint", demos, cfg, evaluator,
                               meta={"variant": variant, "horizon": horizon})
    if variant == "wp_mode":
        demos = _mode_waypoint_arrays(dataset, cfg.smoothing)
        return train_on_arrays("waypoint", demos, cfg, evaluator,
                               meta={"variant": "wp_mode"})
    raise ValidationError(f"unknown variant {variant!r}")
