"""Dataset-level orchestration: generation, labeling, processing."""

from __future__ import annotations

from typing import Optional

from .control import ControllerConfig
from .errors import ValidationError
from .segmentation import (add_intermediate_waypoints, augment_sparse_states,
                           raw_labeled_steps, relabel_sparse_actions,
                           segment_demo)
from .sim import EnvConfig, NoiseProfile, scripted_demo
from .trajectory import Dataset


def generate_dataset(env_cfg: EnvConfig, n_demos: int, base_seed: int,
                     profile: NoiseProfile = NoiseProfile()) -> Dataset:
    """n scripted, click-labeled demos with deterministic derived seeds."""
    if n_demos < 1:
        raise ValidationError("n_demos must be >= 1")
    demos = [
        scripted_demo(env_cfg, base_seed + i, profile,
                      demo_id=f"demo_{i:04d}")
        for i in range(n_demos)
    ]
    return Dataset(demos=demos)


def process_dataset(dataset: Dataset, relabel: bool = True,
                    ctrl: ControllerConfig = ControllerConfig(),
                    add_waypoints: int = 0,
                    augment_sigma: float = 0.0,
                    augment_seed: int = 0) -> Dataset:
    """Segment every demo from its clicks and attach labeled steps.

    ``relabel`` replaces sparse actions with servo actions (skip for the
    no-relabel ablation); ``add_waypoints`` subdivides sparse segments;
    ``augment_sigma`` jitters sparse-period proprio states (off by default).
    """
    labeled = []
    for demo in dataset.demos:
        seg = segment_demo(demo)
        if add_waypoints:
            seg = add_intermediate_waypoints(seg, demo.proprios, add_waypoints)
        if relabel:
            steps = relabel_sparse_actions(demo, seg, ctrl)
        else:
            steps = raw_labeled_steps(demo, seg)
        if augment_sigma > 0:
            steps = augment_sparse_states(steps, augment_sigma,
                                          seed=augment_seed, ctrl=ctrl)
        labeled.append(tuple(steps))
    return Dataset(demos=list(dataset.demos), labeled=labeled,
                   schema_version=dataset.schema_version)
