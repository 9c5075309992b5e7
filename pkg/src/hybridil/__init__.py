"""Hybrid waypoint/dense-action imitation learning on a planar
pick-and-place task: click-based mode labeling, sparse-action relabeling,
a dual-head recurrent policy, and a mode-latching executor."""

__version__ = "0.1.0"

from .control import ControllerConfig, is_reached, timeout_steps, waypoint_action
from .segmentation import (Segmentation, add_intermediate_waypoints,
                           augment_sparse_states, label_modes,
                           relabel_sparse_actions, smooth_modes)
from .sim import EnvConfig, NoiseProfile, PickPlaceEnv, scripted_demo
from .trajectory import (Action, Dataset, Demonstration, EnvState, LabeledStep,
                         Observation, ProprioState, load_dataset, save_dataset,
                         validate_demo)

__all__ = [
    "Action", "ControllerConfig", "Dataset", "Demonstration", "EnvConfig",
    "EnvState", "LabeledStep", "NoiseProfile", "Observation", "PickPlaceEnv",
    "ProprioState", "Segmentation", "add_intermediate_waypoints",
    "augment_sparse_states", "is_reached", "label_modes", "load_dataset",
    "relabel_sparse_actions", "save_dataset", "scripted_demo", "smooth_modes",
    "timeout_steps", "validate_demo", "waypoint_action",
]
