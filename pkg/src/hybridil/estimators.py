"""Scikit-learn style facade over the processing and policy pipeline.

``DemoProcessor`` is a transformer from click-annotated datasets to labeled
datasets; ``ImitationPolicy`` is an estimator whose fit trains one policy
variant and whose predict maps observation arrays to actions. Both expose
get_params/set_params so they compose with sklearn tooling.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .baselines import make_baseline
from .control import ControllerConfig
from .errors import ValidationError
from .evaluate import success_evaluator
from .executor import ExecutorConfig
from .pipeline import process_dataset
from .policy import PolicyBundle, PolicySession, TrainConfig, policy_forward
from .sim import EnvConfig
from .trajectory import Dataset, OBS_DIM


def check_dataset(x) -> Dataset:
    if not isinstance(x, Dataset):
        raise ValidationError(f"expected a Dataset, got {type(x).__name__}")
    if not x.demos:
        raise ValidationError("dataset has no demos")
    return x


def check_obs_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != OBS_DIM:
        raise ValidationError(f"expected (n, {OBS_DIM}) observations, "
                              f"got shape {arr.shape}")
    return arr


class DemoProcessor(BaseEstimator, TransformerMixin):
    """Clicks -> labeled steps, with the relabel/augment knobs as params."""

    def __init__(self, relabel=True, add_waypoints=0, augment_sigma=0.0,
                 augment_seed=0, controller=None):
        self.relabel = relabel
        self.add_waypoints = add_waypoints
        self.augment_sigma = augment_sigma
        self.augment_seed = augment_seed
        self.controller = controller

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: Dataset) -> Dataset:
        dataset = check_dataset(X)
        ctrl = self.controller or ControllerConfig()
        return process_dataset(
            dataset,
            relabel=self.relabel,
            ctrl=ctrl,
            add_waypoints=self.add_waypoints,
            augment_sigma=self.augment_sigma,
            augment_seed=self.augment_seed,
        )


class ImitationPolicy(BaseEstimator):
    """One policy variant behind a fit/predict interface.

    fit(dataset) trains the variant; when ``env_config`` is set, training
    evaluates a fixed episode set periodically and keeps the best checkpoint.
    predict(obs) returns actions; predict_waypoints / predict_modes expose
    the other heads where the variant has them.
    """

    def __init__(self, variant="hybrid", steps=6000, batch_size=32, window=10,
                 gamma=0.5, beta=0.01, lr=1e-3, hidden=64, gmm_k=0,
                 smoothing=1, seed=0, eval_every=1000, eval_episodes=20,
                 env_config: Optional[EnvConfig] = None):
        self.variant = variant
        self.steps = steps
        self.batch_size = batch_size
        self.window = window
        self.gamma = gamma
        self.beta = beta
        self.lr = lr
        self.hidden = hidden
        self.gmm_k = gmm_k
        self.smoothing = smoothing
        self.seed = seed
        self.eval_every = eval_every
        self.eval_episodes = eval_episodes
        self.env_config = env_config

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size, window=self.window, gamma=self.gamma,
            beta=self.beta, steps=self.steps, eval_every=self.eval_every,
            eval_episodes=self.eval_episodes, seed=self.seed,
            smoothing=self.smoothing, gmm_k=self.gmm_k, lr=self.lr,
            hidden=self.hidden,
        )

    def fit(self, X: Dataset, y=None):
        dataset = check_dataset(X)
        evaluator = None
        if self.env_config is not None:
            evaluator = success_evaluator(self.env_config, self.eval_episodes)
        self.bundle_, self.log_ = make_baseline(
            self.variant, dataset, self._train_config(), evaluator)
        return self

    def _require_fitted(self) -> PolicyBundle:
        if not hasattr(self, "bundle_"):
            raise NotFittedError("call fit before predict")
        return self.bundle_

    def predict(self, X) -> np.ndarray:
        bundle = self._require_fitted()
        obs = check_obs_array(X)
        _, actions, _, _ = policy_forward(bundle, obs)
        if actions is None:
            raise ValidationError(f"variant {self.variant!r} has no action head")
        return actions

    def predict_waypoints(self, X) -> np.ndarray:
        bundle = self._require_fitted()
        obs = check_obs_array(X)
        _, _, waypoints, _ = policy_forward(bundle, obs)
        if waypoints is None:
            raise ValidationError(f"variant {self.variant!r} has no waypoint head")
        return waypoints

    def predict_modes(self, X) -> np.ndarray:
        bundle = self._require_fitted()
        obs = check_obs_array(X)
        logits, _, _, _ = policy_forward(bundle, obs)
        if logits is None:
            raise ValidationError(f"variant {self.variant!r} has no mode head")
        return (logits > 0.0).astype(int)

    def session(self) -> PolicySession:
        return PolicySession(self._require_fitted())
