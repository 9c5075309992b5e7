"""Evaluation: fixed-seed episode sets, metrics, checkpoint selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .executor import ExecutorConfig, RolloutResult, rollout
from .policy import PolicyBundle, featurize, policy_forward
from .sim import EnvConfig, PickPlaceEnv, STAGES, ScriptedDemonstrator
from .trajectory import Dataset, LabeledStep

# Base for the fixed evaluation episode set; evaluation scenes never collide
# with data-generation seeds.
EVAL_SEED_BASE = 9_000_000


def eval_seeds(n_episodes: int, base: int = EVAL_SEED_BASE) -> list[int]:
    return [base + i for i in range(n_episodes)]


@dataclass
class Metrics:
    success_rate: float
    stage_success: dict
    mean_length: float
    n_episodes: int
    timeout_rate: float
    mean_hidden_drift: float
    mode_accuracy: Optional[float] = None
    mode_precision: Optional[float] = None
    mode_recall: Optional[float] = None
    action_mse: Optional[float] = None
    action_consistency: Optional[float] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def evaluate(policy, env_cfg: EnvConfig, n_episodes: int,
             seeds: Optional[Sequence[int]] = None,
             exec_cfg: ExecutorConfig = ExecutorConfig(),
             heldout: Optional[Dataset] = None) -> Metrics:
    """Aggregate rollout metrics over a fixed seed-derived episode set."""
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    seeds = list(seeds) if seeds is not None else eval_seeds(n_episodes)
    if len(seeds) != n_episodes:
        raise ValidationError("seed list length must equal n_episodes")
    results: list[RolloutResult] = []
    for s in seeds:
        env = PickPlaceEnv(env_cfg)
        results.append(rollout(policy, env, exec_cfg, seed=s))
    stage_success = {
        stage: float(np.mean([r.flags.get(stage, False) for r in results]))
        for stage in STAGES if stage != "reach"
    }
    metrics = Metrics(
        success_rate=float(np.mean([r.success for r in results])),
        stage_success=stage_success,
        mean_length=float(np.mean([r.length for r in results])),
        n_episodes=n_episodes,
        timeout_rate=float(np.mean([r.timeout_count > 0 for r in results])),
        mean_hidden_drift=float(np.mean([r.servo_hidden_drift for r in results])),
    )
    if heldout is not None and isinstance(policy, PolicyBundle):
        _add_heldout_metrics(metrics, policy, heldout)
    return metrics


def _add_heldout_metrics(metrics: Metrics, bundle: PolicyBundle,
                         heldout: Dataset) -> None:
    """Teacher-forced mode and action errors against held-out labels."""
    if heldout.labeled is None:
        raise ValidationError("held-out dataset must be labeled")
    tp = fp = fn = correct = total = 0
    sq_err_sum = 0.0
    act_n = 0
    for steps in heldout.labeled:
        obs = np.stack([ls.obs.to_array() for ls in steps])
        mode_logits, actions, _, _ = policy_forward(bundle, obs)
        labels = np.array([ls.mode for ls in steps])
        if mode_logits is not None:
            pred = (mode_logits > 0.0).astype(int)
            correct += int((pred == labels).sum())
            tp += int(((pred == 1) & (labels == 1)).sum())
            fp += int(((pred == 1) & (labels == 0)).sum())
            fn += int(((pred == 0) & (labels == 1)).sum())
            total += len(labels)
        if actions is not None:
            target = np.stack([ls.action.to_array() for ls in steps])
            sq_err_sum += float(((actions - target) ** 2).mean(axis=1).sum())
            act_n += len(steps)
    if total:
        metrics.mode_accuracy = correct / total
        metrics.mode_precision = tp / (tp + fp) if tp + fp else 1.0
        metrics.mode_recall = tp / (tp + fn) if tp + fn else 1.0
    if act_n:
        metrics.action_mse = sq_err_sum / act_n
    metrics.action_consistency = action_consistency(heldout.labeled)


def action_consistency(labeled: Sequence[Sequence[LabeledStep]],
                       k: int = 5) -> float:
    """Mean variance of actions among nearest-neighbor states.

    A dataset diagnostic: lower means the demonstrated actions are more
    consistent at similar states (relabeling should reduce it).
    """
    obs = np.concatenate(
        [featurize(np.stack([ls.obs.to_array() for ls in steps]))
         for steps in labeled])
    acts = np.concatenate(
        [np.stack([ls.action.to_array() for ls in steps]) for steps in labeled])
    n = obs.shape[0]
    k = min(k, n)
    scale = np.maximum(obs.std(axis=0), 1e-9)
    tree = cKDTree(obs / scale)
    _, idx = tree.query(obs / scale, k=k)
    neighbor_actions = acts[idx]  # (n, k, 4)
    return float(neighbor_actions.var(axis=1).mean())


def success_evaluator(env_cfg: EnvConfig, n_episodes: int,
                      exec_cfg: ExecutorConfig = ExecutorConfig()):
    """Callable used during training for fixed-set checkpoint evaluation."""
    seeds = eval_seeds(n_episodes)

    def run(bundle) -> float:
        return evaluate(bundle, env_cfg, n_episodes, seeds=seeds,
                        exec_cfg=exec_cfg).success_rate
    return run


def select_checkpoint(log) -> str:
    """Checkpoint id with the best fixed-eval success; earliest on ties."""
    evals = getattr(log, "evals", None)
    if not evals:
        raise ValidationError("training log has no evaluations")
    best = max(evals, key=lambda e: (e["success"], -e["step"]))
    return best["checkpoint_id"]


class ScriptPolicyAdapter:
    """Wrap the scripted demonstrator as a dense-only policy; each rollout
    gets a fresh script session."""

    def __init__(self, env_cfg: EnvConfig, profile=None, seed: int = 0):
        from .sim import NoiseProfile
        self.env_cfg = env_cfg
        self.profile = profile or NoiseProfile(sparse_jitter_sigma=0.0)
        self.seed = seed

    def session(self):
        return _ScriptSession(self)


class _ScriptSession:
    def __init__(self, adapter: ScriptPolicyAdapter):
        self.adapter = adapter
        self._script: Optional[ScriptedDemonstrator] = None

    def step(self, obs):
        if self._script is None:
            a = self.adapter
            self._script = ScriptedDemonstrator(
                a.env_cfg, a.profile, np.random.default_rng([a.seed, 31]))
            self._script.begin(obs)
        action, _, _, _ = self._script.act(obs)
        return None, action.to_array(), None
