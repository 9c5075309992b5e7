"""Dual-head imitation policy: a recurrent trunk with action and mode heads
plus a feed-forward waypoint net, trained with a mode-weighted loss.

The waypoint net sees only the current observation; the trunk carries a
hidden state across the training window and across rollout steps. Actions
are regressed in per-dimension standardized units; waypoints are regressed
in raw units with a wrap-aware angular residual.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .neural import (Adam, AdamConfig, GRUCell, MLP, MLPConfig, ParamStore,
                     RecurrentConfig, Tensor, binary_cross_entropy_logits,
                     gmm_nll)
from .segmentation import smooth_modes
from .trajectory import (ACTION_DIM, Dataset, LabeledStep, OBS_DIM,
                         Observation, PROPRIO_DIM)

FEAT_DIM = 16
TWO_PI = 2.0 * math.pi


def featurize(obs_raw: np.ndarray) -> np.ndarray:
    """Expand raw 11-dim observations into 16 egocentric features.

    Object and slot poses enter relative to the gripper (offsets, relative
    angles as cos/sin, distances); absolute gripper position stays in for
    workspace context. Relative geometry is what the grasp and insertion
    decisions depend on, and small networks learn it far faster than the
    equivalent subtraction of absolute coordinates.
    """
    obs_raw = np.asarray(obs_raw, dtype=float)
    squeeze = obs_raw.ndim == 1
    o = obs_raw.reshape(-1, OBS_DIM)
    x, y, theta, grip = o[:, 0], o[:, 1], o[:, 2], o[:, 3]
    obj_dx, obj_dy = o[:, 4] - x, o[:, 5] - y
    slot_dx, slot_dy = o[:, 7] - x, o[:, 8] - y
    obj_rel = o[:, 6] - theta
    slot_rel = o[:, 9] - theta
    out = np.empty((o.shape[0], FEAT_DIM))
    out[:, 0] = x
    out[:, 1] = y
    out[:, 2] = np.cos(theta)
    out[:, 3] = np.sin(theta)
    out[:, 4] = grip
    out[:, 5] = obj_dx
    out[:, 6] = obj_dy
    out[:, 7] = np.cos(obj_rel)
    out[:, 8] = np.sin(obj_rel)
    out[:, 9] = slot_dx
    out[:, 10] = slot_dy
    out[:, 11] = np.cos(slot_rel)
    out[:, 12] = np.sin(slot_rel)
    out[:, 13] = o[:, 10]  # held flag
    out[:, 14] = np.hypot(obj_dx, obj_dy)
    out[:, 15] = np.hypot(slot_dx, slot_dy)
    return out[0] if squeeze else out


def waypoint_to_offset(waypoints: np.ndarray, proprio: np.ndarray) -> np.ndarray:
    """Waypoint regression targets: gripper-relative position and angle
    offsets (angle wrapped to the nearest branch); grip stays absolute."""
    out = np.array(waypoints, dtype=float)
    out[..., 0] -= proprio[..., 0]
    out[..., 1] -= proprio[..., 1]
    d = out[..., 2] - proprio[..., 2]
    out[..., 2] = d - TWO_PI * np.round(d / TWO_PI)
    return out


def offset_to_waypoint(offsets: np.ndarray, proprio: np.ndarray) -> np.ndarray:
    out = np.array(offsets, dtype=float)
    out[..., 0] += proprio[..., 0]
    out[..., 1] += proprio[..., 1]
    out[..., 2] += proprio[..., 2]
    return out


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(data: np.ndarray, floor: float = 1e-6) -> "Normalizer":
        mean = data.mean(axis=0)
        std = np.maximum(data.std(axis=0), floor)
        return Normalizer(mean, std)

    @staticmethod
    def identity(dim: int) -> "Normalizer":
        return Normalizer(np.zeros(dim), np.ones(dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def unapply(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean


@dataclass
class TrainConfig:
    batch_size: int = 32
    window: int = 10
    gamma: float = 0.5
    beta: float = 0.01
    steps: int = 6000
    eval_every: int = 1000
    eval_episodes: int = 20
    seed: int = 0
    smoothing: int = 1       # mode-target kernel; 1 = hard bits
    gmm_k: int = 0           # 0 = deterministic action head
    lr: float = 1e-3
    hidden: int = 64
    sparse_widths: tuple[int, ...] = (64, 64, 64)
    head_widths: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    log_every: int = 100

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValidationError("gamma must lie in [0, 1]")
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if self.window < 1 or self.batch_size < 1:
            raise ValidationError("window and batch_size must be >= 1")


def mode_weight(m, gamma: float):
    """Mode-specific weight for the waypoint part of the action loss:
    gamma in dense mode, 1 - gamma in sparse mode."""
    m = np.asarray(m, dtype=float)
    out = m * gamma + (1.0 - m) * (1.0 - gamma)
    return float(out) if out.ndim == 0 else out


class PolicyBundle:
    """Networks plus normalizers for one policy variant.

    kind:
      hybrid    waypoint net + trunk + action and mode heads
      bc        feed-forward action head on the current observation
      bc_rnn    trunk + action head
      waypoint  waypoint net only
    """

    def __init__(self, kind: str, cfg: TrainConfig, seed: int,
                 feat_norm: Normalizer, act_norm: Normalizer,
                 meta: Optional[dict] = None):
        if kind not in ("hybrid", "bc", "bc_rnn", "waypoint"):
            raise ValidationError(f"unknown policy kind {kind!r}")
        self.kind = kind
        self.cfg = cfg
        self.feat_norm = feat_norm
        self.act_norm = act_norm
        self.meta = dict(meta or {})
        self.store = ParamStore(seed)
        self.trunk: Optional[GRUCell] = None
        self.action_head: Optional[MLP] = None
        self.mode_head: Optional[MLP] = None
        self.sparse_net: Optional[MLP] = None
        act_out = ACTION_DIM if cfg.gmm_k == 0 else cfg.gmm_k * (1 + 2 * ACTION_DIM)
        act_fn = cfg.activation
        if kind in ("hybrid", "bc_rnn"):
            self.trunk = GRUCell(RecurrentConfig(FEAT_DIM, cfg.hidden),
                                 self.store, "trunk")
            self.action_head = MLP(MLPConfig(cfg.hidden, cfg.head_widths,
                                             act_out, act_fn),
                                   self.store, "action")
        if kind == "bc":
            self.action_head = MLP(MLPConfig(FEAT_DIM, cfg.head_widths,
                                             act_out, act_fn),
                                   self.store, "action")
        if kind == "hybrid":
            self.mode_head = MLP(MLPConfig(cfg.hidden, cfg.head_widths, 1,
                                           act_fn), self.store, "mode")
        if kind in ("hybrid", "waypoint"):
            self.sparse_net = MLP(MLPConfig(FEAT_DIM, cfg.sparse_widths,
                                            PROPRIO_DIM, act_fn),
                                  self.store, "sparse")

    # -- forward passes ------------------------------------------------------

    def init_hidden(self, batch: int = 1) -> np.ndarray:
        if self.trunk is None:
            return np.zeros((batch, 0))
        return np.zeros((batch, self.cfg.hidden))

    def forward_graph(self, feats: Sequence[Tensor], h0: Optional[Tensor]):
        """Per-step graph outputs over a window of feature tensors.

        Returns (mode_logits, action_outs, waypoint_outs, hT); entries are
        None for heads the variant does not have. Action outputs stay in
        normalized space (or raw mixture parameters when gmm_k > 0).
        """
        h = h0
        mode_logits: list = []
        action_outs: list = []
        waypoint_outs: list = []
        for x in feats:
            if self.trunk is not None:
                h = self.trunk.step(h, x)
                embed = h
            else:
                embed = x
            if self.action_head is not None:
                action_outs.append(self.action_head(embed))
            if self.mode_head is not None:
                mode_logits.append(self.mode_head(embed)[:, 0])
            if self.sparse_net is not None:
                waypoint_outs.append(self.sparse_net(x))
        return (mode_logits or None, action_outs or None,
                waypoint_outs or None, h)

    def action_from_head(self, head_out: np.ndarray) -> np.ndarray:
        """Decode the head output into raw action units."""
        k = self.cfg.gmm_k
        if k == 0:
            return self.act_norm.unapply(head_out)
        b = head_out.shape[0]
        logits = head_out[:, :k]
        means = head_out[:, k:k + k * ACTION_DIM].reshape(b, k, ACTION_DIM)
        best = np.argmax(logits, axis=1)
        return self.act_norm.unapply(means[np.arange(b), best])

    def snapshot(self) -> dict[str, np.ndarray]:
        return self.store.snapshot()

    def load_snapshot(self, arrays: dict[str, np.ndarray]) -> None:
        self.store.load_snapshot(arrays)

    def config_dict(self) -> dict:
        cfg = asdict(self.cfg)
        cfg["sparse_widths"] = list(self.cfg.sparse_widths)
        cfg["head_widths"] = list(self.cfg.head_widths)
        return {
            "kind": self.kind,
            "train_config": cfg,
            "meta": self.meta,
            "feat_norm": {"mean": self.feat_norm.mean.tolist(),
                          "std": self.feat_norm.std.tolist()},
            "act_norm": {"mean": self.act_norm.mean.tolist(),
                         "std": self.act_norm.std.tolist()},
        }


def bundle_from_config(config: dict) -> PolicyBundle:
    tc = dict(config["train_config"])
    tc["sparse_widths"] = tuple(tc["sparse_widths"])
    tc["head_widths"] = tuple(tc["head_widths"])
    cfg = TrainConfig(**tc)
    feat = Normalizer(np.array(config["feat_norm"]["mean"]),
                      np.array(config["feat_norm"]["std"]))
    act = Normalizer(np.array(config["act_norm"]["mean"]),
                     np.array(config["act_norm"]["std"]))
    return PolicyBundle(config["kind"], cfg, cfg.seed, feat, act,
                        meta=config.get("meta"))


def policy_forward(bundle: PolicyBundle, obs_window, h0=None):
    """Numpy forward over an observation window.

    Returns (mode_logits, actions, waypoints, hT); actions are decoded to
    raw units, waypoints to absolute proprio targets. ``obs_window`` may be
    a sequence of Observations or an (T, 11) array.
    """
    if isinstance(obs_window, np.ndarray):
        raw = obs_window.reshape(-1, OBS_DIM)
    else:
        if len(obs_window) == 0:
            raise ValidationError("empty observation window")
        raw = np.stack([o.to_array() for o in obs_window])
    feats = bundle.feat_norm.apply(featurize(raw))
    xs = [Tensor(feats[t:t + 1]) for t in range(feats.shape[0])]
    h = Tensor(h0 if h0 is not None else bundle.init_hidden(1))
    mode_logits, action_outs, waypoint_outs, hT = bundle.forward_graph(xs, h)
    modes = (np.array([m.data[0] for m in mode_logits])
             if mode_logits else None)
    actions = (np.stack([bundle.action_from_head(a.data)[0]
                         for a in action_outs]) if action_outs else None)
    waypoints = None
    if waypoint_outs:
        offsets = np.stack([w.data[0] for w in waypoint_outs])
        waypoints = offset_to_waypoint(offsets, raw[:, :PROPRIO_DIM])
    return modes, actions, waypoints, hT.data.copy()


class PolicySession:
    """Stateful single-step wrapper used by the executor.

    The hidden state restarts from zeros every ``window`` steps so rollout
    hidden states stay inside the distribution the trunk was trained on
    (training windows always start from a zero state).
    """

    def __init__(self, bundle: PolicyBundle,
                 hidden_reset_every: Optional[int] = None):
        self.bundle = bundle
        self.h = bundle.init_hidden(1)
        if hidden_reset_every is None:
            hidden_reset_every = bundle.cfg.window
        self.hidden_reset_every = hidden_reset_every
        self._steps = 0

    def step(self, obs: Observation):
        if self.bundle.trunk is not None and self.hidden_reset_every \
                and self._steps % self.hidden_reset_every == 0:
            self.h = self.bundle.init_hidden(1)
        self._steps += 1
        modes, actions, waypoints, self.h = policy_forward(
            self.bundle, [obs], self.h)
        mode_prob = None if modes is None else _sigmoid(modes[0])
        action = None if actions is None else actions[0]
        waypoint = None if waypoints is None else waypoints[0]
        return mode_prob, action, waypoint


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# Training data plumbing


@dataclass
class DemoArrays:
    """Per-demo training targets; waypoints are gripper-relative offsets."""

    feats: np.ndarray         # (T, FEAT_DIM), un-normalized
    actions: np.ndarray       # (T, 4)
    waypoints: np.ndarray     # (T, 4) offset targets (grip absolute)
    modes: np.ndarray         # (T,)
    mode_targets: np.ndarray  # (T,), smoothed per config

    def __len__(self):
        return self.feats.shape[0]


def arrays_from_labeled(labeled: Sequence[Sequence[LabeledStep]],
                        smoothing: int = 1) -> list[DemoArrays]:
    out = []
    for steps in labeled:
        if not steps:
            raise ValidationError("demo without labeled steps")
        obs = np.stack([ls.obs.to_array() for ls in steps])
        modes = np.array([ls.mode for ls in steps], dtype=float)
        waypoints = np.stack([ls.waypoint.to_array() for ls in steps])
        out.append(DemoArrays(
            feats=featurize(obs),
            actions=np.stack([ls.action.to_array() for ls in steps]),
            waypoints=waypoint_to_offset(waypoints, obs[:, :PROPRIO_DIM]),
            modes=modes,
            mode_targets=np.asarray(smooth_modes(modes.astype(int), smoothing)),
        ))
    return out


def fit_normalizers(demos: Sequence[DemoArrays]) -> tuple[Normalizer, Normalizer]:
    feats = np.concatenate([d.feats for d in demos])
    acts = np.concatenate([d.actions for d in demos])
    return Normalizer.fit(feats), Normalizer.fit(acts)


@dataclass
class WindowBatch:
    """A (B, H, ...) slice of training data; mask marks real steps."""

    feats: np.ndarray
    actions: np.ndarray
    waypoints: np.ndarray
    modes: np.ndarray
    mode_targets: np.ndarray
    mask: np.ndarray


class WindowSampler:
    """Uniform random (demo, start) pairs; windows never cross demo ends."""

    def __init__(self, demos: Sequence[DemoArrays], bundle: PolicyBundle,
                 window: int, rng: np.random.Generator):
        self.demos = list(demos)
        self.window = window
        self.rng = rng
        self.bundle = bundle
        self.pairs = [(i, s) for i, d in enumerate(self.demos)
                      for s in range(len(d))]
        if not self.pairs:
            raise ValidationError("no training steps available")
        self._feats = [bundle.feat_norm.apply(d.feats) for d in self.demos]
        self._acts = [bundle.act_norm.apply(d.actions) for d in self.demos]

    def sample(self, batch_size: int) -> WindowBatch:
        idx = self.rng.integers(0, len(self.pairs), size=batch_size)
        return self.gather([self.pairs[i] for i in idx])

    def gather(self, pairs: Sequence[tuple[int, int]]) -> WindowBatch:
        b, h = len(pairs), self.window
        feats = np.zeros((b, h, FEAT_DIM))
        actions = np.zeros((b, h, ACTION_DIM))
        waypoints = np.zeros((b, h, PROPRIO_DIM))
        modes = np.zeros((b, h))
        mode_targets = np.zeros((b, h))
        mask = np.zeros((b, h))
        for j, (i, s) in enumerate(pairs):
            d = self.demos[i]
            n = min(h, len(d) - s)
            feats[j, :n] = self._feats[i][s:s + n]
            actions[j, :n] = self._acts[i][s:s + n]
            waypoints[j, :n] = d.waypoints[s:s + n]
            modes[j, :n] = d.modes[s:s + n]
            mode_targets[j, :n] = d.mode_targets[s:s + n]
            mask[j, :n] = 1.0
        return WindowBatch(feats, actions, waypoints, modes, mode_targets, mask)


# ---------------------------------------------------------------------------
# Loss


def hybrid_loss(bundle: PolicyBundle, batch: WindowBatch, cfg: TrainConfig):
    """Mode-weighted imitation loss over a window batch.

    Per valid step: (1 - alpha) * action NLL + alpha * waypoint NLL, plus
    beta * BCE(mode logit, target). NLLs are per-dimension mean squared
    errors for deterministic heads, mixture NLLs when gmm_k > 0. Returns
    (loss tensor, dict of float components); gradients flow to all heads.
    """
    b, h = batch.mask.shape
    h0 = Tensor(bundle.init_hidden(b))
    xs = [Tensor(batch.feats[:, t]) for t in range(h)]
    mode_logits, action_outs, waypoint_outs, _ = bundle.forward_graph(xs, h0)

    total_mask = float(batch.mask.sum())
    if total_mask == 0:
        raise ValidationError("batch has no valid steps")
    action_term = None
    wp_term = None
    mode_term = None
    for t in range(h):
        mask_t = batch.mask[:, t]
        if bundle.kind == "hybrid":
            alpha = mode_weight(batch.modes[:, t], cfg.gamma)
            a_weight = (1.0 - alpha) * mask_t
            w_weight = alpha * mask_t
        else:
            a_weight = mask_t
            w_weight = mask_t
        step_terms = []
        if action_outs is not None:
            if cfg.gmm_k == 0:
                diff = action_outs[t] - batch.actions[:, t]
                a_nll = (diff * diff).sum(axis=1) / ACTION_DIM
            else:
                a_nll = gmm_nll(action_outs[t], batch.actions[:, t], cfg.gmm_k)
            contrib = (a_nll * a_weight).sum()
            action_term = contrib if action_term is None else action_term + contrib
            step_terms.append(contrib)
        if waypoint_outs is not None:
            w_nll = _waypoint_mse(waypoint_outs[t], batch.waypoints[:, t])
            contrib = (w_nll * w_weight).sum()
            wp_term = contrib if wp_term is None else wp_term + contrib
            step_terms.append(contrib)
        if mode_logits is not None:
            bce = binary_cross_entropy_logits(mode_logits[t],
                                              batch.mode_targets[:, t])
            contrib = (bce * mask_t).sum()
            mode_term = contrib if mode_term is None else mode_term + contrib
            step_terms.append(contrib)
        for term in step_terms:
            if not np.isfinite(term.data):
                raise NumericError(f"non-finite loss at window step {t}")

    loss = None
    parts: dict[str, float] = {}
    if action_term is not None:
        scaled = action_term / total_mask
        loss = scaled
        parts["action"] = float(scaled.data)
    if wp_term is not None:
        scaled = wp_term / total_mask
        loss = scaled if loss is None else loss + scaled
        parts["waypoint"] = float(scaled.data)
    if mode_term is not None:
        scaled = mode_term * (cfg.beta / total_mask)
        loss = loss + scaled
        parts["mode"] = float(scaled.data)
    parts["total"] = float(loss.data)
    return loss, parts


def _waypoint_mse(pred: Tensor, target: np.ndarray) -> Tensor:
    """Per-sample MSE over (x, y, theta, grip) with a wrap-aware theta
    residual: the angular error is measured on the nearest branch."""
    resid = pred - target
    theta = resid[:, 2:3]
    offset = TWO_PI * np.round(theta.data / TWO_PI)
    theta = theta - offset
    xy = resid[:, 0:2]
    grip = resid[:, 3:4]
    sq = (xy * xy).sum(axis=1) + (theta * theta).sum(axis=1) \
        + (grip * grip).sum(axis=1)
    return sq / PROPRIO_DIM


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainLog:
    records: list = field(default_factory=list)   # periodic loss components
    evals: list = field(default_factory=list)     # {step, success, checkpoint_id}
    checkpoints: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def train_on_arrays(kind: str, demos: Sequence[DemoArrays], cfg: TrainConfig,
                    evaluator: Optional[Callable[[PolicyBundle], float]] = None,
                    meta: Optional[dict] = None
                    ) -> tuple[PolicyBundle, TrainLog]:
    """Shared optimization loop for every policy variant."""
    if not demos:
        raise ValidationError("empty dataset")
    feat_norm, act_norm = fit_normalizers(demos)
    bundle = PolicyBundle(kind, cfg, cfg.seed, feat_norm, act_norm, meta=meta)
    log = TrainLog(config={"kind": kind, **asdict(cfg)})
    if cfg.steps == 0:
        return bundle, log
    sampler = WindowSampler(demos, bundle, cfg.window,
                            np.random.default_rng([cfg.seed, 913]))
    opt = Adam(bundle.store.tensors(), AdamConfig(lr=cfg.lr))
    for step in range(1, cfg.steps + 1):
        batch = sampler.sample(cfg.batch_size)
        opt.zero_grad()
        loss, parts = hybrid_loss(bundle, batch, cfg)
        loss.backward()
        opt.step()
        if step % cfg.log_every == 0 or step == 1:
            log.records.append({"step": step, **parts})
        if evaluator is not None and cfg.eval_every > 0 \
                and step % cfg.eval_every == 0:
            ckpt_id = f"step{step:06d}"
            log.checkpoints[ckpt_id] = bundle.snapshot()
            success = evaluator(bundle)
            log.evals.append({"step": step, "success": success,
                              "checkpoint_id": ckpt_id})
    if log.evals:
        from .evaluate import select_checkpoint
        bundle.load_snapshot(log.checkpoints[select_checkpoint(log)])
    return bundle, log


def train(dataset: Dataset, cfg: TrainConfig,
          eval_env_cfg=None) -> tuple[PolicyBundle, TrainLog]:
    """Train the full dual-head policy on a labeled dataset.

    When an environment config is given, a fixed seed-derived episode set is
    rolled out every ``eval_every`` steps and the best checkpoint (earliest
    tie) is returned.
    """
    if dataset.labeled is None or not dataset.demos:
        raise ValidationError("dataset must be labeled before training")
    demos = arrays_from_labeled(dataset.labeled, smoothing=cfg.smoothing)
    evaluator = None
    if eval_env_cfg is not None:
        from .evaluate import success_evaluator
        evaluator = success_evaluator(eval_env_cfg, cfg.eval_episodes)
    return train_on_arrays("hybrid", demos, cfg, evaluator)
