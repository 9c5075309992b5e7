"""Learn click-state labels from a subset of annotated demos.

A small recurrent model emits two per-step logits: one for the dense-mode
bit and one for a segment-switch indicator (isolated clicks). The click
trace is reconstructed as dense-mode steps plus one isolated click at the
peak of each above-threshold switch run; that union reproduces the original
click encoding exactly when both streams are predicted correctly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .neural import (Adam, AdamConfig, GRUCell, MLP, MLPConfig, ParamStore,
                     RecurrentConfig, Tensor, binary_cross_entropy_logits)
from .policy import FEAT_DIM, Normalizer, featurize
from .segmentation import label_modes
from .trajectory import Dataset, Demonstration


@dataclass
class LabelerConfig:
    hidden: int = 32
    head_widths: tuple[int, ...] = (32,)
    window: int = 20
    batch_size: int = 16
    steps: int = 2000
    lr: float = 3e-3
    seed: int = 0
    # Odd smoothing kernel for both probability streams. Off by default: the
    # box kernel dilutes confident one-step switch spikes below the 0.5
    # threshold, and the local-maximum decode already dedupes adjacent hits.
    smoothing: int = 1
    switch_pos_weight: float = 8.0  # isolated clicks are rare positives

    def __post_init__(self):
        if self.smoothing < 1 or self.smoothing % 2 == 0:
            raise ValidationError("smoothing kernel must be odd and >= 1")
        if self.switch_pos_weight < 1:
            raise ValidationError("switch_pos_weight must be >= 1")


LABELER_FEAT_DIM = FEAT_DIM + 4


def labeler_features(demo: Demonstration) -> np.ndarray:
    """Observation features plus one-step proprio deltas.

    Standstill at segment boundaries is invisible in a single observation;
    the finite-difference velocity makes arrival steps separable.
    """
    feats = featurize(demo.obs_array())
    proprio = np.stack([s.obs.proprio.to_array() for s in demo.steps])
    deltas = np.zeros_like(proprio)
    deltas[1:] = proprio[1:] - proprio[:-1]
    return np.concatenate([feats, deltas], axis=1)


class ModeLabeler:
    """Recurrent click-state predictor (dense logit + switch logit)."""

    def __init__(self, cfg: LabelerConfig, feat_norm: Normalizer):
        self.cfg = cfg
        self.feat_norm = feat_norm
        self.store = ParamStore(cfg.seed)
        self.trunk = GRUCell(RecurrentConfig(LABELER_FEAT_DIM, cfg.hidden),
                             self.store, "trunk")
        self.head = MLP(MLPConfig(cfg.hidden, cfg.head_widths, 2),
                        self.store, "head")

    def logits(self, demo: Demonstration) -> np.ndarray:
        """(T, 2) array of (dense, switch) logits for a full demo."""
        feats = self.feat_norm.apply(labeler_features(demo))
        h = Tensor(np.zeros((1, self.cfg.hidden)))
        out = np.zeros((len(feats), 2))
        for t, row in enumerate(feats):
            h = self.trunk.step(h, Tensor(row[None, :]))
            out[t] = self.head(h).data[0]
        return out


def _click_targets(demo: Demonstration) -> tuple[np.ndarray, np.ndarray]:
    """Per-step (dense bit, isolated-switch bit) targets from stored clicks."""
    clicks = demo.clicks
    seg = label_modes(clicks, demo.proprios)
    n = len(clicks)
    dense = np.array(seg.modes, dtype=float)
    switch = np.zeros(n)
    for t in range(n):
        prev = clicks[t - 1] if t > 0 else False
        nxt = clicks[t + 1] if t + 1 < n else False
        if clicks[t] and not prev and not nxt:
            switch[t] = 1.0
    return dense, switch


def train_mode_labeler(dataset: Dataset, fraction: float,
                       cfg: LabelerConfig = LabelerConfig()) -> ModeLabeler:
    """Fit the click-state predictor on the first ``fraction`` of demos."""
    if not (0 < fraction <= 1):
        raise ValidationError("fraction must lie in (0, 1]")
    k = round(fraction * len(dataset.demos))
    if k == 0:
        raise ValidationError("fraction selects zero demos")
    demos = dataset.demos[:k]
    feats = [labeler_features(d) for d in demos]
    targets = [_click_targets(d) for d in demos]
    feat_norm = Normalizer.fit(np.concatenate(feats))
    labeler = ModeLabeler(cfg, feat_norm)

    rng = np.random.default_rng([cfg.seed, 417])
    pairs = [(i, s) for i, f in enumerate(feats) for s in range(len(f))]
    normed = [feat_norm.apply(f) for f in feats]
    opt = Adam(labeler.store.tensors(), AdamConfig(lr=cfg.lr))
    h_dim = cfg.hidden
    for _ in range(cfg.steps):
        idx = rng.integers(0, len(pairs), size=cfg.batch_size)
        batch = [pairs[i] for i in idx]
        b, w = len(batch), cfg.window
        x = np.zeros((b, w, LABELER_FEAT_DIM))
        dense = np.zeros((b, w))
        switch = np.zeros((b, w))
        mask = np.zeros((b, w))
        for j, (i, s) in enumerate(batch):
            n = min(w, len(normed[i]) - s)
            x[j, :n] = normed[i][s:s + n]
            dense[j, :n] = targets[i][0][s:s + n]
            switch[j, :n] = targets[i][1][s:s + n]
            mask[j, :n] = 1.0
        opt.zero_grad()
        h = Tensor(np.zeros((b, h_dim)))
        loss = None
        for t in range(w):
            h = labeler.trunk.step(h, Tensor(x[:, t]))
            out = labeler.head(h)
            pos_w = 1.0 + (cfg.switch_pos_weight - 1.0) * switch[:, t]
            bce = (binary_cross_entropy_logits(out[:, 0], dense[:, t])
                   + binary_cross_entropy_logits(out[:, 1], switch[:, t]) * pos_w)
            term = (bce * mask[:, t]).sum()
            loss = term if loss is None else loss + term
        loss = loss / max(mask.sum(), 1.0)
        loss.backward()
        opt.step()
    return labeler


def predict_clicks(labeler: ModeLabeler, demo: Demonstration) -> list[bool]:
    """Reconstruct a click trace: smoothed dense-mode steps plus one isolated
    click at the argmax of each above-threshold switch run."""
    logits = labeler.logits(demo)
    probs = 1.0 / (1.0 + np.exp(-logits))
    n = len(demo.steps)
    k = min(labeler.cfg.smoothing, n if n % 2 == 1 else n - 1)

    def _smooth(p: np.ndarray) -> np.ndarray:
        if k <= 1:
            return p
        return np.convolve(p, np.full(k, 1.0 / k), mode="same")

    dense_p = _smooth(probs[:, 0])
    switch_p = _smooth(probs[:, 1])
    clicks = dense_p > 0.5
    t = 0
    while t < n:
        if switch_p[t] > 0.5:
            end = t
            while end + 1 < n and switch_p[end + 1] > 0.5:
                end += 1
            peak = t + int(np.argmax(switch_p[t:end + 1]))
            clicks[peak] = True
            t = end + 1
        else:
            t += 1
    return [bool(c) for c in clicks]


def auto_label_dataset(labeler: ModeLabeler, dataset: Dataset,
                       keep_first: int) -> Dataset:
    """Keep the human clicks on the first ``keep_first`` demos and replace
    the rest with predicted clicks."""
    demos = list(dataset.demos[:keep_first])
    for demo in dataset.demos[keep_first:]:
        demos.append(demo.with_clicks(predict_clicks(labeler, demo)))
    return Dataset(demos=demos, labeled=None,
                   schema_version=dataset.schema_version)
