"""Adam and a central-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ValidationError
from .autograd import Tensor


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValidationError("betas must lie in [0, 1)")


class Adam:
    """Standard bias-corrected Adam over a fixed list of parameter tensors."""

    def __init__(self, params: Sequence[Tensor], cfg: AdamConfig = AdamConfig()):
        self.params = list(params)
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        cfg = self.cfg
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = cfg.beta1 * self.m[i] + (1 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1 - cfg.beta2) * g * g
            m_hat = self.m[i] / (1 - cfg.beta1 ** self.t)
            v_hat = self.v[i] / (1 - cfg.beta2 ** self.t)
            p.data -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def grad_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` must rebuild the scalar loss from the current parameter
    values on every call. Relative error per entry is
    |analytic - numeric| / max(1, |numeric|).
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if loss.data.size != 1:
        raise ValidationError("grad_check needs a scalar loss")
    loss.backward()
    analytic = [np.array(p.grad) if p.grad is not None else np.zeros_like(p.data)
                for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = float(loss_fn().data)
            flat[j] = orig - eps
            down = float(loss_fn().data)
            flat[j] = orig
            numeric = (up - down) / (2 * eps)
            err = abs(ana_flat[j] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
