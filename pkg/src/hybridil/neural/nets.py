"""Parameter containers and the small network modules used by the policies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NumericError, ValidationError
from .autograd import Tensor, as_tensor, logsumexp


class ParamStore:
    """Named parameter tensors plus the record of how they were initialized."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.init_record: dict[str, str] = {}
        self._params: dict[str, Tensor] = {}

    def add_weight(self, name: str, shape: tuple[int, ...]) -> Tensor:
        # Uniform in +/- 1/sqrt(fan_in); fan_in is the first axis.
        bound = 1.0 / math.sqrt(shape[0])
        data = self.rng.uniform(-bound, bound, size=shape)
        return self._register(name, data, f"uniform(+/-1/sqrt({shape[0]}))")

    def add_zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._register(name, np.zeros(shape), "zeros")

    def _register(self, name: str, data: np.ndarray, how: str) -> Tensor:
        if name in self._params:
            raise ValidationError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        self.init_record[name] = how
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def named(self) -> dict[str, Tensor]:
        return dict(self._params)

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_snapshot(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self._params.items():
            a = arrays[k]
            if a.shape != t.data.shape:
                raise ValidationError(
                    f"parameter {k!r}: shape {a.shape} != {t.data.shape}")
            t.data = np.array(a, dtype=float)
            t.grad = None

    def n_params(self) -> int:
        return sum(t.data.size for t in self._params.values())


@dataclass(frozen=True)
class MLPConfig:
    in_dim: int
    widths: tuple[int, ...]  # hidden layer widths
    out_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1 or any(w < 1 for w in self.widths):
            raise ValidationError("MLP dimensions must be positive")


class MLP:
    """Feed-forward net; hidden layers use the configured activation,
    the output layer is linear."""

    def __init__(self, cfg: MLPConfig, store: ParamStore, prefix: str):
        self.cfg = cfg
        self.store = store
        self.prefix = prefix
        dims = [cfg.in_dim, *cfg.widths, cfg.out_dim]
        self.weights = []
        self.biases = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.weights.append(store.add_weight(f"{prefix}.W{i}", (a, b)))
            self.biases.append(store.add_zeros(f"{prefix}.b{i}", (b,)))
        if cfg.activation == "tanh":
            self._act: Callable[[Tensor], Tensor] = Tensor.tanh
        elif cfg.activation == "relu":
            self._act = Tensor.relu
        else:
            raise ValidationError(f"unknown activation {cfg.activation!r}")

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        if x.data.ndim == 1:
            x = x.reshape(1, -1)
        if x.data.shape[-1] != self.cfg.in_dim:
            raise ValidationError(
                f"{self.prefix}: input dim {x.data.shape[-1]}"
                f" != {self.cfg.in_dim}")
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = self._act(h)
        return h


@dataclass(frozen=True)
class RecurrentConfig:
    in_dim: int
    hidden: int

    def __post_init__(self):
        if self.in_dim < 1 or self.hidden < 1:
            raise ValidationError("recurrent sizes must be positive")


class GRUCell:
    """Gated recurrent cell with fused gate weights (reset | update | cand)."""

    def __init__(self, cfg: RecurrentConfig, store: ParamStore, prefix: str):
        self.cfg = cfg
        self.w_x = store.add_weight(f"{prefix}.Wx", (cfg.in_dim, 3 * cfg.hidden))
        self.w_h = store.add_weight(f"{prefix}.Wh", (cfg.hidden, 3 * cfg.hidden))
        self.b = store.add_zeros(f"{prefix}.b", (3 * cfg.hidden,))
        self.prefix = prefix

    def init_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.cfg.hidden)))

    def step(self, h, x) -> Tensor:
        h = as_tensor(h)
        x = as_tensor(x)
        if x.data.ndim == 1:
            x = x.reshape(1, -1)
        if h.data.ndim == 1:
            h = h.reshape(1, -1)
        if x.data.shape[-1] != self.cfg.in_dim or h.data.shape[-1] != self.cfg.hidden:
            raise ValidationError(
                f"{self.prefix}: got x {x.data.shape}, h {h.data.shape}")
        n = self.cfg.hidden
        gx = x @ self.w_x + self.b
        gh = h @ self.w_h
        r = (gx[:, :n] + gh[:, :n]).sigmoid()
        z = (gx[:, n:2 * n] + gh[:, n:2 * n]).sigmoid()
        cand = (gx[:, 2 * n:] + r * gh[:, 2 * n:]).tanh()
        return z * h + (1.0 - z) * cand


@dataclass(frozen=True)
class GMMHeadConfig:
    n_components: int  # 0 = deterministic head
    out_dim: int

    def __post_init__(self):
        if self.n_components < 0 or self.out_dim < 1:
            raise ValidationError("invalid mixture head configuration")

    @property
    def head_dim(self) -> int:
        if self.n_components == 0:
            return self.out_dim
        return self.n_components * (1 + 2 * self.out_dim)


LOG_2PI = math.log(2.0 * math.pi)


def gmm_nll(head_out, target, n_components: int) -> Tensor:
    """Per-sample negative log likelihood of a diagonal Gaussian mixture.

    ``head_out`` packs, per sample, K logits, then K*D means, then K*D
    log-stds. Returns a (B,) tensor.
    """
    if n_components < 1:
        raise ValidationError("gmm_nll needs at least one component")
    head_out = as_tensor(head_out)
    target = np.asarray(target, dtype=float)
    if target.ndim == 1:
        target = target[None, :]
    if head_out.data.ndim == 1:
        head_out = head_out.reshape(1, -1)
    if not np.all(np.isfinite(head_out.data)) or not np.all(np.isfinite(target)):
        raise NumericError("non-finite inputs to gmm_nll")
    k = n_components
    d = target.shape[-1]
    if head_out.data.shape[-1] != k * (1 + 2 * d):
        raise ValidationError(
            f"head output dim {head_out.data.shape[-1]} != {k * (1 + 2 * d)}")
    b = head_out.data.shape[0]
    logits = head_out[:, :k]
    means = head_out[:, k:k + k * d].reshape(b, k, d)
    log_std = head_out[:, k + k * d:].reshape(b, k, d)
    log_weights = logits - logsumexp(logits, axis=1).reshape(b, 1)
    inv_std = (-log_std).exp()
    resid = (Tensor(target[:, None, :]) - means) * inv_std
    comp_ll = (resid * resid * -0.5 - log_std - 0.5 * LOG_2PI).sum(axis=2)
    return -logsumexp(log_weights + comp_ll, axis=1)
