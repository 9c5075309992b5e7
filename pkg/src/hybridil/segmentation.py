"""Turn per-step click traces into modes, waypoints, and labeled steps.

A click trace marks dense phases with sustained clicks and sparse-phase
endpoints with isolated clicks. A step is dense iff it is clicked and has a
clicked neighbor; every other step is sparse. Sparse steps target the state
at the next isolated click or dense-phase start, dense steps target the next
state. Boundary conventions (all deliberate):

* clicks outside [0, T) count as unclicked,
* the first step of a dense run also targets the next state,
* the final dense step clamps its target to the last state,
* a trailing sparse stretch with no terminating click targets the last state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .control import ControllerConfig, waypoint_action
from .errors import ValidationError
from .trajectory import Demonstration, LabeledStep, ProprioState

# A click trace is a per-step boolean sequence, one entry per demo step.
ClickTrace = Sequence[bool]


@dataclass(frozen=True)
class Segment:
    kind: str   # "sparse" | "dense"
    start: int  # first step index
    end: int    # one past the last step index
    target: Optional[int] = None  # waypoint state index (sparse only)


@dataclass(frozen=True)
class Segmentation:
    """Per-step modes and waypoint targets plus the segment partition."""

    modes: tuple[int, ...]
    waypoints: tuple[ProprioState, ...]
    waypoint_indices: tuple[int, ...]
    segments: tuple[Segment, ...]

    def __len__(self) -> int:
        return len(self.modes)


def _click_at(clicks: Sequence[bool], t: int) -> bool:
    return bool(clicks[t]) if 0 <= t < len(clicks) else False


def label_modes(clicks: ClickTrace,
                proprio: Sequence[ProprioState]) -> Segmentation:
    """Derive per-step modes and waypoint targets from a click trace."""
    T = len(clicks)
    if T != len(proprio):
        raise ValidationError(
            f"click trace length {T} != proprio length {len(proprio)}"
        )
    if T < 2:
        raise ValidationError("need at least 2 steps to segment")

    modes = [0] * T
    for t in range(T):
        if _click_at(clicks, t) and (_click_at(clicks, t - 1)
                                     or _click_at(clicks, t + 1)):
            modes[t] = 1

    widx = [-1] * T
    pending = 0  # first step whose sparse target is still unknown
    for t in range(T):
        isolated = (not _click_at(clicks, t - 1) and _click_at(clicks, t)
                    and not _click_at(clicks, t + 1))
        starts_dense = not _click_at(clicks, t - 1) and modes[t] == 1
        if isolated or starts_dense:
            for u in range(pending, t):
                widx[u] = t
            pending = t
        if modes[t] == 1:
            widx[t] = min(t + 1, T - 1)
            pending = t + 1
    for u in range(pending, T):
        widx[u] = T - 1  # trailing sparse stretch: the demo end is the goal

    segments = _build_segments(modes, widx)
    return Segmentation(
        modes=tuple(modes),
        waypoints=tuple(proprio[i] for i in widx),
        waypoint_indices=tuple(widx),
        segments=segments,
    )


def _build_segments(modes: Sequence[int],
                    widx: Sequence[int]) -> tuple[Segment, ...]:
    """Group steps into maximal runs: one segment per dense run, one per
    shared sparse target."""
    segments: list[Segment] = []
    T = len(modes)
    t = 0
    while t < T:
        s = t
        if modes[t] == 1:
            while t < T and modes[t] == 1:
                t += 1
            segments.append(Segment("dense", s, t))
        else:
            target = widx[t]
            while t < T and modes[t] == 0 and widx[t] == target:
                t += 1
            segments.append(Segment("sparse", s, t, target))
    return tuple(segments)


def smooth_modes(modes: Sequence[int], n: int) -> np.ndarray:
    """Same-length moving average of the mode bits with zero padding.

    n must be odd; n = 1 returns the modes unchanged (as floats).
    """
    T = len(modes)
    if n < 1 or n % 2 == 0:
        raise ValidationError(f"kernel size must be odd and >= 1, got {n}")
    if n > T:
        raise ValidationError(f"kernel size {n} exceeds trace length {T}")
    m = np.asarray(modes, dtype=float)
    if n == 1:
        return m
    return np.convolve(m, np.full(n, 1.0 / n), mode="same")


def raw_labeled_steps(demo: Demonstration,
                      seg: Segmentation) -> list[LabeledStep]:
    """Labeled steps that keep the demonstrated actions untouched."""
    if len(seg) != len(demo.steps):
        raise ValidationError("segmentation does not match demo length")
    return [
        LabeledStep(obs=s.obs, action=s.action, waypoint=w, mode=m,
                    relabeled=False)
        for s, w, m in zip(demo.steps, seg.waypoints, seg.modes)
    ]


def relabel_sparse_actions(
    demo: Demonstration,
    seg: Segmentation,
    ctrl: ControllerConfig = ControllerConfig(),
) -> list[LabeledStep]:
    """Replace every sparse-step action with the servo action toward its
    waypoint; dense steps pass through untouched."""
    steps = raw_labeled_steps(demo, seg)
    out: list[LabeledStep] = []
    for ls in steps:
        if ls.mode == 0:
            out.append(replace(
                ls,
                action=waypoint_action(ls.obs.proprio, ls.waypoint, ctrl),
                relabeled=True,
            ))
        else:
            out.append(ls)
    return out


def add_intermediate_waypoints(seg: Segmentation,
                               proprio: Sequence[ProprioState],
                               n_extra: int) -> Segmentation:
    """Subdivide each sparse segment with n_extra interior waypoints,
    equally spaced in time; n_extra = 0 is the identity."""
    if n_extra < 0:
        raise ValidationError("n_extra must be >= 0")
    if n_extra == 0:
        return seg
    T = len(seg)
    widx = list(seg.waypoint_indices)
    new_segments: list[Segment] = []
    for segment in seg.segments:
        if segment.kind == "dense":
            new_segments.append(segment)
            continue
        s, goal = segment.start, segment.target
        span = goal - s
        if span <= 1:
            new_segments.append(segment)
            continue
        bounds = sorted({s + (span * k) // (n_extra + 1)
                         for k in range(1, n_extra + 1)} | {goal})
        bounds = [b for b in bounds if b > s]
        prev = s
        for b in bounds:
            hi = min(b, segment.end)
            for u in range(prev, hi):
                widx[u] = b
            if hi > prev:
                new_segments.append(Segment("sparse", prev, hi, b))
            prev = hi
        # steps at or past the last boundary (trailing stretch) keep the goal
        if prev < segment.end:
            for u in range(prev, segment.end):
                widx[u] = goal
            new_segments.append(Segment("sparse", prev, segment.end, goal))
    return Segmentation(
        modes=seg.modes,
        waypoints=tuple(proprio[i] for i in widx),
        waypoint_indices=tuple(widx),
        segments=tuple(new_segments),
    )


def augment_sparse_states(
    labeled: Sequence[LabeledStep],
    sigma: float,
    seed: int,
    ctrl: ControllerConfig = ControllerConfig(),
) -> list[LabeledStep]:
    """Jitter the proprio state of sparse steps with Gaussian noise of std
    ``sigma`` (meters on x/y, radians on theta) and re-derive their servo
    actions toward the unchanged waypoints. Dense steps are returned as-is.
    """
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    if sigma == 0:
        return list(labeled)
    rng = np.random.default_rng(seed)
    from .trajectory import Observation, wrap_angle  # local to avoid cycle noise

    out: list[LabeledStep] = []
    for ls in labeled:
        if ls.mode == 1:
            out.append(ls)
            continue
        p = ls.obs.proprio
        noise = rng.normal(0.0, sigma, size=3)
        perturbed = ProprioState(
            x=float(np.clip(p.x + noise[0], 0.0, 1.0)),
            y=float(np.clip(p.y + noise[1], 0.0, 1.0)),
            theta=wrap_angle(p.theta + noise[2]),
            grip=p.grip,
        )
        obs = Observation(proprio=perturbed, env=ls.obs.env)
        out.append(LabeledStep(
            obs=obs,
            action=waypoint_action(perturbed, ls.waypoint, ctrl),
            waypoint=ls.waypoint,
            mode=ls.mode,
            relabeled=True,
        ))
    return out


def segment_demo(demo: Demonstration) -> Segmentation:
    """Segment a demo using its stored click trace."""
    return label_modes(demo.clicks, demo.proprios)
