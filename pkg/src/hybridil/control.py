"""Saturating linear servo toward a target proprioceptive state.

Position and rotation servo simultaneously along the straight-line /
shortest-angle path; each step moves by at most ``v_max * dt`` meters and
``w_max * dt`` radians. The gripper is commanded to the target's grip value
and excluded from the reach test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .trajectory import Action, DEFAULT_CAPS, ProprioState, angle_diff


@dataclass(frozen=True)
class ControllerConfig:
    v_max: float = 0.5      # m/s
    w_max: float = 2.0      # rad/s
    eps_pos: float = 0.01   # m
    eps_theta: float = 0.05  # rad
    timeout: float = 5.0    # s
    dt: float = 0.1         # s

    def __post_init__(self):
        for name in ("v_max", "w_max", "eps_pos", "eps_theta", "timeout", "dt"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"ControllerConfig.{name} must be positive")
        if self.v_max * self.dt > DEFAULT_CAPS[0] + 1e-12:
            raise ValidationError("v_max * dt exceeds the translation action cap")
        if self.w_max * self.dt > DEFAULT_CAPS[2] + 1e-12:
            raise ValidationError("w_max * dt exceeds the rotation action cap")

    @property
    def pos_step(self) -> float:
        return self.v_max * self.dt

    @property
    def ang_step(self) -> float:
        return self.w_max * self.dt


def waypoint_action(p: ProprioState, w: ProprioState,
                    cfg: ControllerConfig = ControllerConfig()) -> Action:
    """Bounded straight-line step from ``p`` toward ``w``."""
    ex = w.x - p.x
    ey = w.y - p.y
    dist = math.hypot(ex, ey)
    if dist > 0.0:
        step = min(dist, cfg.pos_step)
        dx = ex / dist * step
        dy = ey / dist * step
    else:
        dx = dy = 0.0
    ang = angle_diff(w.theta, p.theta)
    dtheta = max(-cfg.ang_step, min(cfg.ang_step, ang))
    return Action(dx, dy, dtheta, w.grip)


def is_reached(p: ProprioState, w: ProprioState,
               cfg: ControllerConfig = ControllerConfig()) -> bool:
    """True iff position and angle errors are strictly inside tolerance."""
    pos_err = math.hypot(w.x - p.x, w.y - p.y)
    ang_err = abs(angle_diff(w.theta, p.theta))
    return pos_err < cfg.eps_pos and ang_err < cfg.eps_theta


def timeout_steps(cfg: ControllerConfig = ControllerConfig()) -> int:
    """Number of controller steps before a latched waypoint is abandoned."""
    # 1e-9 slack so e.g. 5.0 / 0.1 can never floor to 49 under float error.
    return int(math.floor(cfg.timeout / cfg.dt + 1e-9))
