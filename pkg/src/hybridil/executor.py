"""Test-time execution: mode latching, waypoint servoing, timeouts.

Per step the policy is always queried (so its hidden state advances), then:

* if no waypoint is latched and the predicted mode is sparse, latch the
  predicted waypoint;
* while a waypoint is latched, not reached, and not timed out, execute the
  servo action and ignore the policy's action output;
* otherwise unlatch (reached or timed out) and execute the policy action.

Waypoint-only policies run either open loop (latch every predicted waypoint
and servo to it, querying the policy only when a new waypoint is needed) or
closed loop (convert each per-step predicted waypoint into one servo action).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .control import ControllerConfig, is_reached, timeout_steps, waypoint_action
from .errors import ValidationError
from .policy import PolicyBundle, PolicySession
from .sim import PickPlaceEnv
from .trajectory import Action, Observation, ProprioState


@dataclass(frozen=True)
class ExecutorConfig:
    mode_threshold: float = 0.5
    controller: ControllerConfig = ControllerConfig()
    stochastic_modes: bool = False  # sample the mode instead of thresholding
    force_mode: Optional[int] = None  # 0 or 1 overrides the predicted mode
    waypoint_open_loop: bool = True   # waypoint-only policies: servo vs convert
    sample_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.mode_threshold < 1.0):
            raise ValidationError("mode_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class LatchEvent:
    start: int          # step index when the waypoint was latched
    end: int            # step index when it was unlatched
    reason: str         # "reached" | "timeout" | "episode_end"
    controller_steps: int
    waypoint: ProprioState


@dataclass
class RolloutResult:
    observations: list[Observation]
    actions: list[Action]                 # executed actions
    modes: list[Optional[int]]            # chosen mode per step
    latched: list[bool]                   # controller owned this step
    latch_events: list[LatchEvent]
    timeout_count: int
    success: bool
    stage: str
    flags: dict
    length: int
    servo_hidden_drift: float             # mean hidden-state delta while latched

    @property
    def trajectory(self):
        return list(zip(self.observations, self.actions))


def make_session(policy):
    """Adapt a bundle (or anything with session()/step()) into a fresh
    rollout session."""
    if isinstance(policy, PolicyBundle):
        return PolicySession(policy)
    if hasattr(policy, "session"):
        return policy.session()
    if hasattr(policy, "step") and not isinstance(policy, PickPlaceEnv):
        return policy
    raise ValidationError(f"cannot build a rollout session from {policy!r}")


class _Recorder:
    def __init__(self):
        self.observations: list[Observation] = []
        self.actions: list[Action] = []
        self.modes: list[Optional[int]] = []
        self.latched: list[bool] = []
        self.events: list[LatchEvent] = []
        self.timeouts = 0
        self.drift_sum = 0.0
        self.drift_n = 0


def rollout(policy, env: PickPlaceEnv, cfg: ExecutorConfig = ExecutorConfig(),
            seed: Optional[int] = None) -> RolloutResult:
    """Roll one episode under the latching executor."""
    if seed is not None:
        obs = env.reset(seed)
    elif env.state is not None:
        obs = env.observe()
    else:
        raise ValidationError("environment must be reset before rollout")
    session = make_session(policy)
    kind = getattr(getattr(session, "bundle", None), "kind", None)
    rec = _Recorder()
    if kind == "waypoint":
        info = _run_waypoint_only(session, env, cfg, obs, rec)
    else:
        info = _run_latching(session, env, cfg, obs, rec, seed)
    return RolloutResult(
        observations=rec.observations,
        actions=rec.actions,
        modes=rec.modes,
        latched=rec.latched,
        latch_events=rec.events,
        timeout_count=rec.timeouts,
        success=info["success"],
        stage=info["stage"],
        flags=info["flags"],
        length=len(rec.actions),
        servo_hidden_drift=rec.drift_sum / rec.drift_n if rec.drift_n else 0.0,
    )


def _run_latching(session, env, cfg: ExecutorConfig, obs, rec: _Recorder,
                  seed) -> dict:
    ctrl = cfg.controller
    limit = timeout_steps(ctrl)
    sample_rng = (np.random.default_rng([cfg.sample_seed, seed or 0])
                  if cfg.stochastic_modes else None)
    latched: Optional[ProprioState] = None
    ctrl_steps = 0
    latch_start = 0
    prev_hidden = None
    t = 0
    done = False
    info = {"stage": "reach", "flags": {}, "success": False}
    while not done:
        rec.observations.append(obs)
        mode_prob, action_pred, wp_pred = session.step(obs)
        hidden = getattr(session, "h", None)
        p = obs.proprio

        if cfg.force_mode is not None:
            mode = cfg.force_mode
        elif mode_prob is None:
            mode = 1  # dense-only policies never latch
        elif cfg.stochastic_modes:
            mode = int(sample_rng.random() < mode_prob)
        else:
            mode = int(mode_prob > cfg.mode_threshold)
        rec.modes.append(mode)

        if latched is None and mode == 0:
            latched = ProprioState(*wp_pred)
            ctrl_steps = 0
            latch_start = t
        if latched is not None and not is_reached(p, latched, ctrl) \
                and ctrl_steps < limit:
            exec_action = waypoint_action(p, latched, ctrl)
            ctrl_steps += 1
            rec.latched.append(True)
            if hidden is not None and prev_hidden is not None:
                rec.drift_sum += float(np.linalg.norm(hidden - prev_hidden))
                rec.drift_n += 1
        else:
            if latched is not None:
                reason = "reached" if is_reached(p, latched, ctrl) else "timeout"
                if reason == "timeout":
                    rec.timeouts += 1
                rec.events.append(
                    LatchEvent(latch_start, t, reason, ctrl_steps, latched))
                latched = None
            exec_action = Action(*action_pred)
            rec.latched.append(False)

        prev_hidden = None if hidden is None else np.array(hidden)
        rec.actions.append(exec_action)
        obs, done, info = env.step(exec_action)
        t += 1
    if latched is not None:
        rec.events.append(
            LatchEvent(latch_start, t, "episode_end", ctrl_steps, latched))
    return info


def _run_waypoint_only(session, env, cfg: ExecutorConfig, obs,
                       rec: _Recorder) -> dict:
    ctrl = cfg.controller
    limit = timeout_steps(ctrl)
    latched: Optional[ProprioState] = None
    ctrl_steps = 0
    latch_start = 0
    t = 0
    done = False
    info = {"stage": "reach", "flags": {}, "success": False}
    while not done:
        rec.observations.append(obs)
        p = obs.proprio
        if cfg.waypoint_open_loop:
            if latched is not None and (is_reached(p, latched, ctrl)
                                        or ctrl_steps >= limit):
                reason = "reached" if is_reached(p, latched, ctrl) else "timeout"
                if reason == "timeout":
                    rec.timeouts += 1
                rec.events.append(
                    LatchEvent(latch_start, t, reason, ctrl_steps, latched))
                latched = None
            if latched is None:
                _, _, wp_pred = session.step(obs)
                latched = ProprioState(*wp_pred)
                ctrl_steps = 0
                latch_start = t
            exec_action = waypoint_action(p, latched, ctrl)
            ctrl_steps += 1
            rec.latched.append(True)
        else:
            _, _, wp_pred = session.step(obs)
            exec_action = waypoint_action(p, ProprioState(*wp_pred), ctrl)
            rec.latched.append(False)
        rec.modes.append(None)
        rec.actions.append(exec_action)
        obs, done, info = env.step(exec_action)
        t += 1
    if latched is not None:
        rec.events.append(
            LatchEvent(latch_start, t, "episode_end", ctrl_steps, latched))
    return info
