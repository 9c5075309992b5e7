"""Deterministic planar pick-and-place environment and its scripted
demonstrator.

The task: reach a randomly placed object, grasp it (kinematic snap within
tolerance when the gripper closes), carry it to a slot, and release it within
the insertion tolerance. The object never moves unless held; there are no
contact dynamics. Optional Gaussian "system noise" perturbs executed motion
deltas, expressed as a fraction of the per-axis action cap.

The demonstrator follows a five-phase strategy (approach, grasp, carry,
pre-insert, insert) and emits clicks inline: one isolated click at each
sparse-segment endpoint, sustained clicks throughout dense phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .control import ControllerConfig, waypoint_action
from .errors import EpisodeDoneError, GenerationError, ValidationError
from .trajectory import (Action, DEFAULT_CAPS, DemoStep, Demonstration,
                         EnvState, Observation, ProprioState, angle_diff,
                         wrap_angle)

STAGES = ("reach", "grasp", "transport", "insert", "done")

HOME_POSE = ProprioState(0.5, 0.1, 0.0, 0.0)

# Stage bookkeeping: radius around the slot that counts as "inserting".
INSERT_ZONE = 0.1

# Render sizes (workspace units) for the annotation UI.
GRIPPER_SIZE = 0.035
OBJECT_SIZE = 0.04
SLOT_SIZE = 0.05


@dataclass(frozen=True)
class EnvConfig:
    grasp_tol_pos: float = 0.02
    grasp_tol_theta: float = 0.15
    insert_tol_pos: float = 0.01
    insert_tol_theta: float = 0.1
    dt: float = 0.1
    max_steps: int = 300
    caps: tuple[float, float, float] = DEFAULT_CAPS
    system_noise_sigma: float = 0.0  # fraction of the per-axis cap
    min_separation: float = 0.3
    margin: float = 0.12  # sampling margin from the workspace walls

    def __post_init__(self):
        if self.system_noise_sigma < 0:
            raise ValidationError("system_noise_sigma must be >= 0")
        for name in ("grasp_tol_pos", "grasp_tol_theta", "insert_tol_pos",
                     "insert_tol_theta", "dt"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"EnvConfig.{name} must be positive")


@dataclass(frozen=True)
class NoiseProfile:
    """Demonstrator style knobs (not environment dynamics noise)."""

    sparse_jitter_sigma: float = 0.02  # transit wobble amplitude, meters
    dense_slowdown: float = 0.4        # dense-phase speed as fraction of v_max
    dense_tremor_sigma: float = 0.005  # hand tremor during careful motion
    seed: int = 0

    def __post_init__(self):
        if self.sparse_jitter_sigma < 0 or self.dense_tremor_sigma < 0 \
                or not (0 < self.dense_slowdown <= 1):
            raise ValidationError("invalid NoiseProfile")


@dataclass
class EpisodeState:
    proprio: ProprioState
    object_pose: tuple[float, float, float]
    slot_pose: tuple[float, float, float]
    object_held: bool
    step_count: int
    done: bool
    success: bool
    flags: dict = field(default_factory=lambda: {
        "reach": False, "grasp": False, "transport": False,
        "insert": False, "done": False,
    })


def stage_of(state: EpisodeState) -> tuple[str, dict]:
    """Furthest stage achieved so far (monotone within an episode)."""
    order = ("grasp", "transport", "insert", "done")
    stage = "reach"
    for name in order:
        if state.flags[name]:
            stage = {"grasp": "grasp", "transport": "transport",
                     "insert": "insert", "done": "done"}[name]
    return stage, dict(state.flags)


class PickPlaceEnv:
    """Single-owner planar environment; create one instance per worker."""

    def __init__(self, cfg: EnvConfig = EnvConfig()):
        self.cfg = cfg
        self.state: Optional[EpisodeState] = None
        self._rng: Optional[np.random.Generator] = None

    def reset(self, seed: int) -> Observation:
        cfg = self.cfg
        scene_rng = np.random.default_rng([int(seed), 2297])
        lo, hi = cfg.margin, 1.0 - cfg.margin
        while True:
            obj = scene_rng.uniform(lo, hi, 2)
            slot = scene_rng.uniform(lo, hi, 2)
            if np.hypot(*(obj - slot)) >= cfg.min_separation:
                break
        obj_theta = wrap_angle(scene_rng.uniform(-math.pi, math.pi))
        slot_theta = wrap_angle(scene_rng.uniform(-math.pi, math.pi))
        self._rng = np.random.default_rng([int(seed), 5881])
        self.state = EpisodeState(
            proprio=HOME_POSE,
            object_pose=(float(obj[0]), float(obj[1]), obj_theta),
            slot_pose=(float(slot[0]), float(slot[1]), slot_theta),
            object_held=False,
            step_count=0,
            done=False,
            success=False,
        )
        return self.observe()

    def observe(self) -> Observation:
        s = self.state
        return Observation(
            proprio=s.proprio,
            env=EnvState(object_pose=s.object_pose, slot_pose=s.slot_pose,
                         object_held=s.object_held),
        )

    def step(self, action: Action) -> tuple[Observation, bool, dict]:
        s = self.state
        if s is None:
            raise EpisodeDoneError("reset the environment before stepping")
        if s.done:
            raise EpisodeDoneError("episode is done")
        cfg = self.cfg
        cx, cy, cth = cfg.caps
        dx = float(np.clip(action.dx, -cx, cx))
        dy = float(np.clip(action.dy, -cy, cy))
        dth = float(np.clip(action.dtheta, -cth, cth))
        grip_cmd = float(np.clip(action.grip_cmd, 0.0, 1.0))
        if cfg.system_noise_sigma > 0:
            noise = self._rng.normal(0.0, cfg.system_noise_sigma, 3)
            dx += noise[0] * cx
            dy += noise[1] * cy
            dth += noise[2] * cth
        p = s.proprio
        new = ProprioState(
            x=float(np.clip(p.x + dx, 0.0, 1.0)),
            y=float(np.clip(p.y + dy, 0.0, 1.0)),
            theta=wrap_angle(p.theta + dth),
            grip=grip_cmd,
        )
        prev_grip = p.grip
        s.proprio = new

        obj = s.object_pose
        dist_obj = math.hypot(obj[0] - new.x, obj[1] - new.y)
        if dist_obj < cfg.grasp_tol_pos:
            s.flags["reach"] = True
        closing = prev_grip < 0.5 <= grip_cmd
        opening = prev_grip >= 0.5 > grip_cmd
        if (not s.object_held and closing and dist_obj < cfg.grasp_tol_pos
                and abs(angle_diff(obj[2], new.theta)) < cfg.grasp_tol_theta):
            s.object_held = True  # kinematic snap-attach
            s.flags["grasp"] = True
        if s.object_held:
            s.object_pose = (new.x, new.y, new.theta)
            slot = s.slot_pose
            dist_slot = math.hypot(slot[0] - new.x, slot[1] - new.y)
            s.flags["transport"] = True
            if dist_slot < INSERT_ZONE:
                s.flags["insert"] = True
            if opening:
                s.object_held = False
                if (dist_slot < cfg.insert_tol_pos
                        and abs(angle_diff(slot[2], new.theta))
                        < cfg.insert_tol_theta):
                    s.success = True
                    s.done = True
                    s.flags["done"] = True
        s.step_count += 1
        if s.step_count >= cfg.max_steps:
            s.done = True
        stage, flags = stage_of(s)
        info = {"stage": stage, "flags": flags, "success": s.success}
        return self.observe(), s.done, info


def render_primitives(obs: Observation) -> list[dict]:
    """Scene description for the annotation UI: list of posed primitives."""
    p = obs.proprio
    ox, oy, oth = obs.env.object_pose
    sx, sy, sth = obs.env.slot_pose
    return [
        {"kind": "slot", "shape": "square_outline",
         "x": sx, "y": sy, "theta": sth, "size": SLOT_SIZE},
        {"kind": "object", "shape": "square",
         "x": ox, "y": oy, "theta": oth, "size": OBJECT_SIZE,
         "held": obs.env.object_held},
        {"kind": "gripper", "shape": "triangle",
         "x": p.x, "y": p.y, "theta": p.theta, "size": GRIPPER_SIZE,
         "grip": p.grip},
    ]


# ---------------------------------------------------------------------------
# Scripted demonstrator


def _unit(vx: float, vy: float) -> tuple[float, float]:
    n = math.hypot(vx, vy)
    if n < 1e-12:
        return (1.0, 0.0)
    return (vx / n, vy / n)


def _clip_point(x: float, y: float, margin: float = 0.03) -> tuple[float, float]:
    return (float(np.clip(x, margin, 1 - margin)),
            float(np.clip(y, margin, 1 - margin)))


@dataclass
class _Phase:
    kind: str  # sparse | dwell | dense_grasp | dense_insert
    target: Optional[ProprioState] = None
    click_first: bool = False  # dwell phases: isolated click on the first step


class ScriptedDemonstrator:
    """Closed-loop five-phase policy that also emits click labels.

    With ``jitter = 0`` the sparse phases are exact straight servo lines;
    with jitter they wobble perpendicular to the path (tapered near the
    target) so the raw demonstrated actions are deliberately inconsistent.
    """

    SEGMENT_STEP_LIMIT = 150

    def __init__(self, env_cfg: EnvConfig, profile: NoiseProfile,
                 rng: np.random.Generator,
                 ctrl: Optional[ControllerConfig] = None):
        self.cfg = env_cfg
        self.profile = profile
        self.rng = rng
        self.ctrl = ctrl or ControllerConfig(dt=env_cfg.dt)
        self.phases: list[_Phase] = []
        self.phase_idx = 0
        self._jitter_state: Optional[dict] = None
        self._held = False
        self._released = False
        self._retreat_left = 0
        self._settle_left = 0
        self._click_blank = 0
        self._steps_in_phase = 0
        self._speed = profile.dense_slowdown

    # -- planning ------------------------------------------------------------

    def begin(self, obs: Observation) -> None:
        """Plan the five-phase strategy for this scene.

        The waypoint choices vary demo to demo (approach direction, offsets,
        staging point, careful-motion speed) the way different human passes
        over the same scene would, which spreads the demonstrated state
        coverage around each nominal corridor.
        """
        ox, oy, oth = obs.env.object_pose
        sx, sy, sth = obs.env.slot_pose
        rng = self.rng
        base = math.atan2(oy - sy, ox - sx)  # away from the slot
        ang_g = base + rng.uniform(-0.5, 0.5)
        ang_i = base + rng.uniform(-0.5, 0.5)
        d_g = rng.uniform(0.06, 0.10)
        d_i = rng.uniform(0.05, 0.08)
        pre_grasp = _clip_point(ox + d_g * math.cos(ang_g),
                                oy + d_g * math.sin(ang_g))
        pre_insert = _clip_point(sx + d_i * math.cos(ang_i),
                                 sy + d_i * math.sin(ang_i))
        frac = rng.uniform(0.35, 0.55)
        side = rng.normal(0.0, 0.03, 2)
        staging = _clip_point(
            pre_grasp[0] + frac * (pre_insert[0] - pre_grasp[0]) + side[0],
            pre_grasp[1] + frac * (pre_insert[1] - pre_grasp[1]) + side[1])
        self._speed = float(np.clip(self.profile.dense_slowdown
                                    * rng.uniform(0.8, 1.25), 0.1, 1.0))
        self.phases = [
            _Phase("sparse", ProprioState(*pre_grasp, oth, 0.0)),
            _Phase("dense_grasp", ProprioState(ox, oy, oth, 0.0)),
            _Phase("sparse", ProprioState(*staging, sth, 1.0)),
            _Phase("sparse", ProprioState(*pre_insert, sth, 1.0)),
            _Phase("dense_insert", ProprioState(sx, sy, sth, 1.0)),
        ]
        self.phase_idx = 0
        self._new_jitter()
        self._held = False
        self._released = False
        self._retreat_left = -1
        self._settle_left = -1
        self._click_blank = 0
        self._steps_in_phase = 0

    def _new_jitter(self) -> None:
        amp = self.profile.sparse_jitter_sigma * self.rng.uniform(0.6, 1.4)
        self._jitter_state = {
            "amp": amp * self.rng.choice([-1.0, 1.0]),
            "freq": self.rng.uniform(1.0, 2.5),
            "phase": self.rng.uniform(0.0, 2 * math.pi),
            "start": None,
            "length": None,
        }

    # -- stepping ------------------------------------------------------------

    def act(self, obs: Observation) -> tuple[Action, bool, int, bool]:
        """Returns (action, click, mode, segment_boundary).

        ``mode`` is the script's own dense bit for the *current* step;
        ``segment_boundary`` marks steps that start a new sparse stretch
        (isolated-click steps).
        """
        self._steps_in_phase += 1
        if self._steps_in_phase > self.SEGMENT_STEP_LIMIT:
            raise GenerationError("demonstrator segment exceeded step budget")
        self._held = obs.env.object_held
        phase = self.phases[self.phase_idx]
        if phase.kind == "sparse":
            return self._act_sparse(obs, phase)
        if phase.kind == "dense_grasp":
            out = self._act_grasp(obs, phase)
        else:
            out = self._act_insert(obs, phase)
        if self._click_blank > 0:
            # gap step right after an in-motion waypoint click, so the click
            # stays isolated; the motion itself already belongs to the dense
            # behavior and is labeled sparse toward the dense-start state
            self._click_blank -= 1
            return out[0], False, 0, False
        return out

    def _advance(self) -> None:
        self.phase_idx += 1
        self._steps_in_phase = 0
        self._new_jitter()

    def _arrived(self, p: ProprioState, w: ProprioState, tol: float) -> bool:
        return (math.hypot(w.x - p.x, w.y - p.y) <= tol
                and abs(angle_diff(w.theta, p.theta)) <= max(tol, 1e-9))

    def _act_sparse(self, obs: Observation, phase: _Phase):
        p = obs.proprio
        w = phase.target
        # exact arrival at zero system noise; loose arrival under noise
        tol = 1e-9 if self.cfg.system_noise_sigma == 0 else self.ctrl.eps_pos
        if self._arrived(p, w, tol):
            self._advance()
            # the waypoint click happens in motion: the arrival state is the
            # labeled waypoint and the next phase's action executes under it
            dense_next = self.phases[self.phase_idx].kind != "sparse"
            out = self._act_click_through(obs)
            if dense_next:
                self._click_blank = 1  # keep the click isolated
            return out
        base = waypoint_action(p, w, self.ctrl)
        dist = math.hypot(w.x - p.x, w.y - p.y)
        js = self._jitter_state
        if js["start"] is None:
            js["start"] = (p.x, p.y)
            js["length"] = max(dist, 1e-6)
        progress = 1.0 - min(dist / js["length"], 1.0)
        taper = min(1.0, dist / 0.1)
        wobble = (js["amp"] * taper
                  * math.sin(js["freq"] * 2 * math.pi * progress + js["phase"]))
        ux, uy = _unit(w.x - p.x, w.y - p.y)
        dx = base.dx + wobble * (-uy)
        dy = base.dy + wobble * ux
        norm = math.hypot(dx, dy)
        cap = self.ctrl.pos_step
        if norm > cap:
            dx *= cap / norm
            dy *= cap / norm
        return Action(dx, dy, base.dtheta, w.grip), False, 0, False

    def _act_click_through(self, obs: Observation):
        # segment boundary: the click marks this state; the next phase's
        # first action executes immediately (labeling never pauses motion)
        action, _, _, _ = self.act(obs)
        self._steps_in_phase = max(self._steps_in_phase, 1)
        return action, True, 0, True

    def _slow_servo(self, p: ProprioState, w: ProprioState, grip: float) -> Action:
        """Careful closed-loop motion with hand tremor: slower than the
        transit servo, with small lateral/longitudinal noise that gives the
        dataset state coverage around the approach corridor."""
        s = self._speed
        dist = math.hypot(w.x - p.x, w.y - p.y)
        step = min(dist, self.ctrl.pos_step * s)
        ux, uy = _unit(w.x - p.x, w.y - p.y)
        dx, dy = (ux * step, uy * step) if dist > 0 else (0.0, 0.0)
        tremor = self.profile.dense_tremor_sigma
        if tremor > 0 and dist > 0:
            noise = self.rng.normal(0.0, tremor, 2)
            dx += noise[0]
            dy += noise[1]
            norm = math.hypot(dx, dy)
            cap = self.ctrl.pos_step
            if norm > cap:
                dx *= cap / norm
                dy *= cap / norm
        dth = max(-self.ctrl.ang_step * s, min(self.ctrl.ang_step * s,
                                               angle_diff(w.theta, p.theta)))
        return Action(dx, dy, dth, grip)

    def _act_grasp(self, obs: Observation, phase: _Phase):
        p = obs.proprio
        ox, oy, oth = obs.env.object_pose
        w = ProprioState(ox, oy, oth, 0.0)
        if not obs.env.object_held:
            near = (math.hypot(ox - p.x, oy - p.y)
                    < 0.6 * self.cfg.grasp_tol_pos
                    and abs(angle_diff(oth, p.theta))
                    < 0.6 * self.cfg.grasp_tol_theta)
            if not near:
                self._settle_left = -1
                return self._slow_servo(p, w, 0.0), True, 1, False
            # settle at standstill (gripper open) before closing, so the
            # close transition is tightly conditioned on having arrived;
            # a close that missed under system noise re-settles and retries
            if self._settle_left == -1:
                self._settle_left = int(self.rng.integers(1, 4))
            if self._settle_left > 0:
                self._settle_left -= 1
                return Action(0.0, 0.0, 0.0, 0.0), True, 1, False
            self._settle_left = -1
            self._retreat_left = 2
            return Action(0.0, 0.0, 0.0, 1.0), True, 1, False  # close
        if self._retreat_left > 0:
            self._retreat_left -= 1
            back = self.phases[0].target  # pre-grasp point
            a = self._slow_servo(p, ProprioState(back.x, back.y, p.theta, 1.0), 1.0)
            if self._retreat_left == 0:
                self._advance()
            return a, True, 1, False
        self._advance()
        return self.act(obs)

    def _act_insert(self, obs: Observation, phase: _Phase):
        if self._released or not obs.env.object_held:
            # a release that missed under system noise dropped the object
            # nearby: replan the whole approach from the current scene
            self.begin(obs)
            return self.act(obs)
        p = obs.proprio
        w = phase.target
        near = (math.hypot(w.x - p.x, w.y - p.y) < 0.5 * self.cfg.insert_tol_pos
                and abs(angle_diff(w.theta, p.theta))
                < 0.5 * self.cfg.insert_tol_theta)
        if not near and self._settle_left == -1:
            return self._slow_servo(p, w, 1.0), True, 1, False
        if self._settle_left == -1:
            self._settle_left = int(self.rng.integers(1, 4))
        if self._settle_left > 0:
            # standstill at the slot before opening the gripper
            self._settle_left -= 1
            return Action(0.0, 0.0, 0.0, 1.0), True, 1, False
        self._released = True
        return Action(0.0, 0.0, 0.0, 0.0), True, 1, False  # release


def scripted_demo(cfg: EnvConfig, seed: int,
                  profile: NoiseProfile = NoiseProfile(),
                  demo_id: Optional[str] = None) -> Demonstration:
    """Generate one successful click-labeled demonstration.

    Retries with derived seeds up to 10 times before giving up; at zero
    system noise the script always succeeds on the first attempt.
    """
    last_error: Optional[Exception] = None
    for attempt in range(10):
        try:
            return _scripted_demo_once(cfg, seed, profile, attempt, demo_id)
        except GenerationError as e:
            last_error = e
    raise GenerationError(
        f"could not generate a successful demo for seed {seed}: {last_error}")


def _scripted_demo_once(cfg: EnvConfig, seed: int, profile: NoiseProfile,
                        attempt: int, demo_id: Optional[str]) -> Demonstration:
    env = PickPlaceEnv(cfg)
    obs = env.reset(seed)
    rng = np.random.default_rng([int(seed), int(profile.seed), attempt, 7177])
    script = ScriptedDemonstrator(cfg, profile, rng)
    script.begin(obs)

    steps: list[DemoStep] = []
    modes: list[int] = []
    boundaries: list[int] = []
    success = False
    for t in range(cfg.max_steps):
        action, click, mode, boundary = script.act(obs)
        steps.append(DemoStep(obs=obs, action=action, click=click))
        modes.append(mode)
        if boundary:
            boundaries.append(t)
        obs, done, info = env.step(action)
        if done:
            success = info["success"]
            break
    if not success:
        raise GenerationError("scripted episode did not succeed")
    # trailing no-op rows so the final dense step has a successor state
    for _ in range(2):
        steps.append(DemoStep(obs=obs, action=Action(0, 0, 0, 0), click=False))
        modes.append(0)

    widx = _script_waypoint_indices(modes, boundaries)
    demo = Demonstration(
        id=demo_id or f"demo_{seed:05d}",
        steps=tuple(steps),
        dt=cfg.dt,
        meta={
            "seed": int(seed),
            "attempt": attempt,
            "profile": {"sparse_jitter_sigma": profile.sparse_jitter_sigma,
                        "dense_slowdown": profile.dense_slowdown,
                        "seed": int(profile.seed)},
            "script_modes": [int(m) for m in modes],
            "script_waypoint_indices": [int(i) for i in widx],
        },
    )
    return demo


def _script_waypoint_indices(modes: list[int], boundaries: list[int]) -> list[int]:
    """Ground-truth waypoint indices from the script's own bookkeeping."""
    n = len(modes)
    anchors = sorted(set(boundaries)
                     | {t for t in range(n)
                        if modes[t] == 1 and (t == 0 or modes[t - 1] == 0)})
    widx = []
    for t in range(n):
        if modes[t] == 1:
            widx.append(min(t + 1, n - 1))
        else:
            nxt = [a for a in anchors if a > t]
            widx.append(nxt[0] if nxt else n - 1)
    return widx
