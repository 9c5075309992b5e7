"""Canonical data model for demonstrations and labeled datasets.

A dataset lives in a directory:

    manifest.json       {"schema_version": 1, "dt": 0.1, "demos": ["demo_0000", ...]}
    demos/<id>.json     demo document, one step per line
    labeled/<id>.json   optional processed labels, one step per line

Step keys follow ``obs.proprio{x,y,theta,grip}``, ``obs.env{object_pose,
slot_pose, object_held}``, ``action{dx,dy,dtheta,grip_cmd}``, ``click``.
Labeled steps carry ``waypoint``, ``mode``, ``relabeled`` and the processed
``action``. Floats are serialized at full precision so a save/load round
trip is bit-exact.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NotFoundError, PersistenceError, ValidationError

SCHEMA_VERSION = 1

# Default per-step action caps; environments may override via configuration.
DEFAULT_CAPS = (0.05, 0.05, 0.2)

# Slack for float round-off when checking caps and bounds.
_EPS = 1e-9

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the canonical interval (-pi, pi]."""
    return theta - TWO_PI * math.ceil((theta - math.pi) / TWO_PI)


def angle_diff(a: float, b: float) -> float:
    """Shortest signed angular difference a - b, in (-pi, pi]."""
    return wrap_angle(a - b)


@dataclass(frozen=True)
class ProprioState:
    """Planar end-effector state."""

    x: float      # meters in [0, 1]
    y: float      # meters in [0, 1]
    theta: float  # radians in (-pi, pi]
    grip: float   # 0 = open, 1 = closed

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.grip], dtype=float)

    @staticmethod
    def from_array(a: Sequence[float]) -> "ProprioState":
        return ProprioState(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class EnvState:
    """Object and slot poses plus the grasp latch."""

    object_pose: tuple[float, float, float]  # (x, y, theta)
    slot_pose: tuple[float, float, float]
    object_held: bool

    def to_array(self) -> np.ndarray:
        return np.array(
            [*self.object_pose, *self.slot_pose, float(self.object_held)],
            dtype=float,
        )


@dataclass(frozen=True)
class Observation:
    """Full observation: proprioception plus environment state."""

    proprio: ProprioState
    env: EnvState

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.proprio.to_array(), self.env.to_array()])


OBS_DIM = 11
ACTION_DIM = 4
PROPRIO_DIM = 4


@dataclass(frozen=True)
class Action:
    """Per-step delta command with an absolute gripper target."""

    dx: float
    dy: float
    dtheta: float
    grip_cmd: float  # absolute, in [0, 1]

    def to_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dtheta, self.grip_cmd], dtype=float)

    @staticmethod
    def from_array(a: Sequence[float]) -> "Action":
        return Action(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


ZERO_ACTION = Action(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DemoStep:
    obs: Observation
    action: Action
    click: bool


@dataclass(frozen=True)
class Demonstration:
    """Fixed-rate recording of one episode, with raw click annotations."""

    id: str
    steps: tuple[DemoStep, ...]
    dt: float = 0.1
    meta: dict = field(default_factory=dict, compare=True)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def clicks(self) -> list[bool]:
        return [s.click for s in self.steps]

    @property
    def proprios(self) -> list[ProprioState]:
        return [s.obs.proprio for s in self.steps]

    def obs_array(self) -> np.ndarray:
        return np.stack([s.obs.to_array() for s in self.steps])

    def action_array(self) -> np.ndarray:
        return np.stack([s.action.to_array() for s in self.steps])

    def with_clicks(self, clicks: Sequence[bool]) -> "Demonstration":
        if len(clicks) != len(self.steps):
            raise ValidationError(
                f"demo {self.id}: expected {len(self.steps)} clicks, got {len(clicks)}"
            )
        steps = tuple(
            replace(s, click=bool(c)) for s, c in zip(self.steps, clicks)
        )
        return replace(self, steps=steps)


@dataclass(frozen=True)
class LabeledStep:
    """One processed training tuple (observation, action, waypoint, mode)."""

    obs: Observation
    action: Action
    waypoint: ProprioState
    mode: int  # 0 = sparse, 1 = dense
    relabeled: bool


@dataclass
class Dataset:
    """Demonstrations plus optional per-demo labeled steps, index aligned."""

    demos: list[Demonstration]
    labeled: Optional[list[tuple[LabeledStep, ...]]] = None
    schema_version: int = SCHEMA_VERSION

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema_version == other.schema_version
            and self.demos == other.demos
            and self.labeled == other.labeled
        )

    def demo_by_id(self, demo_id: str) -> Demonstration:
        for d in self.demos:
            if d.id == demo_id:
                return d
        raise NotFoundError(f"no demo with id {demo_id!r}")


@dataclass(frozen=True)
class Violation:
    """A single invariant violation found by validate_demo."""

    step: Optional[int]  # None for demo-level rules
    field: str
    rule: str


def _check_range(violations, step, name, value, lo, hi, rule):
    if not (lo - _EPS <= value <= hi + _EPS):
        violations.append(Violation(step, name, rule))


def validate_demo(
    demo: Demonstration, caps: tuple[float, float, float] = DEFAULT_CAPS
) -> list[Violation]:
    """Check every type invariant; returns an empty list iff the demo is valid."""
    v: list[Violation] = []
    if len(demo.steps) < 2:
        v.append(Violation(None, "steps", "length >= 2"))
    if not demo.dt > 0:
        v.append(Violation(None, "dt", "dt > 0"))
    cap_dx, cap_dy, cap_dth = caps
    for t, s in enumerate(demo.steps):
        p = s.obs.proprio
        _check_range(v, t, "x", p.x, 0.0, 1.0, "workspace bounds")
        _check_range(v, t, "y", p.y, 0.0, 1.0, "workspace bounds")
        if not (-math.pi - _EPS < p.theta <= math.pi + _EPS):
            v.append(Violation(t, "theta", "theta out of range (-pi, pi]"))
        _check_range(v, t, "grip", p.grip, 0.0, 1.0, "grip in [0, 1]")
        for name, pose in (("object_pose", s.obs.env.object_pose),
                           ("slot_pose", s.obs.env.slot_pose)):
            _check_range(v, t, name + ".x", pose[0], 0.0, 1.0, "workspace bounds")
            _check_range(v, t, name + ".y", pose[1], 0.0, 1.0, "workspace bounds")
            if not (-math.pi - _EPS < pose[2] <= math.pi + _EPS):
                v.append(Violation(t, name + ".theta", "theta out of range (-pi, pi]"))
        if s.obs.env.object_held:
            ox, oy, oth = s.obs.env.object_pose
            if (abs(ox - p.x) > 1e-9 or abs(oy - p.y) > 1e-9
                    or abs(angle_diff(oth, p.theta)) > 1e-9):
                v.append(Violation(t, "object_pose", "held object tracks gripper"))
        a = s.action
        if abs(a.dx) > cap_dx + _EPS:
            v.append(Violation(t, "dx", "cap"))
        if abs(a.dy) > cap_dy + _EPS:
            v.append(Violation(t, "dy", "cap"))
        if abs(a.dtheta) > cap_dth + _EPS:
            v.append(Violation(t, "dtheta", "cap"))
        _check_range(v, t, "grip_cmd", a.grip_cmd, 0.0, 1.0, "grip_cmd in [0, 1]")
    return v


# ---------------------------------------------------------------------------
# JSON encoding


def _proprio_dict(p: ProprioState) -> dict:
    return {"x": p.x, "y": p.y, "theta": p.theta, "grip": p.grip}


def _pose_dict(pose: tuple[float, float, float]) -> dict:
    return {"x": pose[0], "y": pose[1], "theta": pose[2]}


def _step_dict(s: DemoStep) -> dict:
    return {
        "obs": {
            "proprio": _proprio_dict(s.obs.proprio),
            "env": {
                "object_pose": _pose_dict(s.obs.env.object_pose),
                "slot_pose": _pose_dict(s.obs.env.slot_pose),
                "object_held": s.obs.env.object_held,
            },
        },
        "action": {
            "dx": s.action.dx,
            "dy": s.action.dy,
            "dtheta": s.action.dtheta,
            "grip_cmd": s.action.grip_cmd,
        },
        "click": s.click,
    }


def _parse_proprio(d: dict) -> ProprioState:
    return ProprioState(d["x"], d["y"], d["theta"], d["grip"])


def _parse_pose(d: dict) -> tuple[float, float, float]:
    return (d["x"], d["y"], d["theta"])


def _parse_step(d: dict) -> DemoStep:
    env = d["obs"]["env"]
    a = d["action"]
    return DemoStep(
        obs=Observation(
            proprio=_parse_proprio(d["obs"]["proprio"]),
            env=EnvState(
                object_pose=_parse_pose(env["object_pose"]),
                slot_pose=_parse_pose(env["slot_pose"]),
                object_held=bool(env["object_held"]),
            ),
        ),
        action=Action(a["dx"], a["dy"], a["dtheta"], a["grip_cmd"]),
        click=bool(d["click"]),
    )


def _labeled_dict(ls: LabeledStep) -> dict:
    return {
        "waypoint": _proprio_dict(ls.waypoint),
        "mode": int(ls.mode),
        "relabeled": ls.relabeled,
        "action": {
            "dx": ls.action.dx,
            "dy": ls.action.dy,
            "dtheta": ls.action.dtheta,
            "grip_cmd": ls.action.grip_cmd,
        },
    }


def _parse_labeled(d: dict, obs: Observation) -> LabeledStep:
    a = d["action"]
    return LabeledStep(
        obs=obs,
        action=Action(a["dx"], a["dy"], a["dtheta"], a["grip_cmd"]),
        waypoint=_parse_proprio(d["waypoint"]),
        mode=int(d["mode"]),
        relabeled=bool(d["relabeled"]),
    )


def _write_doc(path: str, header: dict, steps: Iterable[dict]) -> None:
    """Write a demo-style document with one step per line (diffable)."""
    lines = ["{"]
    for key, value in header.items():
        lines.append(f'"{key}": {json.dumps(value)},')
    lines.append('"steps": [')
    step_lines = [json.dumps(s) for s in steps]
    lines.append(",\n".join(step_lines))
    lines.append("]")
    lines.append("}")
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def save_dataset(dataset: Dataset, path: str) -> None:
    """Persist a dataset into ``path`` using the documented directory layout."""
    for demo in dataset.demos:
        violations = validate_demo(demo)
        if violations:
            first = violations[0]
            raise ValidationError(
                f"demo {demo.id}: step {first.step}: {first.field}: {first.rule}"
            )
    if dataset.labeled is not None:
        if len(dataset.labeled) != len(dataset.demos):
            raise ValidationError("labeled block not index-aligned with demos")
        for demo, steps in zip(dataset.demos, dataset.labeled):
            if len(steps) != len(demo.steps):
                raise ValidationError(
                    f"demo {demo.id}: labeled length {len(steps)} != {len(demo.steps)}"
                )
    try:
        os.makedirs(os.path.join(path, "demos"), exist_ok=True)
        dt = dataset.demos[0].dt if dataset.demos else 0.1
        for demo in dataset.demos:
            _write_doc(
                os.path.join(path, "demos", f"{demo.id}.json"),
                {"id": demo.id, "dt": demo.dt, "meta": demo.meta},
                (_step_dict(s) for s in demo.steps),
            )
        if dataset.labeled is not None:
            os.makedirs(os.path.join(path, "labeled"), exist_ok=True)
            for demo, steps in zip(dataset.demos, dataset.labeled):
                _write_doc(
                    os.path.join(path, "labeled", f"{demo.id}.json"),
                    {"id": demo.id},
                    (_labeled_dict(ls) for ls in steps),
                )
        manifest = {
            "schema_version": dataset.schema_version,
            "dt": dt,
            "demos": [d.id for d in dataset.demos],
        }
        tmp = os.path.join(path, "manifest.json.tmp")
        with open(tmp, "w") as f:
            json.dump(manifest, f, indent=1)
            f.write("\n")
        os.replace(tmp, os.path.join(path, "manifest.json"))
    except OSError as e:
        raise PersistenceError(f"failed to write dataset at {path}: {e}") from e


def _load_doc(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise NotFoundError(f"missing file: {path}") from e
    except json.JSONDecodeError as e:
        raise PersistenceError(f"malformed JSON in {path}: {e}") from e


def load_dataset(path: str) -> Dataset:
    """Load and fully validate a dataset directory written by save_dataset."""
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        raise NotFoundError(f"missing manifest: {manifest_path}")
    manifest = _load_doc(manifest_path)
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version}")
    demos: list[Demonstration] = []
    labeled: list[tuple[LabeledStep, ...]] = []
    any_labeled = False
    for demo_id in manifest["demos"]:
        doc = _load_doc(os.path.join(path, "demos", f"{demo_id}.json"))
        demo = Demonstration(
            id=doc["id"],
            dt=doc["dt"],
            meta=doc.get("meta", {}),
            steps=tuple(_parse_step(s) for s in doc["steps"]),
        )
        violations = validate_demo(demo)
        if violations:
            first = violations[0]
            raise ValidationError(
                f"demo {demo.id}: step {first.step}: {first.field}: {first.rule}"
            )
        demos.append(demo)
        label_path = os.path.join(path, "labeled", f"{demo_id}.json")
        if os.path.exists(label_path):
            ldoc = _load_doc(label_path)
            if len(ldoc["steps"]) != len(demo.steps):
                raise ValidationError(
                    f"demo {demo.id}: labeled length {len(ldoc['steps'])}"
                    f" != {len(demo.steps)}"
                )
            labeled.append(
                tuple(
                    _parse_labeled(d, step.obs)
                    for d, step in zip(ldoc["steps"], demo.steps)
                )
            )
            any_labeled = True
        else:
            labeled.append(tuple())
    if any_labeled:
        for demo, steps in zip(demos, labeled):
            if len(steps) != len(demo.steps):
                raise ValidationError(f"demo {demo.id}: missing labeled block")
    return Dataset(
        demos=demos,
        labeled=labeled if any_labeled else None,
        schema_version=version,
    )
