import math

import numpy as np
import pytest

from hybridil.trajectory import (Action, DemoStep, Demonstration, EnvState,
                                 Observation, ProprioState)


def make_proprio(x=0.5, y=0.5, theta=0.0, grip=0.0):
    return ProprioState(x, y, theta, grip)


def make_obs(x=0.5, y=0.5, theta=0.0, grip=0.0,
             obj=(0.2, 0.2, 0.0), slot=(0.8, 0.8, 0.0), held=False):
    return Observation(
        proprio=ProprioState(x, y, theta, grip),
        env=EnvState(object_pose=obj, slot_pose=slot, object_held=held),
    )


def make_demo(n=10, demo_id="demo_test", clicks=None, dt=0.1):
    """A straight-line demo along x with zero-ish actions at the end."""
    steps = []
    clicks = clicks or [False] * n
    for t in range(n):
        x = min(0.1 + 0.04 * t, 1.0)
        action = Action(0.04, 0.0, 0.0, 0.0) if t < n - 1 else Action(0, 0, 0, 0)
        steps.append(DemoStep(obs=make_obs(x=x), action=action,
                              click=bool(clicks[t])))
    return Demonstration(id=demo_id, steps=tuple(steps), dt=dt)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
