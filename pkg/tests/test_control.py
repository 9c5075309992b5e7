import math

import numpy as np
import pytest

from hybridil.control import (ControllerConfig, is_reached, timeout_steps,
                              waypoint_action)
from hybridil.errors import ValidationError
from hybridil.trajectory import ProprioState, wrap_angle


CFG = ControllerConfig()


def integrate(p: ProprioState, a) -> ProprioState:
    return ProprioState(p.x + a.dx, p.y + a.dy,
                        wrap_angle(p.theta + a.dtheta), a.grip_cmd)


def test_straight_line_at_cap():
    a = waypoint_action(ProprioState(0, 0, 0, 0), ProprioState(1, 0, 0, 0), CFG)
    assert (a.dx, a.dy, a.dtheta, a.grip_cmd) == pytest.approx((0.05, 0, 0, 0))


def test_reached_gives_zero_action():
    p = ProprioState(0.3, 0.4, 0.5, 1.0)
    a = waypoint_action(p, p, CFG)
    assert (a.dx, a.dy, a.dtheta) == (0.0, 0.0, 0.0)
    assert a.grip_cmd == 1.0


def test_shortest_angle_through_wrap():
    p = ProprioState(0.5, 0.5, math.radians(170.0), 0)
    w = ProprioState(0.5, 0.5, math.radians(-170.0), 0)
    a = waypoint_action(p, w, CFG)
    # +20 degrees total through the wrap, clamped to +0.2 rad
    assert a.dtheta == pytest.approx(0.2)


def test_is_reached_tolerances():
    w = ProprioState(0.5, 0.5, 0.0, 0.0)
    assert is_reached(w, w, CFG)
    assert is_reached(ProprioState(0.509, 0.5, 0.04, 0.0), w, CFG)
    assert not is_reached(ProprioState(0.509, 0.5, 0.2, 0.0), w, CFG)
    assert not is_reached(ProprioState(0.511, 0.5, 0.0, 0.0), w, CFG)


def test_timeout_steps():
    assert timeout_steps(ControllerConfig()) == 50
    assert timeout_steps(ControllerConfig(timeout=1.0)) == 10
    assert timeout_steps(ControllerConfig(timeout=0.05)) == 0


def test_invalid_config():
    with pytest.raises(ValidationError):
        ControllerConfig(v_max=-1.0)
    with pytest.raises(ValidationError):
        ControllerConfig(v_max=10.0)  # v_max * dt above the action cap


def test_saturation_scale_consistency():
    p = ProprioState(0.0, 0.0, 0.0, 0.0)
    near = waypoint_action(p, ProprioState(0.4, 0.3, 0, 0), CFG)
    far = waypoint_action(p, ProprioState(0.8, 0.6, 0, 0), CFG)
    assert (near.dx, near.dy) == pytest.approx((far.dx, far.dy))
    assert math.hypot(near.dx, near.dy) == pytest.approx(CFG.pos_step)


def predicted_steps(pos_err, ang_err, cfg):
    """Independent closed-form step count until is_reached flips true."""
    def count(err, eps, step):
        if err < eps:
            return 0
        return math.floor((err - eps) / step) + 1
    return max(count(pos_err, cfg.eps_pos, cfg.pos_step),
               count(ang_err, cfg.eps_theta, cfg.ang_step))


def test_contraction_reaches_in_predicted_steps():
    rng = np.random.default_rng(42)
    for _ in range(300):
        p = ProprioState(*rng.uniform(0, 1, 2), rng.uniform(-math.pi, math.pi), 0.0)
        w = ProprioState(*rng.uniform(0, 1, 2), rng.uniform(-math.pi, math.pi), 1.0)
        expect = predicted_steps(math.hypot(w.x - p.x, w.y - p.y),
                                 abs(wrap_angle(w.theta - p.theta)), CFG)
        steps = 0
        cur = p
        while not is_reached(cur, w, CFG):
            before = math.hypot(w.x - cur.x, w.y - cur.y)
            a = waypoint_action(cur, w, CFG)
            cur = integrate(cur, a)
            after = math.hypot(w.x - cur.x, w.y - cur.y)
            # position error decreases by exactly min(error, step)
            assert after == pytest.approx(max(0.0, before - CFG.pos_step), abs=1e-12)
            steps += 1
            assert steps <= 200
        assert steps == expect


def test_caps_always_respected():
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = ProprioState(*rng.uniform(0, 1, 2), rng.uniform(-math.pi, math.pi), 0.0)
        w = ProprioState(*rng.uniform(0, 1, 2), rng.uniform(-math.pi, math.pi), 1.0)
        a = waypoint_action(p, w, CFG)
        assert math.hypot(a.dx, a.dy) <= CFG.pos_step + 1e-12
        assert abs(a.dtheta) <= CFG.ang_step + 1e-12
