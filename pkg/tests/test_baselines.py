import numpy as np
import pytest

from hybridil.baselines import _hindsight_waypoint_arrays, make_baseline
from hybridil.control import ControllerConfig, waypoint_action
from hybridil.errors import ValidationError
from hybridil.executor import ExecutorConfig, rollout
from hybridil.pipeline import generate_dataset, process_dataset
from hybridil.policy import TrainConfig, policy_forward
from hybridil.sim import EnvConfig, NoiseProfile, PickPlaceEnv
from hybridil.trajectory import ProprioState


def tiny_cfg(**kw):
    d = dict(hidden=8, sparse_widths=(8,), head_widths=(8,), steps=10,
             eval_every=0, batch_size=4, window=4)
    d.update(kw)
    return TrainConfig(**d)


@pytest.fixture(scope="module")
def dataset():
    return process_dataset(generate_dataset(EnvConfig(), 2, base_seed=30))


def test_unknown_variant(dataset):
    with pytest.raises(ValidationError):
        make_baseline("nope", dataset, tiny_cfg())


def test_bc_has_no_recurrence(dataset):
    bundle, _ = make_baseline("bc", dataset, tiny_cfg())
    rng = np.random.default_rng(0)
    obs = rng.uniform(0, 1, size=(6, 11))
    _, actions, _, _ = policy_forward(bundle, obs)
    perm = rng.permutation(6)
    _, shuffled, _, _ = policy_forward(bundle, obs[perm])
    assert np.allclose(shuffled, actions[perm])


def test_bc_rnn_has_only_action_head(dataset):
    bundle, _ = make_baseline("bc_rnn", dataset, tiny_cfg())
    modes, actions, waypoints, _ = policy_forward(
        bundle, np.random.default_rng(1).uniform(0, 1, (4, 11)))
    assert modes is None and waypoints is None
    assert actions.shape == (4, 4)


def test_no_relabel_differs_only_in_flag_and_actions():
    raw = generate_dataset(EnvConfig(), 2, base_seed=77,
                           profile=NoiseProfile(sparse_jitter_sigma=0.02))
    with_r = process_dataset(raw, relabel=True)
    without = process_dataset(raw, relabel=False)
    for a_steps, b_steps in zip(with_r.labeled, without.labeled):
        for a, b in zip(a_steps, b_steps):
            assert a.obs == b.obs
            assert a.waypoint == b.waypoint
            assert a.mode == b.mode
            assert not b.relabeled
            if a.mode == 1:
                assert a.action == b.action
                assert not a.relabeled
            else:
                assert a.relabeled


def test_wp_next_hindsight_targets(dataset):
    from hybridil.policy import offset_to_waypoint
    arrays = _hindsight_waypoint_arrays(dataset, 2)
    for demo, arr in zip(dataset.demos, arrays):
        proprio = np.stack([s.obs.proprio.to_array() for s in demo.steps])
        t = len(demo.steps)
        idx = np.minimum(np.arange(t) + 2, t - 1)
        decoded = offset_to_waypoint(arr.waypoints, proprio)
        assert np.allclose(decoded[:, [0, 1, 3]], proprio[idx][:, [0, 1, 3]],
                           atol=1e-12)
        dtheta = decoded[:, 2] - proprio[idx][:, 2]
        wrapped = dtheta - 2 * np.pi * np.round(dtheta / (2 * np.pi))
        assert np.allclose(wrapped, 0.0, atol=1e-12)


def test_wp_bundle_kind_and_meta(dataset):
    bundle, _ = make_baseline("wp_next1", dataset, tiny_cfg())
    assert bundle.kind == "waypoint"
    assert bundle.meta == {"variant": "wp_next1", "horizon": 1}
    bundle2, _ = make_baseline("wp_mode", dataset, tiny_cfg())
    assert bundle2.meta == {"variant": "wp_mode"}


class _WaypointKind:
    kind = "waypoint"


class PerfectNextStateSession:
    """Waypoint predictor that outputs the servo-target one step ahead."""

    bundle = _WaypointKind()  # rollout dispatches on session.bundle.kind

    def __init__(self, target):
        self.target = target

    def step(self, obs):
        p = obs.proprio
        a = waypoint_action(p, self.target, ControllerConfig())
        wp = np.array([p.x + a.dx, p.y + a.dy, p.theta + a.dtheta, a.grip_cmd])
        return None, None, wp


class PerfectNextStatePolicy:
    def __init__(self, target):
        self.target = target

    def session(self):
        return PerfectNextStateSession(self.target)


def test_wp_closed_loop_follows_straight_line():
    """A perfect next-state waypoint policy run closed loop reproduces the
    straight servo path up to controller saturation."""
    env = PickPlaceEnv(EnvConfig(max_steps=30))
    obs = env.reset(0)
    target = ProprioState(obs.proprio.x + 0.25, obs.proprio.y, 0.0, 0.0)
    policy = PerfectNextStatePolicy(target)
    result = rollout(policy, env, ExecutorConfig(waypoint_open_loop=False))
    xs = [o.proprio.x for o in result.observations]
    ys = [o.proprio.y for o in result.observations]
    assert np.allclose(ys, ys[0])
    diffs = np.diff(xs)[:5]
    assert np.allclose(diffs, 0.05, atol=1e-9)
