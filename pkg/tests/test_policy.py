import math

import numpy as np
import pytest

from hybridil.errors import ValidationError
from hybridil.neural import grad_check
from hybridil.pipeline import generate_dataset, process_dataset
from hybridil.policy import (FEAT_DIM, Normalizer, PolicyBundle, TrainConfig,
                             WindowBatch, arrays_from_labeled, featurize,
                             hybrid_loss, mode_weight, policy_forward,
                             train, train_on_arrays)
from hybridil.sim import EnvConfig, NoiseProfile


def small_cfg(**kw):
    defaults = dict(hidden=8, sparse_widths=(8,), head_widths=(8,),
                    batch_size=4, window=5, steps=0, eval_every=0,
                    log_every=10)
    defaults.update(kw)
    return TrainConfig(**defaults)


def make_bundle(kind="hybrid", seed=0, zero=False, **kw):
    cfg = small_cfg(**kw)
    bundle = PolicyBundle(kind, cfg, seed, Normalizer.identity(FEAT_DIM),
                          Normalizer.identity(4))
    if zero:
        for t in bundle.store.tensors():
            t.data[...] = 0.0
    return bundle, cfg


def test_mode_weight_examples():
    assert mode_weight(0, 0.5) == 0.5
    assert mode_weight(1, 0.2) == pytest.approx(0.2)
    assert mode_weight(0, 0.2) == pytest.approx(0.8)


def test_mode_weight_complement_sums_to_one():
    for gamma in (0.0, 0.2, 0.5, 0.9, 1.0):
        for m in (0, 1):
            assert mode_weight(m, gamma) + mode_weight(1 - m, gamma) \
                == pytest.approx(1.0)


def one_step_batch(action_target, waypoint_target, mode, mode_target):
    return WindowBatch(
        feats=np.zeros((1, 1, FEAT_DIM)),
        actions=np.array([[action_target]]),
        waypoints=np.array([[waypoint_target]]),
        modes=np.array([[mode]], dtype=float),
        mode_targets=np.array([[mode_target]], dtype=float),
        mask=np.ones((1, 1)),
    )


def test_hybrid_loss_worked_example():
    bundle, cfg = make_bundle(zero=True, gamma=0.5, beta=0.01)
    batch = one_step_batch([0.1, 0, 0, 0], [0, 0, 0, 0], mode=1, mode_target=1)
    loss, parts = hybrid_loss(bundle, batch, cfg)
    expected = 0.5 * (0.01 / 4) + 0.01 * math.log(2)
    assert loss.data == pytest.approx(expected, rel=1e-12)
    assert parts["action"] == pytest.approx(0.5 * 0.01 / 4)
    assert parts["waypoint"] == 0.0
    assert parts["mode"] == pytest.approx(0.01 * math.log(2))


def test_hybrid_loss_perfect_fit_limit():
    bundle, cfg = make_bundle(zero=True, gamma=0.5, beta=0.01)
    # rig the mode head bias to +10: confident dense prediction
    bundle.store["mode.b1"].data[...] = 10.0
    batch = one_step_batch([0, 0, 0, 0], [0, 0, 0, 0], mode=1, mode_target=1)
    loss, _ = hybrid_loss(bundle, batch, cfg)
    assert loss.data < 1e-3


def test_hybrid_loss_gamma_half_is_mode_agnostic():
    rng = np.random.default_rng(0)
    bundle, _ = make_bundle(seed=3)
    batch = WindowBatch(
        feats=rng.normal(size=(3, 4, FEAT_DIM)),
        actions=rng.normal(size=(3, 4, 4)),
        waypoints=rng.normal(size=(3, 4, 4)),
        modes=np.ones((3, 4)),
        mode_targets=np.ones((3, 4)),
        mask=np.ones((3, 4)),
    )
    losses = {}
    for gamma in (0.0, 0.5, 1.0):
        cfg = small_cfg(gamma=gamma, beta=0.0)
        losses[gamma], _ = hybrid_loss(bundle, batch, cfg)
    mid = 0.5 * (losses[0.0].data + losses[1.0].data)
    assert losses[0.5].data == pytest.approx(float(mid), rel=1e-12)


def test_hybrid_loss_mode_flip_symmetry_at_gamma_half():
    rng = np.random.default_rng(4)
    bundle, cfg = make_bundle(seed=5, gamma=0.5, beta=0.0)
    feats = rng.normal(size=(2, 3, FEAT_DIM))
    actions = rng.normal(size=(2, 3, 4))
    waypoints = rng.normal(size=(2, 3, 4))
    modes = rng.integers(0, 2, size=(2, 3)).astype(float)
    base = WindowBatch(feats, actions, waypoints, modes, modes.copy(),
                       np.ones((2, 3)))
    flipped = WindowBatch(feats, actions, waypoints, 1 - modes,
                          1 - modes, np.ones((2, 3)))
    a, _ = hybrid_loss(bundle, base, cfg)
    b, _ = hybrid_loss(bundle, flipped, cfg)
    assert a.data == pytest.approx(float(b.data), rel=1e-12)


def test_bc_reduction_all_dense_gamma_zero():
    """All modes dense with gamma = 0: loss = action MSE + beta * BCE."""
    rng = np.random.default_rng(1)
    bundle, _ = make_bundle(seed=7)
    cfg = small_cfg(gamma=0.0, beta=0.01)
    feats = rng.normal(size=(2, 3, FEAT_DIM))
    actions = rng.normal(size=(2, 3, 4))
    batch = WindowBatch(feats, actions, rng.normal(size=(2, 3, 4)),
                        np.ones((2, 3)), np.ones((2, 3)), np.ones((2, 3)))
    loss, parts = hybrid_loss(bundle, batch, cfg)
    # reference action MSE via the bundle's own forward pass
    from hybridil.neural import Tensor
    h = Tensor(bundle.init_hidden(2))
    mse = 0.0
    for t in range(3):
        h = bundle.trunk.step(h, Tensor(feats[:, t]))
        pred = bundle.action_head(h).data
        mse += ((pred - actions[:, t]) ** 2).mean(axis=1).sum()
    mse /= 6.0
    assert parts["action"] == pytest.approx(mse, rel=1e-12)
    assert parts["waypoint"] == 0.0
    assert loss.data == pytest.approx(parts["action"] + parts["mode"], rel=1e-12)


def test_waypoint_theta_wrap_aware():
    bundle, cfg = make_bundle(zero=True, gamma=0.5, beta=0.0)
    # prediction is 0; target theta = pi - 0.1 vs equivalent -pi - ... branch
    near = one_step_batch([0, 0, 0, 0], [0, 0, 0.1, 0], mode=0, mode_target=0)
    far = one_step_batch([0, 0, 0, 0], [0, 0, 0.1 - 2 * math.pi, 0],
                         mode=0, mode_target=0)
    a, _ = hybrid_loss(bundle, near, cfg)
    b, _ = hybrid_loss(bundle, far, cfg)
    assert a.data == pytest.approx(float(b.data), rel=1e-9)


def test_hybrid_loss_grad_check():
    rng = np.random.default_rng(9)
    bundle, _ = make_bundle(seed=11, hidden=6, sparse_widths=(6,),
                            head_widths=(6,))
    cfg = small_cfg(hidden=6, sparse_widths=(6,), head_widths=(6,),
                    gamma=0.3, beta=0.05)
    batch = WindowBatch(
        feats=rng.normal(size=(2, 3, FEAT_DIM)),
        actions=rng.normal(size=(2, 3, 4)) * 0.3,
        waypoints=rng.normal(size=(2, 3, 4)),
        modes=rng.integers(0, 2, size=(2, 3)).astype(float),
        mode_targets=rng.uniform(0, 1, size=(2, 3)),
        mask=np.array([[1, 1, 1], [1, 1, 0.0]]),
    )

    def loss_fn():
        loss, _ = hybrid_loss(bundle, batch, cfg)
        return loss

    assert grad_check(loss_fn, bundle.store.tensors()) <= 1e-4


def test_policy_forward_window_split_associativity():
    bundle, _ = make_bundle(seed=13)
    rng = np.random.default_rng(3)
    obs = rng.uniform(0, 1, size=(10, 11))
    m_full, a_full, w_full, h_full = policy_forward(bundle, obs)
    m1, a1, w1, h1 = policy_forward(bundle, obs[:4])
    m2, a2, w2, h2 = policy_forward(bundle, obs[4:], h0=h1)
    assert np.array_equal(h_full, h2)
    assert np.array_equal(a_full, np.concatenate([a1, a2]))
    assert np.array_equal(m_full, np.concatenate([m1, m2]))
    assert np.array_equal(w_full, np.concatenate([w1, w2]))


def test_policy_forward_zero_net_constant_outputs():
    bundle, _ = make_bundle(zero=True)
    rng = np.random.default_rng(5)
    obs = rng.uniform(0, 1, size=(6, 11))
    modes, actions, waypoints, _ = policy_forward(bundle, obs)
    assert np.all(modes == modes[0])
    assert np.all(actions == actions[0])
    # the waypoint head emits constant (zero) offsets; decoded targets
    # therefore coincide with the current pose, with the absolute grip at 0
    assert np.allclose(waypoints[:, :3], obs[:, :3])
    assert np.allclose(waypoints[:, 3], 0.0)


def test_sparse_net_uses_only_current_observation():
    bundle, _ = make_bundle(seed=17)
    rng = np.random.default_rng(6)
    obs = rng.uniform(0, 1, size=(8, 11))
    _, _, w_base, _ = policy_forward(bundle, obs)
    perm = rng.permutation(7)  # shuffle the past, keep the last step
    shuffled = np.concatenate([obs[perm], obs[7:]])
    _, _, w_shuf, _ = policy_forward(bundle, shuffled)
    assert np.allclose(w_shuf[-1], w_base[-1])
    assert np.allclose(np.sort(w_shuf[:, 0]), np.sort(w_base[:, 0]))


def test_train_zero_steps_returns_initial_bundle():
    ds = generate_dataset(EnvConfig(), 2, base_seed=100)
    ds = process_dataset(ds)
    bundle, log = train(ds, small_cfg(steps=0))
    assert log.records == [] and log.evals == []
    assert bundle.kind == "hybrid"


def test_train_requires_labels():
    ds = generate_dataset(EnvConfig(), 1, base_seed=100)
    with pytest.raises(ValidationError):
        train(ds, small_cfg())


def test_train_deterministic():
    ds = process_dataset(generate_dataset(EnvConfig(), 2, base_seed=50))
    logs = []
    for _ in range(2):
        _, log = train(ds, small_cfg(steps=30, log_every=10, lr=1e-3))
        logs.append(log.records)
    assert logs[0] == logs[1]


def test_single_demo_overfit():
    ds = process_dataset(generate_dataset(
        EnvConfig(), 1, base_seed=200, profile=NoiseProfile()))
    cfg = small_cfg(steps=250, hidden=24, sparse_widths=(24, 24),
                    head_widths=(24,), batch_size=16, lr=5e-3, log_every=250)
    _, log = train(ds, cfg)
    first = log.records[0]["total"]
    last = log.records[-1]["total"]
    assert last < 0.1 * first
