import math

import numpy as np
import pytest

from hybridil.errors import NumericError, ValidationError
from hybridil.neural import (Adam, AdamConfig, GRUCell, MLP, MLPConfig,
                             ParamStore, RecurrentConfig, Tensor,
                             binary_cross_entropy_logits, gmm_nll, grad_check,
                             load_checkpoint, save_checkpoint)


def build_mlp(in_dim, widths, out_dim, seed=0):
    store = ParamStore(seed)
    mlp = MLP(MLPConfig(in_dim, tuple(widths), out_dim), store, "mlp")
    return mlp, store


def test_mlp_zero_params_zero_output():
    mlp, store = build_mlp(3, [4], 2)
    for t in store.tensors():
        t.data[...] = 0.0
    out = mlp(np.array([1.0, -2.0, 3.0]))
    assert np.all(out.data == 0.0)


def test_mlp_identity_single_layer():
    mlp, store = build_mlp(3, [], 3)
    store["mlp.W0"].data[...] = np.eye(3)
    x = np.array([0.3, -0.7, 1.1])
    assert mlp(x).data[0] == pytest.approx(x)


def test_mlp_matches_reference_matmul():
    mlp, store = build_mlp(5, [8], 4, seed=3)
    x = np.random.default_rng(1).normal(size=(6, 5))
    w0 = store["mlp.W0"].data
    b0 = store["mlp.b0"].data
    w1 = store["mlp.W1"].data
    b1 = store["mlp.b1"].data
    ref = np.tanh(x @ w0 + b0) @ w1 + b1
    assert np.max(np.abs(mlp(x).data - ref)) < 1e-12


def test_mlp_shape_mismatch():
    mlp, _ = build_mlp(5, [8], 4)
    with pytest.raises(ValidationError):
        mlp(np.zeros(3))


def test_param_init_deterministic():
    _, s1 = build_mlp(7, [16, 16], 3, seed=42)
    _, s2 = build_mlp(7, [16, 16], 3, seed=42)
    for a, b in zip(s1.tensors(), s2.tensors()):
        assert np.array_equal(a.data, b.data)


def make_gru(in_dim=3, hidden=4, seed=0):
    store = ParamStore(seed)
    gru = GRUCell(RecurrentConfig(in_dim, hidden), store, "gru")
    return gru, store


def test_gru_zero_params_halves_hidden():
    gru, store = make_gru()
    for t in store.tensors():
        t.data[...] = 0.0
    h = np.array([[0.4, -0.2, 1.0, 0.0]])
    out = gru.step(h, np.zeros((1, 3)))
    assert out.data == pytest.approx(0.5 * h)


def test_gru_zero_state_zero_input_zero_bias():
    gru, store = make_gru(seed=2)
    store["gru.b"].data[...] = 0.0
    out = gru.step(np.zeros((1, 4)), np.zeros((1, 3)))
    assert out.data == pytest.approx(np.zeros((1, 4)))


def test_gru_chaining_matches_single_steps():
    gru, _ = make_gru(seed=5)
    xs = np.random.default_rng(8).normal(size=(6, 3))
    h = gru.init_state(1)
    singly = []
    for x in xs:
        h = gru.step(h, x[None, :])
        singly.append(h.data.copy())
    h2 = gru.init_state(1)
    for i, x in enumerate(xs):
        h2 = gru.step(h2, x[None, :])
        assert np.array_equal(h2.data, singly[i])


def gmm_head(logits, means, log_stds):
    """Pack mixture parameters the way the head emits them."""
    k = len(logits)
    means = np.asarray(means, dtype=float).reshape(k, -1)
    log_stds = np.asarray(log_stds, dtype=float).reshape(k, -1)
    return np.concatenate([np.asarray(logits, float),
                           means.reshape(-1), log_stds.reshape(-1)])


def test_gmm_nll_zero_residual():
    d = 4
    target = np.array([0.2, -0.1, 0.05, 0.4])
    head = gmm_head([0.0], target, np.zeros(d))
    nll = gmm_nll(Tensor(head), target, 1)
    assert nll.data[0] == pytest.approx(d / 2 * math.log(2 * math.pi))


def test_gmm_nll_small_residual():
    d = 4
    target = np.zeros(d)
    mu = np.array([0.1, 0, 0, 0])
    head = gmm_head([0.0], mu, np.zeros(d))
    nll = gmm_nll(Tensor(head), target, 1)
    assert nll.data[0] == pytest.approx(d / 2 * math.log(2 * math.pi) + 0.005)


def test_gmm_nll_identical_components_collapse():
    d = 4
    target = np.array([0.3, 0.1, -0.2, 0.0])
    mu = np.array([0.5, 0.0, 0.0, 0.2])
    one = gmm_nll(Tensor(gmm_head([0.7], mu, np.zeros(d))), target, 1)
    two = gmm_nll(Tensor(gmm_head([0.3, 0.3], np.stack([mu, mu]),
                                  np.zeros((2, d)))), target, 2)
    assert two.data[0] == pytest.approx(one.data[0])


def test_gmm_nll_permutation_invariant_and_bounded(rng):
    d, k = 3, 4
    target = rng.normal(size=d)
    logits = rng.normal(size=k)
    means = rng.normal(size=(k, d))
    stds = rng.normal(size=(k, d)) * 0.3
    base = gmm_nll(Tensor(gmm_head(logits, means, stds)), target, k).data[0]
    perm = rng.permutation(k)
    shuffled = gmm_nll(Tensor(gmm_head(logits[perm], means[perm], stds[perm])),
                       target, k).data[0]
    assert shuffled == pytest.approx(base)
    # mixture NLL can beat the best component by at most log K
    comps = [gmm_nll(Tensor(gmm_head([0.0], means[i], stds[i])), target, 1).data[0]
             for i in range(k)]
    assert base >= min(comps) - math.log(k) - 1e-9


def test_gmm_nll_rejects_non_finite():
    with pytest.raises(NumericError):
        gmm_nll(Tensor(np.full(9, np.nan)), np.zeros(4), 1)


def test_adam_first_step_magnitude():
    p = Tensor(np.zeros(5), requires_grad=True)
    opt = Adam([p], AdamConfig(lr=1e-3))
    p.grad = np.ones(5)
    opt.step()
    assert p.data == pytest.approx(-1e-3 * np.ones(5), rel=1e-6)


def test_adam_zero_grad_keeps_params():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = Adam([p], AdamConfig(lr=1e-2))
    p.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(p.data, np.array([1.0, 2.0]))


def test_adam_two_steps_match_hand_trace():
    cfg = AdamConfig(lr=0.1)
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p], cfg)
    g = 0.5
    # hand-rolled recurrence
    theta, m, v = 1.0, 0.0, 0.0
    for t in (1, 2):
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        theta -= cfg.lr * m_hat / (math.sqrt(v_hat) + cfg.eps)
        p.grad = np.array([g])
        opt.step()
    assert p.data[0] == pytest.approx(theta, rel=1e-12)


def test_grad_check_linear_loss():
    p = Tensor(np.array([0.3, -0.2, 0.7]), requires_grad=True)

    def loss():
        return (p * np.array([2.0, -1.0, 0.5])).sum()

    assert grad_check(loss, [p]) <= 1e-9


def test_grad_check_mlp_mse():
    mlp, store = build_mlp(4, [8, 8], 3, seed=9)
    x = np.random.default_rng(3).normal(size=(5, 4))
    y = np.random.default_rng(4).normal(size=(5, 3))

    def loss():
        diff = mlp(x) - y
        return (diff * diff).mean()

    assert grad_check(loss, store.tensors()) <= 1e-4


def test_grad_check_gru_and_gmm():
    store = ParamStore(11)
    gru = GRUCell(RecurrentConfig(3, 5), store, "gru")
    head = MLP(MLPConfig(5, (6,), 2 * (1 + 2 * 2)), store, "head")
    xs = np.random.default_rng(12).normal(size=(4, 3))
    target = np.random.default_rng(13).normal(size=(1, 2))

    def loss():
        h = gru.init_state(1)
        for x in xs:
            h = gru.step(h, x[None, :])
        return gmm_nll(head(h), target, 2).mean()

    assert grad_check(loss, store.tensors()) <= 1e-4


def test_bce_logits_matches_manual():
    logit = Tensor(np.array([0.0, 2.0, -3.0]))
    target = np.array([1.0, 0.5, 0.0])
    out = binary_cross_entropy_logits(logit, target).data
    sig = 1 / (1 + np.exp(-logit.data))
    manual = -(target * np.log(sig) + (1 - target) * np.log(1 - sig))
    assert out == pytest.approx(manual)


def test_checkpoint_round_trip(tmp_path):
    _, store = build_mlp(3, [4], 2, seed=1)
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(path, store.snapshot(), {"kind": "mlp", "widths": [4]})
    arrays, config = load_checkpoint(path)
    assert config == {"kind": "mlp", "widths": [4]}
    for k, v in store.snapshot().items():
        assert np.array_equal(arrays[k], v)


def test_relu_mlp_forward_and_grad():
    store = ParamStore(21)
    mlp = MLP(MLPConfig(4, (8,), 3, activation="relu"), store, "rmlp")
    x = np.random.default_rng(5).normal(size=(6, 4))
    w0, b0 = store["rmlp.W0"].data, store["rmlp.b0"].data
    w1, b1 = store["rmlp.W1"].data, store["rmlp.b1"].data
    ref = np.maximum(x @ w0 + b0, 0.0) @ w1 + b1
    assert np.max(np.abs(mlp(x).data - ref)) < 1e-12
    y = np.random.default_rng(6).normal(size=(6, 3))

    def loss():
        diff = mlp(x) - y
        return (diff * diff).mean()

    assert grad_check(loss, store.tensors()) <= 1e-4
