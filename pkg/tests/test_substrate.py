import math

import numpy as np
import pytest

from labelbridge.substrate import (
    Adam,
    AdamHyper,
    AdamState,
    Encoder,
    EncoderConfig,
    GruParams,
    Linear,
    NonDifferentiableError,
    NonFiniteError,
    Rng,
    Tensor,
    cross_entropy,
    dropout,
    grad_check,
    gru_sequence,
    gru_step,
    no_grad,
    optimizer_step,
    sample_categorical,
    softmax,
)
from labelbridge.substrate import tensor as T
from labelbridge.substrate.tensor import _result


# softmax / cross entropy -------------------------------------------------


def test_softmax_uniform():
    np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-15)


def test_softmax_analytic():
    np.testing.assert_allclose(softmax([0.0, math.log(3)]), [0.25, 0.75], atol=1e-15)


def test_softmax_shift_invariance():
    np.testing.assert_allclose(softmax([5.0, 5.0, 6.0]), softmax([0.0, 0.0, 1.0]), rtol=0, atol=1e-9)


def test_softmax_large_logits_stable():
    p = softmax([1000.0, 1000.0])
    np.testing.assert_allclose(p, [0.5, 0.5])


@pytest.mark.parametrize("bad", [[], [0.0, np.nan], [np.inf, 0.0]])
def test_softmax_rejects(bad):
    with pytest.raises((ValueError, NonFiniteError)):
        softmax(bad)


def test_softmax_tensor_is_taped():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    y = softmax(x)
    T.tsum(T.mul(y, Tensor([1.0, 0.0, 0.0]))).backward()
    p = y.data
    np.testing.assert_allclose(x.grad, p[0] * (np.eye(3)[0] - p), atol=1e-15)


def test_cross_entropy_uniform_four():
    for target in range(4):
        assert abs(cross_entropy(np.zeros(4), target).item() - 1.386294) < 1e-6
        assert abs(cross_entropy(np.zeros(4), target).item() - math.log(4)) < 1e-12


def test_cross_entropy_analytic():
    logits = [0.0, math.log(3)]
    assert abs(cross_entropy(logits, 1).item() - 0.287682) < 1e-6
    assert abs(cross_entropy(logits, 1).item() + math.log(0.75)) < 1e-12
    assert abs(cross_entropy(logits, 0).item() - math.log(4)) < 1e-12


def test_cross_entropy_target_range():
    with pytest.raises(IndexError):
        cross_entropy([0.0, 1.0], 2)
    with pytest.raises(IndexError):
        cross_entropy([0.0, 1.0], -1)


def test_cross_entropy_gradient_is_p_minus_onehot():
    x = Tensor([0.3, -1.0, 2.0], requires_grad=True)
    cross_entropy(x, 2).backward()
    np.testing.assert_allclose(x.grad, T._softmax_np(x.data) - np.eye(3)[2], atol=1e-15)


def test_masked_cross_entropy_ignores_padding():
    logits = Tensor(np.zeros((2, 3, 4)))
    logits.data[1, 2] = [100.0, -100.0, 0, 0]  # padding position, would dominate if counted
    targets = np.array([[0, 1, 2], [3, 0, 1]])
    mask = np.array([[True, True, True], [True, True, False]])
    assert abs(T.masked_cross_entropy(logits, targets, mask).item() - math.log(4)) < 1e-12


# GRU ---------------------------------------------------------------------


def _zero_gru(n_in, n_hidden):
    p = GruParams(Rng(0), n_in, n_hidden)
    for t in p.parameters().values():
        t.data[...] = 0.0
    return p


def test_gru_zero_params_example():
    p = _zero_gru(3, 1)
    h = gru_step(p, Tensor([[0.3, -2.0, 7.0]]), Tensor([[0.8]]))
    np.testing.assert_allclose(h.data, [[0.4]], atol=1e-15)


def test_gru_zero_state_zero_params():
    p = _zero_gru(2, 3)
    h = gru_step(p, Tensor([[1.0, 2.0]]), Tensor(np.zeros((1, 3))))
    np.testing.assert_array_equal(h.data, np.zeros((1, 3)))


def test_gru_step_matches_equations(g):
    p = GruParams(Rng(3), 3, 4)
    x, h = g.normal(size=(2, 3)), g.normal(size=(2, 4))
    P = {k: v.data for k, v in p.parameters().items()}
    sig = lambda v: 1 / (1 + np.exp(-v))
    r = sig(x @ P["W_r"] + h @ P["U_r"] + P["b_r"])
    u = sig(x @ P["W_u"] + h @ P["U_u"] + P["b_u"])
    c = np.tanh(x @ P["W_c"] + (r * h) @ P["U_c"] + P["b_c"])
    np.testing.assert_allclose(gru_step(p, Tensor(x), Tensor(h)).data, u * h + (1 - u) * c, atol=1e-14)


def test_gru_sequence_matches_unrolled_steps(g, backend):
    p = GruParams(Rng(4), 3, 5)
    xs = g.normal(size=(2, 6, 3))
    h = Tensor(np.zeros((2, 5)))
    rows = []
    for t in range(6):
        h = gru_step(p, Tensor(xs[:, t]), h)
        rows.append(h.data)
    np.testing.assert_allclose(gru_sequence(p, Tensor(xs)).data, np.stack(rows, axis=1), atol=1e-13)


def test_gru_dimension_mismatch():
    p = GruParams(Rng(0), 3, 4)
    with pytest.raises(ValueError):
        gru_step(p, Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 4))))
    with pytest.raises(ValueError):
        gru_step(p, Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 5))))


def test_gru_random_params_gradcheck(g):
    p = GruParams(Rng(5), 3, 4)
    x, h = Tensor(g.normal(size=(2, 3)), requires_grad=True), Tensor(g.normal(size=(2, 4)), requires_grad=True)
    w = Tensor(g.normal(size=(2, 4)))
    fn = lambda: T.tsum(T.mul(gru_step(p, x, h), w))
    assert grad_check(fn, list(p.parameters().values()) + [x, h]) < 1e-4


# encoder -----------------------------------------------------------------


def _encoder(seed=0, **kw):
    cfg = dict(vocab_size=11, dim=8, heads=2, layers=2, max_len=7, ffn_mult=2)
    cfg.update(kw)
    return Encoder(Rng(seed), EncoderConfig(**cfg))


def test_encoder_single_token_shape():
    assert _encoder()(np.array([3])).shape == (1, 8)


def test_encoder_batched_shape():
    assert _encoder()(np.array([[3, 4, 5], [1, 2, 2]])).shape == (2, 3, 8)


def test_encoder_permutation_equivariance_without_positions(g):
    enc = _encoder(seed=2)
    enc.pos_emb.data[...] = 0.0
    ids = g.integers(0, 11, size=5)
    perm = g.permutation(5)
    out = enc(ids).data
    np.testing.assert_allclose(enc(ids[perm]).data, out[perm], atol=1e-13)


def test_encoder_padding_does_not_leak(g):
    enc = _encoder(seed=3)
    ids = np.array([[4, 5, 6, 1, 1]])
    mask = np.array([[True, True, True, False, False]])
    padded = enc(ids, mask).data[0, :3]
    ids2 = ids.copy()
    ids2[0, 3:] = [9, 10]
    np.testing.assert_allclose(enc(ids2, mask).data[0, :3], padded, atol=1e-14)
    np.testing.assert_allclose(enc(ids[:, :3]).data[0], padded, atol=1e-14)


def test_encoder_errors():
    enc = _encoder()
    with pytest.raises(ValueError):
        enc(np.arange(8) % 11)  # longer than max_len 7
    with pytest.raises(IndexError):
        enc(np.array([11]))


def test_encoder_mean_gradient_wrt_embedding_table():
    enc = _encoder(seed=4, layers=1)
    ids = np.array([1, 5, 5, 9])
    fn = lambda: T.mean(enc(ids))
    assert grad_check(fn, [enc.tok_emb]) < 1e-4


def test_encoder_deterministic():
    ids = np.array([[1, 2, 3]])
    np.testing.assert_array_equal(_encoder(seed=9)(ids).data, _encoder(seed=9)(ids).data)


# dropout -------------------------------------------------------------------


def test_dropout_rate_zero_identity():
    x = Tensor(np.arange(6.0))
    np.testing.assert_array_equal(dropout(x, 0.0, Rng(0), training=True).data, x.data)


def test_dropout_eval_identity():
    x = Tensor(np.arange(6.0))
    assert dropout(x, 0.85, Rng(0), training=False) is x


def test_dropout_statistics():
    out = dropout(Tensor(np.ones(10_000)), 0.85, Rng(7), training=True).data
    kept = (out != 0).mean()
    assert abs(kept - 0.15) <= 0.02
    assert abs(out.mean() - 1.0) <= 0.1
    np.testing.assert_allclose(out[out != 0], 1 / 0.15)


@pytest.mark.parametrize("rate", [1.0, -0.1, 1.5])
def test_dropout_rate_range(rate):
    with pytest.raises(ValueError):
        dropout(Tensor(np.ones(3)), rate, Rng(0), training=True)


# sampling --------------------------------------------------------------------


def test_sample_one_hot():
    rng = Rng(0)
    assert all(sample_categorical([0.0, 0.0, 1.0, 0.0], rng) == 2 for _ in range(500))


def test_sample_fair_coin_frequency():
    rng = Rng(11)
    draws = sample_categorical(np.tile([0.5, 0.5], (10_000, 1)), rng)
    assert abs(draws.mean() - 0.5) <= 0.02


def test_sample_determinism():
    a = [sample_categorical([0.2, 0.3, 0.5], Rng(5)) for _ in range(3)]
    r1, r2 = Rng(42), Rng(42)
    s1 = [sample_categorical([0.2, 0.3, 0.5], r1) for _ in range(100)]
    s2 = [sample_categorical([0.2, 0.3, 0.5], r2) for _ in range(100)]
    assert s1 == s2 and len(set(a)) == 1


@pytest.mark.parametrize("bad", [[0.0, 0.0], [], [0.5, 0.6], [-0.1, 1.1]])
def test_sample_rejects(bad):
    with pytest.raises(ValueError):
        sample_categorical(bad, Rng(0))


def test_sample_result_is_not_a_tensor():
    out = sample_categorical(np.array([[0.5, 0.5]]), Rng(0))
    assert isinstance(out, np.ndarray) and out.dtype.kind == "i"


def test_rng_state_roundtrip():
    r = Rng(3)
    r.random(17)
    clone = Rng.from_state(r.get_state())
    np.testing.assert_array_equal(r.random(5), clone.random(5))


def test_rng_spawn_independent_and_stable():
    a, b = Rng(1).spawn(2), Rng(1).spawn(2)
    np.testing.assert_array_equal(a.random(4), b.random(4))
    assert not np.array_equal(Rng(1).spawn(2).random(4), Rng(1).spawn(3).random(4))


# optimizer -------------------------------------------------------------------


def test_adam_zero_gradient_keeps_params():
    p = {"w": np.array([1.0, -2.0])}
    state = AdamState()
    optimizer_step(p, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])
    assert state.step == 1


def test_adam_first_step_is_lr_in_gradient_sign():
    for g_val in (3.7, -0.02):
        p = {"w": np.array([0.5])}
        optimizer_step(p, {"w": np.array([g_val])}, AdamState(), AdamHyper(lr=1e-3))
        # m_hat = g, v_hat = g^2  =>  step = lr * g / (|g| + eps)
        expected = 0.5 - 1e-3 * g_val / (abs(g_val) + 1e-8)
        assert abs(p["w"][0] - expected) < 1e-15
        assert abs(abs(p["w"][0] - 0.5) - 1e-3) < 1e-9


def test_adam_bitwise_deterministic(g):
    grads = [g.normal(size=(3, 2)) for _ in range(5)]

    def run():
        p, s = {"w": np.ones((3, 2))}, AdamState()
        for gr in grads:
            optimizer_step(p, {"w": gr}, s)
        return p["w"]

    assert run().tobytes() == run().tobytes()


def test_adam_errors():
    with pytest.raises(ValueError):
        optimizer_step({"w": np.ones(2)}, {"w": np.ones(3)}, AdamState())
    with pytest.raises(NonFiniteError):
        optimizer_step({"w": np.ones(2)}, {"w": np.array([1.0, np.nan])}, AdamState())
    with pytest.raises(KeyError):
        optimizer_step({"w": np.ones(2)}, {"v": np.ones(2)}, AdamState())


def test_adam_wrapper_minimises_quadratic():
    w = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = Adam({"w": w}, AdamHyper(lr=0.1))
    for _ in range(300):
        opt.zero_grad()
        T.tsum(T.mul(w, w)).backward()
        opt.step()
    assert np.abs(w.data).max() < 0.05


# gradient checker --------------------------------------------------------------


def test_gradcheck_linear_layer(g):
    lin = Linear(Rng(0), 4, 3)
    x = Tensor(g.normal(size=(5, 4)), requires_grad=True)
    w = Tensor(g.normal(size=(5, 3)))
    fn = lambda: T.tsum(T.mul(lin(x), w))
    assert grad_check(fn, [lin.W, lin.b, x]) < 1e-6


def test_gradcheck_constant_function_zero_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    fn = lambda: T.add(T.mul(x, Tensor(0.0)), Tensor(5.0)).sum()
    assert grad_check(fn, [x]) == 0.0


def _abs(x):
    out = _result(np.abs(x.data), (x,), None)

    def back(gr):
        return (gr * np.sign(x.data),)

    if out.requires_grad:
        out._backward = back
    return out


def test_gradcheck_reports_kink():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    with pytest.raises(NonDifferentiableError):
        grad_check(lambda: _abs(x).sum(), [x])


def test_gradcheck_detects_wrong_gradient():
    x = Tensor(np.array([0.7]), requires_grad=True)

    def wrong_square(t):
        out = _result(t.data ** 2, (t,), None)
        if out.requires_grad:
            out._backward = lambda gr: (gr * t.data,)  # missing factor 2
        return out

    assert grad_check(lambda: wrong_square(x).sum(), [x]) > 0.4


def test_gradcheck_high_curvature_is_not_a_kink():
    x = Tensor(np.array([0.01]), requires_grad=True)
    fn = lambda: T.exp(T.mul(x, Tensor(300.0))).sum()
    assert grad_check(fn, [x]) < 1e-4


def test_gradcheck_rejects_bad_input():
    with pytest.raises(ValueError):
        grad_check(lambda: None, [Tensor([np.nan], requires_grad=True)])
    with pytest.raises(ValueError):
        grad_check(lambda: None, [Tensor([1.0], requires_grad=True)], eps=0)


# tape behaviour ------------------------------------------------------------------


def test_no_grad_builds_no_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = T.mul(x, x)
    assert not y.requires_grad


def test_gradients_accumulate_over_shared_use():
    x = Tensor(np.array([2.0]), requires_grad=True)
    T.add(T.mul(x, x), x).sum().backward()
    np.testing.assert_allclose(x.grad, [5.0])


def test_tensor_grad_shape_matches_data(g):
    a = Tensor(g.normal(size=(3, 1)), requires_grad=True)
    b = Tensor(g.normal(size=(1, 4)), requires_grad=True)
    T.add(a, b).sum().backward()
    assert a.grad.shape == a.shape and b.grad.shape == b.shape
    np.testing.assert_allclose(a.grad, np.full((3, 1), 4.0))


def test_deep_chain_backward_does_not_recurse():
    x = Tensor(np.array([1.0]), requires_grad=True)
    y = x
    for _ in range(5000):
        y = T.add(y, Tensor(0.0))
    y.sum().backward()
    assert x.grad[0] == 1.0


def test_embedding_range_check():
    table = Tensor(np.zeros((3, 2)), requires_grad=True)
    with pytest.raises(IndexError):
        T.embedding(table, np.array([3]))
