# -*- coding: utf-8 -*-

import numpy as np
import pytest

from clicksim.numkernel import (AdamState, GruCellParams, ParamStore, ShapeError, adam_step, affine,
                                affine_backward, grad_check, gru_backward, gru_forward, sigmoid, softmax)


def _gru_store(rng, l_x=3, l_h=4, scale=0.5):
    store = ParamStore()
    for name, shape in GruCellParams.shapes(l_x, l_h).items():
        store.add(f"gru.{name}", rng.uniform(-scale, scale, size=shape))
    return store


def test_affine_matches_matrix_product():
    W = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    b = np.array([0.5, -0.5, 1.0])
    x = np.array([1.0, -1.0])
    np.testing.assert_allclose(affine(W, x, b), [-0.5, -1.5, 0.0])
    batch = np.stack([x, 2 * x])
    assert affine(W, batch, b).shape == (2, 3)


def test_affine_rejects_nonconforming_shapes():
    with pytest.raises(ShapeError):
        affine(np.zeros((3, 2)), np.zeros(4), np.zeros(3))
    with pytest.raises(ShapeError):
        affine(np.zeros((3, 2)), np.zeros(2), np.zeros(2))


def test_affine_backward_against_finite_differences():
    rng = np.random.default_rng(3)
    W, x, b = rng.normal(size=(3, 4)), rng.normal(size=(2, 4)), rng.normal(size=3)
    dy = rng.normal(size=(2, 3))
    dx, dW, db = affine_backward(W, x, dy)
    step = 1e-6
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += step
            xm[i, j] -= step
            numeric = np.sum(dy * (affine(W, xp, b) - affine(W, xm, b))) / (2 * step)
            assert dx[i, j] == pytest.approx(numeric, rel=1e-6, abs=1e-8)
    np.testing.assert_allclose(db, dy.sum(axis=0))
    np.testing.assert_allclose(dW, dy.T @ x)


def test_sigmoid_and_softmax_are_stable_at_extremes():
    assert sigmoid(np.array([-1000.0]))[0] == 0.0
    assert sigmoid(np.array([1000.0]))[0] == 1.0
    np.testing.assert_allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])
    p = softmax(np.array([[1e4, -1e4, 0.0]]))
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p.sum(axis=-1), 1.0)


def test_zero_gru_halves_the_previous_state():
    p = GruCellParams.zeros(3, 4)
    h_prev = np.array([0.2, -0.4, 1.0, 0.0])
    h_new, _ = gru_forward(p, np.ones(3), h_prev)
    np.testing.assert_allclose(h_new, 0.5 * h_prev)


def test_gru_shape_mismatch_raises():
    p = GruCellParams.zeros(3, 4)
    with pytest.raises(ShapeError):
        gru_forward(p, np.ones(5), np.zeros(4))
    _, cache = gru_forward(p, np.ones(3), np.zeros(4))
    with pytest.raises(ShapeError):
        gru_backward(cache, np.ones(2))


def test_gru_params_reject_bad_shapes():
    shapes = GruCellParams.shapes(3, 4)
    arrays = {name: np.zeros(shape) for name, shape in shapes.items()}
    arrays["U_r"] = np.zeros((4, 3))
    with pytest.raises(ShapeError):
        GruCellParams(**arrays)


def test_gru_backward_matches_finite_differences():
    rng = np.random.default_rng(11)
    store = _gru_store(rng)
    x = rng.normal(size=(2, 3))
    h0 = rng.normal(size=(2, 4)) * 0.5
    target = rng.normal(size=(2, 4))

    def loss_fn():
        p = GruCellParams.from_store(store, "gru")
        h1, c1 = gru_forward(p, x, h0)
        h2, c2 = gru_forward(p, x[::-1], h1)
        loss = 0.5 * float(np.sum((h2 - target) ** 2))
        _, dh1, d2 = gru_backward(c2, h2 - target)
        _, _, d1 = gru_backward(c1, dh1)
        for name in d1:
            store.accumulate(f"gru.{name}", d1[name] + d2[name])
        return loss

    report = grad_check(loss_fn, store, n_probes=40, rng=np.random.default_rng(0))
    assert report.passed, report.worst()


def test_gru_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    p = GruCellParams.from_store(_gru_store(rng), "gru")
    x, h = rng.normal(size=3), rng.normal(size=4)
    dh_new = rng.normal(size=4)
    _, cache = gru_forward(p, x, h)
    dx, dh_prev, _ = gru_backward(cache, dh_new)
    step = 1e-6
    for j in range(3):
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        numeric = dh_new @ (gru_forward(p, xp, h)[0] - gru_forward(p, xm, h)[0]) / (2 * step)
        assert dx[j] == pytest.approx(numeric, rel=1e-5, abs=1e-9)
    for j in range(4):
        hp, hm = h.copy(), h.copy()
        hp[j] += step
        hm[j] -= step
        numeric = dh_new @ (gru_forward(p, x, hp)[0] - gru_forward(p, x, hm)[0]) / (2 * step)
        assert dh_prev[j] == pytest.approx(numeric, rel=1e-5, abs=1e-9)


def test_param_store_pins_padding_rows():
    store = ParamStore()
    store.add("emb", np.ones((3, 2)), pinned_rows=(0,))
    np.testing.assert_array_equal(store.value("emb")[0], [0.0, 0.0])
    store.accumulate_rows("emb", np.array([0, 1, 1]), np.ones((3, 2)))
    np.testing.assert_array_equal(store.grad("emb")[1], [2.0, 2.0])
    adam_step(AdamState.for_store(store), store, lr=0.1)
    np.testing.assert_array_equal(store.value("emb")[0], [0.0, 0.0])
    assert store.value("emb")[1, 0] < 1.0


def test_param_store_rejects_wrong_gradient_shape():
    store = ParamStore()
    store.add("w", np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        store.accumulate("w", np.zeros(3))


def test_load_state_dict_updates_views_in_place():
    store = ParamStore()
    view = store.add("w", np.zeros(3))
    store.load_state_dict({"w": np.array([1.0, 2.0, 3.0])})
    np.testing.assert_array_equal(view, [1.0, 2.0, 3.0])
    with pytest.raises(KeyError):
        store.load_state_dict({})


def test_adam_first_step_moves_by_learning_rate():
    store = ParamStore()
    store.add("w", np.array([1.0, -1.0]))
    store.accumulate("w", np.array([0.3, -2.0]))
    adam_step(AdamState.for_store(store), store, lr=0.01)
    np.testing.assert_allclose(store.value("w"), [0.99, -0.99], atol=1e-7)


def test_adam_with_zero_gradient_leaves_parameters():
    store = ParamStore()
    store.add("w", np.array([0.25, 0.5]))
    state = AdamState.for_store(store)
    for _ in range(3):
        adam_step(state, store, lr=0.1)
    np.testing.assert_array_equal(store.value("w"), [0.25, 0.5])
    assert state.t == 3


def test_adam_rejects_nonpositive_learning_rate():
    store = ParamStore()
    store.add("w", np.zeros(1))
    with pytest.raises(ValueError):
        adam_step(AdamState.for_store(store), store, lr=0.0)


def test_grad_check_flags_a_wrong_gradient():
    store = ParamStore()
    store.add("w", np.array([0.3, -0.7]))

    def wrong_loss():
        w = store.value("w")
        store.accumulate("w", 3.0 * w)
        return float(np.sum(w ** 2))

    report = grad_check(wrong_loss, store, n_probes=2)
    assert not report.passed
    assert report.max_rel_error > 0.1
