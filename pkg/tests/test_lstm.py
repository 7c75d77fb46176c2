import numpy as np
import pytest

import lstm
from errors import DimensionError, NoCacheError, NoDataError
from lstm import AdamState, DeepLstmModel, LstmLayerParams, LstmState, TrainConfig, adam_step, backprop, \
    cell_step, clip_gradients, forward, global_norm, mse_loss
from numerics import SeededRng


def test_cell_step_with_zero_weights():
    p = LstmLayerParams.initialize(2, 3, SeededRng(0))
    for gate in lstm.GATES:
        getattr(p, "W_" + gate)[:] = 0.0
        getattr(p, "b_" + gate)[:] = 0.0
    state = cell_step(np.array([1.0, -1.0]), LstmState.zeros(3), p)
    # f = i = o = 0.5, s~ = 0
    np.testing.assert_allclose(state.s, 0.0)
    np.testing.assert_allclose(state.h, 0.0)

    p.b_s[:] = 10.0
    state = cell_step(np.zeros(2), LstmState(h=np.zeros(3), s=np.ones(3)), p)
    expected_s = 0.5 * 1.0 + 0.5 * np.tanh(10.0)
    np.testing.assert_allclose(state.s, expected_s)
    np.testing.assert_allclose(state.h, 0.5 * np.tanh(expected_s))


def test_forward_matches_cell_steps(tiny_model):
    X = np.random.default_rng(0).standard_normal((2, 6))
    Y_hat, cache = forward(tiny_model, X)
    assert cache is None
    assert Y_hat.shape == (2, 6)

    states = [LstmState.zeros(3) for _ in tiny_model.layers]
    for t in range(6):
        x = X[:, t]
        for k, layer in enumerate(tiny_model.layers):
            states[k] = cell_step(x, states[k], layer)
            x = states[k].h
        np.testing.assert_allclose(Y_hat[:, t], tiny_model.head_W @ x + tiny_model.head_b, atol=1e-12)


def test_batched_forward_equals_single(tiny_model):
    X = np.random.default_rng(1).standard_normal((3, 2, 5))
    Y_batch, _ = forward(tiny_model, X)
    for b in range(3):
        np.testing.assert_allclose(Y_batch[b], forward(tiny_model, X[b])[0], atol=1e-12)


def test_forward_rejects_wrong_width(tiny_model):
    with pytest.raises(DimensionError, match="input width error"):
        forward(tiny_model, np.zeros((3, 5)))


def test_forget_bias_initialization():
    model = DeepLstmModel.create(19, SeededRng(0))
    assert len(model.layers) == 4 and model.hidden_size == 64
    assert model.dropout_rates == [0.1, 0.3, 0.3, 0.1]
    np.testing.assert_array_equal(model.layers[0].b_f, 1.0)
    np.testing.assert_array_equal(model.layers[0].b_i, 0.0)
    assert model.layers[0].W_f.shape == (64, 64 + 19)
    assert np.abs(model.layers[0].W_f).max() <= 1.0 / np.sqrt(83)


def _numeric_gradient(model, X, Y, name, eps=1e-5):
    param = model.parameters()[name]
    grad = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        saved = param[idx]
        param[idx] = saved + eps
        plus = mse_loss(forward(model, X)[0], Y)
        param[idx] = saved - eps
        minus = mse_loss(forward(model, X)[0], Y)
        param[idx] = saved
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def test_bptt_matches_finite_differences():
    model = DeepLstmModel.create(2, SeededRng(21), hidden_size=3, dropout_rates=[0.0, 0.0])
    gen = np.random.default_rng(4)
    X = gen.standard_normal((2, 5))
    Y = gen.standard_normal((2, 5))
    _, cache = forward(model, X, mode="train")
    grads = backprop(model, cache, Y)
    assert set(grads) == set(model.parameters())
    for name in model.parameters():
        numeric = _numeric_gradient(model, X, Y, name)
        scale = np.maximum(np.maximum(np.abs(grads[name]), np.abs(numeric)), 1e-6)
        error = np.max(np.abs(grads[name] - numeric) / scale)
        assert error < 1e-4, name


def test_bptt_on_a_batch_averages_every_entry():
    model = DeepLstmModel.create(2, SeededRng(8), hidden_size=3, dropout_rates=[0.0, 0.0])
    gen = np.random.default_rng(5)
    X = gen.standard_normal((3, 2, 4))
    Y = gen.standard_normal((3, 2, 4))
    _, cache = forward(model, X, mode="train")
    grads = backprop(model, cache, Y)
    numeric = _numeric_gradient(model, X, Y, "layer0.W_s")
    np.testing.assert_allclose(grads["layer0.W_s"], numeric, rtol=1e-4, atol=1e-9)


def test_backprop_needs_a_cache(tiny_model):
    with pytest.raises(NoCacheError, match="no cache"):
        backprop(tiny_model, None, np.zeros((2, 4)))


def test_dropout_is_inverted_and_only_in_train_mode():
    model = DeepLstmModel.create(2, SeededRng(2), hidden_size=8, dropout_rates=[0.5])
    X = np.random.default_rng(3).standard_normal((2, 10))
    eval_a, _ = forward(model, X)
    eval_b, _ = forward(model, X)
    np.testing.assert_array_equal(eval_a, eval_b)

    _, cache = forward(model, X, mode="train", rng=SeededRng(0))
    mask = cache.layers[0].mask
    assert set(np.unique(mask)) <= {0.0, 2.0}
    assert 0.3 < np.mean(mask == 0.0) < 0.7

    rng = SeededRng(6)
    masks = [forward(model, X, mode="train", rng=rng)[1].layers[0].mask for _ in range(1000)]
    assert np.size(masks) >= 10000
    assert np.mean(masks) == pytest.approx(1.0, abs=0.02)


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -4.0, 1e-3])}
    state = AdamState(lr=0.01)
    adam_step(params, grads, state)
    assert state.step_count == 1
    np.testing.assert_allclose(params["w"], [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01], atol=1e-6)


def test_adam_minimizes_a_quadratic():
    params = {"w": np.array([3.0, -5.0])}
    state = AdamState(lr=0.1)
    for _ in range(500):
        adam_step(params, {"w": 2.0 * params["w"]}, state)
    np.testing.assert_allclose(params["w"], 0.0, atol=5e-2)


def test_clip_gradients_scales_in_place():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_gradients(grads, 1.0) == pytest.approx(5.0)
    assert global_norm(grads) == pytest.approx(1.0)
    grads = {"a": np.array([0.3])}
    clip_gradients(grads, 1.0)
    assert grads["a"][0] == pytest.approx(0.3)


def _sine_pairs(n, length, seed):
    gen = np.random.default_rng(seed)
    pairs = []
    t = np.arange(length)
    for _ in range(n):
        phase = gen.uniform(0, 2 * np.pi)
        target = np.vstack([np.sin(0.2 * t + phase), np.cos(0.2 * t + phase)])
        X = np.vstack([target[0] + 0.1 * gen.standard_normal(length), target[1] * 0.5])
        pairs.append((X, target))
    return pairs


def test_training_lowers_the_loss():
    model = DeepLstmModel.create(2, SeededRng(0), hidden_size=6, dropout_rates=[0.0])
    config = TrainConfig(epochs=30, batch_size=8, patience=30, segment_length=30, batches_per_epoch=5,
                         learning_rate=0.03)
    best, history = lstm.train(model, _sine_pairs(4, 60, 0), _sine_pairs(2, 60, 1), config, SeededRng(1))
    assert min(history.val_losses) < 0.7 * history.initial_train_loss
    assert history.val_losses[history.best_epoch - 1] == min(history.val_losses)
    assert history.to_frame().shape == (len(history), 5)
    # the input model is left untouched
    np.testing.assert_array_equal(model.head_W, DeepLstmModel.create(2, SeededRng(0), hidden_size=6,
                                                                       dropout_rates=[0.0]).head_W)
    assert lstm.evaluate_loss(best, _sine_pairs(2, 60, 1)) == pytest.approx(min(history.val_losses))


def test_early_stopping_keeps_the_best_epoch(monkeypatch):
    losses = iter([1.0, 0.9, 0.5, 0.6, 0.7, 0.4])
    monkeypatch.setattr(lstm, "evaluate_loss", lambda model, pairs: 1.0 if pairs is train_set else next(losses))
    train_set = _sine_pairs(2, 20, 0)
    val_set = _sine_pairs(1, 20, 1)
    model = DeepLstmModel.create(2, SeededRng(0), hidden_size=2, dropout_rates=[0.0])
    config = TrainConfig(epochs=50, batch_size=2, patience=2, segment_length=10, batches_per_epoch=1)
    _, history = lstm.train(model, train_set, val_set, config, SeededRng(0))
    assert history.val_losses == [1.0, 0.9, 0.5, 0.6, 0.7]
    assert history.best_epoch == 3
    assert history.stopped_early


def test_training_runs_all_epochs_while_improving(monkeypatch):
    losses = iter([1.0, 0.9, 0.8, 0.7])
    train_set = _sine_pairs(1, 20, 0)
    monkeypatch.setattr(lstm, "evaluate_loss", lambda model, pairs: 1.0 if pairs is train_set else next(losses))
    model = DeepLstmModel.create(2, SeededRng(0), hidden_size=2, dropout_rates=[0.0])
    config = TrainConfig(epochs=3, batch_size=1, patience=1, segment_length=10, batches_per_epoch=1)
    _, history = lstm.train(model, train_set, _sine_pairs(1, 20, 1), config, SeededRng(0))
    assert len(history) == 3 and history.best_epoch == 3 and not history.stopped_early


def test_training_needs_data(tiny_model):
    with pytest.raises(NoDataError, match="no data"):
        lstm.train(tiny_model, [], [], TrainConfig(), SeededRng(0))


def test_training_is_deterministic():
    config = TrainConfig(epochs=2, batch_size=4, segment_length=10, batches_per_epoch=2)

    def run():
        model = DeepLstmModel.create(2, SeededRng(3), hidden_size=4, dropout_rates=[0.2, 0.1])
        best, _ = lstm.train(model, _sine_pairs(3, 30, 0), _sine_pairs(1, 30, 1), config, SeededRng(4))
        return best

    first, second = run(), run()
    for name, value in first.parameters().items():
        np.testing.assert_array_equal(value, second.parameters()[name])


def test_predict_eog_is_the_eval_forward(tiny_model):
    X = np.random.default_rng(3).standard_normal((2, 8))
    estimate = lstm.predict_eog(tiny_model, X)
    assert estimate.shape == (2, 8)
    np.testing.assert_array_equal(estimate, forward(tiny_model, X)[0])
    np.testing.assert_array_equal(estimate, lstm.predict_eog(tiny_model, X))


def test_mse_loss_examples():
    Y = np.random.default_rng(0).standard_normal((2, 7))
    assert mse_loss(Y, Y) == 0.0
    assert mse_loss(np.full((2, 5), 3.0), np.zeros((2, 5))) == pytest.approx(9.0)
    assert mse_loss(np.array([[1.0, 2.0]]), np.zeros((1, 2))) == pytest.approx(2.5)
    with pytest.raises(DimensionError):
        mse_loss(np.zeros((2, 3)), np.zeros((2, 4)))


def test_zero_head_outputs_the_bias(tiny_model):
    tiny_model.head_W[:] = 0.0
    tiny_model.head_b[:] = [0.3, -0.7]
    Y_hat, _ = forward(tiny_model, np.random.default_rng(1).standard_normal((2, 9)))
    np.testing.assert_array_equal(Y_hat, np.broadcast_to([[0.3], [-0.7]], (2, 9)))


def test_train_mode_without_dropout_equals_eval(tiny_model):
    X = np.random.default_rng(2).standard_normal((2, 12))
    train_out, cache = forward(tiny_model, X, mode="train")
    assert cache is not None
    np.testing.assert_array_equal(train_out, forward(tiny_model, X)[0])


@pytest.mark.parametrize("length", [100, 6000])
def test_predict_eog_on_a_full_montage(length):
    model = DeepLstmModel.create(19, SeededRng(9), hidden_size=4, dropout_rates=[0.1, 0.1])
    estimate = lstm.predict_eog(model, np.random.default_rng(length).standard_normal((19, length)))
    assert estimate.shape == (2, length)
    assert np.all(np.isfinite(estimate))


def test_adam_ignores_zero_gradients():
    params = {"w": np.array([0.5, -1.5])}
    state = AdamState()
    for _ in range(3):
        adam_step(params, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(params["w"], [0.5, -1.5])
    assert state.step_count == 3


def test_adam_two_steps_with_opposite_gradients():
    params = {"w": np.array([0.0])}
    state = AdamState(lr=0.001)
    adam_step(params, {"w": np.array([1.0])}, state)
    adam_step(params, {"w": np.array([-1.0])}, state)
    # -0.001 then +0.001 * 0.01 / 0.19
    assert params["w"][0] == pytest.approx(-0.00094737, abs=1e-8)


def test_saturated_forget_gate_keeps_the_cell():
    p = LstmLayerParams.initialize(2, 3, SeededRng(0))
    for gate in lstm.GATES:
        getattr(p, "W_" + gate)[:] = 0.0
    p.b_f[:] = 100.0
    p.b_i[:] = -100.0
    prev = LstmState(h=np.zeros(3), s=np.array([0.7, -2.0, 5.0]))
    state = cell_step(np.array([4.0, -4.0]), prev, p)
    np.testing.assert_allclose(state.s, prev.s, atol=1e-8)


def test_dropout_preserves_the_expected_output():
    model = DeepLstmModel.create(2, SeededRng(2), hidden_size=8, dropout_rates=[0.3])
    X = np.random.default_rng(4).standard_normal((2, 10))
    rng = SeededRng(10)
    h = forward(model, X, mode="train", rng=rng)[1].layers[0].h[1:]
    dropped = np.mean([h * forward(model, X, mode="train", rng=rng)[1].layers[0].mask for _ in range(500)], axis=0)
    assert h.size * 500 >= 10000
    assert np.sum(dropped * np.sign(h)) / np.sum(np.abs(h)) == pytest.approx(1.0, abs=0.02)
