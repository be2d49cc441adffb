"""Classifiers: shapes, gradients vs finite differences, Adam, dropout,
and the local training loop."""

import numpy as np
import pytest

from fedalign.errors import (
    DimensionMismatch,
    EmptyTrainSet,
    NonFiniteLoss,
    ShapeMismatch,
)
from fedalign.models import (
    HIDDEN,
    AdamState,
    LrModel,
    MlpModel,
    ModelShape,
    TrainConfig,
    WeightVector,
    adam_step,
    flatten,
    init_model,
    inference_loss,
    loss_and_grad,
    make_dropout_mask,
    predict,
    predict_batch,
    train_local,
    unflatten,
)


def make_batch(n=24, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    y = (rng.random(n) < 0.4).astype(np.float64)
    return X, y


# --------------------------------------------------------------------------
# shapes and flat layout


def test_param_counts():
    assert ModelShape("lr", 768).n_params == 769
    assert ModelShape("mlp", 768, 16).n_params == 12_321
    assert ModelShape("lr", 16).n_params == 17
    assert ModelShape("mlp", 16, 16).n_params == 16 * 16 + 16 + 16 + 1


def test_weight_vector_validates_length():
    with pytest.raises(ShapeMismatch):
        WeightVector(np.zeros(5), ModelShape("lr", 768))


def test_init_lr_is_zero():
    m = init_model("lr", 8, seed=0)
    assert np.array_equal(m.w, np.zeros(8))
    assert m.b == 0.0


def test_init_mlp_seeded_and_bounded():
    a = init_model("mlp", 8, seed=3)
    b = init_model("mlp", 8, seed=3)
    c = init_model("mlp", 8, seed=4)
    assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)
    assert not np.array_equal(a.W1, c.W1)
    assert np.all(np.abs(a.W1) <= 1.0 / np.sqrt(8))
    assert np.all(np.abs(a.W2) <= 1.0 / np.sqrt(HIDDEN))
    assert np.array_equal(a.b1, np.zeros(HIDDEN)) and a.b2 == 0.0


def test_init_unknown_kind():
    with pytest.raises(ShapeMismatch):
        init_model("tree", 8, seed=0)


def test_flatten_unflatten_bijection_lr():
    m = LrModel(w=np.arange(5, dtype=float), b=7.5, lam=0.01)
    flat = flatten(m)
    assert flat.values.tolist() == [0, 1, 2, 3, 4, 7.5]
    back = unflatten(m.shape, flat)
    assert np.array_equal(back.w, m.w) and back.b == m.b


def test_flatten_unflatten_bijection_mlp():
    m = init_model("mlp", 5, seed=1)
    flat = flatten(m)
    assert flat.values.shape == (5 * 16 + 33,)
    back = unflatten(m.shape, flat)
    assert np.array_equal(back.W1, m.W1)
    assert np.array_equal(back.b1, m.b1)
    assert np.array_equal(back.W2, m.W2)
    assert back.b2 == m.b2
    # layout is row-major W1, then b1, W2, b2
    assert flat.values[0] == m.W1[0, 0]
    assert flat.values[15] == m.W1[0, 15]
    assert flat.values[16] == m.W1[1, 0]
    assert flat.values[-1] == m.b2


def test_unflatten_rejects_wrong_length():
    with pytest.raises(ShapeMismatch):
        unflatten(ModelShape("mlp", 5, 16), np.zeros(10))


# --------------------------------------------------------------------------
# forward pass


def test_predict_matches_manual_sigmoid():
    m = LrModel(w=np.array([1.0, -2.0]), b=0.5)
    e = np.array([0.3, 0.1])
    z = 0.3 - 0.2 + 0.5
    assert predict(m, e) == pytest.approx(1.0 / (1.0 + np.exp(-z)), abs=1e-12)


def test_predict_batch_matches_predict():
    m = init_model("mlp", 6, seed=0)
    X, _ = make_batch(dim=6)
    probs = predict_batch(m, X)
    for i in range(4):
        assert probs[i] == pytest.approx(predict(m, X[i]), abs=1e-12)
    assert np.all((probs > 0) & (probs < 1))


def test_predict_dim_mismatch():
    m = init_model("lr", 6, seed=0)
    with pytest.raises(DimensionMismatch):
        predict(m, np.zeros(7))
    with pytest.raises(DimensionMismatch):
        predict_batch(m, np.zeros((3, 7)))


def test_sigmoid_stable_at_extreme_logits():
    m = LrModel(w=np.array([1000.0]), b=0.0)
    assert predict(m, np.array([1.0])) == pytest.approx(1.0)
    assert predict(m, np.array([-1.0])) == pytest.approx(0.0)
    X = np.array([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    loss, grad = loss_and_grad(m, X, y)
    assert np.isfinite(loss) and np.all(np.isfinite(grad.values))


# --------------------------------------------------------------------------
# gradients vs central finite differences


def _fd_check(model, X, y, mask=None, h=1e-5, rel_tol=1e-4):
    shape = model.shape
    flat = flatten(model).values
    _, grad = loss_and_grad(model, X, y, dropout_mask=mask)

    def loss_at(values):
        m = unflatten(shape, values, lam=getattr(model, "lam", 0.01))
        return loss_and_grad(m, X, y, dropout_mask=mask)[0]

    rng = np.random.default_rng(42)
    picks = rng.choice(flat.shape[0], size=min(25, flat.shape[0]), replace=False)
    for j in picks:
        up = flat.copy(); up[j] += h
        dn = flat.copy(); dn[j] -= h
        fd = (loss_at(up) - loss_at(dn)) / (2 * h)
        denom = max(abs(fd), abs(grad.values[j]), 1e-8)
        assert abs(fd - grad.values[j]) / denom < rel_tol, (
            f"coordinate {j}: analytic {grad.values[j]} vs fd {fd}"
        )


def test_lr_gradient_matches_finite_differences():
    X, y = make_batch(dim=6, seed=1)
    m = LrModel(w=np.random.default_rng(2).normal(size=6) * 0.5, b=0.3, lam=0.01)
    _fd_check(m, X, y)


def test_mlp_gradient_matches_finite_differences():
    X, y = make_batch(dim=6, seed=3)
    m = init_model("mlp", 6, seed=7)
    _fd_check(m, X, y)


def test_mlp_gradient_with_replayed_dropout_mask():
    X, y = make_batch(n=16, dim=5, seed=4)
    m = init_model("mlp", 5, seed=8)
    mask = make_dropout_mask(np.random.default_rng(9), 16, HIDDEN, 0.2)
    _fd_check(m, X, y, mask=mask)


def test_lr_l2_term_gradient():
    # With a zero embedding the data gradient on w vanishes; what remains is
    # exactly lam * w.
    m = LrModel(w=np.array([2.0, 0.0]), b=0.0, lam=0.01)
    X = np.zeros((4, 2))
    y = np.full(4, 0.5)
    loss, grad = loss_and_grad(m, X, y)
    assert np.allclose(grad.values[:2], 0.01 * m.w, atol=1e-12)
    assert loss == pytest.approx(np.log(2) + 0.5 * 0.01 * 4.0, abs=1e-12)


def test_loss_rejects_empty_batch():
    m = init_model("lr", 4, seed=0)
    with pytest.raises(EmptyTrainSet):
        loss_and_grad(m, np.zeros((0, 4)), np.zeros(0))


def test_non_finite_input_raises():
    m = init_model("lr", 2, seed=0)
    X = np.array([[np.inf, 0.0]])
    with pytest.raises(NonFiniteLoss):
        loss_and_grad(m, X, np.array([1.0]))


def test_inference_loss_excludes_regularizer_and_dropout():
    X, y = make_batch(dim=4, seed=5)
    m = LrModel(w=np.ones(4), b=0.0, lam=0.01)
    train_loss, _ = loss_and_grad(m, X, y)
    plain = inference_loss(m, X, y)
    assert train_loss == pytest.approx(plain + 0.5 * 0.01 * 4.0, abs=1e-12)


# --------------------------------------------------------------------------
# dropout


def test_dropout_mask_values_and_rate():
    rng = np.random.default_rng(0)
    mask = make_dropout_mask(rng, 4000, HIDDEN, 0.2)
    assert set(np.unique(mask)).issubset({0.0, 1.25})
    keep_rate = np.mean(mask > 0)
    assert abs(keep_rate - 0.8) < 0.02


def test_dropout_mask_preserves_expectation():
    rng = np.random.default_rng(1)
    h = np.abs(np.random.default_rng(2).normal(size=(6000, HIDDEN))) + 1.0
    mask = make_dropout_mask(rng, 6000, HIDDEN, 0.2)
    assert np.mean(h * mask) == pytest.approx(np.mean(h), rel=0.02)


def test_dropout_p_zero_is_identity():
    mask = make_dropout_mask(np.random.default_rng(0), 10, HIDDEN, 0.0)
    assert np.array_equal(mask, np.ones((10, HIDDEN)))


# --------------------------------------------------------------------------
# Adam


def test_adam_two_steps_frozen_scalar_case():
    # Constant gradient 0.3 from w=1.0: each bias-corrected step moves by
    # lr * g/(|g| + eps-ish) ~ 0.001; values frozen from exact arithmetic.
    cfg = TrainConfig()
    w = np.array([1.0])
    state = AdamState.zeros(1)
    g = np.array([0.3])
    w, state = adam_step(w, state, g, cfg)
    assert w[0] == pytest.approx(0.99900000003333333, abs=1e-12)
    w, state = adam_step(w, state, g, cfg)
    assert w[0] == pytest.approx(0.99800000006666666, abs=1e-12)
    assert state.t == 2


def test_adam_matches_manual_recurrence():
    cfg = TrainConfig(lr=0.01)
    rng = np.random.default_rng(0)
    w = rng.normal(size=7)
    state = AdamState.zeros(7)
    m = np.zeros(7)
    v = np.zeros(7)
    ref = w.copy()
    for t in range(1, 6):
        g = rng.normal(size=7)
        w, state = adam_step(w, state, g, cfg)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        ref = ref - cfg.lr * (m / (1 - cfg.beta1**t)) / (
            np.sqrt(v / (1 - cfg.beta2**t)) + cfg.eps
        )
        assert np.allclose(w, ref, atol=1e-15)


def test_adam_shape_mismatch():
    cfg = TrainConfig()
    with pytest.raises(DimensionMismatch):
        adam_step(np.zeros(3), AdamState.zeros(3), np.zeros(4), cfg)


# --------------------------------------------------------------------------
# local training loop


def separable_batch(n=60, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(np.float64)
    X = rng.normal(size=(n, dim)) + 3.0 * y[:, None]
    return X, y


def test_train_local_epochs_zero_returns_model_unchanged():
    m = init_model("lr", 4, seed=0)
    out, epochs, history = train_local(m, separable_batch(), TrainConfig(epochs=0))
    assert epochs == 0 and history == []
    assert np.array_equal(flatten(out).values, flatten(m).values)


def test_train_local_reduces_loss():
    X, y = separable_batch()
    m = init_model("lr", 4, seed=0)
    before = inference_loss(m, X, y)
    out, epochs, history = train_local(m, (X, y), TrainConfig(epochs=5, seed=1))
    assert epochs >= 1
    assert inference_loss(out, X, y) < before


def test_train_local_deterministic():
    X, y = separable_batch()
    cfg = TrainConfig(epochs=4, seed=9)
    m = init_model("mlp", 4, seed=2)
    a = train_local(m, (X, y), cfg)
    b = train_local(m, (X, y), cfg)
    assert np.array_equal(flatten(a[0]).values, flatten(b[0]).values)
    assert a[1] == b[1] and a[2] == b[2]


def test_train_local_returns_best_validation_checkpoint():
    X, y = separable_batch(n=80)
    cfg = TrainConfig(epochs=8, seed=3)
    out, epochs, history = train_local(init_model("lr", 4, seed=0), (X, y), cfg)
    val_losses = [v for (_, _, v) in history if v is not None]
    assert val_losses, "validation set should have been carved"
    # The returned model's validation loss equals the best checkpointed value.
    rng = np.random.default_rng(cfg.seed)
    from fedalign.models import _carve_validation

    val_pos = _carve_validation(len(y), y, cfg.val_fraction, rng)
    mask = np.zeros(len(y), dtype=bool)
    mask[val_pos] = True
    assert inference_loss(out, X[mask], y[mask]) == pytest.approx(min(val_losses), abs=1e-12)


def test_train_local_early_stops_when_validation_stalls():
    # Labels carry no signal, so validation loss cannot keep improving;
    # training must stop well short of the epoch budget.
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 4))
    y = (rng.random(80) < 0.5).astype(np.float64)
    cfg_stop = TrainConfig(epochs=200, patience=2, seed=3)
    _, epochs_stop, history = train_local(init_model("lr", 4, seed=0), (X, y), cfg_stop)
    assert epochs_stop < 200
    val_losses = [v for (_, _, v) in history if v is not None]
    # The last `patience` epochs were all non-improvements over the best.
    best = min(val_losses)
    assert all(v >= best for v in val_losses[-cfg_stop.patience:])


def test_train_local_history_shape():
    X, y = separable_batch()
    out, epochs, history = train_local(
        init_model("lr", 4, seed=0), (X, y), TrainConfig(epochs=3, patience=99, seed=0)
    )
    assert epochs == 3 and len(history) == 3
    for i, (epoch, train_loss, val_loss) in enumerate(history, start=1):
        assert epoch == i
        assert np.isfinite(train_loss)
        assert val_loss is None or np.isfinite(val_loss)


def test_train_local_no_validation_when_too_small():
    # 8 rows at val_fraction 0.1 -> round_half_up(0.8) = 1 val row, but the
    # stratified quota clamps to keep classes intact; with 4+4 rows one row
    # per class is carved. Use 3 rows to force an empty carve.
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.0, 1.0, 0.0])
    out, epochs, history = train_local(
        init_model("lr", 1, seed=0), (X, y), TrainConfig(epochs=2, val_fraction=0.1, seed=0)
    )
    assert epochs == 2
    assert all(v is None for (_, _, v) in history)


def test_train_local_empty_set_rejected():
    with pytest.raises(EmptyTrainSet):
        train_local(init_model("lr", 2, seed=0), (np.zeros((0, 2)), np.zeros(0)), TrainConfig())
