"""From-scratch binary classifiers: logistic regression and a one-hidden-layer
(16-unit ReLU) network, trained with Adam on binary cross-entropy.

Everything is float64 numpy; gradients are analytic (verified against finite
differences in the test suite). Parameters travel as flat vectors with a
fixed documented layout:

    lr  (dim d):   [w (d), b]                          -> d + 1 values
    mlp (dim d):   [W1 row-major (d*16), b1 (16), W2 (16), b2]  -> 16d + 33

L2 regularization (lambda, default 0.01) applies to the LR weight vector
only; the MLP regularizes with inverted dropout (p=0.2) on the hidden layer
during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTrainSet,
    NonFiniteLoss,
    ShapeMismatch,
)
from .util import round_half_up

HIDDEN = 16

KIND_LR = "lr"
KIND_MLP = "mlp"


@dataclass(frozen=True)
class ModelShape:
    kind: str
    dim: int
    hidden: int = 0

    @property
    def n_params(self) -> int:
        if self.kind == KIND_LR:
            return self.dim + 1
        if self.kind == KIND_MLP:
            return self.dim * self.hidden + self.hidden + self.hidden + 1
        raise ShapeMismatch(f"unknown model kind {self.kind!r}")


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray
    shape: ModelShape

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (self.shape.n_params,):
            raise ShapeMismatch(
                f"flat vector has {self.values.shape}, shape implies ({self.shape.n_params},)"
            )


@dataclass
class LrModel:
    w: np.ndarray
    b: float
    lam: float = 0.01

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    @property
    def shape(self) -> ModelShape:
        return ModelShape(KIND_LR, self.dim)


@dataclass
class MlpModel:
    W1: np.ndarray  # (dim, 16)
    b1: np.ndarray  # (16,)
    W2: np.ndarray  # (16,)
    b2: float
    dropout_p: float = 0.2

    @property
    def dim(self) -> int:
        return self.W1.shape[0]

    @property
    def shape(self) -> ModelShape:
        return ModelShape(KIND_MLP, self.dim, self.W1.shape[1])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    val_fraction: float = 0.1
    seed: int = 0
    lam: float = 0.01
    dropout_p: float = 0.2


def init_model(kind: str, dim: int, seed: int, cfg: TrainConfig | None = None):
    """LR starts at zero; MLP layers draw from uniform(-1/sqrt(fan_in), +)."""
    cfg = cfg or TrainConfig()
    if kind == KIND_LR:
        return LrModel(w=np.zeros(dim), b=0.0, lam=cfg.lam)
    if kind == KIND_MLP:
        rng = np.random.default_rng(seed)
        s1 = 1.0 / np.sqrt(dim)
        s2 = 1.0 / np.sqrt(HIDDEN)
        return MlpModel(
            W1=rng.uniform(-s1, s1, size=(dim, HIDDEN)),
            b1=np.zeros(HIDDEN),
            W2=rng.uniform(-s2, s2, size=HIDDEN),
            b2=0.0,
            dropout_p=cfg.dropout_p,
        )
    raise ShapeMismatch(f"unknown model kind {kind!r}")


# --------------------------------------------------------------------------
# flat parameter interop


def flatten(model) -> WeightVector:
    if isinstance(model, LrModel):
        return WeightVector(np.concatenate([model.w, [model.b]]), model.shape)
    if isinstance(model, MlpModel):
        return WeightVector(
            np.concatenate([model.W1.ravel(), model.b1, model.W2, [model.b2]]),
            model.shape,
        )
    raise ShapeMismatch(f"cannot flatten {type(model).__name__}")


def unflatten(shape: ModelShape, weights, *, lam: float = 0.01, dropout_p: float = 0.2):
    values = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, float)
    if values.shape != (shape.n_params,):
        raise ShapeMismatch(
            f"expected {shape.n_params} values for {shape.kind}, got {values.shape}"
        )
    if shape.kind == KIND_LR:
        return LrModel(w=values[:-1].copy(), b=float(values[-1]), lam=lam)
    if shape.kind == KIND_MLP:
        d, h = shape.dim, shape.hidden
        off = d * h
        return MlpModel(
            W1=values[:off].reshape(d, h).copy(),
            b1=values[off : off + h].copy(),
            W2=values[off + h : off + 2 * h].copy(),
            b2=float(values[-1]),
            dropout_p=dropout_p,
        )
    raise ShapeMismatch(f"unknown model kind {shape.kind!r}")


# --------------------------------------------------------------------------
# forward / loss / gradients


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce(logits, y):
    # max(z,0) - z*y + log(1+exp(-|z|)): stable for large |z|
    return np.mean(np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits))))


def _check_dim(model, X):
    if X.shape[-1] != model.dim:
        raise DimensionMismatch(
            f"input dim {X.shape[-1]} does not match model dim {model.dim}"
        )


def _logits(model, X, dropout_mask=None):
    if isinstance(model, LrModel):
        return X @ model.w + model.b
    z1 = X @ model.W1 + model.b1
    h = np.maximum(z1, 0.0)
    if dropout_mask is not None:
        h = h * dropout_mask
    return h @ model.W2 + model.b2


def predict(model, e: np.ndarray) -> float:
    """Probability of the positive class for one embedding (dropout off)."""
    e = np.asarray(e, dtype=np.float64)
    _check_dim(model, e)
    return float(_sigmoid(np.atleast_1d(_logits(model, e[None, :])))[0])


def predict_batch(model, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_dim(model, X)
    return _sigmoid(_logits(model, X))


def make_dropout_mask(rng, n: int, hidden: int, p: float) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or 1/(1-p), keep probability 1-p."""
    if p <= 0.0:
        return np.ones((n, hidden))
    return (rng.random((n, hidden)) >= p) / (1.0 - p)


def loss_and_grad(model, X, y, dropout_mask=None):
    """Mean BCE (+ (lam/2)*||w||^2 for LR) and the flat analytic gradient.

    dropout_mask: optional (n, 16) inverted-dropout mask for the MLP; pass
    None for inference-mode loss. The mask is supplied by the caller so the
    same mask can be replayed (gradient checking, reproducibility).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainSet("batch must be a nonempty 2-d array")
    _check_dim(model, X)
    n = X.shape[0]

    # Non-finite inputs surface as NonFiniteLoss below; silence the
    # intermediate numpy warnings they would otherwise emit.
    with np.errstate(invalid="ignore", over="ignore"):
        if isinstance(model, LrModel):
            z = X @ model.w + model.b
            loss = _bce(z, y) + 0.5 * model.lam * float(model.w @ model.w)
            r = (_sigmoid(z) - y) / n
            grad = np.concatenate([X.T @ r + model.lam * model.w, [np.sum(r)]])
        elif isinstance(model, MlpModel):
            z1 = X @ model.W1 + model.b1
            h = np.maximum(z1, 0.0)
            hd = h * dropout_mask if dropout_mask is not None else h
            z = hd @ model.W2 + model.b2
            loss = _bce(z, y)
            r = (_sigmoid(z) - y) / n
            gW2 = hd.T @ r
            gb2 = np.sum(r)
            dh = np.outer(r, model.W2)
            if dropout_mask is not None:
                dh = dh * dropout_mask
            dz1 = dh * (z1 > 0.0)
            gW1 = X.T @ dz1
            gb1 = dz1.sum(axis=0)
            grad = np.concatenate([gW1.ravel(), gb1, gW2, [gb2]])
        else:
            raise ShapeMismatch(
                f"cannot compute gradients for {type(model).__name__}"
            )

    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NonFiniteLoss(f"loss or gradient became non-finite (loss={loss})")
    return float(loss), WeightVector(grad, model.shape)


def inference_loss(model, X, y) -> float:
    """Mean BCE with dropout off and no regularization term (the quantity
    monitored for early stopping)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_dim(model, X)
    return float(_bce(_logits(model, X), y))


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


def adam_step(weights: np.ndarray, state: AdamState, grad: np.ndarray, cfg: TrainConfig):
    """One bias-corrected Adam update; returns (new_weights, new_state)."""
    if weights.shape != grad.shape or state.m.shape != grad.shape:
        raise DimensionMismatch("adam state/gradient shapes disagree")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_w = weights - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new_w, AdamState(m=m, v=v, t=t)


# --------------------------------------------------------------------------
# local training loop


def _carve_validation(n: int, y: np.ndarray, frac: float, rng):
    """Pick validation row positions (stratified); empty when impossible."""
    n_val = round_half_up(frac * n)
    if n_val <= 0 or n_val >= n:
        return np.array([], dtype=np.int64)
    by_class = {}
    for cls in np.unique(y):
        by_class[int(cls)] = np.flatnonzero(y == cls)
    quota = {}
    total = 0
    for cls, idx in sorted(by_class.items()):
        k = round_half_up(frac * len(idx))
        k = min(k, max(len(idx) - 1, 0))
        quota[cls] = k
        total += k
    if total == 0:
        return np.array([], dtype=np.int64)
    picks = []
    for cls, idx in sorted(by_class.items()):
        perm = idx[rng.permutation(len(idx))]
        picks.extend(perm[: quota[cls]])
    return np.sort(np.asarray(picks, dtype=np.int64))


def train_local(model, train_set, cfg: TrainConfig):
    """Adam + mini-batches + early stopping on held-out validation BCE.

    train_set: (X, y) arrays. A val_fraction slice (stratified, seeded) is
    held out; after each epoch the validation BCE is checkpointed and
    training stops once `patience` epochs pass without improvement. The
    weights returned are the best-validation checkpoint (final weights when
    no validation set could be carved). Returns (model, epochs_run, history)
    with history entries (epoch, mean train batch loss, val loss or None).
    """
    X, y = train_set
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainSet("training set is empty")
    _check_dim(model, X)
    if cfg.epochs == 0:
        return model, 0, []

    rng = np.random.default_rng(cfg.seed)
    n = X.shape[0]
    val_pos = _carve_validation(n, y, cfg.val_fraction, rng)
    val_mask = np.zeros(n, dtype=bool)
    val_mask[val_pos] = True
    Xtr, ytr = X[~val_mask], y[~val_mask]
    Xval, yval = X[val_mask], y[val_mask]
    has_val = Xval.shape[0] > 0
    if Xtr.shape[0] == 0:
        raise EmptyTrainSet("validation carve left no training rows")

    shape = model.shape
    is_mlp = isinstance(model, MlpModel)
    weights = flatten(model).values.copy()
    state = AdamState.zeros(weights.shape[0])

    best_weights = weights.copy()
    best_val = np.inf
    stale = 0
    history = []
    epochs_run = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(Xtr.shape[0])
        batch_losses = []
        for start in range(0, Xtr.shape[0], cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            current = unflatten(shape, weights, lam=cfg.lam, dropout_p=cfg.dropout_p)
            mask = (
                make_dropout_mask(rng, len(sel), shape.hidden, cfg.dropout_p)
                if is_mlp
                else None
            )
            loss, grad = loss_and_grad(current, Xtr[sel], ytr[sel], dropout_mask=mask)
            weights, state = adam_step(weights, state, grad.values, cfg)
            batch_losses.append(loss)
        epochs_run = epoch
        train_loss = float(np.mean(batch_losses))
        val_loss = None
        if has_val:
            current = unflatten(shape, weights, lam=cfg.lam, dropout_p=cfg.dropout_p)
            val_loss = inference_loss(current, Xval, yval)
            if val_loss < best_val:
                best_val = val_loss
                best_weights = weights.copy()
                stale = 0
            else:
                stale += 1
        history.append((epoch, train_loss, val_loss))
        if has_val and stale >= cfg.patience:
            break

    final = best_weights if has_val else weights
    return unflatten(shape, final, lam=cfg.lam, dropout_p=cfg.dropout_p), epochs_run, history
