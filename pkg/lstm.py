"""Deep LSTM regressor estimating VEOG/HEOG from normalized EEG.

The network is a stack of LSTM layers (default 4 x 64 units, dropout 0.1,
0.3, 0.3, 0.1 on each layer's output sequence) followed by a dense head with
two outputs per time step. Training minimizes the mean squared error over every
output entry with Adam, full-sequence backpropagation through time and early
stopping on a validation loss.

Every gate reads the concatenation ``[h_{t-1}, x_t]``; weight matrices are
``H x (H + D_in)`` with the recurrent block in the first H columns.

Arrays inside the network are time-major: ``(T, B, features)``.
"""
from dataclasses import dataclass, field
import copy
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from errors import DimensionError, NoCacheError, NoDataError
from numerics import SeededRng

logger = logging.getLogger(__name__)

HIDDEN_SIZE = 64
N_LAYERS = 4
DROPOUT_RATES = (0.1, 0.3, 0.3, 0.1)
N_OUTPUTS = 2
FORGET_BIAS = 1.0

GATES = ("f", "i", "s", "o")


@dataclass
class LstmLayerParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_s: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_s: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        shape = self.W_f.shape
        for gate in GATES:
            W = getattr(self, "W_" + gate)
            b = getattr(self, "b_" + gate)
            if W.shape != shape:
                raise DimensionError("dimension error: W_{} has shape {}, W_f has {}".format(gate, W.shape, shape))
            if b.shape != (shape[0],):
                raise DimensionError("dimension error: b_{} has shape {}, expected ({},)".format(
                    gate, b.shape, shape[0]))
        if shape[1] <= shape[0]:
            raise DimensionError("dimension error: weights must be H x (H + D_in), got {}".format(shape))

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def initialize(cls, input_size: int, hidden_size: int, rng: SeededRng) -> 'LstmLayerParams':
        """Uniform weights in ±1/sqrt(H + D_in), zero biases except the forget gate at +1."""
        bound = 1.0 / math.sqrt(hidden_size + input_size)
        weights = {}
        for gate in GATES:
            weights["W_" + gate] = rng.generator.uniform(-bound, bound, size=(hidden_size, hidden_size + input_size))
        biases = {"b_" + gate: np.zeros(hidden_size) for gate in GATES}
        biases["b_f"] += FORGET_BIAS
        return cls(**weights, **biases)

    def tensors(self) -> Dict[str, np.ndarray]:
        out = {"W_" + gate: getattr(self, "W_" + gate) for gate in GATES}
        out.update({"b_" + gate: getattr(self, "b_" + gate) for gate in GATES})
        return out

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """Gate weights stacked row-wise in f, i, s, o order, and the matching bias."""
        return (np.vstack([getattr(self, "W_" + gate) for gate in GATES]),
                np.concatenate([getattr(self, "b_" + gate) for gate in GATES]))


@dataclass
class LstmState:
    h: np.ndarray
    s: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> 'LstmState':
        return cls(h=np.zeros(hidden_size), s=np.zeros(hidden_size))


@dataclass
class DeepLstmModel:
    layers: List[LstmLayerParams]
    dropout_rates: List[float]
    head_W: np.ndarray
    head_b: np.ndarray

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("dimension error: a model needs at least one LSTM layer")
        self.dropout_rates = [float(r) for r in self.dropout_rates]
        if len(self.dropout_rates) != len(self.layers):
            raise DimensionError("dimension error: {} dropout rates for {} layers".format(
                len(self.dropout_rates), len(self.layers)))
        if any(not 0.0 <= r < 1.0 for r in self.dropout_rates):
            raise ValueError("dropout rates must lie in [0, 1), got {}".format(self.dropout_rates))
        for idx in range(1, len(self.layers)):
            if self.layers[idx].input_size != self.layers[idx - 1].hidden_size:
                raise DimensionError("dimension error: layer {} expects {} inputs, layer {} gives {}".format(
                    idx, self.layers[idx].input_size, idx - 1, self.layers[idx - 1].hidden_size))
        if self.head_W.shape[1] != self.layers[-1].hidden_size or self.head_b.shape != (self.head_W.shape[0],):
            raise DimensionError("dimension error: head {} / {} does not fit hidden size {}".format(
                self.head_W.shape, self.head_b.shape, self.layers[-1].hidden_size))

    @classmethod
    def create(cls, n_channels: int, rng: SeededRng, hidden_size: int = HIDDEN_SIZE,
               dropout_rates: Sequence[float] = DROPOUT_RATES, n_outputs: int = N_OUTPUTS) -> 'DeepLstmModel':
        """Randomly initialized model; one layer per entry of ``dropout_rates``."""
        layers = []
        input_size = n_channels
        for _ in dropout_rates:
            layers.append(LstmLayerParams.initialize(input_size, hidden_size, rng))
            input_size = hidden_size
        bound = 1.0 / math.sqrt(hidden_size)
        head_W = rng.generator.uniform(-bound, bound, size=(n_outputs, hidden_size))
        return cls(layers=layers, dropout_rates=list(dropout_rates), head_W=head_W, head_b=np.zeros(n_outputs))

    @property
    def n_channels(self) -> int:
        return self.layers[0].input_size

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def n_outputs(self) -> int:
        return self.head_W.shape[0]

    def parameters(self) -> Dict[str, np.ndarray]:
        """Every trainable tensor by name; the arrays are the model's own, so in-place updates stick."""
        params = {}
        for idx, layer in enumerate(self.layers):
            for name, tensor in layer.tensors().items():
                params["layer{}.{}".format(idx, name)] = tensor
        params["head.W"] = self.head_W
        params["head.b"] = self.head_b
        return params

    def copy(self) -> 'DeepLstmModel':
        return copy.deepcopy(self)


@dataclass
class _LayerCache:
    inputs: np.ndarray       # (T, B, D)
    h: np.ndarray            # (T + 1, B, H), h[0] = 0
    s: np.ndarray            # (T + 1, B, H), s[0] = 0
    gates: np.ndarray        # (T, B, 4H) activated f, i, s~, o
    tanh_s: np.ndarray       # (T, B, H)
    mask: Optional[np.ndarray]  # (T, B, H) inverted-dropout multipliers


@dataclass
class ForwardCache:
    layers: List[_LayerCache]
    head_inputs: np.ndarray  # (T, B, H) last layer output after dropout
    outputs: np.ndarray      # (T, B, n_outputs)
    batched: bool


def cell_step(x_t, prev: LstmState, p: LstmLayerParams) -> LstmState:
    """One LSTM time step on a single input vector."""
    x_t = np.asarray(x_t, dtype=np.float64).ravel()
    H = p.hidden_size
    if x_t.size != p.input_size or prev.h.shape != (H,) or prev.s.shape != (H,):
        raise DimensionError("dimension error: x_t has {} entries (expected {}), state shapes {} / {}".format(
            x_t.size, p.input_size, prev.h.shape, prev.s.shape))
    joint = np.concatenate([prev.h, x_t])
    f = expit(p.W_f @ joint + p.b_f)
    i = expit(p.W_i @ joint + p.b_i)
    s_tilde = np.tanh(p.W_s @ joint + p.b_s)
    o = expit(p.W_o @ joint + p.b_o)
    s = f * prev.s + i * s_tilde
    return LstmState(h=o * np.tanh(s), s=s)


def _layer_forward(p: LstmLayerParams, inputs: np.ndarray) -> _LayerCache:
    T, B, _ = inputs.shape
    H = p.hidden_size
    W, b = p.stacked()
    W_h, W_x = W[:, :H], W[:, H:]
    x_proj = inputs @ W_x.T + b
    h = np.zeros((T + 1, B, H))
    s = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    tanh_s = np.empty((T, B, H))
    for t in range(T):
        z = x_proj[t] + h[t] @ W_h.T
        gates[t, :, :2 * H] = expit(z[:, :2 * H])
        gates[t, :, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        gates[t, :, 3 * H:] = expit(z[:, 3 * H:])
        f, i, s_tilde, o = (gates[t, :, k * H:(k + 1) * H] for k in range(4))
        s[t + 1] = f * s[t] + i * s_tilde
        tanh_s[t] = np.tanh(s[t + 1])
        h[t + 1] = o * tanh_s[t]
    return _LayerCache(inputs=inputs, h=h, s=s, gates=gates, tanh_s=tanh_s, mask=None)


def _to_time_major(model: DeepLstmModel, X_N) -> Tuple[np.ndarray, bool]:
    X = np.asarray(X_N, dtype=np.float64)
    batched = X.ndim == 3
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3 or X.shape[2] < 1:
        raise DimensionError("input width error: expected N_c x T or B x N_c x T, got shape {}".format(X.shape))
    if X.shape[1] != model.n_channels:
        raise DimensionError("input width error: model expects {} channels, got {}".format(
            model.n_channels, X.shape[1]))
    return np.transpose(X, (2, 0, 1)), batched


def _from_time_major(Y: np.ndarray, batched: bool) -> np.ndarray:
    Y = np.transpose(Y, (1, 2, 0))
    return Y if batched else Y[0]


def forward(model: DeepLstmModel, X_N, mode: str = "eval",
            rng: SeededRng = None) -> Tuple[np.ndarray, Optional[ForwardCache]]:
    """Run the network over ``X_N`` (``N_c x T``, or ``B x N_c x T``).

    Train mode applies inverted dropout to each layer's output sequence with
    masks drawn from ``rng`` and keeps the activations for :func:`backprop`;
    eval mode is deterministic and returns no cache.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval', got {!r}".format(mode))
    train = mode == "train"
    if train and rng is None and any(rate > 0 for rate in model.dropout_rates):
        raise ValueError("train mode with dropout needs an rng")

    layer_input, batched = _to_time_major(model, X_N)
    caches = []
    for layer, rate in zip(model.layers, model.dropout_rates):
        cache = _layer_forward(layer, layer_input)
        out = cache.h[1:]
        if train and rate > 0:
            cache.mask = (rng.generator.random(out.shape) >= rate) / (1.0 - rate)
            out = out * cache.mask
        caches.append(cache)
        layer_input = out

    outputs = layer_input @ model.head_W.T + model.head_b
    Y_hat = _from_time_major(outputs, batched)
    if not train:
        return Y_hat, None
    return Y_hat, ForwardCache(layers=caches, head_inputs=layer_input, outputs=outputs, batched=batched)


def mse_loss(Y_hat, Y) -> float:
    """Mean over every entry of the squared difference."""
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y_hat.shape != Y.shape:
        raise DimensionError("dimension error: prediction {} vs target {}".format(Y_hat.shape, Y.shape))
    return float(np.mean((Y_hat - Y) ** 2))


def _layer_backward(p: LstmLayerParams, cache: _LayerCache,
                    d_out: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    T, B, H = d_out.shape
    W, _ = p.stacked()
    W_h, W_x = W[:, :H], W[:, H:]
    d_z = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    ds_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        f, i, s_tilde, o = (cache.gates[t, :, k * H:(k + 1) * H] for k in range(4))
        dh = d_out[t] + dh_next
        tanh_s = cache.tanh_s[t]
        ds = dh * o * (1.0 - tanh_s ** 2) + ds_next
        d_z[t, :, :H] = ds * cache.s[t] * f * (1.0 - f)
        d_z[t, :, H:2 * H] = ds * s_tilde * i * (1.0 - i)
        d_z[t, :, 2 * H:3 * H] = ds * i * (1.0 - s_tilde ** 2)
        d_z[t, :, 3 * H:] = dh * tanh_s * o * (1.0 - o)
        ds_next = ds * f
        dh_next = d_z[t] @ W_h

    dW_h = np.tensordot(d_z, cache.h[:-1], axes=([0, 1], [0, 1]))
    dW_x = np.tensordot(d_z, cache.inputs, axes=([0, 1], [0, 1]))
    d_b = d_z.sum(axis=(0, 1))
    d_inputs = d_z @ W_x

    grads = {}
    for k, gate in enumerate(GATES):
        rows = slice(k * H, (k + 1) * H)
        grads["W_" + gate] = np.hstack([dW_h[rows], dW_x[rows]])
        grads["b_" + gate] = d_b[rows]
    return grads, d_inputs


def backprop(model: DeepLstmModel, cache: Optional[ForwardCache], Y) -> Dict[str, np.ndarray]:
    """Exact gradients of :func:`mse_loss` w.r.t. every parameter, by full-sequence BPTT.

    ``cache`` must come from a train-mode :func:`forward` on the input that
    produced the prediction; the keys of the result match
    :meth:`DeepLstmModel.parameters`.
    """
    if cache is None:
        raise NoCacheError("no cache: run forward(..., mode='train') first")
    Y = np.asarray(Y, dtype=np.float64)
    if not cache.batched:
        Y = Y[np.newaxis]
    if Y.ndim != 3:
        raise DimensionError("dimension error: target has shape {}".format(Y.shape))
    Y = np.transpose(Y, (2, 0, 1))
    if Y.shape != cache.outputs.shape:
        raise DimensionError("dimension error: target {} vs prediction {}".format(Y.shape, cache.outputs.shape))

    d_outputs = 2.0 * (cache.outputs - Y) / Y.size
    grads = {
        "head.W": np.tensordot(d_outputs, cache.head_inputs, axes=([0, 1], [0, 1])),
        "head.b": d_outputs.sum(axis=(0, 1)),
    }
    d_out = d_outputs @ model.head_W
    for idx in range(len(model.layers) - 1, -1, -1):
        layer_cache = cache.layers[idx]
        if layer_cache.mask is not None:
            d_out = d_out * layer_cache.mask
        layer_grads, d_out = _layer_backward(model.layers[idx], layer_cache, d_out)
        for name, grad in layer_grads.items():
            grads["layer{}.{}".format(idx, name)] = grad
    return grads


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``. Returns the pre-clip norm."""
    norm = global_norm(grads)
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update.

    Parameters, moments and the step counter are updated in place; the same
    objects are returned.
    """
    state.step_count += 1
    bc1 = 1.0 - state.beta1 ** state.step_count
    bc2 = 1.0 - state.beta2 ** state.step_count
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise DimensionError("dimension error: gradient {} has shape {}, parameter {}".format(
                name, g.shape, params[name].shape))
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass
class TrainConfig:
    """Training protocol.

    ``batch_size`` counts segments per optimization step; each epoch runs
    ``batches_per_epoch`` steps on windows of ``segment_length`` samples cut at
    random offsets from the training recordings.
    """
    epochs: int = 50
    batch_size: int = 250
    patience: int = 2
    validation_fraction: float = 0.2
    segment_length: int = 400
    batches_per_epoch: int = 8
    clip_norm: float = 5.0
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1, got {}".format(self.epochs))
        if self.patience < 0:
            raise ValueError("patience must be >= 0, got {}".format(self.patience))
        if self.batch_size < 1 or self.batches_per_epoch < 1:
            raise ValueError("batch_size and batches_per_epoch must be >= 1")
        if self.segment_length < 1:
            raise ValueError("segment_length must be >= 1, got {}".format(self.segment_length))
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1), got {}".format(self.validation_fraction))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    grad_norm: float
    clipped_batches: int


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    initial_train_loss: float = float("nan")
    best_epoch: int = 0
    stopped_early: bool = False
    clip_norm: float = 0.0

    def __len__(self):
        return len(self.records)

    @property
    def train_losses(self) -> List[float]:
        return [r.train_loss for r in self.records]

    @property
    def val_losses(self) -> List[float]:
        return [r.val_loss for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(r) for r in self.records],
                            columns=["epoch", "train_loss", "val_loss", "grad_norm", "clipped_batches"])


TrainingPair = Tuple[np.ndarray, np.ndarray]


def evaluate_loss(model: DeepLstmModel, pairs: Sequence[TrainingPair]) -> float:
    """Eval-mode MSE over ``pairs``, weighted by each pair's number of samples."""
    total = 0.0
    count = 0
    by_length: Dict[int, List[TrainingPair]] = {}
    for X, Y in pairs:
        by_length.setdefault(X.shape[1], []).append((X, Y))
    for length in sorted(by_length):
        group = by_length[length]
        X = np.stack([x for x, _ in group])
        Y = np.stack([y for _, y in group])
        Y_hat, _ = forward(model, X, mode="eval")
        total += float(np.sum((Y_hat - Y) ** 2))
        count += Y.size
    return total / count


def sample_batch(pairs: Sequence[TrainingPair], batch_size: int, segment_length: int,
                 rng: SeededRng) -> Tuple[np.ndarray, np.ndarray]:
    """Cut ``batch_size`` windows at random offsets; recordings are picked in proportion to their length."""
    lengths = np.array([X.shape[1] for X, _ in pairs])
    window = int(min(segment_length, lengths.min()))
    weights = (lengths - window + 1).astype(np.float64)
    choice = rng.generator.choice(len(pairs), size=batch_size, p=weights / weights.sum())
    X_batch = []
    Y_batch = []
    for idx in choice:
        X, Y = pairs[idx]
        start = int(rng.generator.integers(0, X.shape[1] - window + 1))
        X_batch.append(X[:, start:start + window])
        Y_batch.append(Y[:, start:start + window])
    return np.stack(X_batch), np.stack(Y_batch)


def _check_pairs(model: DeepLstmModel, pairs: Sequence[TrainingPair], name: str):
    for X, Y in pairs:
        if X.shape[0] != model.n_channels:
            raise DimensionError("input width error: {} recording has {} channels, model expects {}".format(
                name, X.shape[0], model.n_channels))
        if Y.shape != (model.n_outputs, X.shape[1]):
            raise DimensionError("dimension error: {} target has shape {}, expected {}".format(
                name, Y.shape, (model.n_outputs, X.shape[1])))


def train(model: DeepLstmModel, train_set: Sequence[TrainingPair], val_set: Sequence[TrainingPair],
          config: TrainConfig, rng: SeededRng) -> Tuple[DeepLstmModel, TrainHistory]:
    """Train ``model`` with Adam and early stopping; returns the best-validation model and the history.

    ``model`` itself is left untouched. With an empty ``val_set`` the training
    loss is monitored instead.
    """
    if not train_set:
        raise NoDataError("no data: the training set is empty")
    _check_pairs(model, train_set, "training")
    _check_pairs(model, val_set, "validation")

    current = model.copy()
    params = current.parameters()
    state = AdamState(lr=config.learning_rate)
    history = TrainHistory(clip_norm=config.clip_norm)
    history.initial_train_loss = evaluate_loss(current, train_set)
    logger.info("Initial training loss %.5f", history.initial_train_loss)

    best = current.copy()
    best_loss = math.inf
    wait = 0
    for epoch in range(1, config.epochs + 1):
        batch_losses = []
        max_norm = 0.0
        clipped = 0
        for _ in range(config.batches_per_epoch):
            X_batch, Y_batch = sample_batch(train_set, config.batch_size, config.segment_length, rng)
            Y_hat, cache = forward(current, X_batch, mode="train", rng=rng)
            batch_losses.append(mse_loss(Y_hat, Y_batch))
            grads = backprop(current, cache, Y_batch)
            norm = clip_gradients(grads, config.clip_norm)
            max_norm = max(max_norm, norm)
            if config.clip_norm and norm > config.clip_norm:
                clipped += 1
            adam_step(params, grads, state)

        train_loss = float(np.mean(batch_losses))
        val_loss = evaluate_loss(current, val_set) if val_set else train_loss
        history.records.append(EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss,
                                           grad_norm=max_norm, clipped_batches=clipped))
        if clipped:
            logger.warning("Epoch %d: clipped %d of %d batches (max norm %.3f)", epoch, clipped,
                           config.batches_per_epoch, max_norm)

        if val_loss < best_loss:
            best_loss = val_loss
            best = current.copy()
            history.best_epoch = epoch
            wait = 0
            logger.info("Epoch %d: train %.5f  val %.5f  (best)", epoch, train_loss, val_loss)
        else:
            wait += 1
            logger.info("Epoch %d: train %.5f  val %.5f", epoch, train_loss, val_loss)
            if wait >= config.patience:
                history.stopped_early = epoch < config.epochs
                logger.info("Early stop after epoch %d; best epoch %d (val %.5f)", epoch, history.best_epoch,
                            best_loss)
                break
    return best, history


def predict_eog(model: DeepLstmModel, X_N) -> np.ndarray:
    """Eval-mode forward: row 0 is the VEOG estimate, row 1 the HEOG estimate, in normalized units."""
    Y_hat, _ = forward(model, X_N, mode="eval")
    return Y_hat
