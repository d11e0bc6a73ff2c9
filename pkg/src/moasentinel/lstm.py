"""Two-layer LSTM one-step forecaster trained with Adam.

The network maps a normalized window of W past values to the next value:
layer 1 runs over the window, its hidden sequence feeds layer 2, and an
affine head reads layer 2's final hidden state. Training minimizes mean
squared error on normalized values with full-batch gradients obtained by
backpropagation through time; multi-step forecasts feed each prediction
back as the newest window element.

Cell equations (per gate, batch-first):

    i = sigmoid(x W_i^T + h W_u_i^T + b_i)      input gate
    f = sigmoid(x W_f^T + h W_u_f^T + b_f)      forget gate
    o = sigmoid(x W_o^T + h W_u_o^T + b_o)      output gate
    g = tanh   (x W_c^T + h W_u_c^T + b_c)      cell candidate
    c_t = f * c_prev + i * g
    h_t = o * tanh(c_t)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator

from . import persist
from ._validation import as_float_vector, check_fitted, check_seed
from .data import MinMaxNormalizer, NormalizationStats, make_windows
from .errors import DataFormatError, TrainingError

LSTM_FORMAT = "lstm/1"

_GATES = ("i", "f", "o", "c")


@dataclass
class LstmLayerParams:
    """Weights of one LSTM layer: input, recurrent, and bias per gate."""

    w_i: np.ndarray  # (hidden, input)
    w_f: np.ndarray
    w_o: np.ndarray
    w_c: np.ndarray
    u_i: np.ndarray  # (hidden, hidden)
    u_f: np.ndarray
    u_o: np.ndarray
    u_c: np.ndarray
    b_i: np.ndarray  # (hidden,)
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_i.shape[1]

    def validate(self) -> None:
        hidden, inp = self.w_i.shape
        for gate in _GATES:
            w, u, b = (
                getattr(self, f"w_{gate}"),
                getattr(self, f"u_{gate}"),
                getattr(self, f"b_{gate}"),
            )
            if w.shape != (hidden, inp) or u.shape != (hidden, hidden) or b.shape != (hidden,):
                raise DataFormatError(f"inconsistent shapes in LSTM layer (gate {gate})")
            for arr in (w, u, b):
                if not np.all(np.isfinite(arr)):
                    raise DataFormatError("LSTM layer contains non-finite weights")


@dataclass
class LstmParams:
    """Full parameter set: two stacked layers plus the affine output head."""

    layer1: LstmLayerParams
    layer2: LstmLayerParams
    head_w: np.ndarray  # (hidden2,)
    head_b: np.ndarray  # () scalar

    def named_arrays(self):
        """(name, array) pairs in a fixed order; shared by Adam and tests."""
        for tag, layer in (("layer1", self.layer1), ("layer2", self.layer2)):
            for kind in ("w", "u", "b"):
                for gate in _GATES:
                    name = f"{kind}_{gate}"
                    yield f"{tag}.{name}", getattr(layer, name)
        yield "head.w", self.head_w
        yield "head.b", self.head_b

    def validate(self) -> None:
        self.layer1.validate()
        self.layer2.validate()
        if self.layer2.input_size != self.layer1.hidden_size:
            raise DataFormatError(
                "layer2 input size must equal layer1 hidden size "
                f"({self.layer2.input_size} vs {self.layer1.hidden_size})"
            )
        if self.head_w.shape != (self.layer2.hidden_size,) or self.head_b.shape != ():
            raise DataFormatError("output head shape mismatch")


def _init_layer(rng: np.random.Generator, input_size: int, hidden_size: int) -> LstmLayerParams:
    def uniform(rows, cols):
        bound = 1.0 / math.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    kwargs = {}
    for gate in _GATES:
        kwargs[f"w_{gate}"] = uniform(hidden_size, input_size)
    for gate in _GATES:
        kwargs[f"u_{gate}"] = uniform(hidden_size, hidden_size)
    for gate in _GATES:
        kwargs[f"b_{gate}"] = np.zeros(hidden_size)
    kwargs["b_f"] = np.ones(hidden_size)  # open forget gates at the start
    return LstmLayerParams(**kwargs)


def init_params(hidden_size: int, seed: int, input_size: int = 1) -> LstmParams:
    """Seeded weight init: uniform(+-1/sqrt(fan_in)), forget bias 1."""
    rng = np.random.default_rng(check_seed(seed))
    layer1 = _init_layer(rng, input_size, hidden_size)
    layer2 = _init_layer(rng, hidden_size, hidden_size)
    bound = 1.0 / math.sqrt(hidden_size)
    head_w = rng.uniform(-bound, bound, size=hidden_size)
    head_b = np.zeros(())
    return LstmParams(layer1, layer2, head_w, head_b)


def _sigmoid(z):
    return expit(z)


def lstm_cell_forward(x, h_prev, c_prev, params: LstmLayerParams):
    """One cell step for a batch. Returns (h, c, cache for backward)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    h_prev = np.atleast_2d(np.asarray(h_prev, dtype=float))
    c_prev = np.atleast_2d(np.asarray(c_prev, dtype=float))
    if x.shape[1] != params.input_size or h_prev.shape[1] != params.hidden_size:
        raise DataFormatError(
            f"cell input shapes {x.shape}/{h_prev.shape} do not match layer "
            f"({params.hidden_size} hidden, {params.input_size} input)"
        )
    i = _sigmoid(x @ params.w_i.T + h_prev @ params.u_i.T + params.b_i)
    f = _sigmoid(x @ params.w_f.T + h_prev @ params.u_f.T + params.b_f)
    o = _sigmoid(x @ params.w_o.T + h_prev @ params.u_o.T + params.b_o)
    g = np.tanh(x @ params.w_c.T + h_prev @ params.u_c.T + params.b_c)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    cache = (x, h_prev, c_prev, i, f, o, g, c)
    return h, c, cache


def _stack_gates(params: LstmLayerParams):
    """Per-gate matrices stacked to (4H, .) so each step is one matmul."""
    w = np.concatenate([getattr(params, f"w_{g}") for g in _GATES], axis=0)
    u = np.concatenate([getattr(params, f"u_{g}") for g in _GATES], axis=0)
    b = np.concatenate([getattr(params, f"b_{g}") for g in _GATES])
    return w, u, b


def _layer_forward(params: LstmLayerParams, inputs: np.ndarray):
    """Run a layer over a (W, B, input) sequence; returns h-sequence and cache.

    Equivalent to repeated lstm_cell_forward, with the input
    contributions of all steps batched into one matrix product.
    """
    steps, batch, n_in = inputs.shape
    if n_in != params.input_size:
        raise DataFormatError(
            f"layer expects input size {params.input_size}, got {n_in}"
        )
    hidden = params.hidden_size
    w_all, u_all, b_all = _stack_gates(params)
    z_in = (inputs.reshape(steps * batch, n_in) @ w_all.T).reshape(
        steps, batch, 4 * hidden
    ) + b_all

    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    gates = np.empty((steps, batch, 4 * hidden))
    tanh_c_seq = np.empty((steps, batch, hidden))
    h_prev_seq = np.empty((steps, batch, hidden))
    c_prev_seq = np.empty((steps, batch, hidden))
    h_seq = np.empty((steps, batch, hidden))
    three_h = 3 * hidden
    for t in range(steps):
        z = gates[t]
        np.matmul(h, u_all.T, out=z)
        z += z_in[t]
        z_sig = z[:, :three_h]
        z_g = z[:, three_h:]
        expit(z_sig, out=z_sig)
        np.tanh(z_g, out=z_g)
        i = z[:, :hidden]
        f = z[:, hidden : 2 * hidden]
        o = z[:, 2 * hidden : three_h]
        h_prev_seq[t] = h
        c_prev_seq[t] = c
        c = f * c + i * z_g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        tanh_c_seq[t] = tanh_c  # backward only ever needs tanh(c)
        h_seq[t] = h
    cache = (inputs, h_prev_seq, c_prev_seq, gates, tanh_c_seq, w_all, u_all)
    return h_seq, cache


def _layer_backward(params: LstmLayerParams, cache, dh_seq: np.ndarray):
    """BPTT through one layer given upstream dL/dh at every step.

    Returns (gradient dict for this layer, dL/dx sequence).
    """
    inputs, h_prev_seq, c_prev_seq, gates, tanh_c_seq, w_all, u_all = cache
    steps, batch, hidden = dh_seq.shape
    dz_seq = np.empty((steps, batch, 4 * hidden))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        i = gates[t, :, :hidden]
        f = gates[t, :, hidden : 2 * hidden]
        o = gates[t, :, 2 * hidden : 3 * hidden]
        g = gates[t, :, 3 * hidden :]
        dh = dh_seq[t] + dh_next
        tanh_c = tanh_c_seq[t]
        do = dh * tanh_c
        dc = dc_next + dh * o * (1.0 - tanh_c**2)
        dz = dz_seq[t]
        dz[:, :hidden] = (dc * g) * i * (1.0 - i)
        dz[:, hidden : 2 * hidden] = (dc * c_prev_seq[t]) * f * (1.0 - f)
        dz[:, 2 * hidden : 3 * hidden] = do * o * (1.0 - o)
        dz[:, 3 * hidden :] = (dc * i) * (1.0 - g**2)
        dc_next = dc * f
        dh_next = dz @ u_all
    dz_flat = dz_seq.reshape(steps * batch, 4 * hidden)
    dw_all = dz_flat.T @ inputs.reshape(steps * batch, -1)
    du_all = dz_flat.T @ h_prev_seq.reshape(steps * batch, hidden)
    db_all = dz_flat.sum(axis=0)
    dx_seq = dz_seq @ w_all

    grads = {}
    for k, gate in enumerate(_GATES):
        grads[f"w_{gate}"] = dw_all[k * hidden : (k + 1) * hidden]
        grads[f"u_{gate}"] = du_all[k * hidden : (k + 1) * hidden]
        grads[f"b_{gate}"] = db_all[k * hidden : (k + 1) * hidden]
    return grads, dx_seq


def forward(params: LstmParams, windows: np.ndarray) -> np.ndarray:
    """Predictions (normalized scale) for a batch of windows, shape (B, W)."""
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    inputs = windows.T[:, :, None]  # (W, B, 1)
    h1_seq, _ = _layer_forward(params.layer1, inputs)
    h2_seq, _ = _layer_forward(params.layer2, h1_seq)
    return h2_seq[-1] @ params.head_w + params.head_b


def loss_and_gradients(params: LstmParams, windows, targets):
    """Mean squared error over the batch and its full BPTT gradient.

    Gradients are exact (no clipping here); clipping belongs to the
    training loop.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if windows.shape[0] == 0:
        raise DataFormatError("loss_and_gradients needs a non-empty batch")
    if windows.shape[0] != targets.shape[0]:
        raise DataFormatError("windows and targets disagree on batch size")
    batch = windows.shape[0]

    inputs = windows.T[:, :, None]
    h1_seq, caches1 = _layer_forward(params.layer1, inputs)
    h2_seq, caches2 = _layer_forward(params.layer2, h1_seq)
    preds = h2_seq[-1] @ params.head_w + params.head_b
    err = preds - targets
    loss = float(np.mean(err**2))

    dpred = 2.0 * err / batch
    grads = {
        "head.w": h2_seq[-1].T @ dpred,
        "head.b": np.asarray(dpred.sum()),
    }
    dh2_seq = np.zeros_like(h2_seq)
    dh2_seq[-1] = np.outer(dpred, params.head_w)
    grads2, dh1_seq = _layer_backward(params.layer2, caches2, dh2_seq)
    grads1, _ = _layer_backward(params.layer1, caches1, dh1_seq)
    for name, g in grads1.items():
        grads[f"layer1.{name}"] = g
    for name, g in grads2.items():
        grads[f"layer2.{name}"] = g
    return loss, grads


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale all gradients in place to a global L2 norm cap; returns the norm."""
    total = math.sqrt(sum(float(np.sum(g**2)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class AdamState:
    """First/second-moment accumulators, one pair per parameter tensor."""

    def __init__(self, params: LstmParams):
        self.m = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
        self.t = 0

    def step(self, params: LstmParams, grads: dict, lr, beta1, beta2, epsilon):
        self.t += 1
        bc1 = 1.0 - beta1**self.t
        bc2 = 1.0 - beta2**self.t
        for name, arr in params.named_arrays():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g**2
            arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + epsilon)


class LstmForecaster(BaseEstimator):
    """One-variable next-value forecaster built on the two-layer LSTM.

    fit() consumes the raw training series: it fits a min-max normalizer
    on those values, cuts sliding windows, and runs full-batch Adam for
    the configured number of epochs. Forecasting beyond one step is
    iterative: each prediction becomes the newest element of the rolling
    window.
    """

    def __init__(
        self,
        hidden_size: int = 32,
        window: int = 24,
        epochs: int = 200,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        clip_norm: float = 5.0,
        input_margin: float = 0.1,
        seed: int = 0,
    ):
        self.hidden_size = hidden_size
        self.window = window
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.clip_norm = clip_norm
        self.input_margin = input_margin
        self.seed = seed
        self.params_: LstmParams | None = None
        self.normalizer_: MinMaxNormalizer | None = None
        self.loss_history_: list[float] = []

    def fit(self, values, y=None):
        values = as_float_vector(values, "training series", min_len=self.window + 2)
        self.normalizer_ = MinMaxNormalizer().fit(values)
        if self.input_margin > 0:
            # Monitoring variables trend upward as faults develop; widening
            # the fitted range keeps forecasts past the training maximum
            # inside the calibrated input region instead of extrapolating.
            stats = self.normalizer_.stats_
            span = stats.maximum - stats.minimum
            stats.maximum = stats.maximum + self.input_margin * span
        scaled = self.normalizer_.transform(values)
        X, targets = make_windows(scaled, self.window)

        self.params_ = init_params(self.hidden_size, self.seed)
        # Start the output head at the target mean so early epochs refine
        # structure instead of hunting for the level.
        self.params_.head_b += targets.mean()
        state = AdamState(self.params_)
        self.loss_history_ = []
        for epoch in range(self.epochs):
            loss, grads = loss_and_gradients(self.params_, X, targets)
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}; "
                    "lower the learning rate or shorten the window"
                )
            clip_gradients(grads, self.clip_norm)
            state.step(
                self.params_,
                grads,
                self.learning_rate,
                self.beta1,
                self.beta2,
                self.epsilon,
            )
            self.loss_history_.append(loss)
        return self

    def _check_window(self, window) -> np.ndarray:
        arr = as_float_vector(window, "window", min_len=1)
        if arr.size != self.window:
            raise DataFormatError(
                f"window length must be {self.window}, got {arr.size}"
            )
        return arr

    def predict_next(self, window) -> float:
        """One-step prediction from a window of observed values (original units)."""
        check_fitted(self, "params_")
        arr = self._check_window(window)
        scaled = self.normalizer_.transform(arr)
        pred = forward(self.params_, scaled[None, :])[0]
        return float(self.normalizer_.inverse_transform(np.array([pred]))[0])

    def predict_windows(self, windows) -> np.ndarray:
        """Batched one-step predictions; rows are windows in original units."""
        check_fitted(self, "params_")
        arr = np.atleast_2d(np.asarray(windows, dtype=float))
        if arr.shape[1] != self.window:
            raise DataFormatError(
                f"window length must be {self.window}, got {arr.shape[1]}"
            )
        scaled = self.normalizer_.transform(arr.ravel()).reshape(arr.shape)
        preds = forward(self.params_, scaled)
        return self.normalizer_.inverse_transform(preds)

    def forecast(self, window, horizon: int) -> np.ndarray:
        """Iterative multi-step forecast; outputs are in original units."""
        check_fitted(self, "params_")
        if horizon < 1:
            raise DataFormatError(f"forecast horizon must be >= 1, got {horizon}")
        rolling = self.normalizer_.transform(self._check_window(window))
        out = np.empty(horizon)
        for k in range(horizon):
            pred = forward(self.params_, rolling[None, :])[0]
            out[k] = pred
            rolling = np.append(rolling[1:], pred)
        return self.normalizer_.inverse_transform(out)

    def one_step_predictions(self, values, start: int) -> np.ndarray:
        """Next-value predictions for indices start..N-1 using observed windows."""
        values = as_float_vector(values, "series")
        if start < self.window:
            raise DataFormatError(
                f"start must be >= window length {self.window}, got {start}"
            )
        windows = np.vstack(
            [values[t - self.window : t] for t in range(start, values.size)]
        )
        return self.predict_windows(windows)

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        check_fitted(self, "params_")
        stats = self.normalizer_.stats_
        doc = {
            "format": LSTM_FORMAT,
            "hyperparameters": {
                "hidden_size": self.hidden_size,
                "window": self.window,
                "epochs": self.epochs,
                "learning_rate": self.learning_rate,
                "beta1": self.beta1,
                "beta2": self.beta2,
                "epsilon": self.epsilon,
                "clip_norm": self.clip_norm,
                "seed": self.seed,
            },
            "normalization": {
                "min": stats.minimum.tolist(),
                "max": stats.maximum.tolist(),
            },
            "loss_history": self.loss_history_,
            "weights": {
                name: persist.encode_array(arr)
                for name, arr in self.params_.named_arrays()
            },
        }
        persist.write_document(doc, path)

    @classmethod
    def load(cls, path) -> "LstmForecaster":
        doc = persist.read_document(path, LSTM_FORMAT)
        hyper = doc["hyperparameters"]
        model = cls(**hyper)
        weights = doc["weights"]

        def layer(tag):
            return LstmLayerParams(
                **{
                    name: persist.decode_array(weights[f"{tag}.{name}"], f"{tag}.{name}")
                    for name in (
                        f"{kind}_{gate}" for kind in ("w", "u", "b") for gate in _GATES
                    )
                }
            )

        params = LstmParams(
            layer1=layer("layer1"),
            layer2=layer("layer2"),
            head_w=persist.decode_array(weights["head.w"], "head.w"),
            head_b=persist.decode_array(weights["head.b"], "head.b"),
        )
        params.validate()
        if params.layer1.hidden_size != hyper["hidden_size"]:
            raise DataFormatError("stored weights do not match declared hidden_size")
        model.params_ = params
        model.normalizer_ = MinMaxNormalizer()
        model.normalizer_.stats_ = NormalizationStats(
            np.asarray(doc["normalization"]["min"], dtype=float),
            np.asarray(doc["normalization"]["max"], dtype=float),
        )
        model.loss_history_ = [float(x) for x in doc.get("loss_history", [])]
        return model
