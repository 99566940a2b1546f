"""CNN, stacked-LSTM and dilated causal TCN sequence regressors.

All three map a window ``(W, C)`` (or a batch ``(B, W, C)``) to one output
vector. Inputs are standardized and outputs de-standardized with fixed
buffers stored alongside the trainable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ..core import make_rng
from . import layers as L

ARCHITECTURES = ("cnn", "lstm", "tcn")


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    input_channels: int
    window: int
    output_dim: int = 2
    conv_channels: tuple = (8, 16)
    kernel: int = 3
    lstm_hidden: int = 16
    lstm_layers: int = 3
    tcn_channels: int = 16
    tcn_dilations: tuple = (1, 2, 4, 8)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.input_channels < 1 or self.window < 1 or self.output_dim < 1:
            raise ValueError("channels, window and output_dim must be positive")
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        object.__setattr__(self, "tcn_dilations", tuple(int(d) for d in self.tcn_dilations))

    @property
    def receptive_field(self) -> int:
        if self.architecture == "tcn":
            return 1 + (self.kernel - 1) * sum(self.tcn_dilations)
        if self.architecture == "cnn":
            return 1 + (self.kernel - 1) * len(self.conv_channels)
        return self.window

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        d["tcn_dilations"] = list(self.tcn_dilations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


@dataclass
class ForwardCache:
    X: np.ndarray
    net: object
    squeeze: bool


class SeqModel:
    """Base class: parameter bookkeeping, normalization, batching."""

    def __init__(self, spec: ModelSpec, params: dict, buffers: dict | None = None):
        self.spec = spec
        self.params = params
        C, D = spec.input_channels, spec.output_dim
        self.buffers = buffers or {
            "in_mean": np.zeros(C), "in_std": np.ones(C),
            "out_mean": np.zeros(D), "out_std": np.ones(D),
        }

    # subclasses implement these on standardized inputs
    def _net_forward(self, Xn):
        raise NotImplementedError

    def _net_backward(self, cache, dy):
        raise NotImplementedError

    def _net_predict(self, Xn):
        # inference without caches; subclasses may skip work the head never reads
        return self._net_forward(Xn)[0]

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        squeeze = X.ndim == 2
        if squeeze:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != (self.spec.window, self.spec.input_channels):
            raise ValueError(
                f"window shape {X.shape[-2:]} does not match ({self.spec.window}, {self.spec.input_channels})")
        return X, squeeze

    def forward(self, X) -> np.ndarray:
        X, squeeze = self._check(X)
        b = self.buffers
        y = self._net_predict((X - b["in_mean"]) / b["in_std"]) * b["out_std"] + b["out_mean"]
        return y[0] if squeeze else y

    __call__ = forward

    def forward_cached(self, X):
        X, squeeze = self._check(X)
        b = self.buffers
        Xn = (X - b["in_mean"]) / b["in_std"]
        yn, net = self._net_forward(Xn)
        y = yn * b["out_std"] + b["out_mean"]
        return (y[0] if squeeze else y), ForwardCache(X, net, squeeze)

    def backward(self, cache: ForwardCache | None, dY):
        """Parameter gradients and input gradient for upstream ``dY``."""
        if cache is None:
            raise RuntimeError("backward called before forward")
        dY = np.asarray(dY, dtype=float)
        if cache.squeeze:
            dY = dY[None]
        b = self.buffers
        grads, dXn = self._net_backward(cache.net, dY * b["out_std"])
        dX = dXn / b["in_std"]
        return grads, (dX[0] if cache.squeeze else dX)

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "SeqModel":
        return type(self)(self.spec, {k: v.copy() for k, v in self.params.items()},
                          {k: v.copy() for k, v in self.buffers.items()})

    def set_normalization(self, in_mean, in_std, out_mean, out_std):
        self.buffers = {
            "in_mean": np.asarray(in_mean, float).copy(),
            "in_std": np.where(np.asarray(in_std, float) > 1e-8, in_std, 1.0).astype(float),
            "out_mean": np.asarray(out_mean, float).copy(),
            "out_std": np.where(np.asarray(out_std, float) > 1e-8, out_std, 1.0).astype(float),
        }


class CNNModel(SeqModel):
    """Valid convolutions with ReLU, no pooling, flatten, one dense head."""

    @staticmethod
    def init_params(spec: ModelSpec, rng) -> dict:
        p = {}
        cin = spec.input_channels
        for i, cout in enumerate(spec.conv_channels):
            p[f"conv{i}.W"] = L.uniform_init(rng, (spec.kernel, cin, cout), spec.kernel * cin)
            p[f"conv{i}.b"] = L.uniform_init(rng, (cout,), spec.kernel * cin)
            cin = cout
        flat = (spec.window - (spec.kernel - 1) * len(spec.conv_channels)) * cin
        if flat <= 0:
            raise ValueError("window too short for the convolution stack")
        p["head.W"] = L.uniform_init(rng, (flat, spec.output_dim), flat)
        p["head.b"] = L.uniform_init(rng, (spec.output_dim,), flat)
        return p

    def _net_forward(self, Xn):
        h = Xn
        caches = []
        for i in range(len(self.spec.conv_channels)):
            z, cc = L.conv1d_forward(h, self.params[f"conv{i}.W"], self.params[f"conv{i}.b"], causal=False)
            h, mask = L.relu_forward(z)
            caches.append((cc, mask))
        shape = h.shape
        flat = h.reshape(shape[0], -1)
        y, hc = L.dense_forward(flat, self.params["head.W"], self.params["head.b"])
        return y, (caches, shape, hc)

    def _net_backward(self, cache, dy):
        caches, shape, hc = cache
        grads = {}
        g, dflat = L.dense_backward(hc, dy, self.params["head.W"])
        grads["head.W"], grads["head.b"] = g["W"], g["b"]
        dh = dflat.reshape(shape)
        for i in reversed(range(len(caches))):
            cc, mask = caches[i]
            dz = L.relu_backward(mask, dh)
            g, dh = L.conv1d_backward(cc, dz, self.params[f"conv{i}.W"])
            grads[f"conv{i}.W"], grads[f"conv{i}.b"] = g["W"], g["b"]
        return grads, dh


class LSTMModel(SeqModel):
    """Stacked unidirectional LSTM; the head reads the last hidden state."""

    @staticmethod
    def init_params(spec: ModelSpec, rng) -> dict:
        p = {}
        H = spec.lstm_hidden
        cin = spec.input_channels
        for i in range(spec.lstm_layers):
            p[f"lstm{i}.Wx"] = L.uniform_init(rng, (cin, 4 * H), H)
            p[f"lstm{i}.Wh"] = L.uniform_init(rng, (H, 4 * H), H)
            p[f"lstm{i}.b"] = L.uniform_init(rng, (4 * H,), H)
            cin = H
        p["head.W"] = L.uniform_init(rng, (H, spec.output_dim), H)
        p["head.b"] = L.uniform_init(rng, (spec.output_dim,), H)
        return p

    def _net_forward(self, Xn):
        h = Xn
        caches = []
        for i in range(self.spec.lstm_layers):
            h, c = L.lstm_forward(h, self.params[f"lstm{i}.Wx"], self.params[f"lstm{i}.Wh"],
                                  self.params[f"lstm{i}.b"])
            caches.append(c)
        y, hc = L.dense_forward(h[:, -1, :], self.params["head.W"], self.params["head.b"])
        return y, (caches, h.shape, hc)

    def _net_backward(self, cache, dy):
        caches, shape, hc = cache
        grads = {}
        g, dlast = L.dense_backward(hc, dy, self.params["head.W"])
        grads["head.W"], grads["head.b"] = g["W"], g["b"]
        dh = np.zeros(shape)
        dh[:, -1, :] = dlast
        for i in reversed(range(len(caches))):
            g, dh = L.lstm_backward(caches[i], dh, self.params[f"lstm{i}.Wx"], self.params[f"lstm{i}.Wh"])
            for k, v in g.items():
                grads[f"lstm{i}.{k}"] = v
        return grads, dh


class TCNModel(SeqModel):
    """Dilated causal residual blocks; the head reads the last time row.

    Block ``i``: ``relu(conv_d(h) + residual(h))`` with dilation ``d_i``; the
    residual is a 1x1 projection where the channel count changes.
    """

    @staticmethod
    def init_params(spec: ModelSpec, rng) -> dict:
        p = {}
        C = spec.tcn_channels
        cin = spec.input_channels
        for i, _ in enumerate(spec.tcn_dilations):
            p[f"block{i}.W"] = L.uniform_init(rng, (spec.kernel, cin, C), spec.kernel * cin)
            p[f"block{i}.b"] = L.uniform_init(rng, (C,), spec.kernel * cin)
            if cin != C:
                p[f"block{i}.down.W"] = L.uniform_init(rng, (cin, C), cin)
                p[f"block{i}.down.b"] = L.uniform_init(rng, (C,), cin)
            cin = C
        p["head.W"] = L.uniform_init(rng, (C, spec.output_dim), C)
        p["head.b"] = L.uniform_init(rng, (spec.output_dim,), C)
        return p

    def _net_forward(self, Xn):
        h = Xn
        caches = []
        for i, d in enumerate(self.spec.tcn_dilations):
            z, cc = L.conv1d_forward(h, self.params[f"block{i}.W"], self.params[f"block{i}.b"], dilation=d)
            if f"block{i}.down.W" in self.params:
                res, dc = L.dense_forward(h, self.params[f"block{i}.down.W"], self.params[f"block{i}.down.b"])
            else:
                res, dc = h, None
            h, mask = L.relu_forward(z + res)
            caches.append((cc, dc, mask))
        y, hc = L.dense_forward(h[:, -1, :], self.params["head.W"], self.params["head.b"])
        return y, (caches, h.shape, hc)

    def _rows_needed(self, length: int) -> list:
        """Output rows each block must produce so that the last row is exact."""
        k = self.spec.kernel
        need = [np.array([length - 1])]
        for d in reversed(self.spec.tcn_dilations[1:]):
            taps = (need[0][:, None] - d * np.arange(k)[None, :]).ravel()
            need.insert(0, np.unique(np.concatenate([need[0], taps[taps >= 0]])))
        return need

    def _net_predict(self, Xn):
        B, Lw, _ = Xn.shape
        k = self.spec.kernel
        h, rows_in = Xn, np.arange(Lw)
        for i, (d, rows) in enumerate(zip(self.spec.tcn_dilations, self._rows_needed(Lw))):
            W, bias = self.params[f"block{i}.W"], self.params[f"block{i}.b"]
            full = np.zeros((B, Lw + 1, h.shape[2]))  # last slot stays zero for padded taps
            full[:, rows_in] = h
            taps = rows[:, None] - d * np.arange(k - 1, -1, -1)[None, :]
            taps = np.where(taps >= 0, taps, Lw)
            cols = full[:, taps].reshape(B * len(rows), -1)
            z = (cols @ W.reshape(-1, W.shape[2])).reshape(B, len(rows), -1) + bias
            res = full[:, rows]
            if f"block{i}.down.W" in self.params:
                res = res @ self.params[f"block{i}.down.W"] + self.params[f"block{i}.down.b"]
            h, rows_in = np.maximum(z + res, 0.0), rows
        return h[:, -1, :] @ self.params["head.W"] + self.params["head.b"]

    def _net_backward(self, cache, dy):
        caches, shape, hc = cache
        grads = {}
        g, dlast = L.dense_backward(hc, dy, self.params["head.W"])
        grads["head.W"], grads["head.b"] = g["W"], g["b"]
        dh = np.zeros(shape)
        dh[:, -1, :] = dlast
        for i in reversed(range(len(caches))):
            cc, dc, mask = caches[i]
            ds = L.relu_backward(mask, dh)
            g, dx_conv = L.conv1d_backward(cc, ds, self.params[f"block{i}.W"])
            grads[f"block{i}.W"], grads[f"block{i}.b"] = g["W"], g["b"]
            if dc is not None:
                g, dx_res = L.dense_backward(dc, ds, self.params[f"block{i}.down.W"])
                grads[f"block{i}.down.W"], grads[f"block{i}.down.b"] = g["W"], g["b"]
            else:
                dx_res = ds
            dh = dx_conv + dx_res
        return grads, dh


_CLASSES = {"cnn": CNNModel, "lstm": LSTMModel, "tcn": TCNModel}


def build_model(spec: ModelSpec, seed: int = 0) -> SeqModel:
    cls = _CLASSES[spec.architecture]
    rng = make_rng(seed, 101)
    return cls(spec, cls.init_params(spec, rng))


def model_from_parts(spec: ModelSpec, params: dict, buffers: dict) -> SeqModel:
    return _CLASSES[spec.architecture](spec, params, buffers)
