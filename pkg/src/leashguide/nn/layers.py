"""Batched layer primitives with explicit backward passes.

Every forward returns ``(out, cache)``; the matching backward takes the cache
and the upstream gradient and returns ``(param_grads, input_grad)``. Arrays
are float64, sequences are laid out ``(batch, time, channels)``.
"""

from __future__ import annotations

import numpy as np


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def dense_forward(x, W, b):
    return x @ W + b, x


def dense_backward(cache, dy, W):
    x = cache
    flat_x = x.reshape(-1, x.shape[-1])
    flat_dy = dy.reshape(-1, dy.shape[-1])
    return {"W": flat_x.T @ flat_dy, "b": flat_dy.sum(axis=0)}, dy @ W.T


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(mask, dy):
    return dy * mask


def conv1d_forward(x, W, b, dilation: int = 1, causal: bool = True):
    """1-D convolution, ``W`` shaped (kernel, c_in, c_out).

    Causal mode left-pads with ``(kernel - 1) * dilation`` zeros so output
    row ``t`` sees input rows ``<= t`` only; valid mode shrinks the length.
    """
    k, cin, cout = W.shape
    B, L, _ = x.shape
    pad = (k - 1) * dilation
    if causal:
        xp = np.concatenate([np.zeros((B, pad, cin)), x], axis=1)
        Lout = L
    else:
        xp = x
        Lout = L - pad
        if Lout <= 0:
            raise ValueError(f"sequence of length {L} too short for kernel {k} dilation {dilation}")
    cols = np.concatenate([xp[:, j * dilation:j * dilation + Lout, :] for j in range(k)], axis=2)
    # one 2-D product is much faster than numpy's batched matmul here
    y = (cols.reshape(-1, k * cin) @ W.reshape(k * cin, cout)).reshape(B, Lout, cout) + b
    return y, (cols, xp.shape, dilation, causal, pad)


def conv1d_backward(cache, dy, W):
    cols, xp_shape, dilation, causal, pad = cache
    k, cin, cout = W.shape
    Lout = dy.shape[1]
    flat_cols = cols.reshape(-1, k * cin)
    flat_dy = dy.reshape(-1, cout)
    dW = (flat_cols.T @ flat_dy).reshape(k, cin, cout)
    db = flat_dy.sum(axis=0)
    dcols = (flat_dy @ W.reshape(k * cin, cout).T).reshape(dy.shape[0], Lout, k * cin)
    dxp = np.zeros(xp_shape)
    for j in range(k):
        dxp[:, j * dilation:j * dilation + Lout, :] += dcols[:, :, j * cin:(j + 1) * cin]
    dx = dxp[:, pad:, :] if causal else dxp
    return {"W": dW, "b": db}, dx


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(x, Wx, Wh, b):
    """Unidirectional LSTM from zero state; gate order (input, forget, output, cell)."""
    B, L, _ = x.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    xw = x @ Wx + b
    hs = np.zeros((B, L, H))
    steps = []
    for t in range(L):
        z = xw[:, t, :] + h @ Wh
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        o = _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t, :] = h
        steps.append((i, f, o, g, c_prev, h_prev, tc))
    return hs, (x, steps)


def lstm_backward(cache, dhs, Wx, Wh):
    x, steps = cache
    B, L, _ = x.shape
    H = Wh.shape[0]
    dz_all = np.zeros((B, L, 4 * H))
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(L)):
        i, f, o, g, c_prev, h_prev, tc = steps[t]
        dh = dhs[:, t, :] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1)
        dz_all[:, t, :] = dz
        dWh += h_prev.T @ dz
        dh_next = dz @ Wh.T
    flat_x = x.reshape(-1, x.shape[-1])
    flat_dz = dz_all.reshape(-1, 4 * H)
    grads = {"Wx": flat_x.T @ flat_dz, "Wh": dWh, "b": flat_dz.sum(axis=0)}
    return grads, dz_all @ Wx.T
