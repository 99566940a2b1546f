"""Autoregressive multi-step rollout with backpropagation through the feedback.

Layout of one rollout over ``M`` steps::

    history  rows 0 .. W-1            (last row's exogenous slots <- exo[0])
    step j   window = rows j .. j+W-1  ->  v_j = model(window)
             append row (v_j | exo[j+1])            for j + 1 < M
    position p_j = x_start + T * sum(v_0 .. v_j)

``feedback`` names the channels that predictions are written into,
``exogenous`` the channels supplied by ``exo`` (tension plan, commands).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RolloutResult:
    velocities: np.ndarray  # (B, M, D)
    positions: np.ndarray  # (B, M, D)
    caches: list | None
    buffer_shape: tuple


def rollout(model, history, exo, x_start, T: float, feedback, exogenous,
            teacher=None, keep_cache: bool = False) -> RolloutResult:
    """Roll ``model`` forward ``M = exo.shape[1]`` steps.

    With ``teacher`` (shape ``(B, M - 1, len(feedback))``) the appended rows
    carry those values instead of the predictions (teacher forcing).
    """
    history = np.asarray(history, dtype=float)
    exo = np.asarray(exo, dtype=float)
    x_start = np.asarray(x_start, dtype=float)
    squeeze = history.ndim == 2
    if squeeze:
        history, exo, x_start = history[None], exo[None], x_start[None]
        if teacher is not None:
            teacher = np.asarray(teacher, dtype=float)[None]
    B, W, C = history.shape
    M = exo.shape[1]
    if exo.shape != (B, M, len(exogenous)):
        raise ValueError(f"exogenous plan shape {exo.shape} != ({B}, {M}, {len(exogenous)})")
    feedback = list(feedback)
    exogenous = list(exogenous)
    buf = np.zeros((B, W + M - 1, C))
    buf[:, :W] = history
    buf[:, W - 1, exogenous] = exo[:, 0]
    D = model.spec.output_dim
    vel = np.zeros((B, M, D))
    caches = [] if keep_cache else None
    for j in range(M):
        if keep_cache:
            v, cache = model.forward_cached(buf[:, j:j + W])
            caches.append(cache)
        else:
            v = model.forward(buf[:, j:j + W])
        vel[:, j] = v
        if j + 1 < M:
            row = W + j
            buf[:, row, feedback] = v[:, :len(feedback)] if teacher is None else teacher[:, j]
            buf[:, row, exogenous] = exo[:, j + 1]
    pos = x_start[:, None, :D] + T * np.cumsum(vel, axis=1)
    if squeeze:
        return RolloutResult(vel[0], pos[0], caches, buf.shape)
    return RolloutResult(vel, pos, caches, buf.shape)


def rollout_backward(model, result: RolloutResult, T: float, feedback, exogenous,
                     d_positions=None, d_velocities=None, teacher_forced: bool = False):
    """Gradients of a scalar loss through a cached rollout.

    Returns ``(param_grads, d_history, d_exo)``. Under teacher forcing the
    appended feedback rows are data, so no gradient flows back through them.
    """
    if result.caches is None:
        raise RuntimeError("rollout was not run with keep_cache=True")
    vel = result.velocities
    squeeze = vel.ndim == 2
    if squeeze:
        vel = vel[None]
        d_positions = None if d_positions is None else np.asarray(d_positions)[None]
        d_velocities = None if d_velocities is None else np.asarray(d_velocities)[None]
    B, M, D = vel.shape
    _, Lbuf, C = result.buffer_shape
    W = Lbuf - M + 1
    feedback = list(feedback)
    exogenous = list(exogenous)
    dv = np.zeros((B, M, D))
    if d_positions is not None:
        # p_j depends on v_i for i <= j
        dv += T * np.cumsum(d_positions[:, ::-1], axis=1)[:, ::-1]
    if d_velocities is not None:
        dv += d_velocities
    dbuf = np.zeros((B, Lbuf, C))
    grads = {}
    for j in reversed(range(M)):
        if j + 1 < M and not teacher_forced:
            dv[:, j, :len(feedback)] += dbuf[:, W + j, feedback]
        g, dX = model.backward(result.caches[j], dv[:, j])
        for k, val in g.items():
            grads[k] = grads[k] + val if k in grads else val
        dbuf[:, j:j + W] += dX
    d_exo = np.zeros((B, M, len(exogenous)))
    d_exo[:, 0] = dbuf[:, W - 1, exogenous]
    for j in range(1, M):
        d_exo[:, j] = dbuf[:, W - 1 + j, exogenous]
    d_hist = dbuf[:, :W].copy()
    d_hist[:, W - 1, exogenous] = 0.0
    if squeeze:
        return grads, d_hist[0], d_exo[0]
    return grads, d_hist, d_exo


def rollout_loss(model, history, exo, x_start, x_true, T: float, feedback, exogenous,
                 teacher=None, with_grad: bool = True):
    """Mean squared position error over the rollout and its parameter gradients.

    ``x_true`` has shape ``(B, K, D)``: true positions after each step.
    """
    res = rollout(model, history, exo, x_start, T, feedback, exogenous,
                  teacher=teacher, keep_cache=with_grad)
    pos = res.positions
    err = pos - np.asarray(x_true, dtype=float)
    n = err.shape[0] * err.shape[1] if err.ndim == 3 else err.shape[0]
    loss = float(np.sum(err * err) / n)
    if not with_grad:
        return loss, None
    grads, _, _ = rollout_backward(model, res, T, feedback, exogenous,
                                   d_positions=2.0 * err / n, teacher_forced=teacher is not None)
    return loss, grads
