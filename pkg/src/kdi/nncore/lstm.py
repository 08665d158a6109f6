"""Single-layer LSTM with full backpropagation through time.

Gate layout along the 4H axis is (input, forget, cell, output).  The
recurrent path can be masked per sequence for variational recurrent
dropout; the mask is fixed across timesteps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import require_finite, sigmoid

__all__ = ["LstmParams", "LstmGrads", "LstmCache", "init_lstm", "lstm_forward", "lstm_backward"]


@dataclass
class LstmParams:
    w: np.ndarray  # (input_dim, 4H) input weights
    r: np.ndarray  # (H, 4H) recurrent weights
    b: np.ndarray  # (4H,) biases

    def __post_init__(self) -> None:
        h = self.r.shape[0]
        if self.r.shape != (h, 4 * h):
            raise ValueError(f"recurrent weights must be (H, 4H), got {self.r.shape}")
        if self.w.shape[1] != 4 * h or self.b.shape != (4 * h,):
            raise ValueError(
                f"inconsistent gate dimensions: w {self.w.shape}, r {self.r.shape}, b {self.b.shape}"
            )

    @property
    def hidden_size(self) -> int:
        return self.r.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w.shape[0]


@dataclass
class LstmGrads:
    w: np.ndarray
    r: np.ndarray
    b: np.ndarray


@dataclass
class LstmCache:
    x: np.ndarray
    h_in: np.ndarray  # (B, T, H) masked previous hidden fed to each step
    c_prev: np.ndarray  # (B, T, H)
    gates: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]  # i, f, g, o each (B, T, H)
    tanh_c: np.ndarray  # (B, T, H)
    mask: np.ndarray | None
    params: LstmParams


def init_lstm(rng: np.random.Generator, input_dim: int, hidden: int) -> LstmParams:
    """Scaled-uniform weights; forget-gate bias starts at 1.0."""
    lim_w = np.sqrt(6.0 / (input_dim + hidden))
    lim_r = np.sqrt(6.0 / (2 * hidden))
    w = rng.uniform(-lim_w, lim_w, size=(input_dim, 4 * hidden))
    r = rng.uniform(-lim_r, lim_r, size=(hidden, 4 * hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return LstmParams(w=w, r=r, b=b)


def lstm_forward(
    params: LstmParams,
    x: np.ndarray,
    recurrent_mask: np.ndarray | None = None,
):
    """Run the recurrence over ``x`` of shape (B, T, input_dim).

    Initial hidden and cell states are zero.  Returns the full hidden-state
    trajectory (B, T, H) and the cache for :func:`lstm_backward`.
    """
    require_finite("lstm input", x)
    batch, steps, input_dim = x.shape
    if input_dim != params.input_dim:
        raise ValueError(f"input dim {input_dim} != params input dim {params.input_dim}")
    h = params.hidden_size
    if recurrent_mask is not None and recurrent_mask.shape != (batch, h):
        raise ValueError(
            f"recurrent mask shape {recurrent_mask.shape} != {(batch, h)}"
        )

    h_out = np.empty((batch, steps, h))
    h_in = np.empty((batch, steps, h))
    c_prev_all = np.empty((batch, steps, h))
    gi = np.empty((batch, steps, h))
    gf = np.empty((batch, steps, h))
    gg = np.empty((batch, steps, h))
    go = np.empty((batch, steps, h))
    tanh_c = np.empty((batch, steps, h))

    h_prev = np.zeros((batch, h))
    c_prev = np.zeros((batch, h))
    for t in range(steps):
        hm = h_prev if recurrent_mask is None else h_prev * recurrent_mask
        z = x[:, t] @ params.w + hm @ params.r + params.b
        i = sigmoid(z[:, :h])
        f = sigmoid(z[:, h : 2 * h])
        g = np.tanh(z[:, 2 * h : 3 * h])
        o = sigmoid(z[:, 3 * h :])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h_t = o * tc

        h_in[:, t] = hm
        c_prev_all[:, t] = c_prev
        gi[:, t], gf[:, t], gg[:, t], go[:, t] = i, f, g, o
        tanh_c[:, t] = tc
        h_out[:, t] = h_t
        h_prev, c_prev = h_t, c

    cache = LstmCache(
        x=x,
        h_in=h_in,
        c_prev=c_prev_all,
        gates=(gi, gf, gg, go),
        tanh_c=tanh_c,
        mask=recurrent_mask,
        params=params,
    )
    return h_out, cache


def lstm_backward(cache: LstmCache, dh_all: np.ndarray):
    """Exact gradients of the forward map.

    ``dh_all`` holds the upstream gradient w.r.t. every hidden state,
    shape (B, T, H).  Returns (LstmGrads, dx).
    """
    gi, gf, gg, go = cache.gates
    batch, steps, h = gi.shape
    if dh_all.shape != (batch, steps, h):
        raise ValueError(f"grad shape {dh_all.shape} does not match cache {(batch, steps, h)}")
    p = cache.params

    dw = np.zeros_like(p.w)
    dr = np.zeros_like(p.r)
    db = np.zeros_like(p.b)
    dx = np.empty_like(cache.x)
    dh_rec = np.zeros((batch, h))
    dc = np.zeros((batch, h))
    dz = np.empty((batch, 4 * h))

    for t in range(steps - 1, -1, -1):
        i, f, g, o = gi[:, t], gf[:, t], gg[:, t], go[:, t]
        tc = cache.tanh_c[:, t]
        dh = dh_all[:, t] + dh_rec
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :h] = dc * g * i * (1.0 - i)
        dz[:, h : 2 * h] = dc * cache.c_prev[:, t] * f * (1.0 - f)
        dz[:, 2 * h : 3 * h] = dc * i * (1.0 - g * g)
        dz[:, 3 * h :] = dh * tc * o * (1.0 - o)

        dw += cache.x[:, t].T @ dz
        dr += cache.h_in[:, t].T @ dz
        db += dz.sum(axis=0)
        dx[:, t] = dz @ p.w.T
        dh_rec = dz @ p.r.T
        if cache.mask is not None:
            dh_rec = dh_rec * cache.mask
        dc = dc * f

    return LstmGrads(w=dw, r=dr, b=db), dx
