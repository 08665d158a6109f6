"""Finite-difference validation of every analytic gradient in the core.

The same checker gates CI: central differences on a random subsample of
coordinates, relative error |ga - gn| / max(1, |ga|, |gn|) below 1e-4.
"""

import numpy as np

from kdi.model import TowerConfig, init_detector, siamese_loss
from kdi.nncore import (
    LstmParams,
    Mode,
    dense_backward,
    dense_forward,
    grad_check,
    init_lstm,
    lstm_backward,
    lstm_forward,
)

rng = np.random.default_rng(0)

# --- a single dense layer -----------------------------------------------------

x = rng.normal(size=(4, 5))
u = rng.normal(size=(4, 3))


def dense_loss(params):
    y, cache = dense_forward(params["w"], params["b"], x)
    dw, db, _ = dense_backward(cache, u)
    return float(np.sum(y * u)), {"w": dw, "b": db}


report = grad_check(dense_loss, {"w": rng.normal(size=(5, 3)), "b": rng.normal(size=3)},
                    tolerance=1e-4)
print("dense layer:      ", report)

# --- the LSTM over a short sequence -------------------------------------------

p = init_lstm(rng, 3, 4)
xs = rng.normal(size=(2, 6, 3))
us = rng.normal(size=(2, 6, 4))


def lstm_loss(params):
    lp = LstmParams(w=params["w"], r=params["r"], b=params["b"])
    h, cache = lstm_forward(lp, xs)
    grads, _ = lstm_backward(cache, us)
    return float(np.sum(h * us)), {"w": grads.w, "r": grads.r, "b": grads.b}


report = grad_check(lstm_loss, {"w": p.w, "r": p.r, "b": p.b}, tolerance=1e-4)
print("lstm (BPTT):      ", report)

# --- the full Siamese loss, both branches, batch norm in train mode ------------

config = TowerConfig(m=10, hidden=8, embed_dim=8, dropout=0.0, recurrent_dropout=0.0)
model = init_detector(config, seed=1)
xa = rng.random((4, 10, 3))
xb = rng.random((4, 10, 3))
labels = np.array([0.0, 1.0, 1.0, 0.0])


def full_loss(params):
    loss, grads, _ = siamese_loss(
        params, model.buffers, config, xa, xb, labels, Mode.TRAIN, update_running=False
    )
    return loss, grads


report = grad_check(full_loss, model.params, tolerance=1e-4, min_coords=250)
print("full Siamese loss:", report)
