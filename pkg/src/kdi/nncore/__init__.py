"""Minimal dense/recurrent numerical core with exact analytic gradients.

Float64 throughout; forward passes are deterministic given parameters,
inputs, mode, and seed.  Every backward pass is validated against central
finite differences (see :mod:`kdi.nncore.gradcheck`).
"""

from .adam import POLICY_LR_RANGE, AdamState, adam_step, init_adam
from .checkpoint import FORMAT_VERSION, CheckpointError, load_arrays, save_arrays
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    BatchNormParams,
    Mode,
    batchnorm_backward,
    batchnorm_forward,
    dense_backward,
    dense_forward,
    dropout,
    dropout_backward,
    init_batchnorm,
    recurrent_dropout_mask,
    require_finite,
    sigmoid,
    tanh_backward,
    tanh_forward,
)
from .lstm import LstmCache, LstmGrads, LstmParams, init_lstm, lstm_backward, lstm_forward

__all__ = [
    "Mode",
    "AdamState",
    "adam_step",
    "init_adam",
    "POLICY_LR_RANGE",
    "CheckpointError",
    "FORMAT_VERSION",
    "save_arrays",
    "load_arrays",
    "GradCheckReport",
    "grad_check",
    "BatchNormParams",
    "init_batchnorm",
    "batchnorm_forward",
    "batchnorm_backward",
    "dense_forward",
    "dense_backward",
    "tanh_forward",
    "tanh_backward",
    "dropout",
    "dropout_backward",
    "recurrent_dropout_mask",
    "require_finite",
    "sigmoid",
    "LstmParams",
    "LstmGrads",
    "LstmCache",
    "init_lstm",
    "lstm_forward",
    "lstm_backward",
]
