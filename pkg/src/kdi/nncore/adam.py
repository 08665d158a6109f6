"""Adam optimizer over flat name -> array parameter dicts, with L2 coupling.

The update is functional: ``adam_step`` returns fresh parameter arrays and a
fresh state, so identical inputs always produce identical outputs and the
caller controls when state is committed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "init_adam", "adam_step", "POLICY_LR_RANGE"]

# Learning-rate band used by the training policy; values outside it are
# legal (e.g. lr=0 for no-op runs) but flagged.
POLICY_LR_RANGE = (0.0001, 0.005)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2_lambda: float = 0.0
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.step_count < 0:
            raise ValueError("step_count must be nonnegative")
        if self.lr < 0 or self.l2_lambda < 0:
            raise ValueError("lr and l2_lambda must be nonnegative")


def init_adam(
    params: dict[str, np.ndarray],
    lr: float,
    l2_lambda: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    warn_policy: bool = True,
) -> AdamState:
    if warn_policy and lr != 0.0 and not POLICY_LR_RANGE[0] <= lr <= POLICY_LR_RANGE[1]:
        warnings.warn(
            f"lr={lr} outside the default policy range {POLICY_LR_RANGE}", stacklevel=2
        )
    return AdamState(
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        l2_lambda=l2_lambda,
        first_moment={k: np.zeros_like(v) for k, v in params.items()},
        second_moment={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    L2 regularization enters as ``l2_lambda * param`` added to the gradient
    before the moment updates.  Raises on non-finite gradients or mismatched
    shapes.
    """
    if set(grads) != set(params):
        raise ValueError(
            f"gradient keys {sorted(set(grads) ^ set(params))} do not match parameters"
        )
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {key!r}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {key!r}")
        if state.l2_lambda != 0.0:
            g = g + state.l2_lambda * p
        m = state.beta1 * state.first_moment[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.second_moment[key] + (1.0 - state.beta2) * (g * g)
        new_params[key] = p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        new_m[key] = m
        new_v[key] = v
    new_state = AdamState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        l2_lambda=state.l2_lambda,
        step_count=t,
        first_moment=new_m,
        second_moment=new_v,
    )
    return new_params, new_state
