"""Central finite-difference validation of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["GradCheckReport", "grad_check"]

LossAndGrads = Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]]


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    worst_key: str
    worst_index: int
    worst_analytic: float
    worst_numeric: float
    passed: bool | None = None

    def __str__(self) -> str:
        status = "" if self.passed is None else (" PASS" if self.passed else " FAIL")
        return (
            f"grad check over {self.n_checked} coords: max rel err {self.max_rel_err:.3e} "
            f"at {self.worst_key}[{self.worst_index}] "
            f"(analytic {self.worst_analytic:.6e}, numeric {self.worst_numeric:.6e}){status}"
        )


def grad_check(
    f: LossAndGrads,
    params: dict[str, np.ndarray],
    tolerance: float | None = None,
    step: float = 1e-4,
    min_coords: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Compare ``f``'s analytic gradients to central differences.

    ``f`` maps a parameter dict to (scalar loss, gradient dict) and must be
    a pure function of the dict.  Coordinates are subsampled at random
    (at least ``min_coords``, or every coordinate when fewer exist).  The
    per-coordinate error is ``|ga - gn| / max(1, |ga|, |gn|)``.
    """
    _, analytic = f(params)
    keys = sorted(params)
    sizes = [params[k].size for k in keys]
    total = int(np.sum(sizes))
    offsets = np.cumsum([0] + sizes)

    rng = np.random.default_rng(seed)
    n = min(total, min_coords)
    chosen = np.sort(rng.choice(total, size=n, replace=False))

    max_rel = -1.0
    worst = ("", 0, 0.0, 0.0)
    for flat in chosen:
        k_idx = int(np.searchsorted(offsets, flat, side="right")) - 1
        key = keys[k_idx]
        idx = int(flat - offsets[k_idx])

        def eval_at(delta: float) -> float:
            shifted = dict(params)
            arr = params[key].copy()
            arr.flat[idx] += delta
            shifted[key] = arr
            return f(shifted)[0]

        numeric = (eval_at(step) - eval_at(-step)) / (2.0 * step)
        ga = float(analytic[key].flat[idx])
        rel = abs(ga - numeric) / max(1.0, abs(ga), abs(numeric))
        if rel > max_rel:
            max_rel = rel
            worst = (key, idx, ga, numeric)

    return GradCheckReport(
        max_rel_err=max_rel,
        n_checked=n,
        worst_key=worst[0],
        worst_index=worst[1],
        worst_analytic=worst[2],
        worst_numeric=worst[3],
        passed=None if tolerance is None else bool(max_rel < tolerance),
    )
