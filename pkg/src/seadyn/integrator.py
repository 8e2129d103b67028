"""Dormand-Prince 5(4) embedded Runge-Kutta stepper with sample-time landing.

Steps are clipped so that every requested sample time is hit exactly; no
interpolation is involved, so recorded states are genuine accepted states
(after any post-step projection).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Dormand & Prince (1980), 5th-order propagation, 4th-order embedded estimate
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_HAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_HAT

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0


class StepSizeUnderflow(RuntimeError):
    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow at t = {t:.6g} (h = {h:.3e})")
        self.t = t
        self.h = h


@dataclass
class IntegratorStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0


def dopri54(fun: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, sample_times: np.ndarray,
            rtol: float, atol: float, h0: float, hmax: float,
            post_step: Callable[[np.ndarray], np.ndarray] | None = None,
            on_sample: Callable[[float, np.ndarray], bool] | None = None) -> IntegratorStats:
    """Integrate y' = fun(t, y) from sample_times[0] through every sample time.

    ``post_step`` maps each accepted state (projection); ``on_sample`` is called
    at every sample time including the first and may return True to stop.
    Raises :class:`StepSizeUnderflow` when the controller cannot make progress.
    """
    stats = IntegratorStats()
    t = float(sample_times[0])
    y = np.array(y0, dtype=complex)
    if on_sample is not None and on_sample(t, y):
        return stats
    k = np.empty((7,) + y.shape, dtype=complex)
    k[0] = fun(t, y)
    stats.evaluations += 1
    h = min(h0, hmax)
    for t_next in sample_times[1:]:
        t_next = float(t_next)
        while t < t_next:
            remaining = t_next - t
            clipped = h >= remaining
            h_try = remaining if clipped else h
            if h_try < 1e-14 * max(1.0, abs(t)):
                raise StepSizeUnderflow(t, h_try)
            for i in range(1, 7):
                dy = sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
                k[i] = fun(t + _C[i] * h_try, y + h_try * dy)
            stats.evaluations += 6
            y_new = y + h_try * sum(b * k[j] for j, b in enumerate(_B) if b != 0.0)
            err_vec = h_try * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2)))
            if not np.isfinite(err):
                h = 0.25 * h_try
                stats.rejected += 1
                continue
            if err <= 1.0:
                t = t_next if clipped else t + h_try
                if post_step is not None:
                    y_new = post_step(y_new)
                    k[0] = fun(t, y_new)
                    stats.evaluations += 1
                else:
                    k[0] = k[6]
                y = y_new
                stats.accepted += 1
                fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
                h_new = h_try * fac
                h = min(hmax, max(h_new, h) if clipped else h_new)
            else:
                stats.rejected += 1
                h = h_try * max(FAC_MIN, SAFETY * err ** -0.2)
        if on_sample is not None and on_sample(t, y):
            break
    return stats
