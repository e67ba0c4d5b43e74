"""Embedded Dormand-Prince 5(4) stepper with PI step-size control.

Works on complex arrays of any shape; the independent variable is real.
Used both for transporting flat sections along paths and for the
Schlesinger flows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepUnderflow

# Butcher tableau (Dormand & Prince 1980), FSAL.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# difference between the 5th and 4th order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFE = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.1   # step may shrink by at most 10x ...
_FAC_MAX = 5.0   # ... and grow by at most 5x per step


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    max_error: float = 0.0      # largest accepted scaled error estimate
    last_h: float | None = None

    def merge(self, other: "StepStats") -> None:
        self.accepted += other.accepted
        self.rejected += other.rejected
        self.max_error = max(self.max_error, other.max_error)
        self.last_h = other.last_h


def _scaled_norm(e: np.ndarray, y0: np.ndarray, y1: np.ndarray, tol: float) -> float:
    sk = tol * (1.0 + np.maximum(np.abs(y0), np.abs(y1)))
    return float(np.max(np.abs(e) / sk))


def _initial_step(fun, s0, y0, f0, span, tol):
    sk = tol * (1.0 + np.abs(y0))
    d0 = np.max(np.abs(y0) / sk)
    d1 = np.max(np.abs(f0) / sk)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, abs(span))
    f1 = fun(s0 + np.sign(span) * h0, y0 + np.sign(span) * h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / sk) / h0
    dmax = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dmax <= 1e-15 else (0.01 / dmax) ** 0.2
    return min(100 * h0, h1, abs(span))


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    s0: float,
    s1: float,
    tol: float,
    h0: float | None = None,
    max_steps: int = 200_000,
    stats: StepStats | None = None,
    on_step: Callable[[float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Integrate ``dy/ds = fun(s, y)`` from ``s0`` to ``s1``.

    Every accepted step has estimated local error at most ``tol`` in the
    mixed norm ``|err_k| <= tol * (1 + |y_k|)``.  Raises `StepUnderflow`
    when the controller drives the step below roundoff level, which
    happens at singularities of the right-hand side.  ``on_step(s, y)``
    is called after every accepted step.
    """
    y = np.array(y0, dtype=complex)
    if stats is None:
        stats = StepStats()
    span = s1 - s0
    if span == 0:
        return y
    direction = 1.0 if span > 0 else -1.0
    s = s0
    f = np.asarray(fun(s, y), dtype=complex)
    h = abs(h0) if h0 else _initial_step(fun, s, y, f, span, tol)
    h_min_rel = 1e-14 * max(1.0, abs(s0), abs(s1))
    err_old = 1e-4
    rejected_last = False
    n = 0
    while direction * (s1 - s) > 0:
        n += 1
        if n > max_steps:
            raise StepUnderflow(f"step budget exhausted at s={s:.17g}", s=s)
        if h < h_min_rel:
            raise StepUnderflow(f"step size underflow at s={s:.17g}", s=s)
        last = False
        if h >= direction * (s1 - s):
            h = direction * (s1 - s)
            last = True
        hs = direction * h
        k = [f]
        for i in range(1, 7):
            a = _A[i]
            yi = y + hs * sum(a[j] * k[j] for j in range(i) if a[j] != 0.0)
            k.append(np.asarray(fun(s + _C[i] * hs, yi), dtype=complex))
        y_new = yi  # stage 7 evaluates at the 5th-order solution
        err_vec = hs * sum(_E[j] * k[j] for j in range(7) if _E[j] != 0.0)
        err = _scaled_norm(err_vec, y, y_new, tol)
        if not np.isfinite(err):
            h *= 0.1
            rejected_last = True
            stats.rejected += 1
            continue
        fac11 = max(err, 1e-300) ** _EXPO
        if err <= 1.0:
            fac = fac11 / err_old ** _BETA
            fac = min(_FAC_MAX, max(_FAC_MIN, _SAFE / fac))
            if rejected_last:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            stats.accepted += 1
            stats.max_error = max(stats.max_error, err * tol)
            s = s1 if last else s + hs
            y = y_new
            f = k[6]
            h = h * fac
            if on_step is not None:
                on_step(s, y)
            rejected_last = False
        else:
            h = h * max(_FAC_MIN, _SAFE / fac11)
            stats.rejected += 1
            rejected_last = True
    stats.last_h = h
    return y
