"""Adaptive explicit ODE integration (Dormand-Prince 5(4) embedded pair).

Callers drive the stepper loop themselves, which keeps event detection
(transversal crossings, box exits) in the caller where the geometry lives.
Step rejection below the minimum step size doubles as singularity detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import AnalysisError

# Dormand-Prince tableau
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
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


class StepRejectionError(AnalysisError):
    """Step size collapsed below the floor: treated as a singularity."""


class MaxStepsError(AnalysisError):
    """Step budget exhausted before reaching the integration target."""


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0


@dataclass
class Dopri5:
    """Scalar/sequence ODE stepper; y is a tuple of floats.

    ``rhs(t, y) -> tuple`` may raise to signal leaving the ODE's domain,
    which surfaces as StepRejectionError after the step size collapses.
    """

    rhs: object
    t: float
    y: tuple
    direction: float = 1.0
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 100000
    stats: StepStats = field(default_factory=StepStats)
    _h: float = 0.0
    _f0: tuple = None

    def __post_init__(self):
        self.y = tuple(float(v) for v in self.y)
        self.direction = 1.0 if self.direction >= 0 else -1.0
        self._f0 = self.rhs(self.t, self.y)

    def _error_norm(self, y0, y1, err):
        acc = 0.0
        for e, a, b in zip(err, y0, y1):
            scale = self.atol + self.rtol * max(abs(a), abs(b))
            acc += (e / scale) ** 2
        return math.sqrt(acc / len(err))

    def step(self, t_limit: float):
        """Advance one accepted step, never beyond ``t_limit``.

        Returns (t_new, y_new).  The step size adapts; the last step is
        clipped exactly onto ``t_limit``.
        """
        span = abs(t_limit - self.t)
        if span == 0.0:
            return self.t, self.y
        if self._h == 0.0:
            self._h = min(span, max(1e-6, 0.01 * span))
        h_floor = max(1e-14, 1e-14 * abs(self.t), 1e-12 * span if span < 1 else 1e-14)
        while True:
            if self.stats.accepted + self.stats.rejected >= self.max_steps:
                raise MaxStepsError("ODE step budget exhausted")
            h = min(self._h, span)
            dt = self.direction * h
            try:
                t1, y1, err, f_last = self._attempt(dt)
            except (ValueError, ZeroDivisionError, OverflowError, ArithmeticError):
                self.stats.rejected += 1
                self._h = h / 2.0
                if self._h < h_floor:
                    raise StepRejectionError(
                        "step size collapsed (singular right-hand side)"
                    )
                continue
            norm = self._error_norm(self.y, y1, err)
            if norm <= 1.0 or h <= h_floor:
                self.stats.accepted += 1
                self.t, self.y, self._f0 = t1, y1, f_last
                factor = 5.0 if norm == 0.0 else min(5.0, max(0.2, 0.9 * norm ** -0.2))
                self._h = h * factor
                return self.t, self.y
            self.stats.rejected += 1
            self._h = max(h * max(0.2, 0.9 * norm ** -0.2), h_floor / 2)
            if self._h < h_floor:
                raise StepRejectionError(
                    "step size collapsed (singular right-hand side)"
                )

    def _attempt(self, dt):
        k = [self._f0]
        n = len(self.y)
        for s in range(1, 7):
            ts = self.t + _C[s] * dt
            ys = tuple(
                self.y[i] + dt * sum(_A[s][j] * k[j][i] for j in range(s))
                for i in range(n)
            )
            k.append(self.rhs(ts, ys))
        y1 = tuple(
            self.y[i] + dt * sum(_B5[j] * k[j][i] for j in range(7)) for i in range(n)
        )
        err = tuple(dt * sum(_E[j] * k[j][i] for j in range(7)) for i in range(n))
        for v in y1:
            if not math.isfinite(v):
                raise ArithmeticError("non-finite state")
        return self.t + dt, y1, err, k[6]


def integrate_to(rhs, t0, y0, t1, rtol=1e-9, atol=1e-12, max_steps=100000,
                 observer=None):
    """Integrate from t0 to t1; returns (y(t1), StepStats).

    ``observer(t, y)`` is called after every accepted step when given.
    """
    if t1 == t0:
        return tuple(float(v) for v in y0), StepStats()
    stepper = Dopri5(rhs, t0, tuple(y0), direction=1.0 if t1 > t0 else -1.0,
                     rtol=rtol, atol=atol, max_steps=max_steps)
    guard = 0
    while (stepper.t - t1) * stepper.direction < 0:
        stepper.step(t1)
        if observer is not None:
            observer(stepper.t, stepper.y)
        guard += 1
        if guard > max_steps:
            raise MaxStepsError("ODE step budget exhausted")
    return stepper.y, stepper.stats


def rk4_step(rhs, t, y, dt):
    """One classical fixed-size Runge-Kutta step."""
    k1 = rhs(t, y)
    n = len(y)
    y2 = tuple(y[i] + 0.5 * dt * k1[i] for i in range(n))
    k2 = rhs(t + 0.5 * dt, y2)
    y3 = tuple(y[i] + 0.5 * dt * k2[i] for i in range(n))
    k3 = rhs(t + 0.5 * dt, y3)
    y4 = tuple(y[i] + dt * k3[i] for i in range(n))
    k4 = rhs(t + dt, y4)
    return tuple(
        y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)
    )


def bisect_root(fn, lo, hi, xtol=1e-13, max_iter=200):
    """Root of a scalar function on a bracketing interval (secant-accelerated)."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise AnalysisError(f"root not bracketed on [{lo}, {hi}]")
    for _ in range(max_iter):
        if hi - lo <= xtol:
            break
        # secant candidate, clipped into the bracket; fall back to midpoint
        denom = fhi - flo
        mid = 0.5 * (lo + hi)
        if denom != 0.0:
            cand = lo - flo * (hi - lo) / denom
            if not (lo + 0.1 * xtol < cand < hi - 0.1 * xtol):
                cand = mid
        else:
            cand = mid
        fc = fn(cand)
        if fc == 0.0:
            return cand
        if flo * fc < 0:
            hi, fhi = cand, fc
        else:
            lo, flo = cand, fc
    return 0.5 * (lo + hi)
