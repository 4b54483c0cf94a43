"""ODE integration and scalar root solving.

Both integrators land exactly on every requested output time instead of
interpolating, so likelihood evaluations carry no interpolation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IntegrationError",
    "RootSolveError",
    "Trajectory",
    "IntegratorConfig",
    "rk4_integrate",
    "adaptive_integrate",
    "solve_scalar_root",
]


class IntegrationError(RuntimeError):
    """Integration could not proceed (non-finite state or step budget hit)."""


class RootSolveError(RuntimeError):
    """Scalar root solve failed (no sign change or non-finite residual)."""


@dataclass(frozen=True)
class Trajectory:
    """States sampled at strictly increasing times; one row per time."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ValueError("trajectory needs one state row per time")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(states))):
            raise ValueError("trajectory entries must be finite")

    def state_at(self, index: int) -> np.ndarray:
        return self.states[index]


@dataclass(frozen=True)
class IntegratorConfig:
    """How to integrate a model's vector field during likelihood evaluation."""

    method: str = "adaptive"  # "fixed_rk4" or "adaptive"
    step: float = 0.1
    rtol: float = 1e-8
    atol: float = 1e-10
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("fixed_rk4", "adaptive"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not (0.0 < self.rtol < 1.0 and 0.0 < self.atol < 1.0):
            raise ValueError("rtol and atol must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def _check_finite(y: np.ndarray, t: float):
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t={t:g}")


def _rk4_step(field, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = np.asarray(field(t, y), dtype=float)
    k2 = np.asarray(field(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(field(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(field(t + h, y + h * k3), dtype=float)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(field, x0, t_grid, h: float) -> Trajectory:
    """Classical RK4 over t_grid with step <= h, landing on every grid time.

    ``field(t, y) -> dy/dt``; the reported times are exactly the requested
    grid (bitwise), with each grid interval subdivided uniformly.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if t_grid.size > 1 and not np.all(np.diff(t_grid) > 0):
        raise ValueError("t_grid must be strictly increasing")
    y = np.asarray(x0, dtype=float).copy()
    _check_finite(y, t_grid[0])
    out = np.empty((t_grid.size, y.size))
    out[0] = y
    for idx in range(1, t_grid.size):
        t0, t1 = t_grid[idx - 1], t_grid[idx]
        span = t1 - t0
        n_sub = max(1, int(math.ceil(span / h - 1e-12)))
        hs = span / n_sub
        t = t0
        for _ in range(n_sub):
            y = _rk4_step(field, t, y, hs)
            t += hs
            _check_finite(y, t)
        out[idx] = y
    return Trajectory(times=t_grid.copy(), states=out)


# Dormand-Prince 5(4) tableau.
_DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
_DP_B4 = (
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
)


def _dp_step(field, t, y, h):
    k = []
    for stage in range(7):
        yi = y
        if stage:
            acc = _DP_A[stage][0] * k[0]
            for j in range(1, stage):
                acc = acc + _DP_A[stage][j] * k[j]
            yi = y + h * acc
        k.append(np.asarray(field(t + _DP_C[stage] * h, yi), dtype=float))
    y5 = y + h * sum(b * ki for b, ki in zip(_DP_B5, k))
    y4 = y + h * sum(b * ki for b, ki in zip(_DP_B4, k))
    return y5, y5 - y4


def adaptive_integrate(field, x0, t_span, t_eval, rtol=1e-8, atol=1e-10, max_steps=1_000_000) -> Trajectory:
    """Embedded RK 5(4) pair with per-step error control.

    Steps are clipped so the solution is evaluated exactly at every
    ``t_eval`` point (all of which must lie inside ``t_span``).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 >= t0:
        raise ValueError("t_span must satisfy t1 >= t0")
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size == 0:
        raise ValueError("t_eval must be a nonempty 1-d sequence")
    if t_eval.size > 1 and not np.all(np.diff(t_eval) > 0):
        raise ValueError("t_eval must be strictly increasing")
    if t_eval[0] < t0 - 1e-12 or t_eval[-1] > t1 + 1e-12:
        raise ValueError("t_eval must lie within t_span")

    y = np.asarray(x0, dtype=float).copy()
    _check_finite(y, t0)
    out = np.empty((t_eval.size, y.size))
    idx = 0
    if t_eval[0] == t0:
        out[0] = y
        idx = 1
    t = t0
    span = max(t1 - t0, 1e-300)
    h = span / 100.0
    steps = 0
    while idx < t_eval.size:
        target = t_eval[idx]
        while t < target:
            if steps >= max_steps:
                raise IntegrationError(f"max_steps={max_steps} exceeded at t={t:g}")
            clipped = min(h, target - t)
            y_new, err = _dp_step(field, t, y, clipped)
            _check_finite(y_new, t + clipped)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = math.sqrt(float(np.mean((err / scale) ** 2)))
            steps += 1
            if err_norm <= 1.0:
                t += clipped
                y = y_new
                if err_norm == 0.0:
                    factor = 5.0
                else:
                    factor = min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
                h = clipped * factor
            else:
                h = clipped * max(0.2, 0.9 * err_norm ** -0.2)
        out[idx] = y
        t = target
        idx += 1
    return Trajectory(times=t_eval.copy(), states=out)


def solve_scalar_root(residual, bracket, tol: float) -> float:
    """Root of a continuous scalar function inside a sign-change bracket.

    Secant steps with bisection safeguard; returns x with
    ``|residual(x)| <= tol`` or bracket width <= tol.  Never leaves the
    initial bracket.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise ValueError("bracket must satisfy lo < hi")
    f_lo = float(residual(lo))
    f_hi = float(residual(hi))
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)):
        raise RootSolveError(f"non-finite residual at bracket endpoints ({f_lo!r}, {f_hi!r})")
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise RootSolveError(f"no sign change on bracket [{lo:g}, {hi:g}]")

    if abs(f_lo) <= abs(f_hi):
        best_x, best_f = lo, abs(f_lo)
    else:
        best_x, best_f = hi, abs(f_hi)
    x_prev, f_prev = lo, f_lo
    x_cur, f_cur = hi, f_hi
    for _ in range(200):
        if best_f <= tol or (hi - lo) <= tol:
            return best_x
        # Secant candidate; fall back to bisection when it is uninformative
        # or escapes the current bracket.
        denom = f_cur - f_prev
        if denom != 0.0:
            x_new = x_cur - f_cur * (x_cur - x_prev) / denom
        else:
            x_new = 0.5 * (lo + hi)
        if not (lo < x_new < hi) or x_new in (x_cur, x_prev):
            x_new = 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            return best_x  # bracket exhausted at float resolution
        f_new = float(residual(x_new))
        if not math.isfinite(f_new):
            raise RootSolveError(f"non-finite residual at x={x_new:g}")
        if abs(f_new) < best_f:
            best_x, best_f = x_new, abs(f_new)
        if f_new == 0.0:
            return x_new
        if f_lo * f_new < 0.0:
            hi, f_hi = x_new, f_new
        else:
            lo, f_lo = x_new, f_new
        x_prev, f_prev = x_cur, f_cur
        x_cur, f_cur = x_new, f_new
    return best_x
