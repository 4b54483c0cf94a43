"""Pure-Python fallback for the hot likelihood kernels.

This module is a line-for-line twin of ``_kernels_cy.pyx``: same state
layout, same operation order, same libm calls, so both backends produce
bitwise-identical results (the extension is compiled with FP contraction
off for exactly this reason).  Keep the two in lockstep when editing.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["backend_name", "sir_log_likelihood", "sir_trajectory"]

_NEG_INF = float("-inf")


def backend_name() -> str:
    return "python"


def sir_log_likelihood(beta, alpha, i0, n_pop, t_obs, y_obs, lgam_y, h):
    """Poisson log likelihood of removal counts under the SIR system.

    Integrates (S, I, R) with fixed-step RK4 from t=0 with S=n_pop-i0,
    I=i0, R=0, landing exactly on every observation time, and sums the
    Poisson log-pmf of each observed count against the predicted R(t).
    ``lgam_y`` carries the data-constant log Gamma(y+1) terms, computed
    once by the caller.  Returns -inf outside the parameter domain or on
    numerical failure.
    """
    beta = float(beta)
    alpha = float(alpha)
    i0 = float(i0)
    n_pop = float(n_pop)
    if not (math.isfinite(beta) and math.isfinite(alpha)):
        return _NEG_INF
    if beta <= 0.0 or alpha <= 0.0 or i0 < 1.0 or i0 > n_pop:
        return _NEG_INF
    t_list = np.asarray(t_obs, dtype=float).tolist()
    y_list = np.asarray(y_obs, dtype=float).tolist()
    lgam_list = np.asarray(lgam_y, dtype=float).tolist()

    s = n_pop - i0
    i = i0
    r = 0.0
    t = 0.0
    ll = 0.0
    for m in range(len(t_list)):
        target = t_list[m]
        dt = target - t
        if dt < 0.0:
            raise ValueError("observation times must be nondecreasing from 0")
        if dt > 0.0:
            n_sub = int(math.ceil(dt / h - 1e-12))
            if n_sub < 1:
                n_sub = 1
            hs = dt / n_sub
            for _ in range(n_sub):
                bsi = beta * s * i
                ai = alpha * i
                k1s = -bsi
                k1i = bsi - ai
                k1r = ai
                s2 = s + 0.5 * hs * k1s
                i2 = i + 0.5 * hs * k1i
                bsi = beta * s2 * i2
                ai = alpha * i2
                k2s = -bsi
                k2i = bsi - ai
                k2r = ai
                s3 = s + 0.5 * hs * k2s
                i3 = i + 0.5 * hs * k2i
                bsi = beta * s3 * i3
                ai = alpha * i3
                k3s = -bsi
                k3i = bsi - ai
                k3r = ai
                s4 = s + hs * k3s
                i4 = i + hs * k3i
                bsi = beta * s4 * i4
                ai = alpha * i4
                k4s = -bsi
                k4i = bsi - ai
                k4r = ai
                s = s + (hs / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
                i = i + (hs / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
                r = r + (hs / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
            t = target
        if not (math.isfinite(s) and math.isfinite(i) and math.isfinite(r)):
            return _NEG_INF
        mu = r
        y = y_list[m]
        if mu < 0.0:
            if mu >= -1e-9:
                mu = 0.0
            else:
                return _NEG_INF
        if mu == 0.0:
            if y != 0.0:
                return _NEG_INF
        else:
            ll += y * math.log(mu) - mu - lgam_list[m]
    return ll


def sir_trajectory(beta, alpha, i0, n_pop, t_eval, h):
    """(S, I, R) rows at each requested time, via the same RK4 stepping."""
    beta = float(beta)
    alpha = float(alpha)
    i0 = float(i0)
    n_pop = float(n_pop)
    t_list = np.asarray(t_eval, dtype=float).tolist()
    out = np.empty((len(t_list), 3), dtype=float)

    s = n_pop - i0
    i = i0
    r = 0.0
    t = 0.0
    for m in range(len(t_list)):
        target = t_list[m]
        dt = target - t
        if dt < 0.0:
            raise ValueError("evaluation times must be nondecreasing from 0")
        if dt > 0.0:
            n_sub = int(math.ceil(dt / h - 1e-12))
            if n_sub < 1:
                n_sub = 1
            hs = dt / n_sub
            for _ in range(n_sub):
                bsi = beta * s * i
                ai = alpha * i
                k1s = -bsi
                k1i = bsi - ai
                k1r = ai
                s2 = s + 0.5 * hs * k1s
                i2 = i + 0.5 * hs * k1i
                bsi = beta * s2 * i2
                ai = alpha * i2
                k2s = -bsi
                k2i = bsi - ai
                k2r = ai
                s3 = s + 0.5 * hs * k2s
                i3 = i + 0.5 * hs * k2i
                bsi = beta * s3 * i3
                ai = alpha * i3
                k3s = -bsi
                k3i = bsi - ai
                k3r = ai
                s4 = s + hs * k3s
                i4 = i + hs * k3i
                bsi = beta * s4 * i4
                ai = alpha * i4
                k4s = -bsi
                k4i = bsi - ai
                k4r = ai
                s = s + (hs / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
                i = i + (hs / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
                r = r + (hs / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
            t = target
        out[m, 0] = s
        out[m, 1] = i
        out[m, 2] = r
    return out
