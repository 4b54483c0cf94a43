# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_py``.

Must stay in operation-order lockstep with the pure-Python module so the
two backends agree bitwise; the build disables FP contraction for this
reason.
"""

from libc.math cimport ceil, isfinite, log

import numpy as np

__all__ = ["backend_name", "sir_log_likelihood", "sir_trajectory"]

cdef double _NEG_INF = float("-inf")


def backend_name():
    return "cython"


def sir_log_likelihood(double beta, double alpha, double i0, double n_pop,
                       t_obs, y_obs, lgam_y, double h):
    """Poisson log likelihood of removal counts under the SIR system.

    See the pure-Python twin for the full contract.
    """
    if not (isfinite(beta) and isfinite(alpha)):
        return _NEG_INF
    if beta <= 0.0 or alpha <= 0.0 or i0 < 1.0 or i0 > n_pop:
        return _NEG_INF
    cdef double[::1] t_arr = np.ascontiguousarray(t_obs, dtype=np.float64)
    cdef double[::1] y_arr = np.ascontiguousarray(y_obs, dtype=np.float64)
    cdef double[::1] lgam_arr = np.ascontiguousarray(lgam_y, dtype=np.float64)

    cdef double s = n_pop - i0
    cdef double i = i0
    cdef double r = 0.0
    cdef double t = 0.0
    cdef double ll = 0.0
    cdef double target, dt, hs, mu, y
    cdef double bsi, ai
    cdef double k1s, k1i, k1r, k2s, k2i, k2r, k3s, k3i, k3r, k4s, k4i, k4r
    cdef double s2, i2, s3, i3, s4, i4
    cdef Py_ssize_t m, n_sub, j
    for m in range(t_arr.shape[0]):
        target = t_arr[m]
        dt = target - t
        if dt < 0.0:
            raise ValueError("observation times must be nondecreasing from 0")
        if dt > 0.0:
            n_sub = <Py_ssize_t> ceil(dt / h - 1e-12)
            if n_sub < 1:
                n_sub = 1
            hs = dt / n_sub
            for j in range(n_sub):
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
        if not (isfinite(s) and isfinite(i) and isfinite(r)):
            return _NEG_INF
        mu = r
        y = y_arr[m]
        if mu < 0.0:
            if mu >= -1e-9:
                mu = 0.0
            else:
                return _NEG_INF
        if mu == 0.0:
            if y != 0.0:
                return _NEG_INF
        else:
            ll += y * log(mu) - mu - lgam_arr[m]
    return ll


def sir_trajectory(double beta, double alpha, double i0, double n_pop,
                   t_eval, double h):
    """(S, I, R) rows at each requested time, via the same RK4 stepping."""
    cdef double[::1] t_arr = np.ascontiguousarray(t_eval, dtype=np.float64)
    out_arr = np.empty((t_arr.shape[0], 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    cdef double s = n_pop - i0
    cdef double i = i0
    cdef double r = 0.0
    cdef double t = 0.0
    cdef double target, dt, hs
    cdef double bsi, ai
    cdef double k1s, k1i, k1r, k2s, k2i, k2r, k3s, k3i, k3r, k4s, k4i, k4r
    cdef double s2, i2, s3, i3, s4, i4
    cdef Py_ssize_t m, n_sub, j
    for m in range(t_arr.shape[0]):
        target = t_arr[m]
        dt = target - t
        if dt < 0.0:
            raise ValueError("evaluation times must be nondecreasing from 0")
        if dt > 0.0:
            n_sub = <Py_ssize_t> ceil(dt / h - 1e-12)
            if n_sub < 1:
                n_sub = 1
            hs = dt / n_sub
            for j in range(n_sub):
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
    return out_arr
