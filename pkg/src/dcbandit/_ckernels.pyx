# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: concrete dropout mask (+ adjoint) and the Adam step.

Loops run over raw contiguous buffers so the C compiler can vectorise the
exp/log calls. Inputs are clamped so no intermediate leaves the finite range.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

cdef double U_EPS = 1e-7


cdef void _mask_row(const double* x, const double* u, double* out, double* drop,
                    Py_ssize_t k, double p_logit, double inv_t, double scale) noexcept nogil:
    cdef Py_ssize_t j
    cdef double ui, z
    for j in range(k):
        ui = u[j]
        ui = U_EPS if ui < U_EPS else ui
        ui = 1.0 - U_EPS if ui > 1.0 - U_EPS else ui
        z = 1.0 / (1.0 + exp(-(p_logit + log(ui / (1.0 - ui))) * inv_t))
        drop[j] = z
        out[j] = x[j] * ((1.0 - z) * scale)


cdef void _mask_row_intpow(const double* x, const double* u, double* out, double* drop,
                           Py_ssize_t k, double odds_scale, int power, double scale) noexcept nogil:
    # logistic(s / t) == 1 / (1 + exp(-s) ** (1/t)); with 1/t integral the
    # power is a handful of multiplies instead of exp + log
    cdef Py_ssize_t j
    cdef double ui, q, r, z
    cdef int e
    for j in range(k):
        ui = u[j]
        ui = U_EPS if ui < U_EPS else ui
        ui = 1.0 - U_EPS if ui > 1.0 - U_EPS else ui
        q = odds_scale * (1.0 - ui) / ui
        r = 1.0
        e = power
        while e:
            if e & 1:
                r = r * q
            q = q * q
            e = e >> 1
        z = 1.0 / (1.0 + r)
        drop[j] = z
        out[j] = x[j] * ((1.0 - z) * scale)


def concrete_forward(x, u, double p_logit, double temperature):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ua = np.ascontiguousarray(np.atleast_2d(u), dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0], k = xa.shape[1], nu = ua.shape[0]
    if ua.shape[1] != k or (nu != 1 and nu != n):
        raise ValueError(f"noise shape {tuple(np.shape(u))} does not cover input {(n, k)}")
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((n, k))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] drop = np.empty((n, k))
    cdef double p = 1.0 / (1.0 + exp(-p_logit))
    cdef double scale = 1.0 / (1.0 - p)
    cdef double inv_t = 1.0 / temperature
    cdef const double* xp = &xa[0, 0] if n and k else NULL
    cdef const double* up = &ua[0, 0] if n and k else NULL
    cdef double* op = &out[0, 0] if n and k else NULL
    cdef double* dp = &drop[0, 0] if n and k else NULL
    cdef Py_ssize_t i
    cdef int power = <int> inv_t
    # |p_logit| bound keeps odds_scale ** power inside the double range
    cdef bint intpow = power == inv_t and 1 <= power <= 16 and -30.0 < p_logit < 30.0
    cdef double odds_scale = exp(-p_logit)
    with nogil:
        for i in range(n):
            if intpow:
                _mask_row_intpow(xp + i * k, up + (i * k if nu != 1 else 0), op + i * k,
                                 dp + i * k, k, odds_scale, power, scale)
            else:
                _mask_row(xp + i * k, up + (i * k if nu != 1 else 0), op + i * k, dp + i * k,
                          k, p_logit, inv_t, scale)
    return out, drop


def concrete_backward(grad_out, x, drop, double p_logit, double temperature):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ga = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] da = np.ascontiguousarray(drop, dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0], k = xa.shape[1]
    if ga.shape[0] != n or ga.shape[1] != k or da.shape[0] != n or da.shape[1] != k:
        raise ValueError("grad_out, x and drop must share one shape")
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] grad_x = np.empty((n, k))
    cdef double p = 1.0 / (1.0 + exp(-p_logit))
    cdef double scale = 1.0 / (1.0 - p)
    cdef double inv_t = 1.0 / temperature
    cdef double acc = 0.0
    cdef double z, keep, g
    cdef Py_ssize_t i, total = n * k
    cdef const double* gp = &ga[0, 0] if total else NULL
    cdef const double* xp = &xa[0, 0] if total else NULL
    cdef const double* dp = &da[0, 0] if total else NULL
    cdef double* op = &grad_x[0, 0] if total else NULL
    with nogil:
        for i in range(total):
            z = dp[i]
            keep = 1.0 - z
            g = gp[i]
            op[i] = g * (keep * scale)
            acc += g * xp[i] * (keep * p - z * keep * inv_t)
    return grad_x, scale * acc


def adam_step(cnp.ndarray param, cnp.ndarray grad, cnp.ndarray m, cnp.ndarray v,
              double step, double beta1, double beta2, double eps_hat):
    """In-place ``m, v, param`` update for one array (bias correction folded
    into ``step`` and ``eps_hat`` by the caller)."""
    if param.dtype != np.float64 or m.dtype != np.float64 or v.dtype != np.float64:
        raise TypeError("adam_step works on float64 arrays")
    if not (param.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
        raise ValueError("adam_step needs C-contiguous parameter and moment arrays")
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] g = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = param.size, i
    if g.shape[0] != n or m.size != n or v.size != n:
        raise ValueError("adam_step arrays differ in size")
    cdef double* pp = <double*> cnp.PyArray_DATA(param)
    cdef double* mp = <double*> cnp.PyArray_DATA(m)
    cdef double* vp = <double*> cnp.PyArray_DATA(v)
    cdef const double* gp = &g[0] if n else NULL
    cdef double gi, mi, vi
    with nogil:
        for i in range(n):
            gi = gp[i]
            mi = beta1 * mp[i] + (1.0 - beta1) * gi
            vi = beta2 * vp[i] + (1.0 - beta2) * gi * gi
            mp[i] = mi
            vp[i] = vi
            pp[i] -= step * mi / (sqrt(vi) + eps_hat)
