# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element quadrature kernels (3-point Gauss on P1 elements)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

cnp.import_array()

cdef double _R = sqrt(15.0) / 10.0
cdef double X0 = 0.5 - _R
cdef double X1 = 0.5
cdef double X2 = 0.5 + _R
cdef double W0 = 5.0 / 18.0
cdef double W1 = 8.0 / 18.0
cdef double W2 = 5.0 / 18.0


cdef inline double _ipow(double x, long k) nogil:
    cdef double r = 1.0
    while k:
        if k & 1:
            r *= x
        x *= x
        k >>= 1
    return r


cdef inline double _apow(double x, double q, long k) nogil:
    # k >= 0: q is that integer and squaring replaces the libm call
    if k >= 0:
        return _ipow(fabs(x), k)
    return pow(fabs(x), q)


cdef inline long _int_exponent(double q):
    if q >= 0.0 and q <= 64.0 and q == <double><long>q:
        return <long>q
    return -1


def power_integral(const double[::1] u, const long[::1] left, const long[::1] right,
                   const double[::1] h, double q):
    cdef Py_ssize_t e, n = left.shape[0]
    cdef double ul, ur, acc = 0.0, t
    cdef long k = _int_exponent(q)
    with nogil:
        for e in range(n):
            ul = u[left[e]]
            ur = u[right[e]]
            t = (W0 * _apow((1.0 - X0) * ul + X0 * ur, q, k)
                 + W1 * _apow((1.0 - X1) * ul + X1 * ur, q, k)
                 + W2 * _apow((1.0 - X2) * ul + X2 * ur, q, k))
            acc += h[e] * t
    return acc


def nonlinear_load(const double[::1] u, const long[::1] left, const long[::1] right,
                   const double[::1] h, double s, Py_ssize_t n):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, m = left.shape[0]
    cdef double ul, ur, q0, q1, q2, f0, f1, f2
    cdef long k = _int_exponent(s)
    with nogil:
        for e in range(m):
            ul = u[left[e]]
            ur = u[right[e]]
            q0 = (1.0 - X0) * ul + X0 * ur
            q1 = (1.0 - X1) * ul + X1 * ur
            q2 = (1.0 - X2) * ul + X2 * ur
            f0 = W0 * _apow(q0, s, k) * q0
            f1 = W1 * _apow(q1, s, k) * q1
            f2 = W2 * _apow(q2, s, k) * q2
            out[left[e]] += h[e] * ((1.0 - X0) * f0 + (1.0 - X1) * f1 + (1.0 - X2) * f2)
            out[right[e]] += h[e] * (X0 * f0 + X1 * f1 + X2 * f2)
    return out_arr


def weight_entries(const double[::1] u, const long[::1] left, const long[::1] right,
                   const double[::1] h, double s):
    cdef Py_ssize_t e, m = left.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wll_arr = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wlr_arr = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wrr_arr = np.empty(m)
    cdef double[::1] wll = wll_arr
    cdef double[::1] wlr = wlr_arr
    cdef double[::1] wrr = wrr_arr
    cdef double ul, ur, f0, f1, f2
    cdef long k = _int_exponent(s)
    with nogil:
        for e in range(m):
            ul = u[left[e]]
            ur = u[right[e]]
            f0 = W0 * _apow((1.0 - X0) * ul + X0 * ur, s, k)
            f1 = W1 * _apow((1.0 - X1) * ul + X1 * ur, s, k)
            f2 = W2 * _apow((1.0 - X2) * ul + X2 * ur, s, k)
            wll[e] = h[e] * ((1.0 - X0) * (1.0 - X0) * f0 + (1.0 - X1) * (1.0 - X1) * f1
                             + (1.0 - X2) * (1.0 - X2) * f2)
            wlr[e] = h[e] * ((1.0 - X0) * X0 * f0 + (1.0 - X1) * X1 * f1 + (1.0 - X2) * X2 * f2)
            wrr[e] = h[e] * (X0 * X0 * f0 + X1 * X1 * f1 + X2 * X2 * f2)
    return wll_arr, wlr_arr, wrr_arr
