"""Numpy implementation of the element quadrature kernels.

Same signatures as the compiled ``_kernels`` module; used when the extension
is not built or ``NLSGRAPH_PURE_PYTHON`` is set.

Every kernel works on P1 elements given as arrays ``left``, ``right`` (global
DOF of the two element nodes) and ``h`` (element length), and applies the
3-point Gauss rule on each element.
"""
import numpy as np

_R = np.sqrt(15.0) / 10.0
GAUSS_X = np.array([0.5 - _R, 0.5, 0.5 + _R])
GAUSS_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _quad_values(u, left, right):
    ul = u[left]
    ur = u[right]
    # shape (3, n_elem)
    return (1.0 - GAUSS_X)[:, None] * ul[None, :] + GAUSS_X[:, None] * ur[None, :]


def power_integral(u, left, right, h, q):
    """sum_e h_e sum_k w_k |u(x_k)|^q"""
    uq = np.abs(_quad_values(u, left, right)) ** q
    return float(np.sum(h * (GAUSS_W @ uq)))


def nonlinear_load(u, left, right, h, s, n):
    """Vector b_i = int |u|^s u phi_i."""
    uq = _quad_values(u, left, right)
    f = np.abs(uq) ** s * uq * GAUSS_W[:, None]
    bl = h * ((1.0 - GAUSS_X) @ f)
    br = h * (GAUSS_X @ f)
    out = np.zeros(n)
    np.add.at(out, left, bl)
    np.add.at(out, right, br)
    return out


def weight_entries(u, left, right, h, s):
    """Element entries of W_ij = int |u|^s phi_i phi_j.

    Returns ``(w_ll, w_lr, w_rr)`` arrays, one value per element.
    """
    uq = _quad_values(u, left, right)
    f = np.abs(uq) ** s * GAUSS_W[:, None]
    a = 1.0 - GAUSS_X
    b = GAUSS_X
    return h * ((a * a) @ f), h * ((a * b) @ f), h * ((b * b) @ f)
