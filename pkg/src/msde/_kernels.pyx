# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled chain kernels.

Operation-for-operation identical to ``_kernels_py`` so that switching
backends never changes a trajectory, only its cost.
"""
from libc.math cimport fabs, pow, sqrt


def chain_poly(double y, double[::1] coeffs, double stiff, double g, double h,
               double p, double[::1] z, long stride, long phase,
               double[::1] out):
    """Advance a scalar linearly-implicit chain through len(z) steps.

    See the pure-Python twin for the full contract.
    """
    cdef double hp = pow(h, p)
    cdef double sqh = sqrt(h)
    cdef double denom = 1.0 + h * stiff
    cdef Py_ssize_t n_out = 0
    cdef Py_ssize_t k = coeffs.shape[0]
    cdef Py_ssize_t i, j
    cdef double drift, resid
    for i in range(z.shape[0]):
        drift = coeffs[k - 1]
        for j in range(k - 2, -1, -1):
            drift = drift * y + coeffs[j]
        resid = drift + stiff * y
        y = (y + h * resid / (1.0 + hp * fabs(resid)) + g * sqh * z[i]) / denom
        phase -= 1
        if phase == 0:
            out[n_out] = y
            n_out += 1
            phase = stride
    return y, phase, n_out
