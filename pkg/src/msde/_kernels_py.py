"""Pure-Python reference implementation of the chain kernels.

Kept in lockstep with the compiled variant in ``_kernels.pyx``: identical
operation order, so both backends produce bit-identical trajectories from
the same inputs.  This module is the fallback when the extension is not
built; it is slow but exact.
"""
from __future__ import annotations

import math


def chain_poly(y, coeffs, stiff, g, h, p, z, stride, phase, out):
    """Advance a scalar linearly-implicit chain through len(z) steps.

    Drift is the polynomial sum(coeffs[j] * y**j); each step computes the
    residual drift + stiff*y, tames it, adds g*sqrt(h)*z[i] and divides by
    (1 + h*stiff).  Every ``stride``-th step (phase counts down to the next
    record) is written to ``out``.  Returns (y_end, phase, n_written).
    """
    coeffs = [float(c) for c in coeffs]
    y = float(y)
    hp = h**p
    sqh = math.sqrt(h)
    denom = 1.0 + h * stiff
    n_out = 0
    k = len(coeffs)
    for i in range(len(z)):
        drift = coeffs[k - 1]
        for j in range(k - 2, -1, -1):
            drift = drift * y + coeffs[j]
        resid = drift + stiff * y
        y = (y + h * resid / (1.0 + hp * abs(resid)) + g * sqh * float(z[i])) / denom
        phase -= 1
        if phase == 0:
            out[n_out] = y
            n_out += 1
            phase = stride
    return y, phase, n_out
