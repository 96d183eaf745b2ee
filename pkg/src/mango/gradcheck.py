"""Central finite-difference utilities.

Deliberately independent of the reverse-mode machinery: these only call a
black-box scalar function, so they can serve as the oracle that checks it.
"""

from __future__ import annotations

import numpy as np


def finite_difference(f, arrays, h: float = 1e-5):
    """Central-difference gradient of scalar f(arrays) w.r.t. each array.

    arrays are mutated in place during probing and restored afterwards.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f())
            flat[i] = orig - h
            fm = float(f())
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric, floor: float = 1e-4) -> float:
    """Worst relative error, with an absolute floor on the denominator so
    near-zero gradient pairs (e.g. dead relu paths) compare sanely."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
