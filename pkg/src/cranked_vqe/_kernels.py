"""Compiled inner loops for the sector objective (real amplitudes only).

Loops run sequentially in a fixed order, so results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def apply_rotations(vec, src, dst, sign, offsets, angles, start):
    """Apply gates start..end in order; gate g covers src[offsets[g]:offsets[g+1]]."""
    for g in range(start, angles.size):
        theta = angles[g]
        if theta == 0.0:
            continue
        c = np.cos(0.5 * theta)
        s = np.sin(0.5 * theta)
        for i in range(offsets[g], offsets[g + 1]):
            a = vec[src[i]]
            b = vec[dst[i]]
            ss = s * sign[i]
            vec[src[i]] = c * a - ss * b
            vec[dst[i]] = ss * a + c * b


@njit(cache=True)
def quadratic_form(indptr, indices, data, vec):
    """vec^T H vec for a real CSR matrix."""
    total = 0.0
    for row in range(vec.size):
        acc = 0.0
        for j in range(indptr[row], indptr[row + 1]):
            acc += data[j] * vec[indices[j]]
        total += vec[row] * acc
    return total
