# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled orbit iteration.

Every formula repeats the numpy reference in ``systems.py`` operation by
operation so that both backends produce identical floats (up to ``sin`` in
the skew product, which comes from libm here and from numpy there).
"""
from libc.math cimport floor, sin

import numpy as np

cdef double TWO_PI = 6.283185307179586


cdef inline double _wrap(double v, double lo, double length) noexcept nogil:
    cdef double y = v - lo
    cdef double r = y - length * floor(y / length)
    if r < 0.0:
        r = r + length
    if r >= length:
        r = 0.0
    return r + lo


cdef inline void _image(int code, const double[::1] p, double* x, double* y) noexcept nogil:
    cdef double u, t, dx, dy, w, beta
    if code == 0:
        y[0] = p[0] * x[0]
    elif code == 1:
        u = x[0]
        if u >= -1.0:
            y[0] = 1.0 - 2.0 * u * u
        else:
            y[0] = 2.0 * (u + 2.0) * (u + 2.0) - 3.0
    elif code == 2:
        u = x[0]
        if u >= -2.0:
            y[0] = p[0] - u * u
        elif u <= -3.0:
            y[0] = (u + 5.0) * (u + 5.0) - 5.0 - p[0]
        else:
            t = u + 3.0
            y[0] = ((((p[6] * t + p[5]) * t + p[4]) * t + p[3]) * t + p[2]) * t + p[1]
    elif code == 3:
        y[0] = p[0] * x[0] + p[3] * x[1] * x[1]
        y[1] = p[1] + p[2] * sin(TWO_PI * x[0]) - x[1] * x[1]
    elif code == 4:
        dx = x[0] - p[0]
        dy = x[1] - p[1]
        u = (dx * dx + dy * dy) / (p[2] * p[2])
        w = 1.0 - u
        if u < 1.0:
            beta = w * w * w
        else:
            beta = 0.0
        y[0] = 3.0 * x[0] - p[3] * beta * dx
        y[1] = 3.0 * x[1]


def iterate(int code, const double[::1] params, const double[:, ::1] x0,
            const double[:, :, ::1] noise, const double[::1] lows,
            const double[::1] lengths, const unsigned char[::1] periodic):
    """States ``(m, n + 1, D)`` of ``x_{j+1} = wrap(f(x_j) + t_{j+1})``."""
    cdef Py_ssize_t m = x0.shape[0]
    cdef Py_ssize_t D = x0.shape[1]
    cdef Py_ssize_t n = noise.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double x[2]
    cdef double y[2]
    if D > 2 or noise.shape[0] != m or noise.shape[2] != D:
        raise ValueError("shape mismatch between x0 and noise")
    out_arr = np.empty((m, n + 1, D), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for i in range(m):
            for c in range(D):
                x[c] = x0[i, c]
                out[i, 0, c] = x[c]
            for j in range(n):
                _image(code, params, x, y)
                for c in range(D):
                    y[c] = y[c] + noise[i, j, c]
                    if periodic[c]:
                        y[c] = _wrap(y[c], lows[c], lengths[c])
                    x[c] = y[c]
                    out[i, j + 1, c] = x[c]
    return out_arr


def occupation(int code, const double[::1] params, const double[:, ::1] x0,
               const double[:, :, ::1] noise, const double[::1] lows,
               const double[::1] lengths, const unsigned char[::1] periodic,
               const long[::1] bins, long skip, double[::1] counts):
    """Iterate like :func:`iterate` but only bin the visited states.

    States ``x_skip .. x_{n-1}`` of each orbit are binned (row-major over
    coordinates) into ``counts``.  Returns the states ``x_n`` of shape
    ``(m, D)`` so that callers can chain chunks.
    """
    cdef Py_ssize_t m = x0.shape[0]
    cdef Py_ssize_t D = x0.shape[1]
    cdef Py_ssize_t n = noise.shape[1]
    cdef Py_ssize_t i, j, c
    cdef long k, idx
    cdef double x[2]
    cdef double y[2]
    cdef double h
    if D > 2 or noise.shape[0] != m or noise.shape[2] != D:
        raise ValueError("shape mismatch between x0 and noise")
    last_arr = np.empty((m, D), dtype=np.float64)
    cdef double[:, ::1] last = last_arr
    with nogil:
        for i in range(m):
            for c in range(D):
                x[c] = x0[i, c]
            for j in range(n):
                if j >= skip:
                    idx = 0
                    for c in range(D):
                        h = (x[c] - lows[c]) / lengths[c] * bins[c]
                        k = <long>floor(h)
                        if k < 0:
                            k = 0
                        elif k >= bins[c]:
                            k = bins[c] - 1
                        idx = idx * bins[c] + k
                    counts[idx] += 1.0
                _image(code, params, x, y)
                for c in range(D):
                    y[c] = y[c] + noise[i, j, c]
                    if periodic[c]:
                        y[c] = _wrap(y[c], lows[c], lengths[c])
                    x[c] = y[c]
            for c in range(D):
                last[i, c] = x[c]
    return last_arr
