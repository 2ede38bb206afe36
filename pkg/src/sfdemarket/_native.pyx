# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Native stepping kernel: same contract as ``sfdemarket._reference``.

Row-major loops in C replace the per-step numpy temporaries; selected at
import by ``sfdemarket.backend`` when the extension built.
"""

from libc.math cimport exp, sqrt


cdef inline double _eval_one(const double* row, Py_ssize_t end, int kind,
                             double p0, double p1, double scale, double shift,
                             Py_ssize_t w) noexcept nogil:
    cdef double acc, mean, x, d
    cdef Py_ssize_t j
    if kind == 0:
        x = p0
    else:
        acc = 0.5 * (row[end - w] + row[end])
        for j in range(1, w):
            acc += row[end - w + j]
        mean = acc / w
        if kind == 1:
            x = mean
        else:
            d = row[end - w] - mean
            acc = 0.5 * d * d
            d = row[end] - mean
            acc += 0.5 * d * d
            for j in range(1, w):
                d = row[end - w + j] - mean
                acc += d * d
            x = sqrt(acc / w)
            if x < p0:
                x = p0
            elif x > p1:
                x = p1
    return scale * x + shift


def simulate_chunk(double[:, ::1] prices, double[:, ::1] dw,
                   Py_ssize_t n0, Py_ssize_t delay_steps, double dt,
                   int d_kind, double d_p0, double d_p1, double d_scale,
                   double d_shift, Py_ssize_t d_w,
                   int v_kind, double v_p0, double v_p1, double v_scale,
                   double v_shift, Py_ssize_t v_w,
                   double[:, ::1] f_out=None, double[:, ::1] g_out=None):
    cdef Py_ssize_t m = prices.shape[0]
    cdef Py_ssize_t steps = dw.shape[1]
    cdef Py_ssize_t r, i, j, d
    cdef double a, b
    cdef double* row
    cdef bint keep_f = f_out is not None
    cdef bint keep_g = g_out is not None
    with nogil:
        for r in range(m):
            row = &prices[r, 0]
            for i in range(steps):
                j = n0 - 1 + i
                d = j - delay_steps
                a = _eval_one(row, d, d_kind, d_p0, d_p1, d_scale, d_shift, d_w)
                b = _eval_one(row, d, v_kind, v_p0, v_p1, v_scale, v_shift, v_w)
                if keep_f:
                    f_out[r, i] = a
                if keep_g:
                    g_out[r, i] = b
                row[j + 1] = row[j] * exp((a - 0.5 * b * b) * dt + b * dw[r, i])
