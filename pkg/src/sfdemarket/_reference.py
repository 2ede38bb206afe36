"""Numpy stepping kernel: the always-available fallback backend.

Fills a block of price paths in place with the exponential (log-Euler)
scheme, coefficients frozen at the left endpoint of each step and read
from the delayed history segment. The native Cython kernel implements the
same contract; this module is also the home of ``eval_nodes``, the
vectorized post-pass functional evaluator used by pricing/diagnostics
regardless of which stepping backend is active.

Functional encoding shared by both backends:
``kind`` 0 = constant (p0 = value), 1 = moving average,
2 = realized vol clamped into [p0, p1]; every kind is finished with
``scale * x + shift``.
"""

from __future__ import annotations

import numpy as np


def _eval_block(prices: np.ndarray, end: int, kind: int, p0: float, p1: float,
                scale: float, shift: float, w: int) -> np.ndarray:
    if kind == 0:
        x = np.full(prices.shape[0], p0)
    else:
        seg = prices[:, end - w:end + 1]
        mean = (0.5 * (seg[:, 0] + seg[:, -1]) + seg[:, 1:-1].sum(axis=1)) / w
        if kind == 1:
            x = mean
        else:
            dev = seg - mean[:, None]
            var = (0.5 * (dev[:, 0] ** 2 + dev[:, -1] ** 2)
                   + (dev[:, 1:-1] ** 2).sum(axis=1)) / w
            x = np.clip(np.sqrt(var), p0, p1)
    if scale != 1.0 or shift != 0.0:
        x = scale * x + shift
    return x


def simulate_chunk(prices, dw, n0, delay_steps, dt,
                   d_kind, d_p0, d_p1, d_scale, d_shift, d_w,
                   v_kind, v_p0, v_p1, v_scale, v_shift, v_w,
                   f_out=None, g_out=None):
    """Advance ``prices[:, n0:]`` given the filled initial region and increments.

    prices : (m, n0 + steps) float64, first n0 columns already hold the
        extended initial history; node n0 - 1 is time 0.
    dw : (m, steps) Brownian increments.
    """
    steps = dw.shape[1]
    for i in range(steps):
        j = n0 - 1 + i
        d = j - delay_steps
        a = _eval_block(prices, d, d_kind, d_p0, d_p1, d_scale, d_shift, d_w)
        b = _eval_block(prices, d, v_kind, v_p0, v_p1, v_scale, v_shift, v_w)
        if f_out is not None:
            f_out[:, i] = a
        if g_out is not None:
            g_out[:, i] = b
        prices[:, j + 1] = prices[:, j] * np.exp((a - 0.5 * b * b) * dt + b * dw[:, i])


def eval_nodes(prices, nodes, kind, p0, p1, scale, shift, w):
    """Evaluate one functional on the segments ending at each node index.

    Returns an (m, len(nodes)) array; used for recomputing coefficients
    along stored paths (integrated variance, hedge ratios).
    """
    out = np.empty((prices.shape[0], len(nodes)))
    for c, end in enumerate(nodes):
        out[:, c] = _eval_block(prices, int(end), kind, p0, p1, scale, shift, w)
    return out
