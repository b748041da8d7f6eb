"""Quadrature helpers shared by the solvers.

- ``trapezoid_weights``: composite trapezoid weights on arbitrary sorted nodes
- ``uniform_convolve``: discrete convolution with a symmetric sample row
- ``graded_breaks`` / ``gauss_panels``: composite Gauss–Legendre rules with
  panels refined geometrically towards chosen anchor points
"""

from __future__ import annotations

from collections.abc import Iterable
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import convolve

from mxm_frontlab.types import FloatArray

type ConvMethod = Literal["auto", "direct", "fft"]


def trapezoid_weights(x: FloatArray) -> FloatArray:
    """Weights w with sum(w * f) equal to trapezoid(f, x) for sorted nodes x."""
    n = x.size
    w = np.zeros(n, dtype=np.float64)
    if n < 2:
        return w
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def uniform_convolve(
    half_row: FloatArray, weighted: FloatArray, method: ConvMethod = "auto"
) -> FloatArray:
    """Return out[i] = sum_j row[|i-j|] * weighted[j].

    ``half_row[m]`` holds the kernel at lag m·dx for m = 0..M. Lags beyond M
    contribute nothing, which is exact when the kernel vanishes there.
    """
    n = weighted.size
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    m = min(half_row.size - 1, n - 1)
    row = np.concatenate([half_row[m:0:-1], half_row[: m + 1]])
    out = convolve(weighted, row, mode="same", method=method)
    return np.asarray(out, dtype=np.float64)


@lru_cache(maxsize=8)
def _legendre(order: int) -> tuple[FloatArray, FloatArray]:
    nodes, weights = leggauss(order)
    return np.asarray(nodes, dtype=np.float64), np.asarray(weights, dtype=np.float64)


def graded_breaks(
    lo: float,
    hi: float,
    anchors: Iterable[float],
    scale: float,
    *,
    ratio: float = 2.0,
    extra: Iterable[float] = (),
) -> FloatArray:
    """Panel breakpoints on [lo, hi] refined geometrically around anchors.

    Around each anchor a the points a ± scale·ratio^k (k = -2, -1, 0, ...)
    are inserted until they leave the interval; ``extra`` adds fixed
    breakpoints such as profile kinks.
    """
    pts: list[float] = [lo, hi]
    span = hi - lo
    for a in anchors:
        if not lo <= a <= hi:
            continue
        pts.append(a)
        step = scale / (ratio * ratio)
        while step < span:
            pts.append(a - step)
            pts.append(a + step)
            step *= ratio
    pts.extend(extra)
    arr = np.asarray(pts, dtype=np.float64)
    arr = np.unique(arr[(arr >= lo) & (arr <= hi)])
    # drop panels of vanishing width
    keep = np.concatenate([[True], np.diff(arr) > 1e-12 * max(1.0, abs(span))])
    return arr[keep]


def gauss_panels(breaks: FloatArray, order: int = 12) -> tuple[FloatArray, FloatArray]:
    """Nodes and weights of the composite Gauss–Legendre rule on ``breaks``."""
    if breaks.size < 2:
        return np.zeros(0, dtype=np.float64), np.zeros(0, dtype=np.float64)
    ref_x, ref_w = _legendre(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * ref_x[None, :]).ravel()
    weights = (half * ref_w[None, :]).ravel()
    return nodes, weights


__all__ = [
    "ConvMethod",
    "gauss_panels",
    "graded_breaks",
    "trapezoid_weights",
    "uniform_convolve",
]
