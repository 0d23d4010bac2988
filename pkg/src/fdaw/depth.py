"""Band depth and modified band depth for collections of curves.

Depth is computed over all unordered pairs of curves (pairs containing the
curve itself included), with inclusive boundary containment.  Counts are
accumulated as integers and divided once, so results match a naive
enumeration bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataError

__all__ = ["DepthResult", "band_depth", "modified_band_depth", "depth_order"]


@dataclass(frozen=True)
class DepthResult:
    depths: np.ndarray
    order: np.ndarray  # indices from deepest to shallowest, ties by original index
    median_index: int
    outlier_indices: np.ndarray


def _as_curves(curves) -> np.ndarray:
    arr = np.asarray(curves, dtype=float)
    if arr.ndim != 2:
        raise DataError("curves must be a 2-D array (n_curves x n_points)")
    if arr.shape[0] < 3:
        raise DataError("depth needs at least 3 curves")
    return arr


def band_depth(curves, J: int = 2) -> np.ndarray:
    """Fraction of curve pairs whose band contains the curve at every point."""
    if J != 2:
        raise DataError("only J=2 band depth is supported")
    y = _as_curves(curves)
    n = y.shape[0]
    contained = np.zeros(n, dtype=np.int64)
    for i1 in range(n - 1):
        lo = np.minimum(y[i1], y[i1 + 1 :])  # (n-i1-1, D)
        hi = np.maximum(y[i1], y[i1 + 1 :])
        # curve j inside band (i1, i2) at every grid point
        inside = (y[None, :, :] >= lo[:, None, :]) & (y[None, :, :] <= hi[:, None, :])
        contained += inside.all(axis=2).sum(axis=0)
    n_pairs = n * (n - 1) // 2
    return contained / n_pairs


def modified_band_depth(curves) -> np.ndarray:
    """Average fraction of grid points at which each pair's band contains the curve."""
    y = _as_curves(curves)
    n, d = y.shape
    inside_counts = np.zeros(n, dtype=np.int64)
    n_pairs = n * (n - 1) // 2
    for t in range(d):
        col = y[:, t]
        below = (col[None, :] < col[:, None]).sum(axis=1)  # strictly below each curve
        above = (col[None, :] > col[:, None]).sum(axis=1)
        # pairs containing the value: all pairs minus pairs entirely below/above
        inside_counts += n_pairs - below * (below - 1) // 2 - above * (above - 1) // 2
    return inside_counts / (n_pairs * d)


def depth_order(depths, factor: float = 1.5) -> DepthResult:
    """Order curves from the median outward and flag boxplot-rule outliers."""
    depths = np.asarray(depths, dtype=float)
    order = np.argsort(-depths, kind="stable")
    median_index = int(order[0])
    q1, q3 = np.percentile(depths, [25.0, 75.0])
    threshold = max(0.0, q1 - factor * (q3 - q1))
    outliers = np.flatnonzero(depths < threshold)
    return DepthResult(
        depths=depths,
        order=order,
        median_index=median_index,
        outlier_indices=outliers,
    )
