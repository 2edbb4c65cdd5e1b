"""
Unparametrized-curve comparison: arclength cropping and Hausdorff distance.

Used to compare orbits that agree only as point sets (Maupertuis
reparametrization, projectively equivalent metrics).
"""

import numpy as np
from scipy.spatial import cKDTree


def arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative arclength along a polyline, starting at 0."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def crop_to_length(points: np.ndarray, length: float) -> np.ndarray:
    """Initial piece of the polyline of the given arclength (last vertex interpolated)."""
    s = arclength(points)
    if length >= s[-1]:
        return points
    k = int(np.searchsorted(s, length))
    frac = (length - s[k - 1]) / (s[k] - s[k - 1])
    end = points[k - 1] + frac * (points[k] - points[k - 1])
    return np.vstack([points[:k], end])


def _directed(a: np.ndarray, b: np.ndarray, neighbours: int = 4) -> float:
    tree = cKDTree(b)
    k = min(neighbours, len(b))
    _, idx = tree.query(a, k=k)
    idx = np.asarray(idx).reshape(len(a), k)
    worst = 0.0
    for i, point in enumerate(a):
        best = np.inf
        for j in idx[i]:
            for lo in (j - 1, j):
                if lo < 0 or lo + 1 >= len(b):
                    continue
                seg = b[lo + 1] - b[lo]
                t = np.clip(np.dot(point - b[lo], seg) / max(np.dot(seg, seg), 1e-300), 0.0, 1.0)
                best = min(best, float(np.linalg.norm(point - (b[lo] + t * seg))))
        if not np.isfinite(best):
            best = float(np.linalg.norm(point - b[idx[i][0]]))
        worst = max(worst, best)
    return worst


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between polylines using point-to-segment distances."""
    return max(_directed(a, b), _directed(b, a))


def compare_orbits(a: np.ndarray, b: np.ndarray) -> float:
    """Crop both curves to their common arclength, then take the Hausdorff distance."""
    length = min(arclength(a)[-1], arclength(b)[-1])
    return hausdorff_distance(crop_to_length(a, length), crop_to_length(b, length))
