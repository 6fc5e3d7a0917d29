"""Euclidean distances and kernel weights for geographically weighted fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidBandwidthError

KERNELS = ("bisquare", "gaussian")


def pairwise_distance(a, b) -> float:
    """Euclidean distance between two (u, v) locations."""
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def distance_matrix(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def kernel_weight(d, h, kernel="bisquare"):
    """Evaluate a distance-decay kernel.

    Parameters
    ----------
    d : float or ndarray
        Nonnegative distances.
    h : float or ndarray
        Bandwidth, broadcastable against ``d``.
    kernel : {'bisquare', 'gaussian'}

    Returns
    -------
    float or ndarray
        Weights in [0, 1]. The bisquare kernel is exactly zero for ``d >= h``.
    """
    h_arr = np.asarray(h, dtype=float)
    if np.any(~(h_arr > 0)):
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h!r}")
    d_arr = np.asarray(d, dtype=float)
    z = d_arr / h_arr
    if kernel == "bisquare":
        w = np.where(z < 1.0, (1.0 - z * z) ** 2, 0.0)
    elif kernel == "gaussian":
        w = np.exp(-0.5 * z * z)
    else:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if np.ndim(w) == 0:
        return float(w)
    return w


@dataclass(frozen=True)
class SpatialWeightScheme:
    """Kernel plus a fixed distance bandwidth or an adaptive neighbour count.

    Exactly one of ``bandwidth`` and ``neighbors`` is set. Under an adaptive
    scheme the bandwidth at each target is the distance to its k-th nearest
    *other* observation; with the bisquare kernel that neighbour therefore
    receives weight 0.
    """

    kernel: str = "bisquare"
    bandwidth: Optional[float] = None
    neighbors: Optional[int] = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if (self.bandwidth is None) == (self.neighbors is None):
            raise InvalidBandwidthError("give exactly one of bandwidth (fixed) or neighbors (adaptive)")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise InvalidBandwidthError(f"fixed bandwidth must be > 0, got {self.bandwidth!r}")
        if self.neighbors is not None:
            if int(self.neighbors) != self.neighbors or self.neighbors < 1:
                raise InvalidBandwidthError(f"adaptive neighbor count must be a positive integer, got {self.neighbors!r}")

    @classmethod
    def fixed(cls, bandwidth: float, kernel: str = "bisquare") -> "SpatialWeightScheme":
        return cls(kernel=kernel, bandwidth=float(bandwidth))

    @classmethod
    def adaptive(cls, neighbors: int, kernel: str = "bisquare") -> "SpatialWeightScheme":
        return cls(kernel=kernel, neighbors=int(neighbors))

    @property
    def is_adaptive(self) -> bool:
        return self.neighbors is not None

    @property
    def value(self):
        return self.neighbors if self.is_adaptive else self.bandwidth

    def scaled(self, factor: float) -> "SpatialWeightScheme":
        """Return the scheme with its bandwidth multiplied by ``factor``.

        Adaptive neighbour counts are rounded to the nearest integer.
        """
        if not factor > 0:
            raise InvalidBandwidthError(f"bandwidth factor must be > 0, got {factor!r}")
        if self.is_adaptive:
            return SpatialWeightScheme.adaptive(max(1, int(round(self.neighbors * factor))), self.kernel)
        return SpatialWeightScheme.fixed(self.bandwidth * factor, self.kernel)

    def describe(self) -> dict:
        return {
            "kernel": self.kernel,
            "mode": "adaptive" if self.is_adaptive else "fixed",
            "bandwidth": self.value,
        }


def weight_vector(target, coords, scheme: SpatialWeightScheme, target_index=None) -> np.ndarray:
    """Kernel weights of every observation relative to ``target``.

    ``target_index`` identifies the target among ``coords`` for adaptive
    schemes; when omitted the first observation at distance 0 is taken to be
    the target itself.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    t = np.asarray(target, dtype=float)
    d = np.hypot(coords[:, 0] - t[0], coords[:, 1] - t[1])
    if scheme.is_adaptive:
        k = scheme.neighbors
        if k > len(coords) - 1:
            raise InvalidBandwidthError(f"adaptive k={k} exceeds the {len(coords) - 1} other observations")
        if target_index is None:
            zeros = np.flatnonzero(d == 0.0)
            target_index = int(zeros[0]) if len(zeros) else None
        others = d if target_index is None else np.delete(d, target_index)
        h = np.sort(others, kind="stable")[k - 1]
        if h == 0.0:
            raise InvalidBandwidthError(f"adaptive bandwidth collapsed to 0 at k={k} (duplicate coordinates)")
    else:
        h = scheme.bandwidth
    return np.asarray(kernel_weight(d, h, scheme.kernel), dtype=float).reshape(-1)


def weight_matrix(coords, scheme: SpatialWeightScheme, dist: Optional[np.ndarray] = None) -> np.ndarray:
    """N x N matrix whose row i is ``weight_vector(coords[i], coords, scheme)``."""
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if dist is None:
        dist = distance_matrix(coords)
    if scheme.is_adaptive:
        n = len(coords)
        k = scheme.neighbors
        if k > n - 1:
            raise InvalidBandwidthError(f"adaptive k={k} exceeds the {n - 1} other observations")
        # sorted row r holds its own zero at position 0 (ties with duplicates
        # only change which zero is dropped, not the k-th distance)
        h = np.sort(dist, axis=1, kind="stable")[:, k]
        if np.any(h == 0.0):
            raise InvalidBandwidthError(f"adaptive bandwidth collapsed to 0 at k={k} (duplicate coordinates)")
        return kernel_weight(dist, h[:, None], scheme.kernel)
    return kernel_weight(dist, scheme.bandwidth, scheme.kernel)
