"""Conditional Gaussian-ring datasets."""
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RingSpec:
    conditions: int = 2
    modes: int = 8
    radius: float = 0.8
    sigma: float = 0.01

    def __post_init__(self):
        if self.conditions < 1 or self.modes < 1:
            raise ValueError("conditions and modes must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def centers(self):
        """Array ``(conditions, modes, 2)`` of mode centers."""
        out = np.empty((self.conditions, self.modes, 2))
        for c in range(self.conditions):
            offset = c * math.pi / (self.modes * self.conditions)
            ang = 2 * math.pi * np.arange(self.modes) / self.modes + offset
            out[c, :, 0] = self.radius * np.cos(ang)
            out[c, :, 1] = self.radius * np.sin(ang)
        return out


@dataclass
class SyntheticDataset:
    x: np.ndarray
    labels: np.ndarray
    modes: np.ndarray
    spec: RingSpec

    def __len__(self):
        return len(self.x)

    def one_hot(self, labels=None):
        labels = self.labels if labels is None else labels
        return np.eye(self.spec.conditions)[labels]


def make_ring_dataset(conditions, modes, radius, sigma, n, rng):
    spec = RingSpec(conditions, modes, radius, sigma)
    flat = rng.integers(0, conditions * modes, size=n)
    labels, mode_idx = np.divmod(flat, modes)
    centers = spec.centers()[labels, mode_idx]
    x = centers + sigma * rng.standard_normal((n, 2))
    return SyntheticDataset(x, labels, mode_idx, spec)


def mode_coverage(x, spec, labels=None, rho=3.0, tau=5):
    """Number of modes with at least ``tau`` samples within ``rho * sigma`` of the center.

    With ``labels``, a sample only counts toward the modes of its own condition.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty batch")
    centers = spec.centers()
    radius = rho * spec.sigma
    covered = 0
    for c in range(spec.conditions):
        pts = x if labels is None else x[np.asarray(labels) == c]
        if len(pts) == 0:
            continue
        d = np.linalg.norm(pts[:, None, :] - centers[c][None, :, :], axis=-1)
        covered += int(((d <= radius).sum(axis=0) >= tau).sum())
    return covered
