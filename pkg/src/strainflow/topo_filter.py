"""Topological filtering of scalar strain fields and superlevel-set regions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import reconstruction

EIGHT = np.ones((3, 3), dtype=bool)
H_UNIT = 0.125 / 3.0


class FilterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Region:
    """One 8-connected superlevel-set component.

    ``samples`` holds sorted flat (row-major) grid indices; ``shape`` is the
    grid ``(height, width)`` they index into.
    """

    id: int
    frame_index: int
    samples: np.ndarray
    shape: tuple[int, int]
    area: int
    max_evm: float

    @property
    def coords(self) -> list[tuple[int, int]]:
        """Samples as ``(x, y)`` grid coordinates."""
        ys, xs = np.divmod(self.samples, self.shape[1])
        return list(zip(xs.tolist(), ys.tolist()))

    @property
    def bbox(self) -> list[int]:
        """``[xmin, ymin, xmax, ymax]`` (inclusive)."""
        ys, xs = np.divmod(self.samples, self.shape[1])
        return [int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "frame": self.frame_index,
            "area": self.area,
            "max_evm": self.max_evm,
            "bbox": self.bbox if self.samples.size else None,
        }

    @classmethod
    def from_coords(cls, id, frame_index, coords, shape, max_evm=0.0) -> "Region":
        flat = np.unique(np.array([y * shape[1] + x for x, y in coords], dtype=np.int64))
        return cls(id, frame_index, flat, tuple(shape), int(flat.size), float(max_evm))


@dataclass(frozen=True)
class FilterParams:
    i_t: int
    i_h: int
    p95: float

    @property
    def tau(self) -> float:
        return thresholds(self.i_t, self.i_h, self.p95)[0]

    @property
    def h(self) -> float:
        return thresholds(self.i_t, self.i_h, self.p95)[1]


def fill_invalid(field: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace invalid samples with the lowest valid value of the field."""
    field = np.asarray(field, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        raise FilterError("cannot fill a field with no valid samples")
    return np.where(valid, field, field[valid].min())


def h_maxima(field: np.ndarray, h: float) -> np.ndarray:
    """Grayscale reconstruction by dilation of ``field - h`` under ``field`` (8-connected)."""
    field = np.asarray(field, dtype=np.float64)
    if h < 0:
        raise FilterError(f"h must be non-negative, got {h}")
    if not np.isfinite(field).all():
        raise FilterError("h_maxima needs a finite field")
    if h == 0:
        return field.copy()
    return reconstruction(field - h, field, method="dilation", footprint=EIGHT)


def dataset_p95(fields, masks=None) -> float:
    """Nearest-rank 95th percentile over the valid samples of all frames."""
    values = []
    for i, f in enumerate(fields):
        f = np.asarray(f, dtype=np.float64)
        values.append(f[np.asarray(masks[i], dtype=bool)] if masks is not None else f.reshape(-1))
    pooled = np.sort(np.concatenate(values)) if values else np.empty(0)
    if pooled.size == 0:
        raise FilterError("no valid samples for the 95th percentile")
    rank = math.ceil(0.95 * pooled.size)
    return float(pooled[rank - 1])


def thresholds(i_t: int, i_h: int, p95: float) -> tuple[float, float]:
    """Superlevel threshold ``tau = i_t * p95 / 4`` and filter depth ``h = i_h * 0.125 / 3``.

    A negative ``p95`` (h deeper than every feature, so the filtered field
    sits below zero) is clamped to 0; otherwise tau would fall as i_t rises
    and the superlevel sets would stop nesting.
    """
    if i_t not in (1, 2, 3, 4):
        raise FilterError(f"i_t must be in 1..4, got {i_t}")
    if i_h not in (0, 1, 2, 3):
        raise FilterError(f"i_h must be in 0..3, got {i_h}")
    return i_t * max(p95, 0.0) / 4.0, i_h * H_UNIT


def label_superlevel(field: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
    """8-connected labels of ``field >= tau``, numbered 1.. in raster order of first sample."""
    labels, n = ndimage.label(np.asarray(field) >= tau, structure=EIGHT)
    if n == 0:
        return labels, 0
    flat = labels.reshape(-1)
    # ndimage numbers components in scan order already; enforce it rather than rely on it
    first = np.full(n + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    np.minimum.at(first, flat[nz], nz)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=labels.dtype)
    remap[order + 1] = np.arange(1, n + 1, dtype=labels.dtype)
    return remap[labels], n


def superlevel_components(field: np.ndarray, tau: float, frame_index: int, first_id: int = 0) -> list[Region]:
    """Maximal 8-connected components of ``{field >= tau}`` as :class:`Region` objects.

    Ids run from ``first_id`` in raster-scan order of each component's first
    sample.
    """
    field = np.asarray(field, dtype=np.float64)
    labels, n = label_superlevel(field, tau)
    if n == 0:
        return []
    flat = labels.reshape(-1)
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    order = np.argsort(lab, kind="stable")
    idx, lab = idx[order], lab[order]
    bounds = np.searchsorted(lab, np.arange(1, n + 2))
    maxima = ndimage.maximum(field, labels, index=np.arange(1, n + 1))
    regions = []
    for k in range(n):
        samples = idx[bounds[k] : bounds[k + 1]]
        samples.flags.writeable = False
        regions.append(
            Region(
                id=first_id + k,
                frame_index=frame_index,
                samples=samples,
                shape=field.shape,
                area=int(samples.size),
                max_evm=float(maxima[k]),
            )
        )
    return regions
