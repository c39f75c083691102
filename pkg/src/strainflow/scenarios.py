"""Synthetic displacement sequences with analytically known strain.

Every scenario ramps its loading parameter linearly with the frame index,
``ramp(t) = t / (n_frames - 1)`` (1.0 for a single frame), mimicking
monotone tensile loading.
"""
from __future__ import annotations

import math
import numpy as np
from scipy.special import erf as _erf

from .field_io import DisplacementFrame, FieldIOError, GridSpec, Sequence
from .strain_core import strain_from_gradient



SCENARIOS = ("uniaxial", "rigid-rotation", "simple-shear", "two-blobs-merge", "notch")

DEFAULTS = {
    "uniaxial": {"amplitude": 0.1},
    "rigid-rotation": {"angle": 30.0, "tx": 0.0, "ty": 0.0},
    "simple-shear": {"gamma": 0.2},
    "two-blobs-merge": {"amplitude": 0.3, "sigma0": 0.03, "sigma1": 0.16, "separation": 0.4, "it": 2, "ih": 1},
    "notch": {"amplitude": 0.02, "concentration": 0.25, "sigma": 0.12},
}
# amplitude-like parameters that must be strictly positive
_POSITIVE = {"amplitude", "gamma", "concentration", "sigma", "sigma0", "sigma1", "separation"}


def ramp(t: int, n_frames: int) -> float:
    return t / (n_frames - 1) if n_frames > 1 else 1.0


def _params(name: str, params: dict | None) -> dict:
    merged = dict(DEFAULTS[name])
    for key, value in (params or {}).items():
        if key not in merged:
            raise FieldIOError(f"unknown parameter {key!r} for scenario {name!r}; known: {sorted(merged)}")
        merged[key] = value
    for key, value in merged.items():
        if key in _POSITIVE and not value > 0:
            raise FieldIOError(f"scenario {name!r}: parameter {key} must be positive, got {value}")
    return merged


def _blob_terms(x, y, centers, sigma, amplitude):
    """Displacement ``u_x = A * sum (x - cx) exp(-r^2 / 2 sigma^2)`` and its gradient."""
    ux = np.zeros_like(x)
    dux_dx = np.zeros_like(x)
    dux_dy = np.zeros_like(x)
    for cx, cy in centers:
        dx, dy = x - cx, y - cy
        g = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
        ux += amplitude * dx * g
        dux_dx += amplitude * g * (1.0 - dx * dx / (sigma * sigma))
        dux_dy -= amplitude * g * dx * dy / (sigma * sigma)
    return ux, dux_dx, dux_dy


def _bands(x, centers, sigma, amplitude):
    """``u_x`` whose x-derivative is ``A * sum exp(-(x - cx)^2 / 2 sigma^2)``.

    Uniform along y, so the strain field has exactly one ridge per band and
    no compressive side lobes.
    """
    ux = np.zeros_like(x)
    dux_dx = np.zeros_like(x)
    for cx in centers:
        dx = x - cx
        ux += amplitude * sigma * math.sqrt(math.pi / 2.0) * _erf(dx / (math.sqrt(2.0) * sigma))
        dux_dx += amplitude * np.exp(-dx * dx / (2.0 * sigma * sigma))
    return ux, dux_dx


def _two_blob_geometry(grid: GridSpec, p: dict, n_frames: int):
    x, _ = grid.coordinates()
    extent = (grid.width - 1) * grid.spacing
    half = 0.5 * p["separation"] * extent
    centers = (0.5 * extent - half, 0.5 * extent + half)
    sigmas = [extent * (p["sigma0"] + (p["sigma1"] - p["sigma0"]) * ramp(t, n_frames)) for t in range(n_frames)]
    amplitudes = [p["amplitude"] * (0.5 + 0.5 * ramp(t, n_frames)) for t in range(n_frames)]
    return x, centers, sigmas, amplitudes


def _nearest_rank(values: np.ndarray, q: float) -> float:
    ordered = np.sort(values, axis=None)
    return float(ordered[max(math.ceil(q * ordered.size), 1) - 1])


def _profile_h_maxima(profile: np.ndarray, h: float) -> np.ndarray:
    """h-maxima of a 1-D profile by its path formula.

    ``out[x] = max_q min(f[q] - h, min f over [q, x])``, the value any
    reconstruction by dilation converges to on a line.
    """
    n = profile.size
    out = np.empty(n)
    for x in range(n):
        left = np.minimum.accumulate(profile[x::-1])  # min over [q, x] for q = x, x-1, ...
        right = np.minimum.accumulate(profile[x:])
        best_left = np.max(np.minimum(profile[x::-1] - h, left))
        best_right = np.max(np.minimum(profile[x:] - h, right))
        out[x] = max(best_left, best_right)
    return out


def two_blob_truth(grid: GridSpec, n_frames: int, params: dict | None = None) -> dict:
    """Ground-truth merge frame from the analytic strain of the two-band scenario.

    The analytic field is constant along y, so everything reduces to the
    1-D profile along x: the h-maxima filter has a closed form there, the
    threshold is ``it * p95 / 4`` over the filtered profiles of all frames,
    and the bands are merged once the profile stays above the threshold all
    the way between the two centres.
    """
    p = _params("two-blobs-merge", params)
    x, centers, sigmas, amplitudes = _two_blob_geometry(grid, p, n_frames)
    x = x[0]
    h = p["ih"] * 0.125 / 3.0
    profiles = []
    for sigma, amp in zip(sigmas, amplitudes):
        grad = np.zeros((x.size, 2, 2))
        grad[:, 0, 0] = _bands(x, centers, sigma, amp)[1]
        profiles.append(_profile_h_maxima(strain_from_gradient(grad)[-1], h))
    tau = p["it"] * _nearest_rank(np.stack(profiles), 0.95) / 4.0
    lo, hi = (int(round(c / grid.spacing)) for c in centers)
    merge_frame = None
    for t, prof in enumerate(profiles):
        if prof[lo : hi + 1].min() >= tau:
            merge_frame = t
            break
    return {
        "scenario": "two-blobs-merge",
        "merge_frame": merge_frame,
        "it": p["it"],
        "ih": p["ih"],
        "tau": tau,
        "centers": [[lo, grid.height // 2], [hi, grid.height // 2]],
    }


def generate_scenario(name: str, grid: GridSpec, n_frames: int, params: dict | None = None):
    """Build a synthetic :class:`Sequence`.

    Returns ``(sequence, truth)``; ``truth`` is a dict destined for
    ``truth.json`` (only two-blobs-merge carries a merge frame).
    """
    if name not in SCENARIOS:
        raise FieldIOError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    if n_frames < 1:
        raise FieldIOError(f"n_frames must be >= 1, got {n_frames}")
    p = _params(name, params)
    x, y = grid.coordinates()
    valid = np.ones(grid.shape, dtype=bool)
    frames = []
    truth: dict = {"scenario": name, "params": p}

    if name == "two-blobs-merge":
        _, centers, sigmas, amplitudes = _two_blob_geometry(grid, p, n_frames)

    for t in range(n_frames):
        r = ramp(t, n_frames)
        u = np.zeros((*grid.shape, 2))
        if name == "uniaxial":
            u[..., 0] = p["amplitude"] * r * x
        elif name == "rigid-rotation":
            theta = math.radians(p["angle"]) * r
            c, s = math.cos(theta), math.sin(theta)
            u[..., 0] = (c - 1.0) * x - s * y + p["tx"] * r
            u[..., 1] = s * x + (c - 1.0) * y + p["ty"] * r
        elif name == "simple-shear":
            u[..., 0] = p["gamma"] * r * y
        elif name == "notch":
            extent = min(grid.width, grid.height) * grid.spacing
            notch = ((0.5 * (grid.width - 1) * grid.spacing, 0.0),)
            ux, _, _ = _blob_terms(x, y, notch, p["sigma"] * extent, p["concentration"] * r)
            u[..., 0] = p["amplitude"] * r * x + ux
        else:  # two-blobs-merge
            u[..., 0] = _bands(x, centers, sigmas[t], amplitudes[t])[0]
        frames.append(DisplacementFrame(grid, t, u, valid))

    if name == "two-blobs-merge":
        truth.update(two_blob_truth(grid, n_frames, p))
    return Sequence(grid, tuple(frames)), truth
