"""Tensor line integral convolution of the major principal strain direction.

Streamlines follow a sign-ambiguous line field: each sampled direction is
flipped to agree with the previous heading before it is blended, so ``d``
and ``-d`` trace the same curves.  All streamlines of an image are advanced
together as numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field_io import GridSpec
from .sankey_layout import VIRIDIS_ANCHORS
from .strain_core import StrainFrame

# 64-bit LCG (Knuth's MMIX constants); top 53 bits give a double in [0, 1)
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


class LicError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LineField:
    grid: GridSpec
    direction: np.ndarray  # (height, width, 2) unit vectors, (x, y) order
    degenerate: np.ndarray  # (height, width) bool; also covers invalid samples

    def sample(self, pos: np.ndarray, ref: np.ndarray):
        """Bilinear, sign-aligned direction at ``pos`` (N, 2) in sample units.

        Each corner direction is flipped to have a non-negative dot product
        with ``ref`` before blending.  Returns ``(dir, ok)``; ``ok`` is False
        outside the grid or when any corner is degenerate.
        """
        h, w = self.degenerate.shape
        x, y = pos[:, 0], pos[:, 1]
        ok = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
        x0 = np.clip(np.floor(x), 0, w - 2).astype(np.intp)
        y0 = np.clip(np.floor(y), 0, h - 2).astype(np.intp)
        fx = np.clip(x - x0, 0.0, 1.0)[:, None]
        fy = np.clip(y - y0, 0.0, 1.0)[:, None]
        acc = np.zeros_like(pos)
        for dy, dx, wt in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)),
                           (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
            d = self.direction[y0 + dy, x0 + dx]
            ok &= ~self.degenerate[y0 + dy, x0 + dx]
            flip = np.where((d * ref).sum(axis=1) < 0, -1.0, 1.0)[:, None]
            acc += wt * flip * d
        norm = np.hypot(acc[:, 0], acc[:, 1])
        ok &= norm > 0
        return acc / np.where(norm > 0, norm, 1.0)[:, None], ok


class FunctionLineField:
    """Line field given by a function ``f(pos) -> (dir, ok)`` on (N, 2) points.

    Drop-in for :class:`LineField` wherever only sampling is needed; used to
    measure integration error without interpolation error.
    """

    def __init__(self, grid: GridSpec, func):
        self.grid = grid
        self.func = func
        self.degenerate = np.zeros(grid.shape, dtype=bool)

    def sample(self, pos, ref):
        d, ok = self.func(pos)
        flip = np.where((d * ref).sum(axis=1) < 0, -1.0, 1.0)[:, None]
        return flip * d, ok


@dataclass(frozen=True)
class LicConfig:
    kernel_length: float = 10.0  # half-length L, output pixels
    step: float = 0.5  # output pixels
    supersample: int = 4
    seed: int = 0
    scale: int = 1  # output pixels per grid sample

    def __post_init__(self):
        if not self.kernel_length > 0:
            raise LicError(f"kernel length must be positive, got {self.kernel_length}")
        if not 0 < self.step <= 1:
            raise LicError(f"step must be in (0, 1] px, got {self.step}")
        if self.supersample not in (1, 4, 9, 16):
            raise LicError(f"supersample must be 1, 4, 9 or 16, got {self.supersample}")
        if int(self.scale) != self.scale or self.scale < 1:
            raise LicError(f"output scale must be a positive integer, got {self.scale}")


def line_field(strain: StrainFrame) -> LineField:
    d = np.nan_to_num(np.asarray(strain.direction, dtype=np.float64))
    norm = np.hypot(d[..., 0], d[..., 1])
    bad = strain.degenerate | ~strain.valid | (norm == 0)
    d = np.where(bad[..., None], 0.0, d / np.where(norm > 0, norm, 1.0)[..., None])
    return LineField(strain.grid, d, bad)


def rk4_step(pos, dir_prev, field: LineField, step: float):
    """One classical RK4 step along the line field.

    ``pos`` and ``dir_prev`` are (2,) or (N, 2) arrays in sample units.
    Returns ``(new_pos, new_dir, ok)``; ``ok`` False signals termination
    (left the grid or touched a degenerate sample).
    """
    pos = np.asarray(pos, dtype=np.float64)
    single = pos.ndim == 1
    p = np.atleast_2d(pos)
    ref = np.atleast_2d(np.asarray(dir_prev, dtype=np.float64))
    k1, ok = field.sample(p, ref)
    k2, ok2 = field.sample(p + 0.5 * step * k1, ref)
    k3, ok3 = field.sample(p + 0.5 * step * k2, ref)
    k4, ok4 = field.sample(p + step * k3, ref)
    blend = k1 + 2.0 * k2 + 2.0 * k3 + k4
    new_pos = p + (step / 6.0) * blend
    norm = np.hypot(blend[:, 0], blend[:, 1])
    new_dir = blend / np.where(norm > 0, norm, 1.0)[:, None]
    h, w = field.degenerate.shape
    inside = (new_pos[:, 0] >= 0) & (new_pos[:, 0] <= w - 1) & (new_pos[:, 1] >= 0) & (new_pos[:, 1] <= h - 1)
    ok = ok & ok2 & ok3 & ok4 & inside & (norm > 0)
    if single:
        return new_pos[0], new_dir[0], bool(ok[0])
    return new_pos, new_dir, ok


def noise_texture(grid: GridSpec, seed: int) -> np.ndarray:
    """White noise in [0, 1), one value per sample, row-major from a seeded LCG."""
    n = grid.size
    out = np.empty(n)
    state = seed & _MASK64
    for i in range(n):
        state = (LCG_MULTIPLIER * state + LCG_INCREMENT) & _MASK64
        out[i] = (state >> 11) * (1.0 / (1 << 53))
    return out.reshape(grid.shape)


def _bilinear(img: np.ndarray, pos: np.ndarray) -> np.ndarray:
    h, w = img.shape
    x = np.clip(pos[:, 0], 0, w - 1)
    y = np.clip(pos[:, 1], 0, h - 1)
    x0 = np.clip(np.floor(x), 0, w - 2).astype(np.intp)
    y0 = np.clip(np.floor(y), 0, h - 2).astype(np.intp)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * img[y0, x0] + fx * (1 - fy) * img[y0, x0 + 1]
            + (1 - fx) * fy * img[y0 + 1, x0] + fx * fy * img[y0 + 1, x0 + 1])


def _offsets(n: int) -> list[tuple[float, float]]:
    k = int(round(n ** 0.5))
    ticks = [(i + 0.5) / k for i in range(k)]
    return [(ox, oy) for oy in ticks for ox in ticks]


def _trace_sum(field: LineField, noise, start, heading, step, n_steps):
    """Sum of noise and sample counts along one direction of every streamline."""
    total = np.zeros(len(start))
    count = np.zeros(len(start))
    pos, d = start.copy(), heading.copy()
    alive = np.ones(len(start), dtype=bool)
    for _ in range(n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        new_pos, new_dir, ok = rk4_step(pos[idx], d[idx], field, step)
        idx, new_pos, new_dir = idx[ok], new_pos[ok], new_dir[ok]
        alive[:] = False
        alive[idx] = True
        pos[idx], d[idx] = new_pos, new_dir
        total[idx] += _bilinear(noise, new_pos)
        count[idx] += 1
    return total, count


def lic_image(field: LineField, config: LicConfig = LicConfig(), noise: np.ndarray | None = None) -> np.ndarray:
    """Grayscale LIC raster in [0, 1], shape ``(height * scale, width * scale)``.

    Each pixel averages, over its sub-pixel offsets, the box-kernel mean of
    the noise along the streamline traced both ways to arc length ``L``.
    Truncated streamlines are renormalised by the samples actually visited.
    """
    grid = field.grid
    if noise is None:
        noise = noise_texture(grid, config.seed)
    s = config.scale
    step = config.step / s
    n_steps = int(np.floor(config.kernel_length / config.step + 1e-9))
    out_h, out_w = grid.height * s, grid.width * s
    py, px = np.mgrid[0:out_h, 0:out_w]
    px, py = px.reshape(-1).astype(np.float64), py.reshape(-1).astype(np.float64)

    acc = np.zeros(px.size)
    for ox, oy in _offsets(config.supersample):
        start = np.stack([(px + ox) / s - 0.5, (py + oy) / s - 0.5], axis=1)
        start[:, 0] = np.clip(start[:, 0], 0, grid.width - 1)
        start[:, 1] = np.clip(start[:, 1], 0, grid.height - 1)
        # reference heading: the corner direction at the floor sample
        x0 = np.clip(np.floor(start[:, 0]), 0, grid.width - 2).astype(np.intp)
        y0 = np.clip(np.floor(start[:, 1]), 0, grid.height - 2).astype(np.intp)
        heading, ok = field.sample(start, field.direction[y0, x0])
        value = _bilinear(noise, start)
        fwd, nf = _trace_sum(field, noise, start[ok], heading[ok], step, n_steps)
        bwd, nb = _trace_sum(field, noise, start[ok], -heading[ok], step, n_steps)
        value[ok] = (value[ok] + (fwd + bwd)) / (1.0 + (nf + nb))
        acc += value
    img = acc / config.supersample
    return np.clip(img, 0.0, 1.0).reshape(out_h, out_w)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def overlay_evm(lic: np.ndarray, evm: np.ndarray, global_max: float | None = None,
                anchors=VIRIDIS_ANCHORS) -> np.ndarray:
    """Colormap ``evm`` and modulate by LIC luminance; returns uint8 RGB.

    ``evm`` may be given per grid sample; it is replicated to the LIC
    resolution when the LIC is an integer multiple larger.
    """
    lic = np.asarray(lic, dtype=np.float64)
    evm = np.nan_to_num(np.asarray(evm, dtype=np.float64))
    if evm.shape != lic.shape:
        ry, rx = lic.shape[0] // max(evm.shape[0], 1), lic.shape[1] // max(evm.shape[1], 1)
        if ry < 1 or rx < 1 or evm.shape[0] * ry != lic.shape[0] or evm.shape[1] * rx != lic.shape[1] or ry != rx:
            raise LicError(f"overlay size mismatch: lic {lic.shape} vs evm {evm.shape}")
        evm = np.repeat(np.repeat(evm, ry, axis=0), rx, axis=1)
    if global_max is None:
        global_max = float(evm.max())
    t = np.clip(evm / global_max, 0.0, 1.0) if global_max > 0 else np.zeros_like(evm)
    ts = np.array([a[0] for a in anchors])
    rgb = np.stack([np.interp(t, ts, [a[1][c] for a in anchors]) for c in range(3)], axis=-1)
    rgb = np.floor(rgb + 0.5)  # same half-up rounding as the Sankey colours
    return np.floor(rgb * lic[..., None] + 0.5).clip(0, 255).astype(np.uint8)


def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]) + img.tobytes())


def write_ppm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.uint8)
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (img.shape[1], img.shape[0]) + img.tobytes())


def read_pnm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, w, h, maxval, rest = data.split(maxsplit=4)
    w, h = int(w), int(h)
    if magic == b"P5":
        return np.frombuffer(rest, dtype=np.uint8).reshape(h, w)
    if magic == b"P6":
        return np.frombuffer(rest, dtype=np.uint8).reshape(h, w, 3)
    raise LicError(f"unsupported PNM type {magic!r}")
