"""Point-wise finite strain from a displacement field.

All operations are vectorised over the sample grid.  Arrays follow the
``(height, width, ...)`` layout of :class:`~strainflow.field_io.DisplacementFrame`;
the trailing ``(2, 2)`` axes of gradient-like arrays are ``[i, j] = d u_i / d x_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field_io import DisplacementFrame, GridSpec

DEGENERATE_TOL = 1e-12
SQRT2_OVER_3 = math.sqrt(2.0) / 3.0


class StrainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StrainFrame:
    grid: GridSpec
    frame_index: int
    exx: np.ndarray
    eyy: np.ndarray
    exy: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    direction: np.ndarray  # major eigenvector, (height, width, 2), sign-ambiguous
    degenerate: np.ndarray
    evm: np.ndarray
    valid: np.ndarray


def _shift(a: np.ndarray, offset: int, axis: int, fill) -> np.ndarray:
    """``out[i] = a[i + offset]`` along ``axis``, padded with ``fill`` past the border."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if offset > 0:
        src[axis], dst[axis] = slice(offset, n), slice(0, n - offset)
    else:
        src[axis], dst[axis] = slice(0, n + offset), slice(-offset, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _axis_derivative(u: np.ndarray, valid: np.ndarray, axis: int, step: float):
    """Derivative of ``u`` (h, w, 2) along a grid axis, using only valid samples.

    Central differences where both neighbours are valid, else a forward and
    then a backward one-sided difference.  Returns ``(du, ok)``.
    """
    v_next = _shift(valid, 1, axis, False)
    v_prev = _shift(valid, -1, axis, False)
    u_next = _shift(u, 1, axis, 0.0)
    u_prev = _shift(u, -1, axis, 0.0)

    central = valid & v_next & v_prev
    forward = valid & v_next & ~central
    backward = valid & v_prev & ~central & ~forward

    du = np.full(u.shape, np.nan)
    du[central] = (u_next[central] - u_prev[central]) / (2.0 * step)
    du[forward] = (u_next[forward] - u[forward]) / step
    du[backward] = (u[backward] - u_prev[backward]) / step
    return du, central | forward | backward


def displacement_gradient(frame: DisplacementFrame) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample displacement gradient and the mask of samples where it exists.

    Samples with no valid stencil along an axis are dropped from the mask and
    carry NaN.
    """
    if not frame.valid.any():
        raise StrainError(f"frame {frame.frame_index}: no valid samples")
    u = np.where(frame.valid[..., None], frame.u, 0.0)
    h = frame.grid.spacing
    du_dx, ok_x = _axis_derivative(u, frame.valid, axis=1, step=h)
    du_dy, ok_y = _axis_derivative(u, frame.valid, axis=0, step=h)
    grad = np.stack([du_dx, du_dy], axis=-1)  # [..., i, j] = d u_i / d x_j
    ok = frame.valid & ok_x & ok_y
    grad[~ok] = np.nan
    return grad, ok


def deformation_gradient(grad_u: np.ndarray) -> np.ndarray:
    return np.asarray(grad_u, dtype=np.float64) + np.eye(2)


def green_lagrange(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``E = (F^T F - I) / 2`` returned as its three independent components."""
    f = np.asarray(f, dtype=np.float64)
    fxx, fxy = f[..., 0, 0], f[..., 0, 1]
    fyx, fyy = f[..., 1, 0], f[..., 1, 1]
    exx = 0.5 * (fxx * fxx + fyx * fyx - 1.0)
    eyy = 0.5 * (fxy * fxy + fyy * fyy - 1.0)
    exy = 0.5 * (fxx * fxy + fyx * fyy)
    return exx, eyy, exy


def principal_strains(exx, eyy, exy):
    """Closed-form eigendecomposition of a symmetric 2x2 tensor.

    Returns ``(eps1, eps2, direction, degenerate)`` with ``eps1 >= eps2`` and
    ``direction`` the unit major eigenvector (last axis of length 2).  Where
    ``eps1 - eps2 < 1e-12`` the direction is arbitrary and ``degenerate`` is set.
    """
    exx, eyy, exy = (np.asarray(a, dtype=np.float64) for a in (exx, eyy, exy))
    mean = 0.5 * (exx + eyy)
    radius = np.hypot(0.5 * (exx - eyy), exy)
    eps1 = mean + radius
    eps2 = mean - radius
    theta = 0.5 * np.arctan2(2.0 * exy, exx - eyy)
    direction = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    degenerate = (eps1 - eps2) < DEGENERATE_TOL
    return eps1, eps2, direction, degenerate


def von_mises(eps1, eps2):
    """Equivalent strain with the out-of-plane principal strain ``-(eps1 + eps2)``."""
    eps1 = np.asarray(eps1, dtype=np.float64)
    eps2 = np.asarray(eps2, dtype=np.float64)
    eps3 = -(eps1 + eps2)
    return SQRT2_OVER_3 * np.sqrt((eps1 - eps2) ** 2 + (eps2 - eps3) ** 2 + (eps3 - eps1) ** 2)


def strain_from_gradient(grad_u: np.ndarray):
    """Chain F, E, principal strains and von Mises for an array of gradients."""
    exx, eyy, exy = green_lagrange(deformation_gradient(grad_u))
    eps1, eps2, direction, degenerate = principal_strains(exx, eyy, exy)
    return exx, eyy, exy, eps1, eps2, direction, degenerate, von_mises(eps1, eps2)


def compute_strain_frame(frame: DisplacementFrame) -> StrainFrame:
    grad, ok = displacement_gradient(frame)
    exx, eyy, exy, eps1, eps2, direction, degenerate, evm = strain_from_gradient(grad)
    degenerate = degenerate | ~ok
    return StrainFrame(
        grid=frame.grid,
        frame_index=frame.frame_index,
        exx=exx,
        eyy=eyy,
        exy=exy,
        eps1=eps1,
        eps2=eps2,
        direction=direction,
        degenerate=degenerate,
        evm=evm,
        valid=ok,
    )


def format_strain_csv(sf: StrainFrame) -> str:
    """Debug dump with columns ``x,y,exx,eyy,exy,eps1,eps2,evm,valid``."""
    ys, xs = np.divmod(np.arange(sf.grid.size), sf.grid.width)
    cols = np.stack([a.reshape(-1) for a in (sf.exx, sf.eyy, sf.exy, sf.eps1, sf.eps2, sf.evm)], axis=1)
    lines = ["x,y,exx,eyy,exy,eps1,eps2,evm,valid"]
    for x, y, row, k in zip(xs.tolist(), ys.tolist(), cols.tolist(), sf.valid.reshape(-1).tolist()):
        lines.append(f"{x},{y}," + ",".join(f"{v:.17g}" for v in row) + f",{int(k)}")
    return "\n".join(lines) + "\n"
