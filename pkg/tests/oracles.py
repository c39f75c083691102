"""Slow, obviously-correct reference implementations used only by the tests."""
from __future__ import annotations

import itertools
import math

import numpy as np


def deviatoric_von_mises(eps1: float, eps2: float) -> float:
    """sqrt(2/3) times the Frobenius norm of the 3x3 deviatoric strain."""
    eps3 = -(eps1 + eps2)
    e = np.diag([eps1, eps2, eps3])
    dev = e - np.trace(e) / 3.0 * np.eye(3)
    return math.sqrt(2.0 / 3.0) * float(np.linalg.norm(dev, "fro"))


def jacobi_eigen_2x2(exx: float, eyy: float, exy: float, iters: int = 50):
    """Eigenvalues of a symmetric 2x2 matrix by repeated Jacobi rotations."""
    a = np.array([[exx, exy], [exy, eyy]], dtype=float)
    for _ in range(iters):
        if abs(a[0, 1]) < 1e-300:
            break
        theta = 0.5 * math.atan2(2 * a[0, 1], a[0, 0] - a[1, 1])
        c, s = math.cos(theta), math.sin(theta)
        r = np.array([[c, -s], [s, c]])
        a = r.T @ a @ r
    lo, hi = sorted((a[0, 0], a[1, 1]))
    return hi, lo


def naive_h_maxima(field: np.ndarray, h: float) -> np.ndarray:
    """Iterate marker <- min(field, 3x3 max of marker) from field - h to a fixpoint."""
    f = np.asarray(field, dtype=float)
    marker = f - h
    rows, cols = f.shape
    while True:
        padded = np.pad(marker, 1, constant_values=-np.inf)
        dilated = np.max(
            [padded[1 + dy : 1 + dy + rows, 1 + dx : 1 + dx + cols] for dy in (-1, 0, 1) for dx in (-1, 0, 1)],
            axis=0,
        )
        nxt = np.minimum(f, dilated)
        if np.array_equal(nxt, marker):
            return marker
        marker = nxt


def flood_fill_components(mask: np.ndarray, eight: bool = True) -> list[set[tuple[int, int]]]:
    """Components of a boolean mask as sets of (x, y), in raster order of first sample."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = mask.shape
    seen = np.zeros_like(mask)
    if eight:
        steps = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy]
    else:
        steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    comps = []
    for y in range(rows):
        for x in range(cols):
            if not mask[y, x] or seen[y, x]:
                continue
            comp, stack = set(), [(x, y)]
            seen[y, x] = True
            while stack:
                cx, cy = stack.pop()
                comp.add((cx, cy))
                for dx, dy in steps:
                    nx, ny = cx + dx, cy + dy
                    if 0 <= nx < cols and 0 <= ny < rows and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((nx, ny))
            comps.append(comp)
    return comps


def brute_crossings(orders, edges) -> int:
    """Count strictly inverted link pairs between each pair of adjacent columns."""
    where = {}
    for c, col in enumerate(orders):
        for k, rid in enumerate(col):
            where[rid] = (c, k)
    total = 0
    for (a, b), (p, q) in itertools.combinations(edges, 2):
        if where[a][0] != where[p][0]:
            continue
        if (where[a][1] - where[p][1]) * (where[b][1] - where[q][1]) < 0:
            total += 1
    return total


def all_pairs_links(frames) -> dict[tuple[int, int], int]:
    """Every (from, to) overlap between consecutive frames via Python sets."""
    out = {}
    for t in range(len(frames) - 1):
        for a in frames[t]:
            sa = set(a.coords)
            for b in frames[t + 1]:
                w = len(sa & set(b.coords))
                if w:
                    out[(a.id, b.id)] = w
    return out
