"""Displacement-field sequences: data types and the manifest/CSV on-disk format.

A dataset on disk is a JSON manifest::

    {"width": 120, "height": 80, "spacing": 1.0, "frames": ["f000.csv", ...]}

plus one CSV per frame with header ``x,y,u,v,valid`` and one row per sample in
row-major order (y outer, x inner).  Displacements are written with 17
significant digits so a save/load round trip is bit-exact.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_HEADER = "x,y,u,v,valid"


class FieldIOError(ValueError):
    """Raised for unreadable, malformed or inconsistent displacement data."""


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise FieldIOError(f"grid dimensions must be integers, got {self.width}x{self.height}")
        if self.width < 2 or self.height < 2:
            raise FieldIOError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise FieldIOError(f"grid spacing must be positive, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(height, width)`` used by every per-sample array."""
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical sample coordinates ``(x, y)``, each of shape ``(height, width)``."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width]
        return xs * self.spacing, ys * self.spacing


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DisplacementFrame:
    """One timestep: ``u`` has shape (height, width, 2), ``valid`` (height, width)."""

    grid: GridSpec
    frame_index: int
    u: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if u.shape != (*self.grid.shape, 2):
            raise FieldIOError(
                f"frame {self.frame_index}: displacement shape {u.shape} does not match grid "
                f"{self.grid.width}x{self.grid.height}"
            )
        if valid.shape != self.grid.shape:
            raise FieldIOError(f"frame {self.frame_index}: mask shape {valid.shape} does not match grid")
        if self.frame_index < 0:
            raise FieldIOError(f"negative frame index {self.frame_index}")
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "valid", _frozen(valid))


@dataclass(frozen=True)
class Sequence:
    grid: GridSpec
    frames: tuple[DisplacementFrame, ...] = field(default_factory=tuple)

    def __post_init__(self):
        frames = tuple(self.frames)
        for expected, fr in enumerate(frames):
            if fr.grid != self.grid:
                raise FieldIOError(f"frame {fr.frame_index}: grid {fr.grid} differs from sequence grid {self.grid}")
            if fr.frame_index != expected:
                raise FieldIOError(f"frame indices must be consecutive from 0; found {fr.frame_index} at position {expected}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> DisplacementFrame:
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)


def _read_manifest(path: Path) -> dict:
    if not path.is_file():
        raise FieldIOError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FieldIOError(f"malformed manifest {path}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise FieldIOError(f"malformed manifest {path}: top level must be an object")
    for key, kind in (("width", int), ("height", int), ("frames", list)):
        if not isinstance(manifest.get(key), kind) or isinstance(manifest.get(key), bool):
            raise FieldIOError(f"malformed manifest {path}: '{key}' missing or not {kind.__name__}")
    spacing = manifest.get("spacing", 1.0)
    if not isinstance(spacing, (int, float)) or isinstance(spacing, bool):
        raise FieldIOError(f"malformed manifest {path}: 'spacing' must be a number")
    if not all(isinstance(f, str) for f in manifest["frames"]):
        raise FieldIOError(f"malformed manifest {path}: 'frames' must list file names")
    return manifest


def read_frame_csv(path: Path, frame_index: int, expected: GridSpec | None = None) -> DisplacementFrame:
    """Parse one frame CSV.  Grid size is inferred from the max x/y indices."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FieldIOError(f"frame {frame_index}: cannot read {path}: {exc}") from exc
    header, _, body = text.partition("\n")
    if header.strip().replace(" ", "") != CSV_HEADER:
        raise FieldIOError(f"frame {frame_index}: bad header {header!r} in {path}, expected {CSV_HEADER!r}")
    try:
        data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise FieldIOError(f"frame {frame_index}: cannot parse {path}: {exc}") from exc
    if data.shape[0] == 0 or data.shape[1] != 5:
        raise FieldIOError(f"frame {frame_index}: expected 5 columns with at least one row in {path}")

    xs, ys = data[:, 0], data[:, 1]
    if not (np.all(xs == np.round(xs)) and np.all(ys == np.round(ys))):
        raise FieldIOError(f"frame {frame_index}: x,y must be integer grid indices in {path}")
    width, height = int(xs.max()) + 1, int(ys.max()) + 1
    if expected is not None and (width, height) != (expected.width, expected.height):
        raise FieldIOError(
            f"frame {frame_index}: grid size {width}x{height} does not match "
            f"{expected.width}x{expected.height} ({path})"
        )
    grid = expected if expected is not None else GridSpec(width, height)
    if data.shape[0] != grid.size:
        raise FieldIOError(f"frame {frame_index}: expected {grid.size} rows, found {data.shape[0]} in {path}")
    ref_y, ref_x = np.divmod(np.arange(grid.size), grid.width)
    if not (np.array_equal(xs, ref_x) and np.array_equal(ys, ref_y)):
        bad = int(np.flatnonzero((xs != ref_x) | (ys != ref_y))[0])
        raise FieldIOError(f"frame {frame_index}: row {bad + 1} out of row-major order in {path}")

    flags = data[:, 4]
    if not np.all((flags == 0) | (flags == 1)):
        bad = int(np.flatnonzero((flags != 0) & (flags != 1))[0])
        raise FieldIOError(f"frame {frame_index}: valid must be 0 or 1 at sample ({int(xs[bad])},{int(ys[bad])})")
    uv = data[:, 2:4]
    finite = np.isfinite(uv).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise FieldIOError(
            f"frame {frame_index}: non-finite displacement at sample ({int(xs[bad])},{int(ys[bad])}) in {path}"
        )
    return DisplacementFrame(
        grid=grid,
        frame_index=frame_index,
        u=uv.reshape(grid.height, grid.width, 2),
        valid=(flags == 1).reshape(grid.shape),
    )


def load_sequence(manifest_path) -> Sequence:
    manifest_path = Path(manifest_path)
    manifest = _read_manifest(manifest_path)
    grid = GridSpec(manifest["width"], manifest["height"], float(manifest.get("spacing", 1.0)))
    frames = [
        read_frame_csv(manifest_path.parent / name, i, expected=grid)
        for i, name in enumerate(manifest["frames"])
    ]
    return Sequence(grid, tuple(frames))


def format_frame_csv(frame: DisplacementFrame) -> str:
    ys, xs = np.divmod(np.arange(frame.grid.size), frame.grid.width)
    uv = frame.u.reshape(-1, 2)
    flags = frame.valid.reshape(-1).astype(int)
    lines = [CSV_HEADER]
    lines.extend(
        f"{x},{y},{u:.17g},{v:.17g},{k}"
        for x, y, (u, v), k in zip(xs.tolist(), ys.tolist(), uv.tolist(), flags.tolist())
    )
    return "\n".join(lines) + "\n"


def save_sequence(sequence: Sequence, out_dir, truth: dict | None = None) -> Path:
    """Write manifest, frame CSVs and an optional ``truth.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(max(len(sequence) - 1, 0))))
    names = []
    for fr in sequence:
        name = f"f{fr.frame_index:0{width}d}.csv"
        (out_dir / name).write_text(format_frame_csv(fr), encoding="utf-8")
        names.append(name)
    manifest = {
        "width": sequence.grid.width,
        "height": sequence.grid.height,
        "spacing": sequence.grid.spacing,
        "frames": names,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    if truth is not None:
        (out_dir / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path
