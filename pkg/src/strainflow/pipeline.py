"""End-to-end orchestration: load -> strain -> filter -> regions -> tracking -> Sankey."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import field_io, lic_render, sankey_layout, scenarios, strain_core, topo_filter, tracking

log = logging.getLogger(__name__)

MODULE_OF = {
    field_io.FieldIOError: "field_io",
    strain_core.StrainError: "strain_core",
    topo_filter.FilterError: "topo_filter",
    tracking.TrackingError: "tracking",
    sankey_layout.LayoutError: "sankey_layout",
    lic_render.LicError: "lic_render",
}


class ConfigError(ValueError):
    pass


def module_of(exc: BaseException) -> str:
    for cls, name in MODULE_OF.items():
        if isinstance(exc, cls):
            return name
    if isinstance(exc, ConfigError):
        return "cli"
    return "io" if isinstance(exc, OSError) else "pipeline"


@dataclass
class RunConfig:
    input: str
    out: str
    it: list[int] = field(default_factory=lambda: [2])
    ih: list[int] = field(default_factory=lambda: [1])
    layout: dict = field(default_factory=dict)
    lic: dict = field(default_factory=dict)
    lic_frames: str | None = None
    dump_strain: bool = False
    dump_regions: bool = False
    dump_graph: bool = False
    dump_layout: bool = False

    def __post_init__(self):
        self.it = [int(i) for i in self.it]
        self.ih = [int(i) for i in self.ih]
        for i in self.it:
            if i not in (1, 2, 3, 4):
                raise ConfigError(f"--it must be in 1..4, got {i}")
        for i in self.ih:
            if i not in (0, 1, 2, 3):
                raise ConfigError(f"--ih must be in 0..3, got {i}")

    def layout_config(self) -> sankey_layout.LayoutConfig:
        return sankey_layout.LayoutConfig(**self.layout)

    def lic_config(self) -> lic_render.LicConfig:
        return lic_render.LicConfig(**self.lic)


class StrainCache:
    """Strain frames of one sequence plus filtered fields memoised per ``h``."""

    def __init__(self, sequence: field_io.Sequence):
        self.sequence = sequence
        self.frames = [strain_core.compute_strain_frame(fr) for fr in sequence]
        self._filtered: dict[float, list[np.ndarray]] = {}
        self._p95: dict[float, float] = {}

    @property
    def masks(self):
        return [sf.valid for sf in self.frames]

    def filtered(self, h: float) -> list[np.ndarray]:
        if h not in self._filtered:
            self._filtered[h] = [
                topo_filter.h_maxima(topo_filter.fill_invalid(sf.evm, sf.valid), h) for sf in self.frames
            ]
        return self._filtered[h]

    def p95(self, h: float) -> float:
        if h not in self._p95:
            self._p95[h] = topo_filter.dataset_p95(self.filtered(h), self.masks)
        return self._p95[h]


def extract_regions(cache: StrainCache, i_t: int, i_h: int):
    """Regions per frame for one parameter cell; returns ``(regions_by_frame, tau, h, p95)``."""
    h = topo_filter.thresholds(i_t, i_h, 0.0)[1]
    p95 = cache.p95(h)
    tau, h = topo_filter.thresholds(i_t, i_h, p95)
    by_frame, next_id = [], 0
    for t, fld in enumerate(cache.filtered(h)):
        regions = topo_filter.superlevel_components(fld, tau, t, first_id=next_id)
        next_id += len(regions)
        by_frame.append(regions)
    return by_frame, tau, h, p95


def summary_line(summary: dict) -> str:
    return " ".join(f"{k}={summary[k]}" for k in ("frames", "regions", "births", "merges", "splits", "deaths"))


def _run_cell(cache: StrainCache, cfg: RunConfig, i_t: int, i_h: int, out: Path) -> dict:
    by_frame, tau, h, p95 = extract_regions(cache, i_t, i_h)
    graph = tracking.build_tracking_graph(by_frame, n_frames=len(cache.frames))
    layout_cfg = cfg.layout_config()
    layout = sankey_layout.compute_layout(graph, layout_cfg)
    tag = f"it{i_t}_ih{i_h}"
    svg = sankey_layout.emit_svg(layout, layout_cfg, out / f"sankey_{tag}.svg")
    if cfg.dump_regions:
        with open(out / f"regions_{tag}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for r in graph.regions:
                fh.write(json.dumps(r.to_json()) + "\n")
    if cfg.dump_graph:
        (out / f"graph_{tag}.json").write_text(json.dumps(graph.to_json(), indent=1) + "\n", encoding="utf-8")
    if cfg.dump_layout:
        sankey_layout.write_layout_json(layout, out / f"layout_{tag}.json")
    summary = graph.summary()
    summary["chains"] = len(tracking.node_chains(graph))
    return {"it": i_t, "ih": i_h, "tau": tau, "h": h, "p95": p95, "svg": svg.name, "summary": summary}


def _write_run_config(cfg: RunConfig, out: Path, **extra) -> None:
    data = asdict(cfg)
    data["layout_effective"] = asdict(cfg.layout_config())
    data["lic_effective"] = asdict(cfg.lic_config())
    data.update(extra)
    (out / "run_config.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=list) + "\n",
                                         encoding="utf-8")


def _prepare(cfg: RunConfig) -> tuple[StrainCache, Path]:
    sequence = field_io.load_sequence(cfg.input)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return StrainCache(sequence), out


def write_strain_dumps(cache: StrainCache, out: Path) -> None:
    d = out / "strain"
    d.mkdir(exist_ok=True)
    for sf in cache.frames:
        (d / f"strain_f{sf.frame_index:03d}.csv").write_text(strain_core.format_strain_csv(sf), encoding="utf-8")


def run_pipeline(cfg: RunConfig) -> dict:
    cache, out = _prepare(cfg)
    _write_run_config(cfg, out, command="pipeline")
    if cfg.dump_strain:
        write_strain_dumps(cache, out)
    result = _run_cell(cache, cfg, cfg.it[0], cfg.ih[0], out)
    if cfg.lic_frames is not None:
        result["lic"] = render_lic(cache, cfg, out)
    return result


def run_sweep(cfg: RunConfig) -> dict:
    """One pipeline cell per (i_t, i_h); strain and filtered fields are shared.

    A failing cell is recorded in the index and the sweep moves on.
    """
    cache, out = _prepare(cfg)
    _write_run_config(cfg, out, command="sweep")
    if cfg.dump_strain:
        write_strain_dumps(cache, out)
    cells = []
    for i_h in cfg.ih:
        for i_t in cfg.it:
            try:
                cell = _run_cell(cache, cfg, i_t, i_h, out)
                cell["status"] = "ok"
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                log.error("sweep cell it=%d ih=%d failed: %s", i_t, i_h, exc)
                cell = {"it": i_t, "ih": i_h, "status": "error", "error": f"[{module_of(exc)}] {exc}"}
            cells.append(cell)
    index = {"input": str(cfg.input), "cells": cells}
    (out / "sweep_index.json").write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    return index


def run_generate(name: str, grid: field_io.GridSpec, n_frames: int, out, params: dict | None = None) -> Path:
    sequence, truth = scenarios.generate_scenario(name, grid, n_frames, params)
    return field_io.save_sequence(sequence, out, truth=truth)


def parse_frames(selection: str, n_frames: int) -> list[int]:
    if selection == "all":
        return list(range(n_frames))
    if selection == "last":
        return [n_frames - 1]
    frames = []
    for part in str(selection).split(","):
        try:
            k = int(part)
        except ValueError as exc:
            raise ConfigError(f"bad frame selection {selection!r}; use an index, a comma list, 'last' or 'all'") from exc
        if not 0 <= k < n_frames:
            raise ConfigError(f"frame {k} out of range: valid frames are 0..{n_frames - 1}")
        frames.append(k)
    return frames


def render_lic(cache: StrainCache, cfg: RunConfig, out: Path, overlay: bool = True) -> list[str]:
    frames = parse_frames(cfg.lic_frames or "all", len(cache.frames))
    lic_cfg = cfg.lic_config()
    noise = lic_render.noise_texture(cache.sequence.grid, lic_cfg.seed)
    global_max = max(float(np.nanmax(np.where(sf.valid, sf.evm, 0.0))) for sf in cache.frames)
    written = []
    for k in frames:
        sf = cache.frames[k]
        img = lic_render.lic_image(lic_render.line_field(sf), lic_cfg, noise=noise)
        name = f"lic_f{k:03d}"
        lic_render.write_pgm(out / f"{name}.pgm", lic_render.to_uint8(img))
        written.append(f"{name}.pgm")
        if overlay:
            evm = np.where(sf.valid, sf.evm, 0.0)
            lic_render.write_ppm(out / f"{name}.ppm", lic_render.overlay_evm(img, evm, global_max))
            written.append(f"{name}.ppm")
    return written


def run_lic(cfg: RunConfig, overlay: bool = True) -> list[str]:
    cache, out = _prepare(cfg)
    _write_run_config(cfg, out, command="lic")
    return render_lic(cache, cfg, out, overlay)
