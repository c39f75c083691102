"""Command-line entry point: ``strainflow <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import field_io, pipeline, sankey_layout, tracking
from .pipeline import ConfigError, RunConfig

log = logging.getLogger("strainflow")

LAYOUT_FLAGS = {
    "canvas_width": "width", "canvas_height": "height", "node_width": "node_width",
    "column_gap": "column_gap", "node_gap": "node_gap", "min_node_height": "min_node_height",
    "min_link_thickness": "min_link_thickness", "sweeps": "sweeps",
}
LIC_FLAGS = {"kernel": "kernel_length", "step": "step", "supersample": "supersample", "seed": "seed",
             "scale": "scale"}


def _int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like WxH, got {text!r}") from exc


def _add_config(p):
    p.add_argument("--config", help="JSON file of option values; command-line flags take precedence")


def _add_layout(p):
    g = p.add_argument_group("Sankey layout")
    g.add_argument("--canvas-width", type=float)
    g.add_argument("--canvas-height", type=float)
    g.add_argument("--node-width", type=float)
    g.add_argument("--column-gap", type=float)
    g.add_argument("--node-gap", type=float)
    g.add_argument("--min-node-height", type=float)
    g.add_argument("--min-link-thickness", type=float)
    g.add_argument("--sweeps", type=int, help="barycenter passes")


def _add_lic(p):
    g = p.add_argument_group("LIC")
    g.add_argument("--seed", type=int)
    g.add_argument("--kernel", type=float, help="kernel half-length in px")
    g.add_argument("--step", type=float, help="integration step in px")
    g.add_argument("--supersample", type=int, help="sub-pixel offsets per pixel (1, 4, 9, 16)")
    g.add_argument("--scale", type=int, help="output pixels per grid sample")


def _add_dumps(p):
    p.add_argument("--dump-strain", action="store_true", default=None)
    p.add_argument("--dump-regions", action="store_true", default=None)
    p.add_argument("--dump-graph", action="store_true", default=None)
    p.add_argument("--dump-layout", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strainflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic scenario dataset")
    p.add_argument("scenario")
    p.add_argument("--grid", type=_grid, default=(120, 80), help="WxH samples (default 120x80)")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", required=True)

    p = sub.add_parser("strain", help="dump per-frame strain CSVs")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)

    for name, help_ in (("pipeline", "run the full pipeline for one (it, ih)"),
                        ("track", "extract regions and the tracking graph")):
        p = sub.add_parser(name, help=help_)
        _add_config(p)
        p.add_argument("--input")
        p.add_argument("--out")
        p.add_argument("--it", type=int)
        p.add_argument("--ih", type=int)
        _add_dumps(p)
        _add_layout(p)
        if name == "pipeline":
            p.add_argument("--lic-frames", help="also render LIC for these frames (k, a,b, last, all)")
            _add_lic(p)

    p = sub.add_parser("sweep", help="pipeline over a grid of (it, ih)")
    _add_config(p)
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--it", type=_int_list, help="e.g. 1-4 or 1,3 (default 1-4)")
    p.add_argument("--ih", type=_int_list, help="e.g. 0-3 (default 0-3)")
    _add_dumps(p)
    _add_layout(p)

    p = sub.add_parser("sankey", help="render a graph JSON export as SVG")
    _add_config(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--dump-layout", action="store_true", default=None)
    _add_layout(p)

    p = sub.add_parser("lic", help="render tensor LIC images")
    _add_config(p)
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--frame", dest="frames", help="frame index, comma list, 'last' or 'all'")
    p.add_argument("--frames", dest="frames", help=argparse.SUPPRESS)
    p.add_argument("--no-overlay", action="store_true", default=None)
    _add_lic(p)
    return parser


def _file_values(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _merged(args, key, file_values, default=None):
    value = getattr(args, key, None)
    if value is None:
        value = file_values.get(key, default)
    return value


def _run_config(args, it_default, ih_default) -> RunConfig:
    fv = _file_values(args)
    inp = _merged(args, "input", fv)
    out = _merged(args, "out", fv)
    if inp is None or out is None:
        raise ConfigError("--input and --out are required")
    it = _merged(args, "it", fv, it_default)
    ih = _merged(args, "ih", fv, ih_default)
    layout = {dst: _merged(args, src, fv) for src, dst in LAYOUT_FLAGS.items()}
    lic = {dst: _merged(args, src, fv) for src, dst in LIC_FLAGS.items()}
    return RunConfig(
        input=inp,
        out=out,
        it=it if isinstance(it, list) else [it],
        ih=ih if isinstance(ih, list) else [ih],
        layout={k: v for k, v in layout.items() if v is not None},
        lic={k: v for k, v in lic.items() if v is not None},
        lic_frames=_merged(args, "lic_frames", fv) or _merged(args, "frames", fv),
        dump_strain=bool(_merged(args, "dump_strain", fv, False)),
        dump_regions=bool(_merged(args, "dump_regions", fv, False)),
        dump_graph=bool(_merged(args, "dump_graph", fv, False)),
        dump_layout=bool(_merged(args, "dump_layout", fv, False)),
    )


def _cmd_generate(args) -> int:
    params = {}
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        params[key] = json.loads(value)
    if args.frames < 1:
        raise ConfigError(f"--frames must be >= 1, got {args.frames}")
    grid = field_io.GridSpec(args.grid[0], args.grid[1], args.spacing)
    manifest = pipeline.run_generate(args.scenario, grid, args.frames, args.out, params)
    print(f"wrote {args.frames} frames of {args.scenario} to {manifest}")
    return 0


def _cmd_strain(args) -> int:
    cache, out = pipeline._prepare(RunConfig(input=args.input, out=args.out))
    pipeline.write_strain_dumps(cache, out)
    print(f"wrote {len(cache.frames)} strain CSVs to {out / 'strain'}")
    return 0


def _cmd_pipeline(args) -> int:
    cfg = _run_config(args, 2, 1)
    result = pipeline.run_pipeline(cfg)
    print(pipeline.summary_line(result["summary"]))
    return 0


def _cmd_track(args) -> int:
    cfg = _run_config(args, 2, 1)
    cfg.dump_regions = cfg.dump_graph = True
    cache, out = pipeline._prepare(cfg)
    by_frame, *_ = pipeline.extract_regions(cache, cfg.it[0], cfg.ih[0])
    graph = tracking.build_tracking_graph(by_frame, n_frames=len(cache.frames))
    tag = f"it{cfg.it[0]}_ih{cfg.ih[0]}"
    with open(out / f"regions_{tag}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for r in graph.regions:
            fh.write(json.dumps(r.to_json()) + "\n")
    (out / f"graph_{tag}.json").write_text(json.dumps(graph.to_json(), indent=1) + "\n", encoding="utf-8")
    print(pipeline.summary_line(graph.summary()))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _run_config(args, [1, 2, 3, 4], [0, 1, 2, 3])
    index = pipeline.run_sweep(cfg)
    failed = [c for c in index["cells"] if c["status"] != "ok"]
    print(f"sweep: {len(index['cells']) - len(failed)} cells ok, {len(failed)} failed")
    for cell in index["cells"]:
        if cell["status"] == "ok":
            print(f"  it={cell['it']} ih={cell['ih']} {pipeline.summary_line(cell['summary'])}")
        else:
            print(f"  it={cell['it']} ih={cell['ih']} FAILED {cell['error']}")
    return 1 if failed else 0


def _cmd_sankey(args) -> int:
    fv = _file_values(args)
    layout = {dst: _merged(args, src, fv) for src, dst in LAYOUT_FLAGS.items()}
    cfg = sankey_layout.LayoutConfig(**{k: v for k, v in layout.items() if v is not None})
    graph = tracking.load_graph(args.graph)
    lay = sankey_layout.compute_layout(graph, cfg)
    path = sankey_layout.emit_svg(lay, cfg, args.out)
    if _merged(args, "dump_layout", fv, False):
        sankey_layout.write_layout_json(lay, path.with_suffix(".layout.json"))
    print(f"wrote {path}")
    return 0


def _cmd_lic(args) -> int:
    cfg = _run_config(args, 2, 1)
    if cfg.lic_frames is None:
        raise ConfigError("--frame is required (index, comma list, 'last' or 'all')")
    written = pipeline.run_lic(cfg, overlay=not _merged(args, "no_overlay", _file_values(args), False))
    print(f"wrote {len(written)} rasters to {cfg.out}")
    return 0


COMMANDS = {
    "generate": _cmd_generate, "strain": _cmd_strain, "pipeline": _cmd_pipeline, "track": _cmd_track,
    "sweep": _cmd_sweep, "sankey": _cmd_sankey, "lic": _cmd_lic,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"strainflow: error [{pipeline.module_of(exc)}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
