"""Sankey geometry for a region tracking graph, and its SVG rendering.

Layout runs in fixed stages: id order per column, barycenter crossing
reduction, lane packing (forward lane inheritance, backward alignment), then
ribbon geometry.  Everything is deterministic so the SVG bytes depend only on
the graph and the config.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tracking import TrackingGraph

# perceptually ordered dark-to-bright anchors (t -> RGB)
VIRIDIS_ANCHORS = (
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
)
LINK_OPACITY = 0.55


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class LayoutConfig:
    width: float = 1200.0
    height: float = 600.0
    margin: float = 20.0
    node_width: float = 8.0
    column_gap: float | None = None  # None: spread columns over the canvas width
    node_gap: float = 4.0
    min_node_height: float = 2.0
    min_link_thickness: float = 1.0
    sweeps: int = 4
    colormap: tuple = VIRIDIS_ANCHORS

    def __post_init__(self):
        lengths = {
            "width": self.width, "height": self.height, "node_width": self.node_width,
            "node_gap": self.node_gap, "min_node_height": self.min_node_height,
            "min_link_thickness": self.min_link_thickness,
        }
        if self.column_gap is not None:
            lengths["column_gap"] = self.column_gap
        for name, value in lengths.items():
            if not value > 0:
                raise LayoutError(f"{name} must be positive, got {value}")
        if self.margin < 0:
            raise LayoutError(f"margin must be non-negative, got {self.margin}")
        if int(self.sweeps) != self.sweeps or self.sweeps < 1:
            raise LayoutError(f"sweeps must be a positive integer, got {self.sweeps}")


@dataclass
class SankeyNode:
    id: int
    column: int
    x: float
    y: float
    height: float
    color: tuple[int, int, int]
    lane: int
    area: int = 0
    max_evm: float = 0.0


@dataclass
class SankeyLink:
    from_id: int
    to_id: int
    weight: int
    thickness: float
    source_y: float = 0.0  # top of the ribbon at the source node
    target_y: float = 0.0

    def ribbon(self, x0: float, x1: float) -> str:
        """SVG path of the cubic band, control points at the horizontal midpoint."""
        xm = 0.5 * (x0 + x1)
        s0, t0 = self.source_y, self.target_y
        s1, t1 = s0 + self.thickness, t0 + self.thickness
        return (
            f"M{x0:.2f},{s0:.2f} C{xm:.2f},{s0:.2f} {xm:.2f},{t0:.2f} {x1:.2f},{t0:.2f} "
            f"L{x1:.2f},{t1:.2f} C{xm:.2f},{t1:.2f} {xm:.2f},{s1:.2f} {x0:.2f},{s1:.2f} Z"
        )


@dataclass
class SankeyLayout:
    width: float
    height: float
    scale: float
    nodes: dict[int, SankeyNode] = field(default_factory=dict)
    links: list[SankeyLink] = field(default_factory=list)
    orders: list[list[int]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "scale": self.scale,
            "nodes": [
                {"id": n.id, "column": n.column, "lane": n.lane, "x": n.x, "y": n.y,
                 "height": n.height, "color": list(n.color)}
                for n in sorted(self.nodes.values(), key=lambda n: (n.column, n.id))
            ],
            "links": [
                {"from": l.from_id, "to": l.to_id, "weight": l.weight, "thickness": l.thickness}
                for l in self.links
            ],
        }


# ---------------------------------------------------------------- ordering

def initial_order(graph: TrackingGraph) -> list[list[int]]:
    """Per-frame region ids, ascending."""
    n = max(graph.n_frames, max((r.frame_index for r in graph.regions), default=-1) + 1)
    orders = [[] for _ in range(n)]
    for r in graph.regions:
        orders[r.frame_index].append(r.id)
    return [sorted(col) for col in orders]


def _edges(links) -> list[tuple[int, int]]:
    return [(l.from_region, l.to_region) if hasattr(l, "from_region") else (l[0], l[1]) for l in links]


def _positions(orders) -> dict[int, tuple[int, int]]:
    return {rid: (c, k) for c, col in enumerate(orders) for k, rid in enumerate(col)}


def count_crossings(orders, links) -> int:
    """Pairs of links between the same two columns whose endpoints are inverted."""
    pos = _positions(orders)
    by_col = defaultdict(list)
    for a, b in _edges(links):
        by_col[pos[a][0]].append((pos[a][1], pos[b][1]))
    total = 0
    for pairs in by_col.values():
        if len(pairs) < 2:
            continue
        src, dst = np.array(pairs).T
        total += int(np.count_nonzero((src[:, None] < src[None, :]) & (dst[:, None] > dst[None, :])))
    return total


def barycenter_sweep(orders, links, sweeps: int = 4) -> list[list[int]]:
    """Alternating barycenter sweeps, keeping the best order seen.

    Pass ``k`` runs left-to-right for even ``k`` and right-to-left for odd
    ``k``.  The initial order counts as a visited state, so the result never
    has more crossings than the input.
    """
    edges = _edges(links)
    preds, succs = defaultdict(list), defaultdict(list)
    for a, b in edges:
        succs[a].append(b)
        preds[b].append(a)

    state = [list(col) for col in orders]
    best, best_count = [list(col) for col in state], count_crossings(state, edges)
    n = len(state)
    for k in range(sweeps):
        if k % 2 == 0:
            steps = [(c, c - 1, preds) for c in range(1, n)]
        else:
            steps = [(c, c + 1, succs) for c in range(n - 2, -1, -1)]
        for col, fixed, nbrs in steps:
            fixed_pos = {rid: i for i, rid in enumerate(state[fixed])}
            keys = {}
            for i, rid in enumerate(state[col]):
                ps = [fixed_pos[m] for m in nbrs[rid] if m in fixed_pos]
                keys[rid] = sum(ps) / len(ps) if ps else float(i)
            state[col].sort(key=lambda rid: (keys[rid], rid))
        count = count_crossings(state, edges)
        if count < best_count:
            best, best_count = [list(col) for col in state], count
    return best


# ---------------------------------------------------------------- packing

def _heaviest(links, endpoint: str):
    """Link of maximum weight; ties go to the lower id at ``endpoint``."""
    if not links:
        return None
    return min(links, key=lambda l: (-l.weight, getattr(l, endpoint)))


def assign_lanes(orders, graph: TrackingGraph) -> dict[int, int]:
    """Forward lane pass; lane 0 is the top band.

    A node inherits the lane of its heaviest predecessor when that lane lies
    below the lane of the node above it in the column.  Otherwise it takes
    the top-most free lane between its upper neighbour and the next lane
    wanted by a node further down, opening a new lane right there if none
    exists.  Lanes are kept as an ordered list so opening never reorders
    existing lanes.
    """
    lane_rows: list[int] = []  # lane ids, top to bottom
    lane_of: dict[int, int] = {}
    for col in orders:
        wanted = []
        for rid in col:
            link = _heaviest(graph.incoming.get(rid, []), "from_region")
            wanted.append(lane_of.get(link.from_region) if link is not None else None)
        rank = {lane: i for i, lane in enumerate(lane_rows)}
        last = -1  # row index of the lane used by the node above
        claimed = set()
        for i, rid in enumerate(col):
            want = wanted[i]
            if want is not None and want not in claimed and rank[want] > last:
                lane = want
            else:
                later = {w for w in wanted[i + 1 :] if w is not None and rank[w] > last}
                limit = min((rank[w] for w in later), default=len(lane_rows))
                free = [r for r in range(last + 1, limit) if lane_rows[r] not in claimed]
                if free:
                    lane = lane_rows[free[0]]
                else:
                    lane = len(lane_rows)
                    lane_rows.insert(last + 1, lane)
                    rank = {ln: j for j, ln in enumerate(lane_rows)}
            lane_of[rid] = lane
            claimed.add(lane)
            last = rank[lane]
    row = {lane: i for i, lane in enumerate(lane_rows)}
    return {rid: row[lane] for rid, lane in lane_of.items()}


def lane_packing(orders, graph: TrackingGraph, heights: dict[int, float], config: LayoutConfig,
                 top: float | None = None, bottom: float | None = None):
    """Lanes and node tops ``y``: returns ``(lanes, y)``.

    Bands are stacked from ``top`` (lane 0 first), each as tall as its
    tallest node plus ``node_gap``; nodes are centred in their band.  A
    backward pass then moves each node level with its heaviest successor
    whenever that keeps the column's order and gaps intact.
    """
    top = config.margin if top is None else top
    lanes = assign_lanes(orders, graph)
    n_lanes = max(lanes.values(), default=-1) + 1
    band = [config.node_gap] * n_lanes
    for rid, lane in lanes.items():
        band[lane] = max(band[lane], heights[rid] + config.node_gap)
    band_top = np.concatenate([[top], top + np.cumsum(band)])
    if bottom is None:
        bottom = float(band_top[-1])
    y = {rid: float(band_top[lane] + 0.5 * (band[lane] - heights[rid])) for rid, lane in lanes.items()}

    gap = config.node_gap
    for c in range(len(orders) - 2, -1, -1):
        col = orders[c]
        for i, rid in enumerate(col):
            link = _heaviest(graph.outgoing.get(rid, []), "to_region")
            if link is None:
                continue
            target = y[link.to_region] + 0.5 * heights[link.to_region]
            new_y = target - 0.5 * heights[rid]
            lo = top if i == 0 else y[col[i - 1]] + heights[col[i - 1]] + gap
            hi = bottom - heights[rid] if i == len(col) - 1 else y[col[i + 1]] - gap - heights[rid]
            if lo <= new_y <= hi:
                y[rid] = new_y
    return lanes, y


# ---------------------------------------------------------------- encodings

def color_of(max_evm: float, global_max: float, anchors=VIRIDIS_ANCHORS) -> tuple[int, int, int]:
    if not global_max > 0:
        raise LayoutError(f"global_max must be positive, got {global_max}")
    t = min(max(max_evm / global_max, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(anchors, anchors[1:]):
        if t <= t1:
            w = (t - t0) / (t1 - t0)
            return tuple(int(math.floor(a + w * (b - a) + 0.5)) for a, b in zip(c0, c1))
    return tuple(anchors[-1][1])


def hex_color(rgb) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _scale_for(lanes, areas, n_lanes, avail, config) -> float:
    lane_max = [0] * n_lanes
    for rid, lane in lanes.items():
        lane_max[lane] = max(lane_max[lane], areas[rid])
    total = sum(lane_max)
    room = avail - n_lanes * (config.node_gap + config.min_node_height)
    if total <= 0 or room <= 0:
        # content cannot fit; fall back to the minimum heights and grow the canvas
        return config.min_node_height / max(max(lane_max, default=1), 1)
    return room / total


def compute_layout(graph: TrackingGraph, config: LayoutConfig | None = None) -> SankeyLayout:
    config = config or LayoutConfig()
    orders = barycenter_sweep(initial_order(graph), graph.links, config.sweeps)
    n_cols = len(orders)

    if config.column_gap is not None:
        step = config.node_width + config.column_gap
        width = 2 * config.margin + max(n_cols - 1, 0) * step + config.node_width
    else:
        width = config.width
        step = (width - 2 * config.margin - config.node_width) / (n_cols - 1) if n_cols > 1 else 0.0
    height = config.height
    if not graph.regions:
        return SankeyLayout(width, height, 0.0, orders=orders)

    areas = {r.id: r.area for r in graph.regions}
    lanes = assign_lanes(orders, graph)
    n_lanes = max(lanes.values()) + 1
    scale = _scale_for(lanes, areas, n_lanes, height - 2 * config.margin, config)
    heights = {rid: max(scale * a, config.min_node_height) for rid, a in areas.items()}
    # the canvas only grows when the fallback scale was needed
    bands = [config.node_gap] * n_lanes
    for rid, lane in lanes.items():
        bands[lane] = max(bands[lane], heights[rid] + config.node_gap)
    height = max(height, sum(bands) + 2 * config.margin)
    lanes, y = lane_packing(orders, graph, heights, config, top=config.margin, bottom=height - config.margin)

    global_max = max(r.max_evm for r in graph.regions)
    nodes = {}
    for c, col in enumerate(orders):
        for rid in col:
            r = graph.by_id[rid]
            color = color_of(r.max_evm, global_max, config.colormap) if global_max > 0 else config.colormap[0][1]
            nodes[rid] = SankeyNode(rid, c, config.margin + c * step, y[rid], heights[rid], color,
                                    lanes[rid], r.area, r.max_evm)

    links = []
    for l in sorted(graph.links, key=lambda l: (l.from_region, l.to_region)):
        a, b = nodes[l.from_region], nodes[l.to_region]
        thick = min(max(scale * l.weight, config.min_link_thickness), a.height, b.height)
        links.append(SankeyLink(l.from_region, l.to_region, l.weight, thick))
    # stack ribbons on each node: outgoing by target position, incoming by source position
    out_of, in_to = defaultdict(list), defaultdict(list)
    for link in links:
        out_of[link.from_id].append(link)
        in_to[link.to_id].append(link)
    for rid, ls in out_of.items():
        offset = nodes[rid].y
        for link in sorted(ls, key=lambda l: (nodes[l.to_id].y, l.to_id)):
            link.source_y = offset
            offset += link.thickness
    for rid, ls in in_to.items():
        offset = nodes[rid].y
        for link in sorted(ls, key=lambda l: (nodes[l.from_id].y, l.from_id)):
            link.target_y = offset
            offset += link.thickness
    return SankeyLayout(width, height, scale, nodes, links, orders)


# ---------------------------------------------------------------- SVG

def render_svg(layout: SankeyLayout, config: LayoutConfig | None = None) -> str:
    config = config or LayoutConfig()
    w, h = layout.width, layout.height
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.2f}" height="{h:.2f}" '
        f'viewBox="0.00 0.00 {w:.2f} {h:.2f}">',
        f'<rect x="0.00" y="0.00" width="{w:.2f}" height="{h:.2f}" fill="#ffffff"/>',
    ]
    for link in sorted(layout.links, key=lambda l: (l.from_id, l.to_id)):
        a, b = layout.nodes[link.from_id], layout.nodes[link.to_id]
        out.append(
            f'<path d="{link.ribbon(a.x + config.node_width, b.x)}" fill="{hex_color(a.color)}" '
            f'fill-opacity="{LINK_OPACITY:.2f}"/>'
        )
    for n in sorted(layout.nodes.values(), key=lambda n: (n.column, n.id)):
        out.append(
            f'<rect id="region-{n.id}" x="{n.x:.2f}" y="{n.y:.2f}" width="{config.node_width:.2f}" '
            f'height="{n.height:.2f}" fill="{hex_color(n.color)}">'
            f"<title>region {n.id} frame {n.column} area {n.area} max_evm {n.max_evm:.4f}</title></rect>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(layout: SankeyLayout, config: LayoutConfig | None, path) -> Path:
    path = Path(path)
    try:
        path.write_text(render_svg(layout, config), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise LayoutError(f"cannot write SVG to {path}: {exc}") from exc
    return path


def write_layout_json(layout: SankeyLayout, path) -> None:
    Path(path).write_text(json.dumps(layout.to_json(), indent=1) + "\n", encoding="utf-8")
