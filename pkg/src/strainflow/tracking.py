"""Temporal tracking of superlevel-set regions by shared-sample overlap."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .topo_filter import Region


class TrackingError(ValueError):
    pass


@dataclass(frozen=True)
class OverlapLink:
    from_region: int
    to_region: int
    weight: int
    merge: bool = False
    split: bool = False

    @property
    def continuation(self) -> bool:
        return not (self.merge or self.split)

    def to_json(self) -> dict:
        return {"from": self.from_region, "to": self.to_region, "weight": self.weight,
                "merge": self.merge, "split": self.split}


@dataclass
class TrackingGraph:
    regions: list[Region]
    links: list[OverlapLink]
    births: set[int] = field(default_factory=set)
    deaths: set[int] = field(default_factory=set)
    n_frames: int = 0

    def __post_init__(self):
        self.by_id = {r.id: r for r in self.regions}
        self.incoming = defaultdict(list)
        self.outgoing = defaultdict(list)
        for link in self.links:
            self.outgoing[link.from_region].append(link)
            self.incoming[link.to_region].append(link)
        if not self.n_frames and self.regions:
            self.n_frames = max(r.frame_index for r in self.regions) + 1

    def frame_regions(self, t: int) -> list[Region]:
        return [r for r in self.regions if r.frame_index == t]

    @property
    def merge_regions(self) -> list[int]:
        """Ids of regions with two or more predecessors (one merge event each)."""
        return sorted(rid for rid, ins in self.incoming.items() if len(ins) >= 2)

    @property
    def split_regions(self) -> list[int]:
        return sorted(rid for rid, outs in self.outgoing.items() if len(outs) >= 2)

    def summary(self) -> dict:
        return {
            "frames": self.n_frames,
            "regions": len(self.regions),
            "births": len(self.births),
            "merges": len(self.merge_regions),
            "splits": len(self.split_regions),
            "deaths": len(self.deaths),
        }

    def to_json(self) -> dict:
        return {
            "frames": self.n_frames,
            "regions": [r.to_json() for r in self.regions],
            "links": [link.to_json() for link in self.links],
            "births": sorted(self.births),
            "deaths": sorted(self.deaths),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrackingGraph":
        """Rebuild a graph from its JSON export; regions come back without samples."""
        regions = [
            Region(r["id"], r["frame"], np.empty(0, dtype=np.int64), (0, 0), int(r["area"]), float(r["max_evm"]))
            for r in data["regions"]
        ]
        links = [OverlapLink(l["from"], l["to"], int(l["weight"]), bool(l["merge"]), bool(l["split"]))
                 for l in data["links"]]
        n_frames = int(data.get("frames", 0))
        return cls(regions, links, set(data["births"]), set(data["deaths"]), n_frames)


def load_graph(path) -> TrackingGraph:
    with open(path, encoding="utf-8") as fh:
        return TrackingGraph.from_json(json.load(fh))


def overlap(a: Region, b: Region) -> int:
    """Number of grid samples shared by two regions (reference lattice indices)."""
    return int(np.intersect1d(a.samples, b.samples, assume_unique=True).size)


def _pair_overlaps(prev: list[Region], nxt: list[Region]) -> list[tuple[int, int, int]]:
    if not prev or not nxt:
        return []
    size = int(np.prod(prev[0].shape))
    owner = np.full(size, -1, dtype=np.int64)
    for k, r in enumerate(nxt):
        owner[r.samples] = k
    out = []
    for a in prev:
        hits = owner[a.samples]
        hits = hits[hits >= 0]
        if hits.size == 0:
            continue
        counts = np.bincount(hits, minlength=len(nxt))
        for k in np.flatnonzero(counts):
            out.append((a.id, nxt[k].id, int(counts[k])))
    return out


def build_tracking_graph(regions_by_frame, n_frames: int | None = None) -> TrackingGraph:
    """Link regions of consecutive frames and classify births/deaths/merges/splits.

    ``regions_by_frame`` is a list indexed by frame (possibly with empty
    lists), or a mapping frame -> regions covering 0..n-1.
    """
    if isinstance(regions_by_frame, dict):
        keys = sorted(regions_by_frame)
        if keys and keys != list(range(keys[0], keys[0] + len(keys))):
            raise TrackingError(f"frame indices are not consecutive: {keys}")
        frames = [regions_by_frame[k] for k in keys]
        offset = keys[0] if keys else 0
    else:
        frames = list(regions_by_frame)
        offset = 0
    for i, regs in enumerate(frames):
        for r in regs:
            if r.frame_index != offset + i:
                raise TrackingError(f"region {r.id} has frame {r.frame_index}, expected {offset + i}")
    if n_frames is None:
        n_frames = offset + len(frames)

    raw = []
    for t in range(len(frames) - 1):
        raw.extend(_pair_overlaps(frames[t], frames[t + 1]))
    n_in = defaultdict(int)
    n_out = defaultdict(int)
    for a, b, _ in raw:
        n_out[a] += 1
        n_in[b] += 1
    links = sorted(
        (OverlapLink(a, b, w, merge=n_in[b] >= 2, split=n_out[a] >= 2) for a, b, w in raw),
        key=lambda l: (l.from_region, l.to_region),
    )
    regions = [r for regs in frames for r in regs]
    births = {r.id for r in regions if n_in[r.id] == 0}
    deaths = {r.id for r in regions if n_out[r.id] == 0}
    return TrackingGraph(regions, links, births, deaths, n_frames)


@dataclass(frozen=True)
class Chain:
    regions: tuple[int, ...]
    start_frame: int
    end_frame: int
    peak_max_evm: float
    peak_area: int

    @property
    def lifetime(self) -> int:
        return self.end_frame - self.start_frame + 1

    def __len__(self) -> int:
        return len(self.regions)


def node_chains(graph: TrackingGraph) -> list[Chain]:
    """Maximal paths joined by continuation links (no merge, no split).

    Every region lands in exactly one chain.  Chains are ordered by their
    first region's (frame, id).
    """
    next_of = {}
    has_prev = set()
    for link in graph.links:
        if link.continuation:
            next_of[link.from_region] = link.to_region
            has_prev.add(link.to_region)
    heads = sorted((r for r in graph.regions if r.id not in has_prev), key=lambda r: (r.frame_index, r.id))
    chains = []
    for head in heads:
        ids = [head.id]
        while ids[-1] in next_of:
            ids.append(next_of[ids[-1]])
        members = [graph.by_id[i] for i in ids]
        chains.append(
            Chain(
                regions=tuple(ids),
                start_frame=members[0].frame_index,
                end_frame=members[-1].frame_index,
                peak_max_evm=max(m.max_evm for m in members),
                peak_area=max(m.area for m in members),
            )
        )
    return chains
