import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import all_pairs_links
from strainflow import pipeline, topo_filter, tracking
from strainflow.topo_filter import Region
from strainflow.tracking import TrackingError

SHAPE = (4, 4)


def reg(id, frame, coords, shape=SHAPE, max_evm=1.0):
    return Region.from_coords(id, frame, coords, shape, max_evm)


def test_overlap_examples():
    a = reg(0, 0, [(0, 0), (0, 1)])
    b = reg(1, 1, [(0, 1), (0, 2)])
    assert tracking.overlap(a, b) == 1
    assert tracking.overlap(a, a) == a.area
    assert tracking.overlap(a, reg(2, 1, [(3, 3)])) == 0


def test_single_chain():
    a0 = reg(0, 0, [(0, 0), (1, 0), (0, 1), (1, 1)])
    a1 = reg(1, 1, [(0, 0), (1, 0), (0, 1), (1, 1), (2, 2)])
    g = tracking.build_tracking_graph([[a0], [a1]])
    assert [(l.from_region, l.to_region, l.weight, l.continuation) for l in g.links] == [(0, 1, 4, True)]
    assert g.births == {0} and g.deaths == {1}
    assert g.summary() == {"frames": 2, "regions": 2, "births": 1, "merges": 0, "splits": 0, "deaths": 1}


def test_merge_and_chains():
    a = reg(0, 0, [(0, 0), (1, 0)])
    b = reg(1, 0, [(3, 0), (3, 1)])
    a1 = reg(2, 1, [(0, 0), (1, 0)])
    b1 = reg(3, 1, [(3, 0), (3, 1)])
    c = reg(4, 2, [(0, 0), (1, 0), (2, 0), (3, 0), (3, 1)])
    c1 = reg(5, 3, [(0, 0), (1, 0)])
    g = tracking.build_tracking_graph([[a, b], [a1, b1], [c], [c1]])
    merge_links = [l for l in g.links if l.merge]
    assert [(l.from_region, l.to_region) for l in merge_links] == [(2, 4), (3, 4)]
    assert not any(l.split for l in g.links)
    assert g.merge_regions == [4]
    chains = tracking.node_chains(g)
    assert [c.regions for c in chains] == [(0, 2), (1, 3), (4, 5)]
    assert chains[2].lifetime == 2 and chains[2].peak_area == 5


def test_split_flags_links():
    a = reg(0, 0, [(0, 0), (1, 0), (2, 0)])
    b = reg(1, 1, [(0, 0)])
    c = reg(2, 1, [(2, 0)])
    g = tracking.build_tracking_graph([[a], [b, c]])
    assert all(l.split and not l.merge for l in g.links)
    assert g.split_regions == [0]
    assert len(tracking.node_chains(g)) == 3


def test_linear_sequence_one_chain():
    frames = [[reg(t, t, [(1, 1), (1, 2)], max_evm=0.1 * t)] for t in range(5)]
    g = tracking.build_tracking_graph(frames)
    chains = tracking.node_chains(g)
    assert len(chains) == 1 and len(chains[0]) == 5
    assert chains[0].lifetime == 5
    assert chains[0].peak_max_evm == pytest.approx(0.4)


def test_empty_frames_and_gaps():
    frames = [[reg(0, 0, [(0, 0)])], [], [reg(1, 2, [(0, 0)])]]
    g = tracking.build_tracking_graph(frames)
    assert g.links == []  # no gap closing
    assert g.births == {0, 1} and g.deaths == {0, 1}
    assert g.n_frames == 3


def test_non_consecutive_frames_rejected():
    with pytest.raises(TrackingError):
        tracking.build_tracking_graph({0: [], 2: []})
    with pytest.raises(TrackingError):
        tracking.build_tracking_graph([[reg(0, 1, [(0, 0)])]])


def test_json_round_trip(tmp_path):
    a = reg(0, 0, [(0, 0), (1, 0)])
    b = reg(1, 1, [(1, 0)])
    g = tracking.build_tracking_graph([[a], [b]])
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_json()))
    back = tracking.load_graph(path)
    assert back.to_json()["links"] == g.to_json()["links"]
    assert back.births == g.births and back.deaths == g.deaths
    assert [r.area for r in back.regions] == [2, 1]


def _random_frames(masks):
    frames, next_id = [], 0
    for t, m in enumerate(masks):
        regions = topo_filter.superlevel_components(m.astype(float), 0.5, t, first_id=next_id)
        next_id += len(regions)
        frames.append(regions)
    return frames


sequences = st.lists(arrays(np.bool_, (8, 8)), min_size=1, max_size=5)


@settings(max_examples=100, deadline=None)
@given(masks=sequences)
def test_matches_brute_force_and_conserves(masks):
    frames = _random_frames(masks)
    g = tracking.build_tracking_graph(frames)
    assert {(l.from_region, l.to_region): l.weight for l in g.links} == all_pairs_links(frames)
    for r in g.regions:
        assert sum(l.weight for l in g.incoming.get(r.id, [])) <= r.area
        assert sum(l.weight for l in g.outgoing.get(r.id, [])) <= r.area
    for l in g.links:
        assert g.by_id[l.to_region].frame_index == g.by_id[l.from_region].frame_index + 1
    # every region in exactly one chain
    members = [rid for c in tracking.node_chains(g) for rid in c.regions]
    assert sorted(members) == sorted(r.id for r in g.regions)
    # determinism
    assert tracking.build_tracking_graph(_random_frames(masks)).to_json() == g.to_json()


def test_two_blobs_ground_truth(two_blobs):
    manifest, truth = two_blobs
    cache = pipeline.StrainCache(pipeline.field_io.load_sequence(manifest))
    by_frame, tau, *_ = pipeline.extract_regions(cache, truth["it"], truth["ih"])
    g = tracking.build_tracking_graph(by_frame)
    # truth uses the analytic derivative, the pipeline finite differences
    assert tau == pytest.approx(truth["tau"], rel=1e-3)
    assert len(g.merge_regions) == 1
    assert g.by_id[g.merge_regions[0]].frame_index == truth["merge_frame"]
    assert g.split_regions == []
    assert len(tracking.node_chains(g)) == 3
