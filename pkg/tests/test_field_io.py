import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from strainflow import field_io, scenarios, strain_core
from strainflow.field_io import DisplacementFrame, FieldIOError, GridSpec, Sequence


def _write_manifest(tmp_path, frames, width=3, height=3):
    names = []
    for i, text in enumerate(frames):
        name = f"f{i:03d}.csv"
        (tmp_path / name).write_text(text)
        names.append(name)
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"width": width, "height": height, "spacing": 1.0, "frames": names}))
    return path


def _zero_csv(width, height, invalid=()):
    rows = ["x,y,u,v,valid"]
    for y in range(height):
        for x in range(width):
            rows.append(f"{x},{y},0,0,{0 if (x, y) in invalid else 1}")
    return "\n".join(rows) + "\n"


def test_gridspec_validation():
    with pytest.raises(FieldIOError):
        GridSpec(1, 5)
    with pytest.raises(FieldIOError):
        GridSpec(3, 3, spacing=0.0)
    g = GridSpec(4, 3, 0.5)
    assert g.shape == (3, 4)
    x, y = g.coordinates()
    assert x[0, 3] == 1.5 and y[2, 0] == 1.0


def test_zero_displacement_manifest(tmp_path):
    seq = field_io.load_sequence(_write_manifest(tmp_path, [_zero_csv(3, 3)] * 2))
    assert len(seq) == 2
    assert [f.frame_index for f in seq] == [0, 1]
    for fr in seq:
        assert fr.valid.all()
        assert np.all(fr.u == 0)


def test_invalid_row_keeps_value_but_masks(tmp_path):
    text = _zero_csv(3, 3).replace("1,1,0,0,1", "1,1,0.25,-0.5,0")
    fr = field_io.load_sequence(_write_manifest(tmp_path, [text]))[0]
    assert not fr.valid[1, 1]
    assert fr.valid.sum() == 8
    assert tuple(fr.u[1, 1]) == (0.25, -0.5)


def test_grid_mismatch_names_frame(tmp_path):
    path = _write_manifest(tmp_path, [_zero_csv(3, 3), _zero_csv(4, 3)])
    with pytest.raises(FieldIOError, match="frame 1"):
        field_io.load_sequence(path)


def test_missing_manifest_names_path(tmp_path):
    with pytest.raises(FieldIOError, match="nope.json"):
        field_io.load_sequence(tmp_path / "nope.json")


@pytest.mark.parametrize(
    "manifest",
    ["not json", "[1, 2]", '{"width": 3, "height": 3}', '{"width": "3", "height": 3, "frames": []}'],
)
def test_malformed_manifest(tmp_path, manifest):
    path = tmp_path / "manifest.json"
    path.write_text(manifest)
    with pytest.raises(FieldIOError, match="malformed"):
        field_io.load_sequence(path)


def test_non_finite_reports_frame_and_sample(tmp_path):
    text = _zero_csv(3, 3).replace("2,1,0,0,1", "2,1,nan,0,1")
    path = _write_manifest(tmp_path, [_zero_csv(3, 3), text])
    with pytest.raises(FieldIOError, match=r"frame 1.*\(2,1\)"):
        field_io.load_sequence(path)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda t: t.replace("x,y,u,v,valid", "x,y,u,v"), "header"),
        (lambda t: t.replace("1,0,0,0,1", "1,0,0,0,2"), "valid must be 0 or 1"),
        (lambda t: "\n".join(t.splitlines()[:-1]) + "\n", "rows|does not match"),
        (lambda t: t.replace("0,1,0,0,1\n1,1,0,0,1", "1,1,0,0,1\n0,1,0,0,1"), "order"),
    ],
)
def test_bad_frame_csv(tmp_path, mutate, message):
    path = _write_manifest(tmp_path, [mutate(_zero_csv(3, 3))])
    with pytest.raises(FieldIOError, match=message):
        field_io.load_sequence(path)


def test_missing_frame_file_is_an_error(tmp_path):
    path = _write_manifest(tmp_path, [_zero_csv(3, 3)] * 3)
    (tmp_path / "f002.csv").unlink()
    with pytest.raises(FieldIOError, match="frame 2"):
        field_io.load_sequence(path)


def test_sequence_invariants():
    g = GridSpec(3, 3)
    fr = DisplacementFrame(g, 0, np.zeros((3, 3, 2)), np.ones((3, 3), bool))
    with pytest.raises(FieldIOError):
        Sequence(g, (fr, fr))
    other = DisplacementFrame(GridSpec(4, 3), 1, np.zeros((3, 4, 2)), np.ones((3, 4), bool))
    with pytest.raises(FieldIOError):
        Sequence(g, (fr, other))
    with pytest.raises(FieldIOError):
        DisplacementFrame(g, 0, np.zeros((3, 4, 2)), np.ones((3, 3), bool))


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=True)


@settings(max_examples=40, deadline=None)
@given(
    w=st.integers(2, 6),
    h=st.integers(2, 6),
    n=st.integers(1, 3),
    data=st.data(),
)
def test_round_trip_bit_exact(tmp_path_factory, w, h, n, data):
    g = GridSpec(w, h, data.draw(st.sampled_from([1.0, 0.25, 3.0])))
    frames = []
    for t in range(n):
        u = data.draw(arrays(np.float64, (h, w, 2), elements=finite))
        valid = data.draw(arrays(np.bool_, (h, w)))
        frames.append(DisplacementFrame(g, t, u, valid))
    seq = Sequence(g, tuple(frames))
    out = tmp_path_factory.mktemp("rt")
    back = field_io.load_sequence(field_io.save_sequence(seq, out))
    assert back.grid == g
    assert len(back) == n  # never drops frames
    for a, b in zip(seq, back):
        assert a.u.tobytes() == b.u.tobytes()
        assert np.array_equal(a.valid, b.valid)


def test_generate_unknown_and_bad_params():
    g = GridSpec(5, 5)
    with pytest.raises(FieldIOError, match="unknown scenario"):
        scenarios.generate_scenario("vortex", g, 3)
    with pytest.raises(FieldIOError, match="positive"):
        scenarios.generate_scenario("uniaxial", g, 3, {"amplitude": -0.1})
    with pytest.raises(FieldIOError, match="unknown parameter"):
        scenarios.generate_scenario("uniaxial", g, 3, {"amp": 0.1})
    with pytest.raises(FieldIOError):
        scenarios.generate_scenario("uniaxial", g, 0)


def test_uniaxial_definition():
    g = GridSpec(6, 4)
    seq, _ = scenarios.generate_scenario("uniaxial", g, 5)
    x, _ = g.coordinates()
    for t, fr in enumerate(seq):
        alpha = 0.1 * t / 4
        assert np.allclose(fr.u[..., 0], alpha * x, rtol=0, atol=1e-15)
        assert np.all(fr.u[..., 1] == 0)


def test_rigid_rotation_definition_and_zero_strain():
    g = GridSpec(10, 8, 0.5)
    seq, _ = scenarios.generate_scenario("rigid-rotation", g, 4, {"angle": 40.0, "tx": 2.0, "ty": -1.0})
    x, y = g.coordinates()
    theta = np.radians(40.0)
    last = seq[3]
    rx = np.cos(theta) * x - np.sin(theta) * y - x + 2.0
    ry = np.sin(theta) * x + np.cos(theta) * y - y - 1.0
    assert np.allclose(last.u[..., 0], rx, atol=1e-12)
    assert np.allclose(last.u[..., 1], ry, atol=1e-12)
    for fr in seq:
        sf = strain_core.compute_strain_frame(fr)
        assert max(np.abs(sf.exx).max(), np.abs(sf.eyy).max(), np.abs(sf.exy).max()) <= 1e-9


def test_two_blobs_truth_recorded(tmp_path, two_blobs):
    _, truth = two_blobs
    assert truth["scenario"] == "two-blobs-merge"
    assert isinstance(truth["merge_frame"], int)
    assert 0 < truth["merge_frame"] < 59


def test_single_frame_scenario_uses_full_load():
    seq, _ = scenarios.generate_scenario("uniaxial", GridSpec(4, 4), 1)
    x, _ = seq.grid.coordinates()
    assert np.allclose(seq[0].u[..., 0], 0.1 * x)
