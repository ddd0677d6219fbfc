# tests/test_heatmap_codec.py
# Testuje kodowanie keypointów do heatmap Gaussa i dekodowanie z ćwierćkomórkową korektą.
import numpy as np
import pytest

from diffpose_animal.errors import ShapeError, ValidationError
from diffpose_animal.heatmap_codec import HeatmapStack, KeypointSet, decode, dump_pgm, encode, encode_batch
from diffpose_animal.numerics import Rng

BOX = (0.0, 0.0, 64.0, 64.0)


def _kps(coords, vis=None):
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    vis = [2] * len(coords) if vis is None else vis
    return KeypointSet(coords, vis, BOX)


def test_encode_closed_form_gaussian():
    hm = encode(_kps([[8.0, 8.0]]), (16, 16), stride=1, sigma=2.0)
    assert hm.values[0, 8, 8] == 1.0
    assert hm.values[0, 8, 9] == pytest.approx(np.exp(-1 / 8), abs=1e-15)
    assert hm.values[0, 8, 9] == pytest.approx(0.8825, abs=1e-4)


def test_encode_invisible_channel_is_zero():
    hm = encode(_kps([[8.0, 8.0], [4.0, 4.0]], vis=[2, 0]), (16, 16), stride=1)
    assert not hm.values[1].any()
    assert hm.values[0].any()


def test_encode_matches_per_cell_oracle():
    rng = Rng(11, "test/encode")
    xy = rng.uniform(0.0, 60.0, 2)
    hm = encode(_kps([xy]), (16, 16), stride=4, sigma=2.0)
    u, v = xy / 4.0
    ref = 0.0
    for j in range(16):
        for i in range(16):
            ref += np.exp(-((i - u) ** 2 + (j - v) ** 2) / 8.0)
    assert hm.values[0].sum() == pytest.approx(ref, abs=1e-12)


def test_encode_out_of_bounds_is_recorded():
    hm = encode(_kps([[100.0, 10.0], [10.0, 10.0]]), (16, 16), stride=4)
    assert hm.out_of_bounds == (0,)
    assert hm.values[0].max() < 1.0


def test_encode_batch_mask():
    maps, mask = encode_batch([_kps([[8.0, 8.0]], [2]), _kps([[8.0, 8.0]], [0])], (16, 16), 4, 2.0)
    assert maps.shape == (2, 1, 16, 16)
    np.testing.assert_array_equal(mask, [[1.0], [0.0]])


def test_decode_roundtrip_within_half_stride():
    rng = Rng(12, "test/roundtrip")
    coords = rng.uniform(0.0, 15.0 * 4.0, (1000, 2))
    out = decode(encode(_kps(coords), (16, 16), stride=4))
    err = np.abs(out.coords - coords)
    assert np.all(np.isfinite(out.coords))
    assert err.max() <= 0.5 * 4


def test_decode_zero_channel_tie_break():
    out = decode(HeatmapStack(np.zeros((1, 8, 8)), 4))
    np.testing.assert_array_equal(out.coords[0], [0.0, 0.0])
    assert out.score[0] == 0.0
    assert out.visibility[0] == 1


def test_decode_single_cell_and_quarter_refinement():
    vals = np.zeros((2, 8, 8))
    vals[0, 3, 5] = 1.0
    vals[1, 3, 5] = 1.0
    vals[1, 3, 6] = 0.5      # prawy sąsiad większy → +1/4 komórki w x
    vals[1, 2, 5] = 0.25     # górny sąsiad większy → −1/4 komórki w y
    out = decode(HeatmapStack(vals, 4))
    np.testing.assert_array_equal(out.coords[0], [20.0, 12.0])
    np.testing.assert_array_equal(out.coords[1], [21.0, 11.0])
    np.testing.assert_array_equal(out.visibility, [2, 2])


def test_decode_clamps_score():
    vals = np.full((1, 4, 4), -0.5)
    vals[0, 1, 1] = 1.7
    out = decode(HeatmapStack(vals, 4))
    assert out.score[0] == 1.0


def test_keypointset_validation():
    with pytest.raises(ValidationError):
        KeypointSet([[0.0, 0.0]], [3], BOX)
    with pytest.raises(ValidationError):
        KeypointSet([[0.0, 0.0]], [2], (0.0, 0.0, 0.0, 5.0))
    with pytest.raises(ShapeError):
        KeypointSet([[0.0, 0.0], [1.0, 1.0]], [2], BOX)
    k = KeypointSet.from_triplets([1.0, 2.0, 2, 3.0, 4.0, 0], BOX)
    assert k.triplets() == [1.0, 2.0, 2, 3.0, 4.0, 0]


def test_dump_pgm(tmp_path):
    vals = np.zeros((2, 3, 4))
    vals[1, 0, 0] = 1.0
    paths = dump_pgm(HeatmapStack(vals, 4), tmp_path, prefix="000001")
    assert [p.name for p in paths] == ["000001_00.pgm", "000001_01.pgm"]
    lines = paths[1].read_text().splitlines()
    assert lines[:3] == ["P2", "4 3", "255"]
    assert lines[3].split()[0] == "255"
