import numpy as np
import pytest

from dfmnet.images import pair_from_arrays
from dfmnet.quality import (ba_distribution, ba_report, derangement, dice_binary, edge_map,
                            multiscale_dice, report_from_images, square_pair, synthetic_pair, to_luma)
from dfmnet.tensor import ShapeError


def test_dice_algebra():
    a = np.zeros((8, 8), np.uint8)
    a[:2, :2] = 1
    b = np.zeros((8, 8), np.uint8)
    b[5:7, 5:7] = 1
    assert dice_binary(a, a) == 1.0
    assert dice_binary(a, b) == 0.0
    c = np.zeros((8, 8), np.uint8)
    c[:2, 1:3] = 1  # two of four pixels overlap
    assert dice_binary(a, c) == 0.5
    assert dice_binary(np.zeros((3, 3)), np.zeros((3, 3))) == 0.0
    with pytest.raises(ShapeError):
        dice_binary(a, a[:4])


def test_edge_map_step():
    img = np.zeros((16, 16))
    img[:, 8:] = 1
    e = edge_map(img)
    assert e[:, 7:9].all() and not e[:, :5].any() and not e[:, 12:].any()
    assert not edge_map(np.full((8, 8), 0.3)).any()
    with pytest.raises(ValueError):
        edge_map(img, 1.5)


def test_to_luma_layouts():
    hwc = np.random.default_rng(0).uniform(0, 1, (4, 5, 3))
    chw = hwc.transpose(2, 0, 1)
    np.testing.assert_allclose(to_luma(hwc), to_luma(chw[None]))
    with pytest.raises(ShapeError):
        to_luma(np.zeros((2, 3, 4, 4)))


def test_multiscale_dice_identical():
    e = edge_map(square_pair(0)[1].astype(float))
    assert multiscale_dice(e, e) == [1.0, 1.0, 1.0]


def test_shift_lowers_alignment():
    scores = [report_from_images(*[a.astype(float) / 255 for a in square_pair(s)]).mean_dice for s in (0, 2, 6)]
    assert scores[0] > scores[1] > scores[2]
    assert scores[0] == 1.0


def test_ba_report_on_pair():
    rgb, depth = synthetic_pair(0)
    r = ba_report(pair_from_arrays(rgb, depth))
    assert len(r.dice_per_scale) == 3 and 0 <= r.mean_dice <= 1
    assert set(r.to_dict()) == {"dice_per_scale", "mean_dice", "edge_pixel_counts", "threshold"}


@pytest.mark.parametrize("n", [2, 3, 10, 50])
def test_derangement(n):
    p = derangement(n, 4)
    assert sorted(p) == list(range(n)) and not (p == np.arange(n)).any()
    assert np.array_equal(p, derangement(n, 4))


def test_derangement_needs_two():
    with pytest.raises(ValueError):
        derangement(1, 0)


def test_distribution_small_corpus():
    pairs = [pair_from_arrays(*synthetic_pair(s, size=64)) for s in range(6)]
    aligned = ba_distribution(pairs)
    mismatched = ba_distribution(pairs, mismatch_seed=1)
    assert aligned["pairs"] == 6 and len(aligned["deciles"]) == 9
    assert aligned["mean_dice"] > mismatched["mean_dice"]
    with pytest.raises(ValueError):
        ba_distribution([])
    with pytest.raises(ValueError):
        ba_distribution(pairs[:1], mismatch_seed=0)
