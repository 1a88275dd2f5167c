import numpy as np
import pytest
from PIL import Image

from dfmnet.images import (ImageReadError, denormalize_depth, denormalize_rgb, load_pair, map_to_uint8,
                           pair_from_arrays, prepare_depth, prepare_rgb, read_gray, read_rgb, save_gray,
                           save_map, save_rgb)
from dfmnet.tensor import ShapeError


@pytest.fixture
def pair_files(tmp_path):
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, (40, 60, 3), dtype=np.uint8)
    depth = rng.integers(0, 256, (40, 60), dtype=np.uint8)
    save_rgb(rgb, tmp_path / "a.png")
    save_gray(depth, tmp_path / "a_d.png")
    return tmp_path / "a.png", tmp_path / "a_d.png", rgb, depth


def test_read_back(pair_files):
    rp, dp, rgb, depth = pair_files
    assert np.array_equal(read_rgb(rp), rgb)
    assert np.array_equal(read_gray(dp), depth)


def test_load_pair_shapes(pair_files):
    rp, dp, _, _ = pair_files
    p = load_pair(rp, dp)
    assert p.rgb.shape == (1, 3, 256, 256) and p.depth.shape == (1, 1, 256, 256)
    assert p.rgb.dtype == np.float32
    assert p.rgb_path == str(rp)


def test_normalization_roundtrip():
    rgb = np.full((8, 8, 3), 255, np.uint8)
    np.testing.assert_allclose(denormalize_rgb(prepare_rgb(rgb, 8)), 1.0, atol=1e-6)
    depth = np.zeros((8, 8), np.uint8)
    assert np.all(prepare_depth(depth, 8) == -1)
    np.testing.assert_allclose(denormalize_depth(prepare_depth(depth, 8, invert=True)), 1.0, atol=1e-6)


def test_sixteen_bit_depth(tmp_path):
    arr = np.full((4, 4), 0xAB00, np.uint16)
    Image.fromarray(arr).save(tmp_path / "d16.png")
    assert np.all(read_gray(tmp_path / "d16.png") == 0xAB)


def test_read_errors(tmp_path, pair_files):
    with pytest.raises(ImageReadError):
        read_rgb(tmp_path / "missing.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ImageReadError):
        read_gray(tmp_path / "junk.png")
    with pytest.raises(ShapeError):
        read_rgb(pair_files[1])
    with pytest.raises(ShapeError):
        read_gray(pair_files[0])


def test_map_to_uint8():
    m = np.array([0.0, 0.5, 1.0, 1.5 / 255], np.float32).reshape(1, 1, 2, 2)
    assert map_to_uint8(m).ravel().tolist() == [0, 128, 255, 2]
    with pytest.raises(ValueError):
        map_to_uint8(np.full((1, 1, 2, 2), 1.5, np.float32))
    with pytest.raises(ShapeError):
        map_to_uint8(np.zeros((1, 2, 2, 2), np.float32))


def test_save_map(tmp_path):
    m = np.linspace(0, 1, 16, dtype=np.float32).reshape(1, 1, 4, 4)
    save_map(m, tmp_path / "m.png")
    assert np.array_equal(read_gray(tmp_path / "m.png"), map_to_uint8(m))


def test_pair_from_arrays_validation():
    with pytest.raises(ShapeError):
        pair_from_arrays(np.zeros((4, 4), np.uint8), np.zeros((4, 4), np.uint8))
    with pytest.raises(ShapeError):
        pair_from_arrays(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 4, 3), np.uint8))
