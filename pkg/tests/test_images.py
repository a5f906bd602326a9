"""Image decoding and the preprocessing pipeline."""

import numpy as np
import pytest
from PIL import Image

from relprop import Preprocessing, load_image, load_image_raw, preprocess_image
from relprop.errors import DataError


def write_gray(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L").save(path)
    return path


def write_rgb(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="RGB").save(path)
    return path


class TestLoadRaw:
    def test_pgm_grayscale(self, tmp_path):
        p = write_gray(tmp_path / "g.pgm", np.full((4, 6), 128))
        arr = load_image_raw(p)
        assert arr.shape == (4, 6)
        assert arr.dtype == np.uint8
        assert (arr == 128).all()

    def test_png_rgb(self, tmp_path):
        rgb = np.zeros((3, 3, 3), dtype=np.uint8)
        rgb[..., 1] = 200
        p = write_rgb(tmp_path / "c.png", rgb)
        arr = load_image_raw(p)
        assert arr.shape == (3, 3, 3)
        assert (arr[..., 1] == 200).all()

    def test_palette_png_converted_to_rgb(self, tmp_path):
        img = Image.new("P", (4, 4))
        img.putpalette([0, 0, 0, 255, 0, 0] + [0] * 762)
        img.paste(1, (0, 0, 4, 4))
        p = tmp_path / "p.png"
        img.save(p)
        arr = load_image_raw(p)
        assert arr.shape == (4, 4, 3)
        assert (arr[..., 0] == 255).all()

    def test_sixteen_bit_rejected(self, tmp_path):
        img = Image.new("I;16", (4, 4))
        p = tmp_path / "deep.png"
        img.save(p)
        with pytest.raises(DataError, match="unsupported bit depth"):
            load_image_raw(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="file not found"):
            load_image_raw(tmp_path / "absent.png")

    def test_garbage_file(self, tmp_path):
        p = tmp_path / "junk.png"
        p.write_bytes(b"not an image at all")
        with pytest.raises(DataError, match="cannot read image"):
            load_image_raw(p)


class TestPreprocess:
    def test_all_black_standardizes_to_minus_one(self, tmp_path):
        p = write_gray(tmp_path / "b.pgm", np.zeros((8, 8)))
        pre = Preprocessing((0.5,), (0.5,), (8, 8))
        t = load_image(p, pre, 1)
        assert t.shape == (1, 8, 8)
        assert np.allclose(t, -1.0)

    def test_all_white_standardizes_to_plus_one(self, tmp_path):
        p = write_gray(tmp_path / "w.pgm", np.full((8, 8), 255))
        pre = Preprocessing((0.5,), (0.5,), (8, 8))
        t = load_image(p, pre, 1)
        assert np.allclose(t, 1.0)

    def test_checkerboard_identity_resize(self, tmp_path):
        board = np.indices((8, 8)).sum(axis=0) % 2 * 255
        p = write_gray(tmp_path / "cb.pgm", board)
        pre = Preprocessing((0.5,), (0.5,), (8, 8))
        t = load_image(p, pre, 1)
        assert set(np.unique(t)) == {-1.0, 1.0}
        assert t[0, 0, 0] == -1.0
        assert t[0, 0, 1] == 1.0

    def test_resize_applied(self):
        img = np.zeros((4, 4), dtype=np.uint8)
        pre = Preprocessing((0.0,), (1.0,), (9, 5))
        t = preprocess_image(img, pre, 1)
        assert t.shape == (1, 9, 5)

    def test_gray_replicated_to_three_channels(self):
        img = np.full((4, 4), 255, dtype=np.uint8)
        pre = Preprocessing((0.0, 0.5, 1.0), (1.0, 1.0, 1.0), (4, 4))
        t = preprocess_image(img, pre, 3)
        assert t.shape == (3, 4, 4)
        assert np.allclose(t[0], 1.0)
        assert np.allclose(t[1], 0.5)
        assert np.allclose(t[2], 0.0)

    def test_rgb_channel_order(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[..., 2] = 255  # blue plane only
        pre = Preprocessing((0.0,), (1.0,), (2, 2))
        t = preprocess_image(img, pre, 3)
        assert np.allclose(t[0], 0.0)
        assert np.allclose(t[2], 1.0)

    def test_rgb_into_single_channel_model_rejected(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        pre = Preprocessing((0.0,), (1.0,), (2, 2))
        with pytest.raises(DataError, match="model expects 1"):
            preprocess_image(img, pre, 1)

    def test_stat_length_mismatch_rejected(self):
        img = np.zeros((2, 2), dtype=np.uint8)
        pre = Preprocessing((0.0, 0.0), (1.0, 1.0), (2, 2))
        with pytest.raises(DataError, match="do not match 1 input channels"):
            preprocess_image(img, pre, 1)

    def test_bad_array_shape_rejected(self):
        pre = Preprocessing((0.0,), (1.0,), (2, 2))
        with pytest.raises(DataError, match="expected \\[H,W\\]"):
            preprocess_image(np.zeros((2, 2, 4), dtype=np.uint8), pre, 4)

    def test_deterministic(self, tmp_path):
        rng = np.random.default_rng(15)
        p = write_gray(tmp_path / "r.pgm", rng.integers(0, 256, (16, 16)))
        pre = Preprocessing((0.3,), (0.7,), (8, 8))
        a = load_image(p, pre, 1)
        b = load_image(p, pre, 1)
        assert np.array_equal(a, b)
