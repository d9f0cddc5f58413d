"""Image loading, resizing and dense window extraction."""

import numpy as np
import pytest
from PIL import Image

from strokeid import pixelio


def _write_png(path, arr, mode=None):
    Image.fromarray(arr, mode=mode).save(path)
    return path


class TestLoadImage:
    def test_white_png_is_255(self, tmp_path):
        p = _write_png(tmp_path / "w.png", np.full((4, 4), 255, dtype=np.uint8))
        img = pixelio.load_image(p)
        assert img.shape == (4, 4)
        assert img.dtype == np.float32
        np.testing.assert_array_equal(img, 255.0)

    def test_pure_red_luma(self, tmp_path):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        p = _write_png(tmp_path / "r.png", rgb)
        img = pixelio.load_image(p)
        # 0.299 * 255 = 76.245
        np.testing.assert_allclose(img, 76.245, atol=1e-4)

    def test_grayscale_passthrough(self, tmp_path):
        arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
        p = _write_png(tmp_path / "g.png", arr)
        np.testing.assert_array_equal(pixelio.load_image(p), arr.astype(np.float32))

    def test_jpeg_accepted(self, tmp_path):
        p = tmp_path / "a.jpg"
        Image.fromarray(np.full((8, 8), 128, dtype=np.uint8)).save(p, format="JPEG")
        img = pixelio.load_image(p)
        assert img.shape == (8, 8)

    def test_truncated_file_raises_with_path(self, tmp_path):
        full = tmp_path / "t.png"
        _write_png(full, np.zeros((16, 16), dtype=np.uint8))
        data = full.read_bytes()
        bad = tmp_path / "trunc.png"
        bad.write_bytes(data[: len(data) // 2])
        with pytest.raises(pixelio.ImageDecodeError, match="trunc.png"):
            pixelio.load_image(bad)

    def test_unsupported_format_rejected(self, tmp_path):
        p = tmp_path / "x.gif"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(p, format="GIF")
        with pytest.raises(pixelio.ImageDecodeError, match="GIF"):
            pixelio.load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(pixelio.ImageDecodeError, match="nope.png"):
            pixelio.load_image(tmp_path / "nope.png")


class TestResizeToHeight:
    def test_aspect_ratio_width(self):
        img = np.random.default_rng(0).uniform(0, 255, (100, 200)).astype(np.float32)
        out = pixelio.resize_to_height(img, 64)
        assert out.shape == (64, 128)

    def test_identity_when_height_matches(self):
        img = np.random.default_rng(1).uniform(0, 255, (64, 64)).astype(np.float32)
        out = pixelio.resize_to_height(img, 64)
        np.testing.assert_array_equal(out, img)

    def test_narrow_line_padded_by_edge_replication(self):
        img = np.random.default_rng(2).uniform(0, 255, (64, 10)).astype(np.float32)
        out = pixelio.resize_to_height(img, 64)
        assert out.shape == (64, 32)
        np.testing.assert_array_equal(out[:, :10], img)
        for c in range(10, 32):
            np.testing.assert_array_equal(out[:, c], out[:, 9])

    def test_constant_image_resized_exactly(self):
        img = np.full((100, 200), 77.0, dtype=np.float32)
        out = pixelio.resize_to_height(img, 64)
        np.testing.assert_array_equal(out, np.full((64, 128), 77.0, dtype=np.float32))

    def test_resize_idempotent_at_target_height(self):
        img = np.random.default_rng(3).uniform(0, 255, (64, 120)).astype(np.float32)
        np.testing.assert_array_equal(pixelio.resize_to_height(img, 64), img)

    def test_output_range_clipped(self):
        img = np.random.default_rng(4).uniform(0, 255, (37, 301)).astype(np.float32)
        out = pixelio.resize_to_height(img, 64)
        assert out.min() >= 0.0 and out.max() <= 255.0

    def test_half_up_rounding(self):
        # 3 * 64 / 128 = 1.5 rounds up, then pads to the 32 minimum
        img = np.zeros((128, 3), dtype=np.float32)
        assert pixelio.resize_to_height(img, 64).shape == (64, 32)
        # 175 * 64 / 100 = 112.0 exactly
        img = np.zeros((100, 175), dtype=np.float32)
        assert pixelio.resize_to_height(img, 64).shape == (64, 112)


class TestExtractStrokeparts:
    def test_count_width64_step8(self):
        img = np.zeros((64, 64), dtype=np.float32)
        assert pixelio.extract_strokeparts(img, 8).shape == (10, 32, 32)

    def test_count_width32_step16(self):
        img = np.zeros((64, 32), dtype=np.float32)
        assert pixelio.extract_strokeparts(img, 16).shape == (2, 32, 32)

    def test_count_width100_step16(self):
        img = np.zeros((64, 100), dtype=np.float32)
        assert pixelio.extract_strokeparts(img, 16).shape == (10, 32, 32)

    def test_count_formula_over_random_widths(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            w = int(rng.integers(32, 1025))
            step = int(rng.integers(1, 40))
            img = np.zeros((64, w), dtype=np.float32)
            n = pixelio.extract_strokeparts(img, step).shape[0]
            assert n == 2 * ((w - 32) // step + 1)
            assert n == pixelio.strokepart_count(w, step)

    def test_windows_copy_source_exactly_row_major(self):
        rng = np.random.default_rng(6)
        img = rng.uniform(0, 255, (64, 48)).astype(np.float32)
        parts = pixelio.extract_strokeparts(img, 8)
        # x-offsets 0, 8, 16 at y=0 then y=32
        expect = [(y, x) for y in (0, 32) for x in (0, 8, 16)]
        assert parts.shape[0] == len(expect)
        for patch, (y, x) in zip(parts, expect):
            np.testing.assert_array_equal(patch, img[y : y + 32, x : x + 32])

    def test_rejects_wrong_height(self):
        with pytest.raises(ValueError, match="height"):
            pixelio.extract_strokeparts(np.zeros((63, 64), dtype=np.float32), 8)

    def test_rejects_narrow_width(self):
        with pytest.raises(ValueError, match="width"):
            pixelio.extract_strokeparts(np.zeros((64, 31), dtype=np.float32), 8)


class TestSampleRandomSubpatches:
    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(7)
        imgs = [rng.uniform(0, 255, (64, 80)).astype(np.float32) for _ in range(3)]
        a = pixelio.sample_random_subpatches(imgs, count=40, seed=11)
        b = pixelio.sample_random_subpatches(imgs, count=40, seed=11)
        np.testing.assert_array_equal(a, b)
        c = pixelio.sample_random_subpatches(imgs, count=40, seed=12)
        assert not np.array_equal(a, c)

    def test_zero_count(self):
        imgs = [np.zeros((64, 64), dtype=np.float32)]
        assert pixelio.sample_random_subpatches(imgs, count=0).shape == (0, 8, 8)

    def test_constant_image_gives_constant_patches(self):
        imgs = [np.full((64, 64), 42.0, dtype=np.float32)]
        out = pixelio.sample_random_subpatches(imgs, count=5, seed=0)
        assert out.shape == (5, 8, 8)
        np.testing.assert_array_equal(out, 42.0)

    def test_patches_are_genuine_subwindows(self):
        rng = np.random.default_rng(8)
        img = rng.uniform(0, 255, (64, 40)).astype(np.float32)
        out = pixelio.sample_random_subpatches([img], count=30, seed=3)
        windows = np.lib.stride_tricks.sliding_window_view(img, (8, 8)).reshape(-1, 64)
        for p in out.reshape(-1, 64):
            assert (windows == p).all(axis=1).any()

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="no images"):
            pixelio.sample_random_subpatches([], count=1)
