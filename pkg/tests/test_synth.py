"""Deterministic synthetic corpus generation."""

import numpy as np
import pytest
from PIL import Image

from strokeid import synth


def _read(path):
    return np.asarray(Image.open(path), dtype=np.float32)


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestSynthSpec:
    def test_labels_are_family_prefix(self):
        spec = synth.SynthSpec(num_scripts=3)
        assert spec.labels == ["rings", "bars", "grid"]

    def test_num_scripts_bounds(self):
        with pytest.raises(ValueError):
            synth.SynthSpec(num_scripts=1)
        with pytest.raises(ValueError):
            synth.SynthSpec(num_scripts=7)

    def test_width_range_validated(self):
        with pytest.raises(ValueError):
            synth.SynthSpec(width_range=(32, 100))
        with pytest.raises(ValueError):
            synth.SynthSpec(width_range=(200, 100))
        with pytest.raises(ValueError):
            synth.SynthSpec(width_range=(100, 600))

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            synth.SynthSpec(noise_sigma=-1.0)


class TestGenerateCorpus:
    def test_counts_and_layout(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=4, samples_per_script=5, seed=1)
        rows = synth.generate_corpus(spec, tmp_path)
        assert len(rows) == 20
        for label in spec.labels:
            files = list((tmp_path / label).glob("*.png"))
            assert len(files) == 5

    def test_manifest_lists_every_file(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=2, samples_per_script=3, seed=2)
        rows = synth.generate_corpus(spec, tmp_path)
        lines = (tmp_path / "manifest.tsv").read_text().splitlines()
        assert len(lines) == len(rows)
        for line, (rel, label) in zip(lines, rows):
            assert line == f"{rel}\t{label}"
            assert (tmp_path / rel).is_file()

    def test_dimensions_within_requested_ranges(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=3, samples_per_script=4,
                               width_range=(96, 160), seed=3)
        for rel, _ in synth.generate_corpus(spec, tmp_path):
            img = _read(tmp_path / rel)
            assert img.shape[0] == 64
            assert 96 <= img.shape[1] <= 160

    def test_same_spec_byte_identical(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=2, samples_per_script=4, seed=7)
        synth.generate_corpus(spec, tmp_path / "a")
        synth.generate_corpus(spec, tmp_path / "b")
        assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")

    def test_different_seed_differs(self, tmp_path):
        a = synth.SynthSpec(num_scripts=2, samples_per_script=2, seed=1)
        b = synth.SynthSpec(num_scripts=2, samples_per_script=2, seed=2)
        synth.generate_corpus(a, tmp_path / "a")
        synth.generate_corpus(b, tmp_path / "b")
        assert _tree_bytes(tmp_path / "a") != _tree_bytes(tmp_path / "b")

    def test_no_two_images_identical_within_family(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=2, samples_per_script=6, seed=4)
        synth.generate_corpus(spec, tmp_path)
        for label in spec.labels:
            blobs = [p.read_bytes() for p in sorted((tmp_path / label).glob("*.png"))]
            assert len(set(blobs)) == len(blobs)

    def test_images_contain_ink_and_background(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=6, samples_per_script=2, seed=5)
        for rel, _ in synth.generate_corpus(spec, tmp_path):
            img = _read(tmp_path / rel)
            assert img.min() < 110.0  # strokes present
            assert img.max() > 140.0  # background present


class TestGenerateSceneCorpus:
    def test_layout_and_gt_inside_canvas(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=4, samples_per_script=3, seed=6)
        rows = synth.generate_scene_corpus(spec, tmp_path, num_scenes=5)
        assert len(rows) == 5
        for img_rel, gt_rel in rows:
            img = _read(tmp_path / img_rel)
            assert img.shape == (synth.SCENE_H, synth.SCENE_W)
            for raw in (tmp_path / gt_rel).read_text().splitlines():
                x, y, w, h, script = raw.split(",")
                x, y, w, h = int(x), int(y), int(w), int(h)
                assert script in spec.labels
                assert x >= 0 and y >= 0
                assert x + w <= synth.SCENE_W and y + h <= synth.SCENE_H
                assert h == 64

    def test_boxes_pairwise_disjoint(self, tmp_path):
        from strokeid.evaluation import BBox, iou

        spec = synth.SynthSpec(num_scripts=3, samples_per_script=3, seed=7)
        rows = synth.generate_scene_corpus(spec, tmp_path, num_scenes=8)
        for _, gt_rel in rows:
            boxes = []
            for raw in (tmp_path / gt_rel).read_text().splitlines():
                x, y, w, h, _ = raw.split(",")
                boxes.append(BBox(float(x), float(y), float(w), float(h)))
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    assert iou(boxes[i], boxes[j]) == 0.0

    def test_deterministic(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=2, samples_per_script=2, seed=8)
        synth.generate_scene_corpus(spec, tmp_path / "a", num_scenes=3)
        synth.generate_scene_corpus(spec, tmp_path / "b", num_scenes=3)
        assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")

    def test_gt_crops_contain_text(self, tmp_path):
        spec = synth.SynthSpec(num_scripts=4, samples_per_script=2, seed=9)
        rows = synth.generate_scene_corpus(spec, tmp_path, num_scenes=4)
        total = 0
        for img_rel, gt_rel in rows:
            img = _read(tmp_path / img_rel)
            for raw in (tmp_path / gt_rel).read_text().splitlines():
                x, y, w, h, _ = (int(v) if i < 4 else v for i, v in enumerate(raw.split(",")))
                crop = img[y : y + h, x : x + w]
                assert crop.min() < 110.0  # ink inside the box
                total += 1
        assert total > 0

    def test_render_line_rejects_unknown_family(self):
        rng = np.random.default_rng(0)
        with pytest.raises(KeyError):
            synth.render_line(rng, "cuneiform", 64, 100, 0.0)
