"""Deterministic synthetic text-line corpus for tests and demos.

Each synthetic "script" is a glyph family with its own stroke geometry
(rings, vertical bars, lattices, parallel diagonals, zigzags, dot rows),
rendered as dark ink on a light background with Gaussian pixel noise.
Generation is fully determined by the spec seed: every image gets its own
child generator derived from a SeedSequence spawn key, so corpora can be
regenerated piecemeal and never depend on iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

FAMILIES = ("rings", "bars", "grid", "hatch", "zigzag", "dots")

SCENE_W = 640
SCENE_H = 480

_BG_RANGE = (170.0, 235.0)
_INK_RANGE = (15.0, 85.0)


@dataclass
class SynthSpec:
    """Corpus parameters; labels are the first num_scripts glyph families."""

    num_scripts: int = 4
    samples_per_script: int = 20
    height: int = 64
    width_range: tuple[int, int] = (96, 288)
    noise_sigma: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.num_scripts <= len(FAMILIES):
            raise ValueError(f"num_scripts must be in [2, {len(FAMILIES)}], got {self.num_scripts}")
        if self.samples_per_script < 1:
            raise ValueError("samples_per_script must be positive")
        if not 32 <= self.height <= 512:
            raise ValueError(f"height must be in [32, 512], got {self.height}")
        lo, hi = self.width_range
        if not 64 <= lo <= hi <= 512:
            raise ValueError(f"width_range must satisfy 64 <= lo <= hi <= 512, got {self.width_range}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def labels(self) -> list[str]:
        return list(FAMILIES[: self.num_scripts])


def _seg_cov(ys, xs, p0, p1, t):
    """Soft-edged coverage of a stroke segment of thickness t."""
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    dx, dy = xs - p0[0], ys - p0[1]
    norm2 = vx * vx + vy * vy
    if norm2 == 0:
        d = np.hypot(dx, dy)
    else:
        u = np.clip((dx * vx + dy * vy) / norm2, 0.0, 1.0)
        d = np.hypot(dx - u * vx, dy - u * vy)
    return np.clip(t / 2 + 0.5 - d, 0.0, 1.0)


def _ring_cov(ys, xs, center, r, t, a0=None, span=None):
    d = np.hypot(xs - center[0], ys - center[1])
    cov = np.clip(t / 2 + 0.5 - np.abs(d - r), 0.0, 1.0)
    if a0 is not None:
        ang = np.arctan2(ys - center[1], xs - center[0])
        cov = cov * ((ang - a0) % (2 * np.pi) <= span)
    return cov


def _disk_cov(ys, xs, center, r):
    d = np.hypot(xs - center[0], ys - center[1])
    return np.clip(r + 0.5 - d, 0.0, 1.0)


def _fam_rings(rng, h, w, ys, xs):
    mask = np.zeros((h, w))
    cw = 28
    for x0 in range(2, w - 24, cw):
        c = (x0 + cw / 2 + rng.uniform(-2, 2), h / 2 + rng.uniform(-4, 4))
        r = rng.uniform(8, 13)
        t = rng.uniform(2.5, 4.0)
        if rng.random() < 0.5:
            mask = np.maximum(mask, _ring_cov(ys, xs, c, r, t))
        else:
            a0 = rng.uniform(0, 2 * np.pi)
            mask = np.maximum(mask, _ring_cov(ys, xs, c, r, t, a0, rng.uniform(3.5, 5.5)))
    return mask


def _fam_bars(rng, h, w, ys, xs):
    mask = np.zeros((h, w))
    cw = 22
    for x0 in range(2, w - 8, cw):
        for _ in range(rng.integers(1, 3)):
            x = x0 + rng.uniform(3, cw - 3)
            y0, y1 = rng.uniform(6, 16), rng.uniform(48, 58)
            t = rng.uniform(2.5, 4.0)
            mask = np.maximum(mask, _seg_cov(ys, xs, (x, y0), (x, y1), t))
            if rng.random() < 0.4:
                yc = y0 if rng.random() < 0.5 else y1
                mask = np.maximum(mask, _seg_cov(ys, xs, (x - 6, yc), (x + 6, yc), t))
    return mask


def _fam_grid(rng, h, w, ys, xs):
    mask = np.zeros((h, w))
    cw = 30
    for x0 in range(2, w - 26, cw):
        xa, xb = x0 + 4.0, x0 + cw - 4.0
        y0, y1 = rng.uniform(10, 18), rng.uniform(46, 54)
        t = rng.uniform(2.5, 3.5)
        for xv in np.linspace(xa, xb, rng.integers(3, 5)):
            mask = np.maximum(mask, _seg_cov(ys, xs, (xv, y0), (xv, y1), t))
        for yv in np.linspace(y0, y1, rng.integers(2, 4)):
            mask = np.maximum(mask, _seg_cov(ys, xs, (xa, yv), (xb, yv), t))
    return mask


def _fam_hatch(rng, h, w, ys, xs):
    mask = np.zeros((h, w))
    sp = rng.uniform(10, 14)
    lean = rng.uniform(14, 22)
    y0, y1 = rng.uniform(50, 58), rng.uniform(6, 14)
    t = rng.uniform(2.5, 4.0)
    x = 2.0
    while x < w - 2:
        mask = np.maximum(mask, _seg_cov(ys, xs, (x, y0), (x + lean, y1), t))
        x += sp
    return mask


def _fam_zigzag(rng, h, w, ys, xs):
    mask = np.zeros((h, w))
    dx = rng.uniform(10, 16)
    yt, yb = rng.uniform(10, 20), rng.uniform(44, 54)
    t = rng.uniform(2.5, 4.0)
    pts = []
    x, top = 4.0, True
    while x < w - 2:
        pts.append((x, yt if top else yb))
        x += dx
        top = not top
    for p0, p1 in zip(pts, pts[1:]):
        mask = np.maximum(mask, _seg_cov(ys, xs, p0, p1, t))
    return mask


def _fam_dots(rng, h, w, ys, xs):
    mask = np.zeros((h, w))
    for yrow in (20.0, 44.0):
        x = 6.0
        while x < w - 4:
            if rng.random() < 0.8:
                c = (x + rng.uniform(-1.5, 1.5), yrow + rng.uniform(-3, 3))
                mask = np.maximum(mask, _disk_cov(ys, xs, c, rng.uniform(2.2, 3.8)))
            x += rng.uniform(9, 13)
    return mask


_FAMILY_FUNCS = {
    "rings": _fam_rings,
    "bars": _fam_bars,
    "grid": _fam_grid,
    "hatch": _fam_hatch,
    "zigzag": _fam_zigzag,
    "dots": _fam_dots,
}


def render_line(rng, label: str, height: int, width: int, noise_sigma: float) -> np.ndarray:
    """Render one text line as uint8 grayscale; consumes draws from rng."""
    if label not in _FAMILY_FUNCS:
        raise KeyError(f"unknown glyph family: {label!r}")
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    mask = _FAMILY_FUNCS[label](rng, height, width, ys, xs)
    bg = rng.uniform(*_BG_RANGE)
    ink = rng.uniform(*_INK_RANGE)
    img = bg + (ink - bg) * mask
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate_corpus(spec: SynthSpec, out_dir) -> list[tuple[str, str]]:
    """Write labeled line images plus manifest.tsv; returns (path, label) rows.

    Layout is out_dir/<label>/<label>_NNNN.png with paths in the manifest
    relative to out_dir.
    """
    out = Path(out_dir)
    rows = []
    for ci, label in enumerate(spec.labels):
        (out / label).mkdir(parents=True, exist_ok=True)
        for si in range(spec.samples_per_script):
            rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(ci, si)))
            width = int(rng.integers(spec.width_range[0], spec.width_range[1] + 1))
            img = render_line(rng, label, spec.height, width, spec.noise_sigma)
            rel = f"{label}/{label}_{si:04d}.png"
            Image.fromarray(img, mode="L").save(out / rel)
            rows.append((rel, label))
    with open(out / "manifest.tsv", "w", encoding="utf-8") as fh:
        for rel, label in rows:
            fh.write(f"{rel}\t{label}\n")
    return rows


def generate_scene_corpus(spec: SynthSpec, out_dir, num_scenes: int | None = None) -> list[tuple[str, str]]:
    """Write full-page scenes with ground-truth line boxes.

    Each scene is a noisy background with non-overlapping text lines pasted
    verbatim, so cropping a ground-truth box recovers the rendered line
    exactly.  Ground truth files hold one "x,y,w,h,script" row per line.
    Returns (image_path, gt_path) rows relative to out_dir.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    if num_scenes is None:
        num_scenes = spec.samples_per_script
    labels = spec.labels
    margin = 8
    rows = []
    for sc in range(num_scenes):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(sc,)))
        canvas = np.full((SCENE_H, SCENE_W), rng.uniform(*_BG_RANGE))
        if spec.noise_sigma > 0:
            canvas = canvas + rng.normal(0.0, spec.noise_sigma, canvas.shape)
        canvas = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
        placed: list[tuple[int, int, int, int, str]] = []
        for _ in range(int(rng.integers(1, 5))):
            label = labels[int(rng.integers(len(labels)))]
            hi = min(spec.width_range[1], SCENE_W - 2)
            width = int(rng.integers(spec.width_range[0], hi + 1))
            line = render_line(rng, label, spec.height, width, spec.noise_sigma)
            for _attempt in range(60):
                x = int(rng.integers(0, SCENE_W - width + 1))
                y = int(rng.integers(0, SCENE_H - spec.height + 1))
                clear = all(
                    x + width + margin <= px or px + pw + margin <= x
                    or y + spec.height + margin <= py or py + ph + margin <= y
                    for px, py, pw, ph, _ in placed
                )
                if clear:
                    canvas[y : y + spec.height, x : x + width] = line
                    placed.append((x, y, width, spec.height, label))
                    break
        img_rel = f"images/scene_{sc:04d}.png"
        gt_rel = f"gt/scene_{sc:04d}.txt"
        Image.fromarray(canvas, mode="L").save(out / img_rel)
        with open(out / gt_rel, "w", encoding="utf-8") as fh:
            for x, y, pw, ph, label in placed:
                fh.write(f"{x},{y},{pw},{ph},{label}\n")
        rows.append((img_rel, gt_rel))
    return rows
