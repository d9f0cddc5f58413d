"""Image decoding, height normalization and dense patch extraction.

Images are plain 2-D float32 numpy arrays of shape (height, width) holding
luminance values in [0, 255].  All functions here are pure: they never
mutate their inputs, so images can be processed concurrently without locks.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image, UnidentifiedImageError

LINE_HEIGHT = 64
STROKE_PART_SIDE = 32
RECEPTIVE_FIELD_SIDE = 8
MIN_LINE_WIDTH = 32

# ITU-R BT.601 luma weights
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


class ImageDecodeError(ValueError):
    """Raised when a file cannot be decoded as a PNG/JPEG image."""


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a PNG or JPEG file into a (H, W) float32 luminance array.

    Color inputs are converted with 0.299 R + 0.587 G + 0.114 B; grayscale
    inputs are passed through unchanged.  Raises ImageDecodeError for
    unreadable files or formats other than PNG/JPEG.
    """
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in ("PNG", "JPEG"):
                raise ImageDecodeError(
                    f"unsupported image format {fmt!r} for {path!s} (PNG/JPEG only)"
                )
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.float32)
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.float32)
                arr = _LUMA_R * rgb[..., 0] + _LUMA_G * rgb[..., 1] + _LUMA_B * rgb[..., 2]
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image {path!s}: {exc}") from exc
    if arr.ndim != 2 or arr.size == 0:
        raise ImageDecodeError(f"cannot decode image {path!s}: empty or non-2D raster")
    return np.clip(arr, 0.0, 255.0).astype(np.float32)


def resize_to_height(img: np.ndarray, target: int = LINE_HEIGHT) -> np.ndarray:
    """Resize to a fixed height keeping the aspect ratio (bilinear).

    The output width is max(32, round(w * target / h)) with half-up
    rounding.  When the aspect-preserving width falls below 32 pixels the
    image is resized to that width and then right-padded to 32 columns by
    edge replication, so downstream 32x32 windows always fit.
    """
    img = _as_image(img)
    h, w = img.shape
    if target < 1:
        raise ValueError(f"target height must be >= 1, got {target}")
    new_w = max(1, int(np.floor(w * target / h + 0.5)))
    if (new_w, target) == (w, h):
        out = img.copy()
    else:
        pil = Image.fromarray(np.ascontiguousarray(img, dtype=np.float32), mode="F")
        out = np.asarray(
            pil.resize((new_w, target), resample=Image.Resampling.BILINEAR),
            dtype=np.float32,
        )
    if new_w < MIN_LINE_WIDTH:
        out = np.pad(out, ((0, 0), (0, MIN_LINE_WIDTH - new_w)), mode="edge")
    return np.clip(out, 0.0, 255.0)


def strokepart_count(width: int, step: int) -> int:
    """Closed-form number of 32x32 windows on a 64-px line of this width."""
    if width < STROKE_PART_SIDE:
        return 0
    return 2 * ((width - STROKE_PART_SIDE) // step + 1)


def extract_strokeparts(img: np.ndarray, step: int) -> np.ndarray:
    """Densely extract 32x32 stroke-part windows from a height-64 line.

    Windows are taken at x-offsets 0, step, 2*step, ... while x+32 <= width,
    at the two vertical positions y=0 and y=32, ordered row-major (y outer,
    x inner).  Each window is an exact copy of the source sub-rectangle (no
    resampling).  Returns an array of shape (n, 32, 32).
    """
    img = _as_image(img)
    h, w = img.shape
    if h != LINE_HEIGHT:
        raise ValueError(f"expected line height {LINE_HEIGHT}, got {h}; resize first")
    if w < STROKE_PART_SIDE:
        raise ValueError(
            f"line width {w} is below {STROKE_PART_SIDE}; resize_to_height pads narrow lines"
        )
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    side = STROKE_PART_SIDE
    xs = range(0, w - side + 1, step)
    out = np.empty((2 * len(xs), side, side), dtype=np.float32)
    i = 0
    for y in (0, side):
        for x in xs:
            out[i] = img[y : y + side, x : x + side]
            i += 1
    return out


def sample_random_subpatches(
    images: list[np.ndarray],
    count: int,
    side: int = RECEPTIVE_FIELD_SIDE,
    seed: int = 0,
) -> np.ndarray:
    """Draw `count` side x side patches uniformly over all (image, x, y) slots.

    Positions are drawn uniformly over the union of valid top-left corners
    across all images (larger images therefore contribute more draws), using
    a deterministic seeded generator.  Returns (count, side, side) float32.
    """
    if not images:
        raise ValueError("no images to sample patches from")
    imgs = [_as_image(im) for im in images]
    for im in imgs:
        h, w = im.shape
        if h < side or w < side:
            raise ValueError(f"image of shape {im.shape} is smaller than patch side {side}")
    slots = np.array([(im.shape[0] - side + 1) * (im.shape[1] - side + 1) for im in imgs])
    cum = np.cumsum(slots)
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, cum[-1], size=count)
    out = np.empty((count, side, side), dtype=np.float32)
    for i, d in enumerate(draws):
        k = int(np.searchsorted(cum, d, side="right"))
        local = int(d - (cum[k - 1] if k > 0 else 0))
        ncols = imgs[k].shape[1] - side + 1
        y, x = divmod(local, ncols)
        out[i] = imgs[k][y : y + side, x : x + side]
    return out


def _as_image(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a (height, width) luminance array, got shape {arr.shape}")
    return arr
