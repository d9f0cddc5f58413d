"""Binary model container: filter bank + template store in one file.

Fixed little-endian layout, all arrays float32 row-major:

    magic "SNBN" | version u16
    eps_cn f32 | eps_zca f32 | num_kernels u32 | kernel_side u32 | pool_grid u32
    zca mean (d f32) | zca matrix (d*d f32) | centroids (K*d f32)   with d = kernel_side^2
    class_count u32
    per class: label_len u32 | label utf-8 | n u32 | templates (n*D f32) | weights (n f32)

D is implied as pool_grid^2 * num_kernels.  Serialization is bitwise
reproducible: saving a loaded model yields identical bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import FilterBank, ZcaTransform
from .nbnn import ClassEntry, TemplateStore

MAGIC = b"SNBN"
VERSION = 1

_F4 = np.dtype("<f4")


class ModelFormatError(ValueError):
    """Raised when bytes do not parse as a model file."""


@dataclass
class ModelFile:
    bank: FilterBank
    store: TemplateStore


def _f4(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a), dtype=_F4)


def to_bytes(model: ModelFile) -> bytes:
    bank, store = model.bank, model.store
    d = bank.kernel_side * bank.kernel_side
    if bank.zca.dim != d:
        raise ValueError(f"zca dim {bank.zca.dim} does not match kernel side {bank.kernel_side}")
    if bank.centroids.shape != (bank.num_kernels, d):
        raise ValueError(f"centroids shape {bank.centroids.shape} inconsistent with bank")
    if store.descriptor_dim != bank.descriptor_dim:
        raise ValueError(
            f"store descriptor dim {store.descriptor_dim} != bank descriptor dim {bank.descriptor_dim}"
        )
    parts = [
        MAGIC,
        struct.pack("<H", VERSION),
        struct.pack("<ffIII", bank.eps_cn, bank.zca.eps_zca, bank.num_kernels,
                    bank.kernel_side, bank.pool_grid),
        _f4(bank.zca.mean).tobytes(),
        _f4(bank.zca.matrix).tobytes(),
        _f4(bank.centroids).tobytes(),
        struct.pack("<I", len(store.classes)),
    ]
    for entry in store.classes:
        raw = entry.label.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", entry.num_templates))
        parts.append(_f4(entry.templates).tobytes())
        parts.append(_f4(entry.weights).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise ModelFormatError(
                f"truncated model file: wanted {n} bytes at offset {self.off}, "
                f"have {len(self.buf) - self.off}"
            )
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int, shape) -> np.ndarray:
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype=_F4).reshape(shape).copy()


def from_bytes(buf: bytes) -> ModelFile:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise ModelFormatError("bad magic: not a model file")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version} (expected {VERSION})")
    eps_cn, eps_zca, num_kernels, kernel_side, pool_grid = r.unpack("<ffIII")
    if num_kernels == 0 or kernel_side == 0 or pool_grid == 0:
        raise ModelFormatError("model header has zero-sized bank fields")
    d = kernel_side * kernel_side
    mean = r.floats(d, (d,))
    matrix = r.floats(d * d, (d, d))
    centroids = r.floats(num_kernels * d, (num_kernels, d))
    bank = FilterBank(
        centroids=centroids,
        zca=ZcaTransform(mean=mean, matrix=matrix, eps_zca=float(eps_zca)),
        eps_cn=float(eps_cn),
        kernel_side=int(kernel_side),
        pool_grid=int(pool_grid),
    )
    desc_dim = pool_grid * pool_grid * num_kernels
    (class_count,) = r.unpack("<I")
    classes = []
    for _ in range(class_count):
        (label_len,) = r.unpack("<I")
        try:
            label = r.take(label_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelFormatError("class label is not valid utf-8") from exc
        (n,) = r.unpack("<I")
        templates = r.floats(n * desc_dim, (n, desc_dim))
        weights = r.floats(n, (n,))
        classes.append(ClassEntry(label=label, templates=templates, weights=weights))
    if r.off != len(buf):
        raise ModelFormatError(f"{len(buf) - r.off} trailing bytes after model payload")
    return ModelFile(bank=bank, store=TemplateStore(classes=classes))


def save_model(model: ModelFile, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_model(path) -> ModelFile:
    return from_bytes(Path(path).read_bytes())
