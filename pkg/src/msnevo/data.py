"""Dataset handling: IDX file parsing/writing, deterministic subsampling,
and a built-in procedural digit set so tests and demos need no downloads.

IDX is the MNIST container format: a big-endian header of four magic bytes
(0, 0, type-code, rank) followed by ``rank`` 32-bit dimension sizes and the
row-major payload. Only type code 0x08 (unsigned byte) is supported, which
covers both MNIST image and label files (magics 0x00000803 / 0x00000801).
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .vecmath import RngHandle

__all__ = [
    "Dataset", "IdxParseError", "load_idx", "write_idx", "load_mnist",
    "subsample", "synthetic_digits",
]

_IDX_UBYTE = 0x08


class IdxParseError(ValueError):
    """Malformed IDX file; the message includes the failing byte offset."""


@dataclass(frozen=True)
class Dataset:
    """Immutable labelled dataset: float64 inputs scaled to [0, 1], int64
    labels, and free-form provenance metadata."""

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return int(self.inputs.shape[0])


def load_idx(path) -> np.ndarray:
    """Parse an IDX file into a uint8 array shaped per its header."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise IdxParseError(
            f"{path}: truncated magic — need 4 bytes, have {len(data)} (byte offset 0)")
    zero0, zero1, type_code, rank = struct.unpack(">BBBB", data[:4])
    if zero0 != 0 or zero1 != 0:
        raise IdxParseError(
            f"{path}: bad magic bytes ({zero0:#04x}, {zero1:#04x}) at byte offset 0")
    if type_code != _IDX_UBYTE:
        raise IdxParseError(
            f"{path}: unsupported type code {type_code:#04x} at byte offset 2 "
            "(only 0x08 unsigned byte is supported)")
    if rank < 1:
        raise IdxParseError(f"{path}: rank 0 header at byte offset 3")
    header_end = 4 + 4 * rank
    if len(data) < header_end:
        raise IdxParseError(
            f"{path}: truncated dimension table — need {header_end} bytes, "
            f"have {len(data)} (byte offset {len(data)})")
    dims = struct.unpack(f">{rank}I", data[4:header_end])
    expected = 1
    for d in dims:
        expected *= d
    payload = len(data) - header_end
    if payload != expected:
        raise IdxParseError(
            f"{path}: payload holds {payload} bytes but header dims {dims} "
            f"require {expected} (byte offset {header_end})")
    return np.frombuffer(data, dtype=np.uint8, offset=header_end).reshape(dims).copy()


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as an IDX file (inverse of load_idx)."""
    arr = np.ascontiguousarray(array)
    if arr.dtype != np.uint8:
        raise ValueError(f"IDX type 0x08 requires uint8 data, got {arr.dtype}")
    if arr.ndim < 1 or arr.ndim > 255:
        raise ValueError(f"rank must be in [1, 255], got {arr.ndim}")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">BBBB", 0, 0, _IDX_UBYTE, arr.ndim))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def load_mnist(images_path, labels_path) -> Dataset:
    """Load an MNIST-style image/label file pair into a Dataset with
    pixels scaled to [0, 1] (divide by 255, no centering)."""
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise IdxParseError(
            f"{images_path}: expected rank-3 image data, got rank {images.ndim}")
    if labels.ndim != 1:
        raise IdxParseError(
            f"{labels_path}: expected rank-1 label data, got rank {labels.ndim}")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"{images.shape[0]} images vs {labels.shape[0]} labels")
    return Dataset(
        inputs=images.astype(np.float64) / 255.0,
        labels=labels.astype(np.int64),
        num_classes=10,
        metadata={"source": str(images_path),
                  "image_shape": tuple(images.shape[1:])},
    )


def subsample(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Uniform n-subset without replacement, deterministic under seed.

    The resulting metadata records the per-class composition of the subset
    and the parent size, so a run's data provenance is auditable.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > len(dataset):
        raise ValueError(f"cannot draw {n} items from a dataset of {len(dataset)}")
    gen = RngHandle(seed, 0).generator()
    idx = gen.choice(len(dataset), size=n, replace=False)
    labels = dataset.labels[idx]
    composition = {int(c): int(k) for c, k in sorted(Counter(labels.tolist()).items())}
    meta = dict(dataset.metadata)
    meta.update({"subsample_of": len(dataset), "subsample_seed": seed,
                 "class_composition": composition})
    return Dataset(
        inputs=dataset.inputs[idx].copy(),
        labels=labels.copy(),
        num_classes=dataset.num_classes,
        metadata=meta,
    )


# seven-segment encoding per digit: (top, top-left, top-right, middle,
# bottom-left, bottom-right, bottom)
_SEGMENTS = {
    0: (1, 1, 1, 0, 1, 1, 1),
    1: (0, 0, 1, 0, 0, 1, 0),
    2: (1, 0, 1, 1, 1, 0, 1),
    3: (1, 0, 1, 1, 0, 1, 1),
    4: (0, 1, 1, 1, 0, 1, 0),
    5: (1, 1, 0, 1, 0, 1, 1),
    6: (1, 1, 0, 1, 1, 1, 1),
    7: (1, 0, 1, 0, 0, 1, 0),
    8: (1, 1, 1, 1, 1, 1, 1),
    9: (1, 1, 1, 1, 0, 1, 1),
}


def _digit_template(digit: int, size: int) -> np.ndarray:
    img = np.zeros((size, size), dtype=np.float64)
    lo, hi = 1, size - 2          # stroke extent with a 1-pixel margin
    mid = size // 2
    top, tl, tr, middle, bl, br, bottom = _SEGMENTS[digit]
    if top:
        img[lo, lo:hi + 1] = 1.0
    if middle:
        img[mid, lo:hi + 1] = 1.0
    if bottom:
        img[hi, lo:hi + 1] = 1.0
    if tl:
        img[lo:mid + 1, lo] = 1.0
    if bl:
        img[mid:hi + 1, lo] = 1.0
    if tr:
        img[lo:mid + 1, hi] = 1.0
    if br:
        img[mid:hi + 1, hi] = 1.0
    return img


def synthetic_digits(n: int, image_size: int = 10, num_classes: int = 10,
                     seed: int = 0, noise: float = 0.05) -> Dataset:
    """Procedural seven-segment digit images with additive Gaussian pixel
    noise, clipped to [0, 1].

    Labels are assigned round-robin (so every class appears) and shuffled.
    With ``noise=0`` all images of a class are the identical template. A
    small dense network separates the classes easily, which is the point:
    this is a desk-scale stand-in for real digit data.
    """
    if num_classes < 1 or num_classes > 10:
        raise ValueError(f"num_classes must be in [1, 10], got {num_classes}")
    if n < num_classes:
        raise ValueError(f"need n >= num_classes, got n={n}, num_classes={num_classes}")
    if image_size < 6:
        raise ValueError(f"image_size must be >= 6, got {image_size}")
    if noise < 0:
        raise ValueError(f"noise must be >= 0, got {noise}")

    gen = RngHandle(seed, 0).generator()
    labels = np.arange(n, dtype=np.int64) % num_classes
    gen.shuffle(labels)
    templates = np.stack([_digit_template(d, image_size) for d in range(num_classes)])
    inputs = templates[labels]
    if noise > 0:
        inputs = inputs + gen.normal(0.0, noise, size=inputs.shape)
        inputs = np.clip(inputs, 0.0, 1.0)
    else:
        inputs = inputs.copy()
    return Dataset(
        inputs=inputs,
        labels=labels,
        num_classes=num_classes,
        metadata={"source": "synthetic_digits", "image_size": image_size,
                  "noise": noise, "seed": seed},
    )
