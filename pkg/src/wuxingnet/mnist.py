"""MNIST ingestion: IDX parsing, normalization, pooling, seeded splits.

The IDX container is the standard MNIST binary layout: a big-endian magic
word, big-endian 32-bit dimension sizes, then a flat uint8 payload. Parsing
is bit-exact; writers exist so synthetic sets round-trip in tests and so the
bundled subset can be regenerated from source.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
N_CLASSES = 10


class IdxFormatError(ValueError):
    """Malformed IDX container: bad magic, truncated or oversized payload."""


class LabelDomainError(ValueError):
    """A label byte falls outside the digit range 0..9."""


@dataclass(frozen=True)
class ImageSet:
    """A stack of same-sized grayscale images.

    ``pixels`` has shape (count, rows, cols). Parsed sets hold raw uint8
    bytes; downsampled sets hold float64 values already in [0, 1].
    """

    count: int
    rows: int
    cols: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (self.count, self.rows, self.cols):
            raise ValueError(
                f"pixel block {px.shape} does not match "
                f"({self.count}, {self.rows}, {self.cols})")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def normalized(self) -> np.ndarray:
        """Pixels mapped linearly to [0, 1] (byte 0 -> 0.0, byte 255 -> 1.0)."""
        if self.pixels.dtype == np.uint8:
            return self.pixels.astype(np.float64) / 255.0
        return self.pixels.astype(np.float64)

    def features(self) -> np.ndarray:
        """Normalized pixels flattened to (count, rows*cols)."""
        return self.normalized().reshape(self.count, -1)


@dataclass(frozen=True)
class LabelSet:
    count: int
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.shape != (self.count,):
            raise ValueError(f"label block {lab.shape} != ({self.count},)")
        if lab.size and lab.max() >= N_CLASSES:
            bad = int(np.argmax(lab >= N_CLASSES))
            raise LabelDomainError(
                f"label {int(lab[bad])} at index {bad} outside 0..9")
        lab = lab.copy()
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)


def parse_idx_images(data: bytes) -> ImageSet:
    """Parse an IDX image file (magic 0x00000803, three dimensions)."""
    if len(data) < 16:
        raise IdxFormatError(
            f"truncated image header: {len(data)} bytes, need 16")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(
            f"bad image magic 0x{magic:08x} at offset 0, "
            f"expected 0x{IDX_IMAGE_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        # reads dims and payload exactly: trailing bytes are as fatal as
        # missing ones
        raise IdxFormatError(
            f"payload size mismatch at offset {min(len(data), expected)}: "
            f"file has {len(data)} bytes, header implies {expected}")
    pixels = np.frombuffer(data, np.uint8, count * rows * cols, 16)
    return ImageSet(count, rows, cols, pixels.reshape(count, rows, cols))


def parse_idx_labels(data: bytes) -> LabelSet:
    """Parse an IDX label file (magic 0x00000801, one dimension)."""
    if len(data) < 8:
        raise IdxFormatError(
            f"truncated label header: {len(data)} bytes, need 8")
    magic, count = struct.unpack(">II", data[:8])
    if magic != IDX_LABEL_MAGIC:
        raise IdxFormatError(
            f"bad label magic 0x{magic:08x} at offset 0, "
            f"expected 0x{IDX_LABEL_MAGIC:08x}")
    expected = 8 + count
    if len(data) != expected:
        raise IdxFormatError(
            f"payload size mismatch at offset {min(len(data), expected)}: "
            f"file has {len(data)} bytes, header implies {expected}")
    return LabelSet(count, np.frombuffer(data, np.uint8, count, 8))


def write_idx_images(img: ImageSet) -> bytes:
    if img.pixels.dtype != np.uint8:
        raise ValueError("only byte image sets serialize to IDX")
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, img.count, img.rows,
                         img.cols)
    return header + img.pixels.tobytes()


def write_idx_labels(lab: LabelSet) -> bytes:
    return struct.pack(">II", IDX_LABEL_MAGIC, lab.count) + lab.labels.tobytes()


def load_idx_pair(images_path, labels_path):
    """Read and parse an image/label file pair, cross-checking counts."""
    with open(images_path, "rb") as fh:
        images = parse_idx_images(fh.read())
    with open(labels_path, "rb") as fh:
        labels = parse_idx_labels(fh.read())
    if images.count != labels.count:
        raise IdxFormatError(
            f"{images.count} images vs {labels.count} labels")
    return images, labels


def downsample(img: ImageSet, factor: int = 2) -> ImageSet:
    """Non-overlapping factor x factor mean pooling on normalized pixels."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if img.rows % factor or img.cols % factor:
        raise ValueError(
            f"{img.rows}x{img.cols} not divisible by factor {factor}")
    r, c = img.rows // factor, img.cols // factor
    pooled = img.normalized().reshape(img.count, r, factor, c, factor)
    return ImageSet(img.count, r, c, pooled.mean(axis=(2, 4)))


@dataclass(frozen=True)
class Dataset:
    """An iterable split: (feature vector, label) pairs plus batch views."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or labs.shape != (feats.shape[0],):
            raise ValueError("features must be (n, d) with n labels")
        feats = feats.copy()
        labs = labs.copy()
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self):
        return self.features.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self.features[i], int(self.labels[i])


def make_split(images: ImageSet, labels: LabelSet, n_train: int, n_test: int,
               seed: int):
    """Seeded shuffle then prefix split into disjoint train/test Datasets."""
    if images.count != labels.count:
        raise ValueError(
            f"{images.count} images vs {labels.count} labels")
    if n_train < 0 or n_test < 0:
        raise ValueError("split sizes must be nonnegative")
    if n_train + n_test > images.count:
        raise ValueError(
            f"requested {n_train}+{n_test} samples from {images.count}")
    perm = np.random.default_rng(seed).permutation(images.count)
    feats = images.features()
    labs = labels.labels.astype(np.int64)
    tr = perm[:n_train]
    te = perm[n_train:n_train + n_test]
    return Dataset(feats[tr], labs[tr]), Dataset(feats[te], labs[te])
