"""Core domain types: images, segment maps, class scores, segment sets.

Conventions used throughout the package:

* images are (height, width, channels) float64 arrays with values in [0, 1],
  channels is 1 (grayscale) or 3 (RGB);
* segment maps are (height, width) integer label arrays with labels in
  [0, segment_count), every id used at least once;
* class scores are 1-D float vectors, k >= 2, compared as raw opaque numbers
  (no softmax anywhere); the predicted class is the argmax, exact ties going
  to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch, NonContiguousLabels, SegmentIdOutOfRange

# A segment set is canonically a strictly increasing tuple of segment ids.
SegmentSet = tuple[int, ...]


def segment_set(ids: Iterable[int]) -> SegmentSet:
    """Canonicalize an iterable of segment ids (dedup, sort, int-ify)."""
    out = tuple(sorted({int(i) for i in ids}))
    if out and out[0] < 0:
        raise SegmentIdOutOfRange(f"negative segment id {out[0]}")
    return out


@dataclass(frozen=True, eq=False)
class Image:
    """An image to be explained.

    Parameters
    ----------
    pixels : ndarray
        (height, width, channels) array of finite reals in [0, 1]. A 2-D
        array is accepted and treated as single-channel. The stored array
        is a read-only float64 copy.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3:
            raise DimensionMismatch(f"expected 2-D or 3-D pixel array, got {px.ndim}-D")
        h, w, c = px.shape
        if h < 1 or w < 1:
            raise DimensionMismatch(f"empty image {w}x{h}")
        if c not in (1, 3):
            raise DimensionMismatch(f"channels must be 1 or 3, got {c}")
        if not np.all(np.isfinite(px)):
            raise ValueError("image intensities must be finite")
        lo, hi = float(px.min()), float(px.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"image intensities must lie in [0, 1], got [{lo}, {hi}]")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True, eq=False)
class SegmentMap:
    """Per-pixel segment labels partitioning an image into segments.

    labels is a (height, width) integer array with values in
    [0, segment_count). Contiguity (every id actually used) is checked by
    validate_pair, not at construction, so that validators can be exercised.
    """

    labels: np.ndarray
    segment_count: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise DimensionMismatch(f"labels must be 2-D, got {lab.ndim}-D")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValueError(f"labels must be integers, got {lab.dtype}")
        n = int(self.segment_count)
        if n < 1:
            raise ValueError(f"segment_count must be >= 1, got {n}")
        if lab.size == 0:
            raise DimensionMismatch("empty label array")
        lo, hi = int(lab.min()), int(lab.max())
        if lo < 0 or hi >= n:
            raise SegmentIdOutOfRange(
                f"labels span [{lo}, {hi}], outside [0, {n})"
            )
        lab = lab.astype(np.int64, copy=True)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "segment_count", n)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def validate_pair(image: Image, segmap: SegmentMap) -> None:
    """Check that a segment map actually describes an image.

    Raises DimensionMismatch if shapes disagree, NonContiguousLabels (with
    the first missing id) if some id in [0, segment_count) is unused.
    """
    if (image.height, image.width) != (segmap.height, segmap.width):
        raise DimensionMismatch(
            f"image is {image.width}x{image.height}, "
            f"segment map is {segmap.width}x{segmap.height}"
        )
    counts = np.bincount(segmap.labels.ravel(), minlength=segmap.segment_count)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise NonContiguousLabels(int(missing[0]))


def validate_scores(scores: np.ndarray, k: int | None = None) -> np.ndarray:
    """Validate a raw score vector: 1-D, k >= 2, all finite."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"scores must be 1-D, got shape {s.shape}")
    if s.shape[0] < 2:
        raise ValueError(f"need at least 2 classes, got {s.shape[0]}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if k is not None and s.shape[0] != k:
        raise ValueError(f"expected {k} scores, got {s.shape[0]}")
    return s


def predicted_class(scores: np.ndarray) -> int:
    """Argmax class index; exact ties break to the lowest index."""
    s = validate_scores(scores)
    return int(np.argmax(s))


def segment_pixel_mask(segmap: SegmentMap, ids: Iterable[int]) -> np.ndarray:
    """(height, width) bool mask of pixels whose label is in `ids`.

    Ids are range-checked against the map.
    """
    ids = segment_set(ids)
    if ids and ids[-1] >= segmap.segment_count:
        raise SegmentIdOutOfRange(
            f"segment id {ids[-1]} >= segment_count {segmap.segment_count}"
        )
    if not ids:
        return np.zeros(segmap.labels.shape, dtype=bool)
    return np.isin(segmap.labels, np.asarray(ids, dtype=np.int64))
