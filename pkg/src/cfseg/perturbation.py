"""Segment "removal": replacing a set of segments with imputed pixel values.

Every strategy computes its statistics from the ORIGINAL image, never from a
partially perturbed one. That makes the perturbation a pure function of
(image, segment set, strategy) and is what the search's determinism and the
composition property rest on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .core import Image, SegmentMap, segment_pixel_mask, segment_set, validate_pair
from .errors import SegmentIdOutOfRange


@dataclass(frozen=True)
class ConstantColor:
    """Fill removed pixels with a fixed color (one value per channel)."""

    color: tuple[float, ...]

    def __post_init__(self):
        col = tuple(float(v) for v in self.color)
        if len(col) not in (1, 3):
            raise ValueError(f"constant color needs 1 or 3 channels, got {len(col)}")
        if any(not (0.0 <= v <= 1.0) for v in col):
            raise ValueError(f"constant color must lie in [0, 1], got {col}")
        object.__setattr__(self, "color", col)

    tag = "color"

    def params(self) -> dict:
        return {"color": list(self.color)}


@dataclass(frozen=True)
class ImageMean:
    """Per-channel mean of the whole original image."""

    tag = "mean"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class ImageMode:
    """Per-channel mode of the whole original image, on 8-bit quantized
    values (256 bins); the lowest bin wins ties."""

    tag = "mode"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class SegmentMean:
    """Per-channel mean of the removed segment's own original pixels."""

    tag = "segment-mean"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class NeighborMean:
    """Per-channel mean over original pixels of segments 4-adjacent to the
    removed segment, excluding other removed segments; falls back to the
    image mean when no eligible neighbor pixels exist."""

    tag = "neighbor-mean"

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class Blur:
    """Replace removed pixels with a Gaussian blur of the original image."""

    sigma: float

    def __post_init__(self):
        if not (float(self.sigma) > 0.0) or not math.isfinite(float(self.sigma)):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    tag = "blur"

    def params(self) -> dict:
        return {"sigma": self.sigma}


@dataclass(frozen=True)
class RandomPixels:
    """Replace each removed channel value with a uniform draw from [0, 1).

    Values come from a counter-based generator keyed by the seed, so the
    value at (pixel, channel) is a pure function of (seed, pixel index,
    channel) — independent of which other pixels are removed and of
    traversal order.
    """

    seed: int

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed))

    tag = "random"

    def params(self) -> dict:
        return {"seed": self.seed}


ReplacementStrategy = Union[
    ConstantColor, ImageMean, ImageMode, SegmentMean, NeighborMean, Blur, RandomPixels
]

# Strategies whose per-pixel replacement value does not depend on the removed
# set (NeighborMean excludes removed segments from its pool, so it does).
SET_INDEPENDENT_STRATEGIES = (
    ConstantColor,
    ImageMean,
    ImageMode,
    SegmentMean,
    Blur,
    RandomPixels,
)


def blur_image(image: Image, sigma: float) -> Image:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), normalized
    kernel, borders clamped (edge replication)."""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    out = gaussian_filter1d(image.pixels, sigma, axis=0, mode="nearest", radius=radius)
    out = gaussian_filter1d(out, sigma, axis=1, mode="nearest", radius=radius)
    # convex combination of [0,1] values; clip fp dust only
    return Image(np.clip(out, 0.0, 1.0))


def _image_mode_color(px: np.ndarray) -> np.ndarray:
    # per channel: most frequent 8-bit bin, lowest bin on ties
    c = px.shape[2]
    out = np.empty(c, dtype=np.float64)
    for ch in range(c):
        bins = np.round(px[:, :, ch] * 255.0).astype(np.int64)
        counts = np.bincount(bins.ravel(), minlength=256)
        out[ch] = np.argmax(counts) / 255.0
    return out


def _adjacent_segments(labels: np.ndarray, count: int) -> list[set[int]]:
    """4-adjacency between segments: adj[s] = set of segment ids sharing a
    horizontal or vertical pixel edge with s."""
    adj: list[set[int]] = [set() for _ in range(count)]
    for a, b in (
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
    ):
        diff = a != b
        pairs = np.stack([a[diff], b[diff]], axis=1)
        if pairs.size:
            for u, v in np.unique(pairs, axis=0):
                adj[int(u)].add(int(v))
                adj[int(v)].add(int(u))
    return adj


def _random_raster(shape: tuple[int, int, int], seed: int) -> np.ndarray:
    # Philox is counter-based: draw i of the row-major raster is a fixed
    # function of (seed, i), regardless of what the values are used for.
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed & (2**64 - 1))))
    return gen.random(shape, dtype=np.float64)


def remove_segments(
    image: Image,
    segmap: SegmentMap,
    ids: Iterable[int],
    strategy: ReplacementStrategy,
) -> Image:
    """Return a copy of `image` with the given segments "removed".

    Pixels whose label is in `ids` are replaced according to `strategy`;
    every other pixel is bit-identical to the input. An empty set returns
    the image unchanged.
    """
    validate_pair(image, segmap)
    ids = segment_set(ids)
    if not ids:
        return image
    if ids[-1] >= segmap.segment_count:
        raise SegmentIdOutOfRange(
            f"segment id {ids[-1]} >= segment_count {segmap.segment_count}"
        )

    px = image.pixels
    labels = segmap.labels
    mask = segment_pixel_mask(segmap, ids)
    out = px.copy()

    if isinstance(strategy, ConstantColor):
        if len(strategy.color) != image.channels:
            raise ValueError(
                f"constant color has {len(strategy.color)} channels, "
                f"image has {image.channels}"
            )
        out[mask] = np.asarray(strategy.color, dtype=np.float64)
    elif isinstance(strategy, ImageMean):
        out[mask] = px.mean(axis=(0, 1))
    elif isinstance(strategy, ImageMode):
        out[mask] = _image_mode_color(px)
    elif isinstance(strategy, SegmentMean):
        for s in ids:
            seg = labels == s
            out[seg] = px[seg].mean(axis=0)
    elif isinstance(strategy, NeighborMean):
        adj = _adjacent_segments(labels, segmap.segment_count)
        removed = set(ids)
        fallback = px.mean(axis=(0, 1))
        for s in ids:
            keep = sorted(adj[s] - removed)
            if keep:
                pool = px[np.isin(labels, keep)]
                out[labels == s] = pool.mean(axis=0)
            else:
                out[labels == s] = fallback
    elif isinstance(strategy, Blur):
        out[mask] = blur_image(image, strategy.sigma).pixels[mask]
    elif isinstance(strategy, RandomPixels):
        out[mask] = _random_raster(px.shape, strategy.seed)[mask]
    else:
        raise TypeError(f"unknown replacement strategy {strategy!r}")

    return Image(out)


def parse_replacement(token: str) -> ReplacementStrategy:
    """Parse a CLI replacement token.

    Accepted forms: mean | mode | segment-mean | neighbor-mean | blur:SIGMA
    | random:SEED | color:R,G,B (or color:V for grayscale).
    """
    name, _, arg = token.partition(":")
    name = name.strip().lower()
    if name == "mean":
        return ImageMean()
    if name == "mode":
        return ImageMode()
    if name == "segment-mean":
        return SegmentMean()
    if name == "neighbor-mean":
        return NeighborMean()
    if name == "blur":
        if not arg:
            raise ValueError("blur needs a sigma, e.g. blur:2.0")
        return Blur(float(arg))
    if name == "random":
        if not arg:
            raise ValueError("random needs a seed, e.g. random:42")
        return RandomPixels(int(arg))
    if name == "color":
        if not arg:
            raise ValueError("color needs channel values, e.g. color:0.5,0.5,0.5")
        return ConstantColor(tuple(float(v) for v in arg.split(",")))
    raise ValueError(f"unknown replacement strategy {token!r}")


def replacement_spec(strategy: ReplacementStrategy) -> dict:
    """Serializable {strategy: tag, ...params} form of a strategy."""
    return {"strategy": strategy.tag, **strategy.params()}


def replacement_from_spec(spec: dict) -> ReplacementStrategy:
    """Inverse of replacement_spec."""
    d = dict(spec)
    tag = d.pop("strategy")
    if tag == "color":
        return ConstantColor(tuple(d["color"]))
    if tag == "mean":
        return ImageMean()
    if tag == "mode":
        return ImageMode()
    if tag == "segment-mean":
        return SegmentMean()
    if tag == "neighbor-mean":
        return NeighborMean()
    if tag == "blur":
        return Blur(d["sigma"])
    if tag == "random":
        return RandomPixels(d["seed"])
    raise ValueError(f"unknown replacement spec {spec!r}")
