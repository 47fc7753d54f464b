"""Segmentation methods producing SegmentMaps: square grid, SLIC-style
k-means superpixels, and quick shift mode seeking.

All three are deterministic: identical inputs and parameters give identical
label arrays. Color distances use the image's native channels (no Lab
conversion). Labels are always contiguous, ordered by first appearance in
raster (row-major) scan order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

from .core import Image, SegmentMap


@dataclass(frozen=True)
class Grid:
    """Square cells of side `cell`, tiled row-major from the top-left;
    ragged right/bottom cells take the remainder."""

    cell: int = 16

    def __post_init__(self):
        if int(self.cell) < 1:
            raise ValueError(f"cell must be >= 1, got {self.cell}")
        object.__setattr__(self, "cell", int(self.cell))

    tag = "grid"

    def params(self) -> dict:
        return {"cell": self.cell}


@dataclass(frozen=True)
class Slic:
    n_segments: int = 40
    compactness: float = 10.0
    iterations: int = 10

    def __post_init__(self):
        if int(self.n_segments) < 1:
            raise ValueError(f"n_segments must be >= 1, got {self.n_segments}")
        if not float(self.compactness) > 0:
            raise ValueError(f"compactness must be > 0, got {self.compactness}")
        if int(self.iterations) < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        object.__setattr__(self, "n_segments", int(self.n_segments))
        object.__setattr__(self, "compactness", float(self.compactness))
        object.__setattr__(self, "iterations", int(self.iterations))

    tag = "slic"

    def params(self) -> dict:
        return {
            "n_segments": self.n_segments,
            "compactness": self.compactness,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class QuickShift:
    kernel_size: float = 4.0
    max_dist: float = 8.0
    ratio: float = 0.5

    def __post_init__(self):
        if not float(self.kernel_size) > 0:
            raise ValueError(f"kernel_size must be > 0, got {self.kernel_size}")
        if not float(self.max_dist) > 0:
            raise ValueError(f"max_dist must be > 0, got {self.max_dist}")
        if not (0.0 < float(self.ratio) <= 1.0):
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        object.__setattr__(self, "kernel_size", float(self.kernel_size))
        object.__setattr__(self, "max_dist", float(self.max_dist))
        object.__setattr__(self, "ratio", float(self.ratio))

    tag = "quickshift"

    def params(self) -> dict:
        return {
            "kernel_size": self.kernel_size,
            "max_dist": self.max_dist,
            "ratio": self.ratio,
        }


SegmentationParams = Union[Grid, Slic, QuickShift]


def relabel_contiguous(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Map labels to 0..n-1 in order of first appearance in raster scan."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = uniq[np.argsort(first)]
    lut = np.empty(int(flat.max()) + 1, dtype=np.int64)
    lut[order] = np.arange(order.size)
    return lut[flat].reshape(labels.shape), int(order.size)


def grid_segment(image: Image, cell: int) -> SegmentMap:
    """Partition into square cells of side `cell` (right/bottom cells may be
    smaller), labels row-major over cells starting at 0."""
    cell = int(cell)
    if cell < 1:
        raise ValueError(f"cell must be >= 1, got {cell}")
    h, w = image.height, image.width
    n_cols = -(-w // cell)  # ceil
    ys = np.arange(h) // cell
    xs = np.arange(w) // cell
    labels = ys[:, None] * n_cols + xs[None, :]
    n = int(labels[-1, -1]) + 1
    return SegmentMap(labels.astype(np.int64), n)


def slic_segment(
    image: Image,
    n_segments: int = 40,
    compactness: float = 10.0,
    iterations: int = 10,
) -> SegmentMap:
    """SLIC-style superpixels: k-means in joint color-position space.

    Centers start on a grid at spacing sqrt(N/n_segments); the assignment
    distance is euclidean color distance plus (compactness/spacing) times
    euclidean spatial distance. After the last iteration a connectivity
    pass merges orphaned islands (connected components that are not their
    label's largest) into the largest 4-adjacent segment.
    """
    p = Slic(n_segments, compactness, iterations)
    h, w, c = image.pixels.shape
    n = h * w
    spacing = math.sqrt(n / p.n_segments)

    # center grid: floor keeps rows*cols <= n_segments; the -0.5 puts each
    # center on the pixel-space centroid of its block (pixel i spans
    # [i, i+1) in continuous coordinates) so even partitions are k-means
    # fixed points
    n_rows = max(1, min(int(h / spacing), p.n_segments))
    n_cols = max(1, min(int(w / spacing), p.n_segments // n_rows))
    cy = (np.arange(n_rows) + 0.5) * (h / n_rows) - 0.5
    cx = (np.arange(n_cols) + 0.5) * (w / n_cols) - 0.5
    center_pos = np.stack(
        [np.repeat(cy, n_cols), np.tile(cx, n_rows)], axis=1
    )  # (K, 2) as (y, x)
    iy = np.clip(center_pos[:, 0].astype(np.int64), 0, h - 1)
    ix = np.clip(center_pos[:, 1].astype(np.int64), 0, w - 1)
    center_col = image.pixels[iy, ix, :].astype(np.float64)  # (K, c)

    yy, xx = np.mgrid[0:h, 0:w]
    pos = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)  # (N, 2)
    col = image.pixels.reshape(n, c)

    weight = p.compactness / spacing
    labels_flat = np.zeros(n, dtype=np.int64)
    for _ in range(p.iterations):
        d_col = np.sqrt(
            ((col[None, :, :] - center_col[:, None, :]) ** 2).sum(axis=2)
        )  # (K, N)
        d_pos = np.sqrt(((pos[None, :, :] - center_pos[:, None, :]) ** 2).sum(axis=2))
        labels_flat = np.argmin(d_col + weight * d_pos, axis=0)  # ties -> lowest k
        for k in range(center_pos.shape[0]):
            sel = labels_flat == k
            if np.any(sel):  # empty cluster keeps its previous center
                center_pos[k] = pos[sel].mean(axis=0)
                center_col[k] = col[sel].mean(axis=0)

    labels = labels_flat.reshape(h, w)
    labels = _merge_islands(labels)
    labels, count = relabel_contiguous(labels)
    return SegmentMap(labels, count)


_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _merge_islands(labels: np.ndarray) -> np.ndarray:
    """Relabel every connected component that is not its label's largest
    into the largest 4-adjacent segment (by current pixel count, ties to the
    lowest label id). Components are processed in raster order of their
    first pixel."""
    labels = labels.copy()
    islands: list[tuple[int, np.ndarray, np.ndarray]] = []  # (first_idx, ys, xs)
    for lab in np.unique(labels):
        comp, n_comp = ndimage.label(labels == lab, structure=_FOUR_CONN)
        if n_comp <= 1:
            continue
        sizes = ndimage.sum_labels(np.ones_like(comp), comp, index=range(1, n_comp + 1))
        keep = int(np.argmax(sizes)) + 1  # ties -> first-encountered component
        for ci in range(1, n_comp + 1):
            if ci == keep:
                continue
            ys, xs = np.nonzero(comp == ci)
            islands.append((int(ys[0] * labels.shape[1] + xs[0]), ys, xs))
    islands.sort(key=lambda t: t[0])

    h, w = labels.shape
    for _, ys, xs in islands:
        own = labels[ys[0], xs[0]]
        neighbors: list[int] = []
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            ny, nx = ys + dy, xs + dx
            ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
            neighbors.append(labels[ny[ok], nx[ok]])
        cand = np.concatenate(neighbors)
        cand = cand[cand != own]
        if cand.size == 0:
            continue  # label fills the image minus nothing to merge into
        counts = np.bincount(labels.ravel())
        uniq = np.unique(cand)
        target = int(uniq[np.argmax(counts[uniq])])  # ties -> lowest id
        labels[ys, xs] = target
    return labels


def quickshift_segment(
    image: Image,
    kernel_size: float = 4.0,
    max_dist: float = 8.0,
    ratio: float = 0.5,
) -> SegmentMap:
    """Quick shift mode seeking in joint (ratio-scaled color, position) space.

    Each pixel's density is a Gaussian kernel density estimate with
    bandwidth `kernel_size` (contributions truncated beyond 3 bandwidths of
    spatial distance, standard KDE practice). Each pixel then links to its
    nearest neighbor of higher density within feature distance `max_dist`;
    density ties resolve toward the lower flat pixel index so the ordering
    is total. Trees of the resulting forest are the segments.
    """
    p = QuickShift(kernel_size, max_dist, ratio)
    h, w, c = image.pixels.shape
    col = image.pixels * p.ratio  # (h, w, c), scaled color part of the feature
    inv2h2 = 1.0 / (2.0 * p.kernel_size * p.kernel_size)

    # density pass
    rd = int(math.ceil(3.0 * p.kernel_size))
    density = np.zeros((h, w), dtype=np.float64)
    for dy in range(-rd, rd + 1):
        for dx in range(-rd, rd + 1):
            sq = dy * dy + dx * dx
            if sq > rd * rd:
                continue
            src, dst = _shift_slices(h, w, dy, dx)
            dcol = col[dst] - col[src]
            dist2 = (dcol * dcol).sum(axis=-1) + sq
            density[dst[0], dst[1]] += np.exp(-dist2 * inv2h2)

    # linking pass: nearest neighbor with (density, -index) strictly greater,
    # within feature distance max_dist
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    max_d2 = p.max_dist * p.max_dist
    rl = int(math.floor(p.max_dist))  # spatial distance alone bounds feature distance
    parent = np.full((h, w), -1, dtype=np.int64)
    best_d2 = np.full((h, w), np.inf)
    for dy in range(-rl, rl + 1):
        for dx in range(-rl, rl + 1):
            sq = dy * dy + dx * dx
            if sq == 0 or sq > max_d2:
                continue
            src, dst = _shift_slices(h, w, dy, dx)
            # candidate parent at (y+dy, x+dx) seen from pixel at (y, x):
            # dst selects the pixels, src their shifted neighbors
            dcol = col[dst] - col[src]
            d2 = (dcol * dcol).sum(axis=-1) + sq
            d_px = density[dst]
            d_nb = density[src]
            i_px = idx[dst]
            i_nb = idx[src]
            higher = (d_nb > d_px) | ((d_nb == d_px) & (i_nb < i_px))
            ok = higher & (d2 <= max_d2)
            cur = best_d2[dst]
            cur_par = parent[dst]
            better = ok & ((d2 < cur) | ((d2 == cur) & (i_nb < cur_par)))
            cur[better] = d2[better]
            cur_par[better] = i_nb[better]
            best_d2[dst] = cur
            parent[dst] = cur_par

    par = parent.ravel().copy()
    roots = par < 0
    par[roots] = np.flatnonzero(roots)
    while True:  # pointer jumping up the forest
        nxt = par[par]
        if np.array_equal(nxt, par):
            break
        par = nxt
    labels, count = relabel_contiguous(par.reshape(h, w))
    return SegmentMap(labels, count)


def _shift_slices(h: int, w: int, dy: int, dx: int):
    """Slices so that array[dst] and array[src] pair each pixel with its
    (dy, dx)-shifted neighbor, restricted to in-bounds pairs. Shifts larger
    than the image yield empty (but shape-consistent) slices."""
    y0d, y1d = max(0, -dy), max(max(0, -dy), min(h, h - dy))
    x0d, x1d = max(0, -dx), max(max(0, -dx), min(w, w - dx))
    ys_dst = slice(y0d, y1d)
    xs_dst = slice(x0d, x1d)
    ys_src = slice(y0d + dy, y1d + dy)
    xs_src = slice(x0d + dx, x1d + dx)
    return (ys_src, xs_src), (ys_dst, xs_dst)


def segment(image: Image, params: SegmentationParams) -> SegmentMap:
    """Run the segmentation method described by `params`."""
    if isinstance(params, Grid):
        return grid_segment(image, params.cell)
    if isinstance(params, Slic):
        return slic_segment(image, params.n_segments, params.compactness, params.iterations)
    if isinstance(params, QuickShift):
        return quickshift_segment(image, params.kernel_size, params.max_dist, params.ratio)
    raise TypeError(f"unknown segmentation params {params!r}")


def parse_segmentation(token: str) -> SegmentationParams:
    """Parse a CLI segmentation token.

    Accepted forms: grid[:CELL] | slic[:N[,COMPACTNESS[,ITERATIONS]]] |
    quickshift[:KERNEL[,MAXDIST[,RATIO]]]. Omitted values use defaults.
    """
    name, _, arg = token.partition(":")
    name = name.strip().lower()
    args = [a.strip() for a in arg.split(",")] if arg.strip() else []
    methods = {
        "grid": (Grid, (int,)),
        "slic": (Slic, (int, float, int)),
        "quickshift": (QuickShift, (float, float, float)),
    }
    if name not in methods:
        raise ValueError(f"unknown segmentation method {token!r}")
    cls, casts = methods[name]
    if len(args) > len(casts) or any(not a for a in args):
        raise ValueError(f"bad parameters in segmentation token {token!r}")
    try:
        return cls(*(cast(a) for cast, a in zip(casts, args)))
    except ValueError as exc:
        raise ValueError(f"bad parameters in segmentation token {token!r}") from exc


def segmentation_spec(params: SegmentationParams) -> dict:
    """Serializable {method: tag, ...params} form."""
    return {"method": params.tag, **params.params()}


def segmentation_from_spec(spec: dict) -> SegmentationParams:
    """Inverse of segmentation_spec."""
    d = dict(spec)
    tag = d.pop("method")
    for cls in (Grid, Slic, QuickShift):
        if tag == cls.tag:
            return cls(**d)
    raise ValueError(f"unknown segmentation spec {spec!r}")
