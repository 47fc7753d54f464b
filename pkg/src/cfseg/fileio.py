"""Image and segment-map file I/O plus the rendered artifact helpers.

Accepted input formats are PNG and PPM only (8-bit, 1 or 3 channels);
intensities are divided by 255 on load so every loaded image sits exactly on
the 8-bit grid. JPEG is deliberately not supported — decoder variance would
break the determinism guarantees.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image as PILImage

from .core import Image, SegmentMap, segment_pixel_mask
from .errors import CfsegError
from .segmentation import SegmentationParams, segmentation_spec

_ACCEPTED_FORMATS = {"PNG", "PPM"}
_ACCEPTED_MODES = {"L": 1, "RGB": 3}


class UnsupportedImage(CfsegError):
    """Input file is not an 8-bit single- or three-channel PNG/PPM."""


def _from_pil(pil: PILImage.Image, origin: str) -> Image:
    if pil.mode not in _ACCEPTED_MODES:
        raise UnsupportedImage(
            f"{origin}: mode {pil.mode!r} unsupported (need 8-bit L or RGB)"
        )
    arr = np.asarray(pil, dtype=np.float64) / 255.0
    return Image(arr)


def load_image(path: str | Path) -> Image:
    """Load an 8-bit PNG or PPM image; values are divided by 255."""
    path = Path(path)
    try:
        pil = PILImage.open(path)
        pil.load()
    except Exception as exc:
        raise UnsupportedImage(f"{path}: cannot read image ({exc})") from exc
    if pil.format not in _ACCEPTED_FORMATS:
        raise UnsupportedImage(
            f"{path}: format {pil.format!r} unsupported (need PNG or PPM)"
        )
    return _from_pil(pil, str(path))


def _to_pil(image: Image) -> PILImage.Image:
    arr = np.round(image.pixels * 255.0).astype(np.uint8)
    if image.channels == 1:
        return PILImage.fromarray(arr[:, :, 0], mode="L")
    return PILImage.fromarray(arr, mode="RGB")


def save_image(image: Image, path: str | Path) -> None:
    """Write an image as 8-bit PNG or PPM (chosen by file extension)."""
    _to_pil(image).save(Path(path))


def encode_png_bytes(image: Image) -> bytes:
    """8-bit PNG encoding of an image (the wire-protocol picture payload)."""
    buf = io.BytesIO()
    _to_pil(image).save(buf, format="PNG")
    return buf.getvalue()


def decode_png_bytes(data: bytes) -> Image:
    """Inverse of encode_png_bytes."""
    pil = PILImage.open(io.BytesIO(data))
    pil.load()
    return _from_pil(pil, "<png bytes>")


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Binary mask as 8-bit grayscale PNG: 255 where True, 0 elsewhere."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(Path(path))


def load_mask_png(path: str | Path) -> np.ndarray:
    pil = PILImage.open(Path(path))
    pil.load()
    return np.asarray(pil) >= 128


def save_label_png(segmap: SegmentMap, path: str | Path) -> None:
    """Segment labels as a 16-bit single-channel PNG."""
    if segmap.segment_count > 65536:
        raise CfsegError("more than 65536 segments cannot go into 16-bit PNG")
    arr = segmap.labels.astype(np.uint16)
    PILImage.fromarray(arr).save(Path(path), format="PNG")


def load_label_png(path: str | Path, segment_count: int | None = None) -> SegmentMap:
    pil = PILImage.open(Path(path))
    pil.load()
    arr = np.asarray(pil, dtype=np.int64)
    n = int(arr.max()) + 1 if segment_count is None else int(segment_count)
    return SegmentMap(arr, n)


def save_segmap_sidecar(
    segmap: SegmentMap, params: SegmentationParams, path: str | Path
) -> None:
    """JSON sidecar for an exported segment map."""
    payload = {
        "segment_count": segmap.segment_count,
        **segmentation_spec(params),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def boundary_overlay(image: Image, segmap: SegmentMap) -> Image:
    """RGB preview with segment boundaries painted yellow."""
    lab = segmap.labels
    edge = np.zeros(lab.shape, dtype=bool)
    edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
    px = image.pixels
    rgb = np.repeat(px, 3, axis=2) if image.channels == 1 else px.copy()
    rgb = rgb.copy()
    rgb[edge] = (1.0, 1.0, 0.0)
    return Image(rgb)


def explanation_render(image: Image, segmap: SegmentMap, ids: Iterable[int]) -> Image:
    """Original pixels on the explanation segments, neutral gray elsewhere."""
    mask = segment_pixel_mask(segmap, ids)
    out = np.full_like(image.pixels, 0.5)
    out[mask] = image.pixels[mask]
    return Image(out)
