"""Scoring oracles: an in-process linear classifier for verifiable tests and
an adapter that talks to any external model over a line-oriented JSON wire
protocol (see the `serve` module for the reference process).

Scores are raw opaque numbers — never normalized — and the predicted class
is their argmax. Every handle carries an atomic evaluation counter that
counts perturbed images scored (one unit per image, regardless of batching);
scoring the original, unperturbed image does not count.
"""

from __future__ import annotations

import abc
import base64
import json
import os
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Image, SegmentMap, validate_scores
from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    MalformedResponse,
    ScoreTimeout,
)
from .fileio import encode_png_bytes
from .perturbation import ReplacementStrategy, remove_segments


class ClassifierHandle(abc.ABC):
    """A scoring oracle: images in, k finite class scores per image out."""

    #: number of images sent to the backend per request
    chunk_size = 64

    def __init__(self, class_count: int):
        if class_count < 2:
            raise ValueError(f"need at least 2 classes, got {class_count}")
        self.class_count = int(class_count)
        self._eval_lock = threading.Lock()
        self._evaluations = 0

    @abc.abstractmethod
    def _score_batch(self, images: Sequence[Image]) -> np.ndarray:
        """Score up to chunk_size images; returns (n, class_count)."""

    def score(self, images: Sequence[Image]) -> np.ndarray:
        """Score a batch of images, order preserved; returns (n, k)."""
        if not images:
            raise ValueError("images batch must be nonempty")
        parts = []
        for i in range(0, len(images), self.chunk_size):
            parts.append(np.asarray(self._score_batch(images[i : i + self.chunk_size])))
        out = np.concatenate(parts, axis=0)
        if out.shape != (len(images), self.class_count):
            raise MalformedResponse(
                f"backend returned shape {out.shape}, "
                f"expected {(len(images), self.class_count)}"
            )
        if not np.all(np.isfinite(out)):
            raise MalformedResponse("backend returned non-finite scores")
        return out

    def score_perturbed(self, images: Sequence[Image]) -> np.ndarray:
        """score() plus evaluation accounting: one unit per image."""
        out = self.score(images)
        self.count_evaluations(len(images))
        return out

    def count_evaluations(self, n: int) -> None:
        with self._eval_lock:
            self._evaluations += int(n)

    @property
    def evaluations(self) -> int:
        """Total perturbed images scored through this handle."""
        with self._eval_lock:
            return self._evaluations

    def close(self) -> None:  # pragma: no cover - overridden where needed
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Per-class weight rasters (k, height, width, channels) plus k biases;
    score_c = sum over pixels and channels of w_c * x + b_c."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim == 3:  # (k, h, w) grayscale shorthand
            w = w[:, :, :, None]
        if w.ndim != 4:
            raise DimensionMismatch(f"weights must be (k, h, w, c), got {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise DimensionMismatch(
                f"biases shape {b.shape} does not match {w.shape[0]} classes"
            )
        if w.shape[0] < 2:
            raise ValueError("need at least 2 classes")
        if w.shape[3] not in (1, 3):
            raise DimensionMismatch(f"weight channels must be 1 or 3, got {w.shape[3]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("model parameters must be finite")
        w = w.copy()
        w.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {"weights": self.weights.tolist(), "biases": self.biases.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        d = json.loads(text)
        return cls(np.asarray(d["weights"]), np.asarray(d["biases"]))

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return cls.from_json(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


class BuiltinLinear(ClassifierHandle):
    """In-process linear scoring oracle."""

    chunk_size = 4096  # pure numpy, no reason for small requests

    def __init__(self, model: LinearModel):
        super().__init__(model.class_count)
        self.model = model

    def _score_batch(self, images: Sequence[Image]) -> np.ndarray:
        k, h, w, c = self.model.weights.shape
        for im in images:
            if im.pixels.shape != (h, w, c):
                raise DimensionMismatch(
                    f"image shape {im.pixels.shape} does not match model {(h, w, c)}"
                )
        stack = np.stack([im.pixels for im in images])  # (n, h, w, c)
        flat = stack.reshape(len(images), -1)
        wflat = self.model.weights.reshape(k, -1)
        return flat @ wflat.T + self.model.biases[None, :]


class ExternalProcess(ClassifierHandle):
    """Adapter scoring through a spawned subprocess speaking the wire
    protocol: newline-delimited JSON over stdin/stdout.

        -> {"type":"hello","protocol":1}
        <- {"type":"ready","classes":k}
        -> {"type":"score","id":n,"width":w,"height":h,"channels":c,"png_b64":...}
        <- {"type":"scores","id":n,"scores":[...]} | {"type":"error","id":n,"message":...}

    Ids are strictly increasing and never reused. Responses may arrive out
    of order; they are matched back by id. A missing response surfaces
    ScoreTimeout, never a silently wrong score.
    """

    def __init__(self, cmdline: str | Sequence[str], timeout_s: float = 30.0):
        argv = shlex.split(cmdline) if isinstance(cmdline, str) else list(cmdline)
        self.timeout_s = float(timeout_s)
        self._wire_lock = threading.Lock()
        self._next_id = 0
        self._rbuf = bytearray()
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                bufsize=0,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot spawn {argv!r}: {exc}") from exc
        ready = self._round_trip_raw({"type": "hello", "protocol": 1})
        if ready.get("type") != "ready" or "classes" not in ready:
            raise MalformedResponse(f"bad handshake reply: {ready!r}")
        k = ready["classes"]
        if not isinstance(k, int) or k < 2:
            raise MalformedResponse(f"bad class count in handshake: {k!r}")
        super().__init__(k)

    def _send(self, obj: dict) -> None:
        if self._proc.poll() is not None:
            raise BackendUnavailable("scoring process has exited")
        try:
            self._proc.stdin.write((json.dumps(obj) + "\n").encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendUnavailable(f"scoring process pipe broke: {exc}") from exc

    def _read_line(self, deadline: float) -> dict:
        # assemble one newline-terminated record, waiting at most until the
        # deadline for more bytes (select on the raw pipe, own line buffer)
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._rbuf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ScoreTimeout(f"no response within {self.timeout_s}s")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise ScoreTimeout(f"no response within {self.timeout_s}s")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise BackendUnavailable("scoring process closed stdout")
            self._rbuf.extend(chunk)
        raw, _, rest = bytes(self._rbuf).partition(b"\n")
        self._rbuf = bytearray(rest)
        line = raw.decode("utf-8", errors="replace")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"non-JSON line from backend: {line!r}") from exc
        if not isinstance(obj, dict):
            raise MalformedResponse(f"expected JSON object, got: {obj!r}")
        return obj

    def _round_trip_raw(self, obj: dict) -> dict:
        with self._wire_lock:
            self._send(obj)
            return self._read_line(time.monotonic() + self.timeout_s)

    def _score_batch(self, images: Sequence[Image]) -> np.ndarray:
        with self._wire_lock:
            wanted: dict[int, int] = {}  # id -> position in batch
            for pos, im in enumerate(images):
                rid = self._next_id
                self._next_id += 1
                wanted[rid] = pos
                self._send(
                    {
                        "type": "score",
                        "id": rid,
                        "width": im.width,
                        "height": im.height,
                        "channels": im.channels,
                        "png_b64": base64.b64encode(encode_png_bytes(im)).decode(
                            "ascii"
                        ),
                    }
                )
            out = np.empty((len(images), self.class_count), dtype=np.float64)
            deadline = time.monotonic() + self.timeout_s
            while wanted:
                obj = self._read_line(deadline)
                kind = obj.get("type")
                if kind == "error":
                    raise BackendUnavailable(
                        f"backend error for id {obj.get('id')}: {obj.get('message')}"
                    )
                if kind != "scores":
                    raise MalformedResponse(f"unexpected message: {obj!r}")
                rid = obj.get("id")
                if rid not in wanted:
                    raise MalformedResponse(f"response for unknown id {rid!r}")
                scores = obj.get("scores")
                if not isinstance(scores, list) or len(scores) != self.class_count:
                    raise MalformedResponse(
                        f"expected {self.class_count} scores, got {scores!r}"
                    )
                try:
                    row = validate_scores(np.asarray(scores, dtype=np.float64))
                except (TypeError, ValueError) as exc:
                    raise MalformedResponse(f"bad scores for id {rid}: {exc}") from exc
                out[wanted.pop(rid)] = row
            return out

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5)
        except Exception:
            proc.kill()


def build_classifier(spec: str, timeout_s: float = 30.0) -> ClassifierHandle:
    """Build a handle from a CLI spec: builtin:model.json or exec:cmdline."""
    kind, _, arg = spec.partition(":")
    if kind == "builtin":
        if not arg:
            raise ValueError("builtin classifier needs a model path")
        return BuiltinLinear(LinearModel.load(arg))
    if kind == "exec":
        if not arg:
            raise ValueError("exec classifier needs a command line")
        return ExternalProcess(arg, timeout_s=timeout_s)
    raise ValueError(f"unknown classifier spec {spec!r} (use builtin:... or exec:...)")


def score(handle: ClassifierHandle, images: Sequence[Image]) -> np.ndarray:
    """Module-level alias for handle.score."""
    return handle.score(images)


def score_after_removal(
    handle: ClassifierHandle,
    image: Image,
    segmap: SegmentMap,
    ids: Iterable[int],
    strategy: ReplacementStrategy,
) -> np.ndarray:
    """Score the image with the given segments removed (one evaluation)."""
    perturbed = remove_segments(image, segmap, ids, strategy)
    return handle.score_perturbed([perturbed])[0]
