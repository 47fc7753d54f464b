"""Persistence for explanations: a canonical, versioned JSON record.

The on-disk record is deliberately boring: sorted keys, no floats that vary
between runs, version field first-class. Wall-clock timing never goes in —
the record must be byte-identical across identical invocations, so timing
lives in a separate stats sidecar. Exactly one of score_reduction /
target_gap_gain is present, matching the search mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .core import SegmentSet, segment_set
from .search import Explanation, NotFoundInfo

RECORD_VERSION = 1

_REQUIRED_KEYS = {
    "version",
    "image",
    "mode",
    "target",
    "predicted_class",
    "counterfactual_class",
    "segments",
    "evaluations",
    "irreducible_checked",
    "replacement",
    "segmentation",
    "seed",
}
_MODE_KEYS = {"any": "score_reduction", "target": "target_gap_gain"}


@dataclass(frozen=True)
class ExplanationRecord:
    """Serialized form of a found explanation."""

    image: str
    mode: str
    target: Optional[int]
    predicted_class: int
    counterfactual_class: int
    segments: SegmentSet
    score_reduction: Optional[float]
    target_gap_gain: Optional[float]
    evaluations: int
    irreducible_checked: bool
    replacement: dict
    segmentation: dict
    seed: Optional[int]
    version: int = RECORD_VERSION

    def __post_init__(self):
        if self.version != RECORD_VERSION:
            raise ValueError(f"unsupported record version {self.version}")
        if self.mode not in _MODE_KEYS:
            raise ValueError(f"mode must be 'any' or 'target', got {self.mode!r}")
        if self.mode == "any":
            if self.score_reduction is None or self.target_gap_gain is not None:
                raise ValueError("any-class records carry score_reduction only")
            if self.target is not None:
                raise ValueError("any-class records have no target")
        else:
            if self.target_gap_gain is None or self.score_reduction is not None:
                raise ValueError("target records carry target_gap_gain only")
            if self.target is None:
                raise ValueError("target records need a target class")
        object.__setattr__(self, "segments", segment_set(self.segments))
        object.__setattr__(self, "replacement", dict(self.replacement))
        object.__setattr__(self, "segmentation", dict(self.segmentation))


def record_from_explanation(exp: Explanation, image_path: Union[str, Path]) -> ExplanationRecord:
    return ExplanationRecord(
        image=str(image_path),
        mode=exp.mode,
        target=exp.target,
        predicted_class=exp.original_class,
        counterfactual_class=exp.counterfactual_class,
        segments=exp.segments,
        score_reduction=exp.score_reduction,
        target_gap_gain=exp.target_gap_gain,
        evaluations=exp.evaluations,
        irreducible_checked=exp.irreducible_checked,
        replacement=exp.replacement,
        segmentation=exp.segmentation,
        seed=exp.seed,
    )


def serialize_record(record: ExplanationRecord) -> str:
    doc = {
        "version": record.version,
        "image": record.image,
        "mode": record.mode,
        "target": record.target,
        "predicted_class": record.predicted_class,
        "counterfactual_class": record.counterfactual_class,
        "segments": list(record.segments),
        "evaluations": record.evaluations,
        "irreducible_checked": record.irreducible_checked,
        "replacement": record.replacement,
        "segmentation": record.segmentation,
        "seed": record.seed,
    }
    doc[_MODE_KEYS[record.mode]] = (
        record.score_reduction if record.mode == "any" else record.target_gap_gain
    )
    return json.dumps(doc, sort_keys=True) + "\n"


def parse_record(text: str) -> ExplanationRecord:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("record must be a JSON object")
    mode = doc.get("mode")
    if mode not in _MODE_KEYS:
        raise ValueError(f"mode must be 'any' or 'target', got {mode!r}")
    allowed = _REQUIRED_KEYS | {_MODE_KEYS[mode]}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown record fields: {sorted(unknown)}")
    missing = allowed - set(doc)
    if missing:
        raise ValueError(f"missing record fields: {sorted(missing)}")
    return ExplanationRecord(
        image=doc["image"],
        mode=mode,
        target=doc["target"],
        predicted_class=doc["predicted_class"],
        counterfactual_class=doc["counterfactual_class"],
        segments=tuple(doc["segments"]),
        score_reduction=doc.get("score_reduction"),
        target_gap_gain=doc.get("target_gap_gain"),
        evaluations=doc["evaluations"],
        irreducible_checked=doc["irreducible_checked"],
        replacement=doc["replacement"],
        segmentation=doc["segmentation"],
        seed=doc["seed"],
        version=doc["version"],
    )


def write_record(record: ExplanationRecord, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_record(record))


def read_record(path: Union[str, Path]) -> ExplanationRecord:
    return parse_record(Path(path).read_text())


def stats_payload(elapsed_ms: float) -> str:
    """The non-deterministic leftovers, kept out of the canonical record."""
    return json.dumps({"elapsed_ms": elapsed_ms}, sort_keys=True) + "\n"


def notfound_payload(info: NotFoundInfo, evaluations: int) -> str:
    best = None
    if info.best_partial is not None:
        combo, priority = info.best_partial
        best = {"segments": list(combo), "priority": priority}
    return (
        json.dumps(
            {"reason": info.reason, "best_partial": best, "evaluations": evaluations},
            sort_keys=True,
        )
        + "\n"
    )


def segment_sets_from_json(text: str) -> list[SegmentSet]:
    """Read externally produced explanations for scoring with the metrics
    harness. Accepts a record object, a bare id array, or an array of id
    arrays."""
    doc = json.loads(text)
    if isinstance(doc, dict):
        if "segments" not in doc:
            raise ValueError("object form needs a 'segments' array")
        return [segment_set(doc["segments"])]
    if isinstance(doc, list):
        if all(isinstance(x, int) for x in doc):
            return [segment_set(doc)]
        if all(isinstance(x, list) for x in doc):
            return [segment_set(x) for x in doc]
    raise ValueError("expected a record object, an id array, or an array of id arrays")
