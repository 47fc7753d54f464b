"""Measurement harness: how stable, how fast, and how often actually
counterfactual the explanations are over a dataset of images.

Stability is strict Jaccard over repeated runs: segments present in every
run divided by segments present in any run (not a pairwise mean). The
counterfactual rate re-checks each explanation by actually removing it and
re-scoring — it takes explanations from anywhere, not just this engine, so
third-party segment sets can be measured with the same yardstick.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .classifiers import ClassifierHandle
from .core import Image, SegmentMap, SegmentSet, predicted_class, segment_set
from .fileio import load_image
from .perturbation import ReplacementStrategy, remove_segments
from .search import SearchConfig, SearchOutcome, sedc, sedc_t
from .segmentation import SegmentationParams, segment


@dataclass(frozen=True)
class StabilityReport:
    """Agreement across repeated runs on one problem."""

    jaccard: float
    run_count: int
    per_run_sizes: tuple[int, ...]


@dataclass(frozen=True)
class BenchReport:
    """Dataset-level aggregates in the shape of the usual benchmark table."""

    stability_pct: float
    time_mean_s: float
    time_std_s: float
    counterfactual_pct: float
    evaluation_counts: tuple[tuple[int, ...], ...]  # per image, per repeat

    def to_json(self) -> str:
        return json.dumps(
            {
                "stability_pct": self.stability_pct,
                "time_mean_s": self.time_mean_s,
                "time_std_s": self.time_std_s,
                "counterfactual_pct": self.counterfactual_pct,
                "evaluation_counts": [list(c) for c in self.evaluation_counts],
            },
            sort_keys=True,
        )

    def text_table(self) -> str:
        rows = [
            ("stability (%)", f"{self.stability_pct:.1f}"),
            ("computation time (s)", f"{self.time_mean_s:.3f} ± {self.time_std_s:.3f}"),
            ("counterfactual (%)", f"{self.counterfactual_pct:.1f}"),
        ]
        label_w = max(len(r[0]) for r in rows)
        return "\n".join(f"{label:<{label_w}}  {value}" for label, value in rows)


def jaccard_stability(runs: Sequence[SegmentSet]) -> float:
    """Segments appearing in every run over segments appearing in any run.

    An empty union (every run produced the empty set) counts as perfect
    agreement: 1.0.
    """
    if not runs:
        raise ValueError("need at least one run")
    sets = [frozenset(segment_set(r)) for r in runs]
    union = frozenset().union(*sets)
    if not union:
        return 1.0
    inter = sets[0]
    for s in sets[1:]:
        inter = inter & s
    return len(inter) / len(union)


def stability_report(runs: Sequence[SegmentSet]) -> StabilityReport:
    return StabilityReport(
        jaccard=jaccard_stability(runs),
        run_count=len(runs),
        per_run_sizes=tuple(len(segment_set(r)) for r in runs),
    )


def counterfactual_rate(
    results: Sequence[tuple[Image, SegmentMap, SegmentSet]],
    classifier: ClassifierHandle,
    strategy: ReplacementStrategy,
) -> float:
    """Fraction of (image, segmap, segments) triples whose removal changes
    the argmax class. Empty segment sets change nothing and count as 0."""
    if not results:
        raise ValueError("need at least one result")
    flips = 0
    for image, segmap, segments in results:
        ids = segment_set(segments)
        if not ids:
            continue
        before = predicted_class(classifier.score([image])[0])
        after = predicted_class(
            classifier.score([remove_segments(image, segmap, ids, strategy)])[0]
        )
        if after != before:
            flips += 1
    return flips / len(results)


def run_bench(
    dataset: Sequence[Union[str, Path, Image]],
    classifier: ClassifierHandle,
    params: SegmentationParams,
    config: SearchConfig = SearchConfig(),
    repeats: int = 1,
    target: Optional[int] = None,
) -> BenchReport:
    """Run the explainer `repeats` times on every image and aggregate.

    Per image: segmentation once (it is deterministic), then `repeats`
    sequential searches. Stability is the Jaccard over that image's found
    explanations; not-found runs are excluded from stability and timing but
    count against the counterfactual rate. Timing aggregates are over
    per-image means, population standard deviation. With no successful run
    anywhere, stability and timing report 0.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if not dataset:
        raise ValueError("dataset must be nonempty")

    per_image_jaccard: list[float] = []
    per_image_time_s: list[float] = []
    eval_counts: list[tuple[int, ...]] = []
    found_runs = 0
    total_runs = 0

    for item in dataset:
        image = item if isinstance(item, Image) else load_image(item)
        segmap = segment(image, params)
        outcomes: list[SearchOutcome] = []
        for _ in range(repeats):
            if target is None:
                outcomes.append(sedc(image, classifier, segmap, config, params))
            else:
                outcomes.append(sedc_t(image, classifier, segmap, target, config, params))
        total_runs += repeats
        eval_counts.append(tuple(o.evaluations for o in outcomes))
        found = [o for o in outcomes if o.found]
        found_runs += len(found)
        if found:
            per_image_jaccard.append(
                jaccard_stability([o.explanation.segments for o in found])
            )
            per_image_time_s.append(
                float(np.mean([o.elapsed_ms for o in found])) / 1000.0
            )

    return BenchReport(
        stability_pct=100.0 * float(np.mean(per_image_jaccard)) if per_image_jaccard else 0.0,
        time_mean_s=float(np.mean(per_image_time_s)) if per_image_time_s else 0.0,
        time_std_s=float(np.std(per_image_time_s)) if per_image_time_s else 0.0,
        counterfactual_pct=100.0 * found_runs / total_runs,
        evaluation_counts=tuple(eval_counts),
    )
