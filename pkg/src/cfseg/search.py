"""Best-first search for counterfactual segment sets.

The engine asks one question: which segments, when replaced with neutral
content, flip the classifier's decision? `sedc` accepts any class change;
`sedc_t` only accepts a chosen target class. Both expand combinations
best-first, guided by how much each candidate moves the scores, and both
optionally refine the winning set down to an irreducible core.

Determinism contract: same image, segment map, classifier, and config in,
byte-identical explanation out. All tie-breaks are total orders (insertion
order, lexicographic segment ids), never dict iteration or wall clock.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import Image, SegmentMap, SegmentSet, predicted_class, segment_set, validate_pair
from .errors import CfsegError, EmptyFrontier, TargetEqualsPredicted
from .classifiers import ClassifierHandle
from .perturbation import (
    ImageMean,
    ReplacementStrategy,
    remove_segments,
    replacement_spec,
)
from .segmentation import SegmentationParams, segmentation_spec


@dataclass(frozen=True)
class SearchConfig:
    """Budgets and knobs shared by both search modes.

    max_iterations bounds how many frontier combinations are expanded;
    max_time_ms bounds wall time, checked each time a scored candidate is
    consumed; either may be None for unlimited. refine_irreducible turns on
    the subset post-pass with its own refine_time_ms budget.
    """

    max_iterations: Optional[int] = None
    max_time_ms: Optional[float] = 15000.0
    refine_irreducible: bool = False
    refine_time_ms: float = 15000.0
    replacement: ReplacementStrategy = field(default_factory=ImageMean)
    rng_seed: Optional[int] = None

    def __post_init__(self):
        if self.max_iterations is None and self.max_time_ms is None:
            raise ValueError(
                "at least one of max_iterations / max_time_ms must be finite"
            )
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.max_time_ms is not None and not (
            np.isfinite(self.max_time_ms) and self.max_time_ms > 0
        ):
            raise ValueError(f"max_time_ms must be positive, got {self.max_time_ms}")
        if not (np.isfinite(self.refine_time_ms) and self.refine_time_ms > 0):
            raise ValueError(
                f"refine_time_ms must be positive, got {self.refine_time_ms}"
            )


@dataclass(frozen=True)
class Explanation:
    """A segment set whose removal changed the decision, plus provenance."""

    segments: SegmentSet
    original_class: int
    counterfactual_class: int
    mode: str  # "any" | "target"
    target: Optional[int]
    score_reduction: Optional[float]  # mode="any": drop in original-class score
    target_gap_gain: Optional[float]  # mode="target": gain in (target - original) gap
    evaluations: int
    elapsed_ms: float
    irreducible_checked: bool
    replacement: dict
    segmentation: dict
    seed: Optional[int]


@dataclass(frozen=True)
class NotFoundInfo:
    """Why the search ended without a counterfactual."""

    reason: str  # "budget" | "frontier-exhausted"
    best_partial: Optional[tuple[SegmentSet, float]]


@dataclass(frozen=True)
class SearchOutcome:
    explanation: Optional[Explanation]
    not_found: Optional[NotFoundInfo]
    evaluations: int
    elapsed_ms: float

    @property
    def found(self) -> bool:
        return self.explanation is not None


class Frontier:
    """Priority frontier over segment combinations.

    pop_best returns the highest-priority entry; among equal priorities the
    earliest-pushed wins (seq is the tiebreak, heapq is not stable alone).
    """

    def __init__(self):
        self._heap: list[tuple[float, int, SegmentSet]] = []
        self._seq = 0
        self._visited: set[SegmentSet] = set()

    def __len__(self) -> int:
        return len(self._heap)

    def seen(self, combo: SegmentSet) -> bool:
        return combo in self._visited

    def mark(self, combo: SegmentSet) -> None:
        self._visited.add(combo)

    def push(self, combo: SegmentSet, priority: float) -> None:
        heapq.heappush(self._heap, (-float(priority), self._seq, combo))
        self._seq += 1

    def pop_best(self) -> tuple[SegmentSet, float]:
        if not self._heap:
            raise EmptyFrontier("no combinations left to expand")
        neg, _, combo = heapq.heappop(self._heap)
        return combo, -neg


class _Budget:
    """Wall-clock + iteration budget. Time is checked per scored candidate."""

    def __init__(self, max_time_ms: Optional[float], max_iterations: Optional[int]):
        self.start = time.monotonic()
        self.deadline = (
            self.start + max_time_ms / 1000.0 if max_time_ms is not None else None
        )
        self.max_iterations = max_iterations
        self.iterations = 0

    def out_of_time(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def out_of_iterations(self) -> bool:
        return self.max_iterations is not None and self.iterations >= self.max_iterations

    def elapsed_ms(self) -> float:
        return (time.monotonic() - self.start) * 1000.0


def sedc(
    image: Image,
    classifier: ClassifierHandle,
    segmap: SegmentMap,
    config: SearchConfig = SearchConfig(),
    segmentation: Optional[SegmentationParams] = None,
) -> SearchOutcome:
    """Find a segment set whose removal changes the predicted class (to any
    other class). Candidates are ranked by how far they pull the original
    class's score down."""
    return _search(image, classifier, segmap, config, None, segmentation)


def sedc_t(
    image: Image,
    classifier: ClassifierHandle,
    segmap: SegmentMap,
    target: int,
    config: SearchConfig = SearchConfig(),
    segmentation: Optional[SegmentationParams] = None,
) -> SearchOutcome:
    """Find a segment set whose removal makes `target` the predicted class.
    Candidates are ranked by the gap between the target score and the
    originally-predicted class's score."""
    if not (0 <= target < classifier.class_count):
        raise ValueError(
            f"target {target} out of range for {classifier.class_count} classes"
        )
    return _search(image, classifier, segmap, config, int(target), segmentation)


def _search(
    image: Image,
    classifier: ClassifierHandle,
    segmap: SegmentMap,
    config: SearchConfig,
    target: Optional[int],
    segmentation: Optional[SegmentationParams],
) -> SearchOutcome:
    validate_pair(image, segmap)

    scores0 = classifier.score([image])[0]
    c = predicted_class(scores0)
    if target is not None and target == c:
        raise TargetEqualsPredicted(
            f"image is already classified as {c}; nothing to search for"
        )
    p_c0 = float(scores0[c])
    base_gap = float(scores0[target] - scores0[c]) if target is not None else 0.0

    def flips(scores: np.ndarray) -> bool:
        new_class = predicted_class(scores)
        return new_class == target if target is not None else new_class != c

    def priority(scores: np.ndarray) -> float:
        if target is not None:
            return float(scores[target] - scores[c])
        return p_c0 - float(scores[c])

    def select_key(scores: np.ndarray) -> float:
        # mode "any": biggest drop of the original class's score
        # mode "target": highest target-class score
        if target is not None:
            return float(scores[target])
        return p_c0 - float(scores[c])

    budget = _Budget(config.max_time_ms, config.max_iterations)
    frontier = Frontier()
    # found entries: (combo, select_key, insertion order, scores)
    found: list[tuple[SegmentSet, float, int, np.ndarray]] = []
    found_seq = 0
    best_partial: Optional[tuple[SegmentSet, float]] = None
    expired = False
    # counted locally so parallel searches sharing one handle stay accurate
    evals = 0

    def consume(combo: SegmentSet, scores: np.ndarray) -> None:
        """Account for one scored candidate: flip, frontier, or partial."""
        nonlocal best_partial, found_seq
        if flips(scores):
            found.append((combo, select_key(scores), found_seq, scores))
            found_seq += 1
        else:
            frontier.push(combo, priority(scores))
            pr = priority(scores)
            if best_partial is None or pr > best_partial[1]:
                best_partial = (combo, pr)

    def score_candidates(combos: Sequence[SegmentSet]) -> bool:
        """Score combos in one batch, consume one at a time; True if the
        time budget expired partway (remaining candidates are dropped)."""
        nonlocal evals
        if not combos:
            return False
        images = [
            remove_segments(image, segmap, combo, config.replacement)
            for combo in combos
        ]
        all_scores = classifier.score_perturbed(images)
        evals += len(images)
        for combo, scores in zip(combos, all_scores):
            if budget.out_of_time():
                return True
            consume(combo, scores)
        return False

    # --- singleton pass: every segment alone ---
    singles = [(i,) for i in range(segmap.segment_count)]
    for s in singles:
        frontier.mark(s)
    expired = score_candidates(singles)

    # --- best-first expansion ---
    while not found and not expired:
        if budget.out_of_iterations():
            break
        try:
            base, _ = frontier.pop_best()
        except EmptyFrontier:
            break
        budget.iterations += 1
        children = []
        for seg in range(segmap.segment_count):
            if seg in base:
                continue
            child = segment_set(base + (seg,))
            if frontier.seen(child):
                continue
            frontier.mark(child)
            children.append(child)
        expired = score_candidates(children)

    elapsed = budget.elapsed_ms()
    evaluations = evals
    seg_spec = (
        segmentation_spec(segmentation)
        if segmentation is not None
        else {"method": "custom"}
    )

    if not found:
        reason = "budget" if (expired or budget.out_of_iterations()) else "frontier-exhausted"
        return SearchOutcome(
            explanation=None,
            not_found=NotFoundInfo(reason=reason, best_partial=best_partial),
            evaluations=evaluations,
            elapsed_ms=elapsed,
        )

    best_combo, _, _, _ = max(found, key=lambda e: (e[1], -e[2]))
    irreducible_checked = False
    if config.refine_irreducible:
        best_combo, irreducible_checked, spent = irreducibility_search(
            best_combo, image, classifier, segmap, config, target=target
        )
        evaluations += spent

    # verification: score the winner once more, outside the evaluation count
    verify = classifier.score(
        [remove_segments(image, segmap, best_combo, config.replacement)]
    )[0]
    if not flips(verify):
        raise CfsegError(
            f"search selected {best_combo} but its removal does not change the "
            f"decision on re-scoring; classifier is not deterministic"
        )
    new_class = predicted_class(verify)
    elapsed = budget.elapsed_ms()

    explanation = Explanation(
        segments=best_combo,
        original_class=c,
        counterfactual_class=new_class,
        mode="target" if target is not None else "any",
        target=target,
        score_reduction=(p_c0 - float(verify[c])) if target is None else None,
        target_gap_gain=(
            (float(verify[target]) - float(verify[c])) - base_gap
            if target is not None
            else None
        ),
        evaluations=evaluations,
        elapsed_ms=elapsed,
        irreducible_checked=irreducible_checked,
        replacement=replacement_spec(config.replacement),
        segmentation=seg_spec,
        seed=config.rng_seed,
    )
    return SearchOutcome(
        explanation=explanation,
        not_found=None,
        evaluations=evaluations,
        elapsed_ms=elapsed,
    )


def irreducibility_search(
    segments: SegmentSet,
    image: Image,
    classifier: ClassifierHandle,
    segmap: SegmentMap,
    config: SearchConfig,
    target: Optional[int] = None,
) -> tuple[SegmentSet, bool, int]:
    """Look for a proper subset of `segments` that still flips the decision.

    Candidates are every proper subset except the empty set and singletons
    (the main search already scored each singleton and none flipped), which
    leaves 2^n - n - 2 subsets: sizes 2 through n-1, tried in increasing
    size, lexicographic within a size. The first size with any hit wins;
    among hits the one moving the score furthest is returned.

    Returns (subset, checked, evaluations_spent). `checked` is False only
    when refine_time_ms expired, in which case the input comes back
    unchanged.
    """
    ids = segment_set(segments)
    n = len(ids)
    if n <= 2:
        # nothing between singletons (already refuted) and the full set
        return ids, True, 0

    scores0 = classifier.score([image])[0]
    c = predicted_class(scores0)
    p_c0 = float(scores0[c])

    def flips(scores: np.ndarray) -> bool:
        new_class = predicted_class(scores)
        return new_class == target if target is not None else new_class != c

    def select_key(scores: np.ndarray) -> float:
        if target is not None:
            return float(scores[target])
        return p_c0 - float(scores[c])

    deadline = time.monotonic() + config.refine_time_ms / 1000.0
    spent = 0
    batch = max(1, min(classifier.chunk_size, 256))

    for size in range(2, n):
        hits: list[tuple[SegmentSet, float]] = []
        pending: list[SegmentSet] = []

        def flush() -> bool:
            nonlocal spent
            if not pending:
                return False
            images = [
                remove_segments(image, segmap, combo, config.replacement)
                for combo in pending
            ]
            all_scores = classifier.score_perturbed(images)
            spent += len(pending)
            for combo, scores in zip(pending, all_scores):
                if time.monotonic() > deadline:
                    return True
                if flips(scores):
                    hits.append((combo, select_key(scores)))
            pending.clear()
            return False

        expired = False
        for combo in itertools.combinations(ids, size):
            pending.append(combo)
            if len(pending) >= batch:
                if flush():
                    expired = True
                    break
        if not expired:
            expired = flush()
        if expired:
            return ids, False, spent
        if hits:
            best = max(hits, key=lambda h: h[1])  # ties: first by scan order
            return best[0], True, spent

    return ids, True, spent


def refine(
    explanation: Explanation,
    image: Image,
    classifier: ClassifierHandle,
    segmap: SegmentMap,
    config: SearchConfig,
) -> Explanation:
    """Run the irreducibility sweep on an existing explanation and fold the
    result back into a new record (evaluations are added to the old count)."""
    refined, checked, spent = irreducibility_search(
        explanation.segments,
        image,
        classifier,
        segmap,
        config,
        target=explanation.target,
    )
    if refined == explanation.segments:
        return replace(
            explanation,
            irreducible_checked=checked,
            evaluations=explanation.evaluations + spent,
        )
    scores0 = classifier.score([image])[0]
    c = predicted_class(scores0)
    # verification-style re-score of the smaller set, outside the count
    scores = classifier.score(
        [remove_segments(image, segmap, refined, config.replacement)]
    )[0]
    base_gap = (
        float(scores0[explanation.target] - scores0[c])
        if explanation.target is not None
        else 0.0
    )
    return replace(
        explanation,
        segments=refined,
        counterfactual_class=predicted_class(scores),
        score_reduction=(
            float(scores0[c] - scores[c]) if explanation.target is None else None
        ),
        target_gap_gain=(
            (float(scores[explanation.target]) - float(scores[c])) - base_gap
            if explanation.target is not None
            else None
        ),
        evaluations=explanation.evaluations + spent,
        irreducible_checked=checked,
    )
