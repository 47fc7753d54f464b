"""Command-line surface.

    cfseg explain --image cat.png --classifier builtin:model.json
    cfseg batch   --manifest rows.txt --classifier exec:"python3 -m cfseg.serve --model m.json"
    cfseg segment --image cat.png --segmentation slic:40,10,10
    cfseg bench   DATASET_DIR --classifier builtin:model.json --repeats 10

Exit codes: 0 found, 1 usage or I/O error, 2 classifier error, 3 search
finished without a counterfactual. Every failure message names the stage
that failed. EC_LOG=DEBUG|INFO|... controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from .classifiers import ClassifierHandle, build_classifier
from .core import Image, segment_pixel_mask
from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    MalformedResponse,
    ScoreTimeout,
    TargetEqualsPredicted,
)
from .fileio import (
    boundary_overlay,
    explanation_render,
    load_image,
    save_image,
    save_label_png,
    save_mask_png,
    save_segmap_sidecar,
)
from .metrics import run_bench
from .perturbation import RandomPixels, ImageMean, parse_replacement, remove_segments
from .records import (
    notfound_payload,
    record_from_explanation,
    serialize_record,
    stats_payload,
)
from .search import SearchConfig, SearchOutcome, sedc, sedc_t
from .segmentation import QuickShift, parse_segmentation, segment

log = logging.getLogger("cfseg")

EXIT_FOUND = 0
EXIT_USAGE = 1
EXIT_CLASSIFIER = 2
EXIT_NOT_FOUND = 3

_CLASSIFIER_ERRORS = (BackendUnavailable, MalformedResponse, ScoreTimeout, DimensionMismatch)


class StageFailure(Exception):
    def __init__(self, stage: str, message: str, code: int):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
        self.code = code


def _stage(name: str, fn, *args, **kwargs):
    """Run one pipeline stage; failures carry the stage name and exit code."""
    log.debug("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except StageFailure:
        raise
    except _CLASSIFIER_ERRORS as exc:
        raise StageFailure(name, str(exc), EXIT_CLASSIFIER) from exc
    except TargetEqualsPredicted as exc:
        raise StageFailure(name, str(exc), EXIT_USAGE) from exc
    except Exception as exc:
        raise StageFailure(name, str(exc), EXIT_USAGE) from exc


def _config_from_args(args) -> SearchConfig:
    replacement = args.replacement
    return SearchConfig(
        max_iterations=args.max_iters,
        max_time_ms=args.max_time,
        refine_irreducible=args.refine is not None,
        refine_time_ms=args.refine if args.refine is not None else 15000.0,
        replacement=replacement,
        rng_seed=replacement.seed if isinstance(replacement, RandomPixels) else None,
    )


def _load_labels(path: Optional[str], handle: ClassifierHandle) -> Optional[list[str]]:
    if path is None:
        return None
    names = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(names) != handle.class_count:
        raise ValueError(
            f"{len(names)} labels for {handle.class_count} classes in {path}"
        )
    return names


def _class_name(idx: int, labels: Optional[list[str]]) -> str:
    return f"{idx} ({labels[idx]})" if labels else str(idx)


def _run_search(image, handle, segmap, args, config) -> SearchOutcome:
    if args.target is not None:
        return sedc_t(image, handle, segmap, args.target, config, args.segmentation)
    return sedc(image, handle, segmap, config, args.segmentation)


def _write_explain_artifacts(
    outcome: SearchOutcome,
    image: Image,
    segmap,
    image_path: str,
    out_dir: Path,
    stem: str,
    config: SearchConfig,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if outcome.found:
        exp = outcome.explanation
        record_path = out_dir / f"{stem}.json"
        record_path.write_text(serialize_record(record_from_explanation(exp, image_path)))
        written.append(record_path)
        stats_path = out_dir / f"{stem}.stats.json"
        stats_path.write_text(stats_payload(outcome.elapsed_ms))
        written.append(stats_path)
        mask_path = out_dir / f"{stem}.mask.png"
        save_mask_png(segment_pixel_mask(segmap, exp.segments), mask_path)
        written.append(mask_path)
        render_path = out_dir / f"{stem}.explanation.png"
        save_image(explanation_render(image, segmap, exp.segments), render_path)
        written.append(render_path)
        cf_path = out_dir / f"{stem}.counterfactual.png"
        save_image(
            remove_segments(image, segmap, exp.segments, config.replacement), cf_path
        )
        written.append(cf_path)
    else:
        nf_path = out_dir / f"{stem}.notfound.json"
        nf_path.write_text(notfound_payload(outcome.not_found, outcome.evaluations))
        written.append(nf_path)
    return written


def cmd_explain(args) -> int:
    image = _stage("load-image", load_image, args.image)
    handle = _stage("classifier", build_classifier, args.classifier)
    with handle:
        labels = _stage("labels", _load_labels, args.labels, handle)
        segmap = _stage("segmentation", segment, image, args.segmentation)
        config = _config_from_args(args)
        outcome = _stage("search", _run_search, image, handle, segmap, args, config)
        written = _stage(
            "write-artifacts",
            _write_explain_artifacts,
            outcome,
            image,
            segmap,
            args.image,
            Path(args.out),
            Path(args.image).stem,
            config,
        )
    if outcome.found:
        exp = outcome.explanation
        print(f"predicted class: {_class_name(exp.original_class, labels)}")
        print(f"counterfactual class: {_class_name(exp.counterfactual_class, labels)}")
        print(f"segments removed: {list(exp.segments)}")
    else:
        info = outcome.not_found
        print(f"no counterfactual found (reason: {info.reason})")
        if info.best_partial is not None:
            combo, priority = info.best_partial
            print(f"best partial: segments {list(combo)}, priority {priority:.6g}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_FOUND if outcome.found else EXIT_NOT_FOUND


def _read_manifest(path: str) -> list[tuple[str, Optional[int]]]:
    rows: list[tuple[str, Optional[int]]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = shlex.split(line)
        if len(parts) == 1:
            rows.append((parts[0], None))
        elif len(parts) == 2:
            rows.append((parts[0], int(parts[1])))
        else:
            raise ValueError(f"{path}:{lineno}: expected 'image-path [target]'")
    if not rows:
        raise ValueError(f"{path}: manifest has no rows")
    return rows


def cmd_batch(args) -> int:
    rows = _stage("manifest", _read_manifest, args.manifest)
    handle = _stage("classifier", build_classifier, args.classifier)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _config_from_args(args)

    def run_row(item: tuple[int, tuple[str, Optional[int]]]) -> dict:
        index, (path, row_target) = item
        target = row_target if row_target is not None else args.target
        row: dict = {"image": path, "target": target}
        try:
            image = load_image(path)
            segmap = segment(image, args.segmentation)
            if target is not None:
                outcome = sedc_t(image, handle, segmap, target, config, args.segmentation)
            else:
                outcome = sedc(image, handle, segmap, config, args.segmentation)
            stem = f"{index:04d}_{Path(path).stem}"
            _write_explain_artifacts(
                outcome, image, segmap, path, out_dir, stem, config
            )
        except Exception as exc:
            log.warning("row %d (%s) failed: %s", index, path, exc)
            row.update(status="error", message=str(exc))
            return row
        if outcome.found:
            exp = outcome.explanation
            row.update(
                status="found",
                segments=list(exp.segments),
                counterfactual_class=exp.counterfactual_class,
                evaluations=outcome.evaluations,
            )
        else:
            info = outcome.not_found
            best = None
            if info.best_partial is not None:
                best = {
                    "segments": list(info.best_partial[0]),
                    "priority": info.best_partial[1],
                }
            row.update(
                status="not-found",
                reason=info.reason,
                best_partial=best,
                evaluations=outcome.evaluations,
            )
        return row

    with handle:
        jobs = max(1, args.jobs)
        if jobs == 1:
            results = [run_row(item) for item in enumerate(rows)]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run_row, enumerate(rows)))

    summary = {
        "images": len(results),
        "found": sum(r["status"] == "found" for r in results),
        "not_found": sum(r["status"] == "not-found" for r in results),
        "errors": sum(r["status"] == "error" for r in results),
        "rows": results,
    }
    summary_path = out_dir / "summary.json"
    _stage(
        "write-artifacts",
        summary_path.write_text,
        json.dumps(summary, sort_keys=True) + "\n",
    )
    print(
        f"images: {summary['images']}  found: {summary['found']}  "
        f"not found: {summary['not_found']}  errors: {summary['errors']}"
    )
    print(f"wrote {summary_path}")
    return EXIT_FOUND


def cmd_segment(args) -> int:
    image = _stage("load-image", load_image, args.image)
    segmap = _stage("segmentation", segment, image, args.segmentation)
    out_dir = Path(args.out)
    stem = Path(args.image).stem

    def write_all():
        out_dir.mkdir(parents=True, exist_ok=True)
        save_label_png(segmap, out_dir / f"{stem}.labels.png")
        save_segmap_sidecar(segmap, args.segmentation, out_dir / f"{stem}.labels.json")
        save_image(boundary_overlay(image, segmap), out_dir / f"{stem}.boundaries.png")

    _stage("write-artifacts", write_all)
    print(f"segments: {segmap.segment_count}")
    for name in (f"{stem}.labels.png", f"{stem}.labels.json", f"{stem}.boundaries.png"):
        print(f"wrote {out_dir / name}")
    return EXIT_FOUND


def cmd_bench(args) -> int:
    def collect() -> list[Path]:
        root = Path(args.dataset)
        if not root.is_dir():
            raise ValueError(f"{args.dataset} is not a directory")
        paths = sorted(
            p for p in root.iterdir() if p.suffix.lower() in (".png", ".ppm")
        )
        if not paths:
            raise ValueError(f"no PNG/PPM images under {args.dataset}")
        return paths

    paths = _stage("dataset", collect)
    handle = _stage("classifier", build_classifier, args.classifier)
    with handle:
        config = _config_from_args(args)
        report = _stage(
            "bench",
            run_bench,
            paths,
            handle,
            args.segmentation,
            config,
            args.repeats,
            args.target,
        )
    out_dir = Path(args.out)

    def write_all():
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bench.json").write_text(report.to_json() + "\n")
        (out_dir / "bench.txt").write_text(report.text_table() + "\n")

    _stage("write-artifacts", write_all)
    print(report.text_table())
    print(f"wrote {out_dir / 'bench.json'}")
    return EXIT_FOUND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfseg",
        description="Counterfactual explanations for image classifiers "
        "by best-first segment removal.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--segmentation",
        type=parse_segmentation,
        default=QuickShift(),
        metavar="METHOD[:PARAMS]",
        help="grid[:CELL] | slic[:N[,COMPACT[,ITERS]]] | "
        "quickshift[:KERNEL[,MAXDIST[,RATIO]]] (default: quickshift)",
    )
    common.add_argument("--out", default=".", metavar="DIR", help="output directory")

    search_common = argparse.ArgumentParser(add_help=False)
    search_common.add_argument(
        "--classifier",
        required=True,
        metavar="SPEC",
        help="builtin:model.json or exec:'command line'",
    )
    search_common.add_argument("--labels", metavar="FILE", help="class names, one per line")
    search_common.add_argument(
        "--replacement",
        type=parse_replacement,
        default=ImageMean(),
        metavar="STRATEGY",
        help="mean | mode | segment-mean | neighbor-mean | blur:SIGMA | "
        "random:SEED | color:R,G,B (default: mean)",
    )
    search_common.add_argument("--target", type=int, default=None, metavar="N",
                               help="search toward this class instead of any change")
    search_common.add_argument("--max-time", type=float, default=15000.0, metavar="MS",
                               help="search time budget in ms (default 15000)")
    search_common.add_argument("--max-iters", type=int, default=None, metavar="N",
                               help="cap on frontier expansions")
    search_common.add_argument(
        "--refine",
        type=float,
        nargs="?",
        const=15000.0,
        default=None,
        metavar="MS",
        help="refine the result to an irreducible set (optional ms budget, "
        "default 15000)",
    )

    p_explain = sub.add_parser(
        "explain", parents=[common, search_common], help="explain one image"
    )
    p_explain.add_argument("--image", required=True, help="input image (PNG/PPM)")
    p_explain.set_defaults(func=cmd_explain)

    p_batch = sub.add_parser(
        "batch", parents=[common, search_common], help="explain a manifest of images"
    )
    p_batch.add_argument(
        "--manifest", required=True, help="text file: one 'image-path [target]' per line"
    )
    p_batch.add_argument("--jobs", type=int, default=1, metavar="N",
                         help="parallel rows (default 1)")
    p_batch.set_defaults(func=cmd_batch)

    p_segment = sub.add_parser(
        "segment", parents=[common], help="write a segment map without searching"
    )
    p_segment.add_argument("--image", required=True, help="input image (PNG/PPM)")
    p_segment.set_defaults(func=cmd_segment)

    p_bench = sub.add_parser(
        "bench", parents=[common, search_common], help="measure over a dataset directory"
    )
    p_bench.add_argument("dataset", help="directory of PNG/PPM images")
    p_bench.add_argument("--repeats", type=int, default=1, metavar="N",
                         help="runs per image (default 1)")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("EC_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_FOUND if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except StageFailure as failure:
        print(f"cfseg: {failure.stage}: {failure.message}", file=sys.stderr)
        return failure.code


if __name__ == "__main__":
    raise SystemExit(main())
