"""Command-line entry point.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 leakage found
(``audit`` only). Stages exchange data only through files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from fairsplit import audit, dedup, metrics, splitter
from fairsplit.errors import FairsplitError
from fairsplit.imaging import ManifestImages, parse_size
from fairsplit.manifest import TEST, SplitAssignment, load_manifest, read_split, write_split
from fairsplit.synthgen import AugmentConfig, augment_manifest, generate_batch, load_registry
from fairsplit.synthgen.batch import write_rows

logger = logging.getLogger("fairsplit")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_LEAK = 0, 1, 2, 3

STRATEGY_NAMES = {
    "group-atomic-ratio": splitter.GROUP_ATOMIC_RATIO,
    "filter-test": splitter.FILTER_TEST,
    "dup-to-val": splitter.DUP_TO_VALIDATION,
}


def _default_jobs() -> int:
    raw = os.environ.get("FAIRSPLIT_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _size(text: str) -> tuple[int, int]:
    try:
        return parse_size(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _threshold(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be unsigned")
    return value


def _ratio(text: str) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratio must look like TRAIN:TEST, got {text!r}") from None
    if a <= 0 or b <= 0:
        raise argparse.ArgumentTypeError("ratio parts must be positive")
    return a, b


def _targets(text: str) -> dict[str, int]:
    try:
        train, val, test = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("targets must look like TRAIN,VALIDATION,TEST") from None
    return {"train": train, "validation": val, "test": test}


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _load_config(path: str | None) -> AugmentConfig:
    if path is None:
        return AugmentConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("shadow_opacity", "noise_sigma"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return AugmentConfig(**raw)


def cmd_dedup(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    h, w = args.size
    images = ManifestImages(manifest, w, h)
    graph = dedup.build_duplicate_graph(manifest, images, args.threshold,
                                        bucket=not args.no_bucket, jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dedup.write_edges(graph.edges, out)
    dedup.write_groups(graph, Path(args.groups) if args.groups else out.with_name("groups.json"))
    info = dedup.summary(graph, images.unrectified)
    info["size"] = f"{h}x{w}"
    _write_text(Path(args.summary) if args.summary else out.with_name("summary.json"), dedup.dumps_json(info))
    logger.info("%d edges, %d groups", info["edges"], info["groups"])
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    h, w = args.size
    if args.against:
        other = load_manifest(args.against)
        report, _ = audit.cross_manifest_audit(manifest, other, args.threshold, size=(h, w),
                                               bucket=not args.no_bucket, jobs=args.jobs)
    else:
        split = read_split(args.split)
        if args.dropped:
            extra = read_split(args.dropped)
            split = SplitAssignment(split.assignment, split.strategy, split.seed,
                                    dropped=tuple(extra.assignment))
        split.check_against(manifest)
        if args.groups:
            graph = dedup.read_graph(args.edges, args.groups)
        else:
            graph = dedup.build_duplicate_graph(manifest, ManifestImages(manifest, w, h), args.threshold,
                                                bucket=not args.no_bucket, jobs=args.jobs)
        report = audit.leakage_report(graph, split)
    text = dedup.dumps_json(report.to_dict())
    if args.out:
        _write_text(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_LEAK if report.leaked_test > 0 else EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    strategy = STRATEGY_NAMES[args.strategy]
    manifest = load_manifest(args.manifest)
    graph = dedup.read_graph(args.edges, args.groups)
    train_ratio, test_ratio = args.ratio
    spec = splitter.SplitSpec(strategy=strategy, train_ratio=train_ratio, test_ratio=test_ratio,
                              val_fraction=args.val_fraction, target_counts=args.targets,
                              seed=args.seed, per_subset=not args.joint_pools)
    original = read_split(args.original) if args.original else None
    result = splitter.apply_strategy(manifest, graph, spec, original)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_split(result, out)
    provenance = dict(result.provenance)
    if strategy == splitter.FILTER_TEST:
        dropped_path = _sibling(out, ".dropped.tsv")
        write_split({i: TEST for i in result.dropped}, dropped_path)
        provenance["dropped_file"] = dropped_path.name
    prov_path = Path(args.provenance) if args.provenance else _sibling(out, ".provenance.json")
    _write_text(prov_path, dedup.dumps_json(provenance))
    counts = result.counts()
    logger.info("train=%d validation=%d test=%d", counts["train"], counts["validation"], counts["test"])
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    templates = load_registry(args.templates)
    weights = None
    if args.weights:
        weights = {}
        for part in args.weights.split(","):
            name, _, value = part.partition("=")
            weights[name.strip()] = float(value)
    out = Path(args.out)
    _, rows = generate_batch(args.n, list(templates.values()), _load_config(args.config), args.seed,
                             weights=weights, out_dir=out, jobs=args.jobs)
    write_rows(rows, out / "synthetic.csv")
    logger.info("wrote %d synthetic plates to %s", len(rows), out)
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    rows = augment_manifest(manifest, out, _load_config(args.config), args.seed, args.copies, args.size)
    write_rows(rows, out / "augmented.csv")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if len(args.pred_original) != len(args.pred_fair):
        raise FairsplitError("--pred-original and --pred-fair must be given the same number of times")
    if args.model and len(args.model) != len(args.pred_original):
        raise FairsplitError("--model must be given once per prediction pair")
    truth = load_manifest(args.truth)
    split_o = read_split(args.split_original or args.split)
    split_f = read_split(args.split_fair or args.split)
    runs = []
    for k, (po, pf) in enumerate(zip(args.pred_original, args.pred_fair)):
        name = args.model[k] if args.model else Path(po).stem
        runs.append((metrics.load_predictions(po, name), metrics.load_predictions(pf, name)))
    table = metrics.compare_runs(runs, truth, split_o.ids_in(TEST), split_f.ids_in(TEST),
                                 baseline=args.rel_gap_baseline)
    if args.json:
        _write_text(Path(args.json), table.to_json())
    sys.stdout.write(table.to_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairsplit", description="Near-duplicate audits and fair splits for plate datasets.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_jobs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--jobs", type=int, default=_default_jobs(),
                       help="worker count (default: $FAIRSPLIT_JOBS or 1); outputs do not depend on it")

    def add_size(p: argparse.ArgumentParser) -> None:
        p.add_argument("--size", type=_size, default=(48, 96), metavar="HxW",
                       help="canonical image size (default 48x96)")

    p = sub.add_parser("dedup", help="find near-duplicates and group them")
    p.add_argument("--manifest", required=True)
    add_size(p)
    p.add_argument("--threshold", type=_threshold, required=True,
                   help=f"max RMS pixel distance for a duplicate (suggested {dedup.DEFAULT_THRESHOLD})")
    p.add_argument("--out", required=True, help="edges JSON Lines output")
    p.add_argument("--groups", help="group map output (default: groups.json next to --out)")
    p.add_argument("--summary", help="percentile summary output (default: summary.json next to --out)")
    p.add_argument("--no-bucket", action="store_true", help="compare all pairs, ignoring labels")
    add_jobs(p)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("audit", help="count test images with duplicates in training")
    p.add_argument("--manifest", required=True)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--split", help="split TSV to audit")
    mode.add_argument("--against", metavar="MANIFEST", help="audit --manifest (train) against this one (test)")
    p.add_argument("--dropped", help="sidecar of ids removed from the split")
    p.add_argument("--edges", help="precomputed edges (with --groups)")
    p.add_argument("--groups", help="precomputed group map")
    p.add_argument("--threshold", type=_threshold, help="compute the graph at this threshold")
    add_size(p)
    p.add_argument("--no-bucket", action="store_true")
    p.add_argument("--out", help="also write the JSON report here")
    add_jobs(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("split", help="build a duplicate-free split")
    p.add_argument("--strategy", required=True, choices=sorted(STRATEGY_NAMES))
    p.add_argument("--manifest", required=True)
    p.add_argument("--groups", required=True, help="group map from dedup")
    p.add_argument("--edges", help="edges from dedup (recorded for verification)")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True, help="split TSV output")
    p.add_argument("--original", help="original split TSV (filter-test, dup-to-val)")
    p.add_argument("--ratio", type=_ratio, default=(2, 1), metavar="TRAIN:TEST")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--targets", type=_targets, metavar="TRAIN,VAL,TEST", help="exact split sizes")
    p.add_argument("--joint-pools", action="store_true",
                   help="dup-to-val: refill train across subsets instead of per subset")
    p.add_argument("--provenance", help="provenance JSON output")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate synthetic plates")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--templates", required=True, help="template directory")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="template weights, e.g. taiwan=1,mainland=1")
    p.add_argument("--config", help="augmentation config JSON")
    add_jobs(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="augment real images, keeping labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--size", type=_size, default=None, metavar="HxW", help="rectified size for quads")
    p.add_argument("--config", help="augmentation config JSON")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", help="compare recognition rates on original and fair splits")
    p.add_argument("--truth", required=True, help="manifest with ground-truth labels")
    p.add_argument("--split", help="split TSV used for both runs")
    p.add_argument("--split-original")
    p.add_argument("--split-fair")
    p.add_argument("--pred-original", action="append", required=True)
    p.add_argument("--pred-fair", action="append", required=True)
    p.add_argument("--model", action="append")
    p.add_argument("--rel-gap-baseline", choices=metrics.BASELINES, default="original")
    p.add_argument("--json", help="write the table as JSON here")
    p.set_defaults(func=cmd_eval)
    return parser


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command == "audit":
        if args.against and args.threshold is None:
            parser.error("audit --against needs --threshold")
        if args.split and not args.groups and args.threshold is None:
            parser.error("audit --split needs --groups (precomputed) or --threshold")
    elif args.command == "split":
        if args.strategy != "group-atomic-ratio" and not args.original:
            parser.error(f"--strategy {args.strategy} needs --original")
    elif args.command == "eval":
        if not args.split and not (args.split_original and args.split_fair):
            parser.error("eval needs --split or both --split-original and --split-fair")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FairsplitError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"fairsplit {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
