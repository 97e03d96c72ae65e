"""Recognition rate and original-vs-fair split comparison."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from fairsplit.errors import EmptyLabelError, IntegrityError, MetricsError, RelGapUndefined
from fairsplit.manifest import DatasetManifest, normalize_label

BASELINES = ("original", "fair")


@dataclass
class PredictionSet:
    model: str
    predictions: dict[str, str]
    split: str = ""


def normalize_prediction(raw: str) -> str:
    """Like ``normalize_label`` but an empty prediction stays empty (and wrong)."""
    try:
        return normalize_label(raw)
    except EmptyLabelError:
        return ""


def load_predictions(path: str | Path, model: str | None = None, split: str = "") -> PredictionSet:
    """Read a ``<image_id>\\t<predicted_text>`` file; the text may be empty.

    Columns after the second (a confidence score, say) are ignored.
    """
    path = Path(path)
    preds: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        image_id, _, rest = line.partition("\t")
        text = rest.split("\t", 1)[0]
        image_id = image_id.strip()
        if image_id in preds:
            raise IntegrityError(f"{path}:{lineno}: duplicate prediction for {image_id!r}")
        preds[image_id] = normalize_prediction(text)
    return PredictionSet(model or path.stem, preds, split)


def recognition_rate(predictions: PredictionSet, truth: DatasetManifest,
                     test_ids: Iterable[str] | None = None) -> float:
    """Percentage of test plates whose full string is predicted exactly.

    The test set defaults to every record of ``truth``. Missing predictions
    count as errors; predictions for ids outside the test set are ignored.
    """
    ids = list(truth.ids if test_ids is None else test_ids)
    if not ids:
        raise MetricsError("empty test set")
    correct = 0
    for image_id in ids:
        rec = truth.by_id.get(image_id)
        if rec is None or not rec.labeled:
            raise MetricsError(f"test image {image_id!r} has no ground-truth label")
        if predictions.predictions.get(image_id) == rec.label:
            correct += 1
    return 100.0 * correct / len(ids)


def gap_stats(acc_original: float, acc_fair: float, baseline: str = "original") -> tuple[float, float]:
    """Absolute gap in points and the gap relative to the baseline error.

    ``rel_gap = 100 * gap / (100 - acc)`` where ``acc`` is the original-split
    accuracy, or the fair-split one with ``baseline="fair"``.

    Raises:
        RelGapUndefined: when the baseline accuracy is 100 (carries ``gap``).
    """
    for v in (acc_original, acc_fair):
        if not 0.0 <= v <= 100.0:
            raise MetricsError(f"accuracy {v} outside [0, 100]")
    if baseline not in BASELINES:
        raise MetricsError(f"baseline must be one of {BASELINES}")
    gap = acc_original - acc_fair
    acc = acc_original if baseline == "original" else acc_fair
    if acc >= 100.0:
        raise RelGapUndefined(gap)
    return gap, 100.0 * gap / (100.0 - acc)


def extra_errors(acc_original: float, acc_fair: float, test_size: int) -> int:
    """Additional misrecognized plates implied by the gap, rounded half away from zero."""
    if test_size <= 0:
        raise MetricsError("test size must be positive")
    x = test_size * (acc_original - acc_fair) / 100.0
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass
class MetricsRow:
    model: str
    acc_original: float
    acc_fair: float
    gap: float
    rel_gap: float | None
    extra_errors: int
    rank_original: int = 0
    rank_fair: int = 0

    @property
    def rank_change(self) -> bool:
        return self.rank_original != self.rank_fair


@dataclass
class MetricsTable:
    rows: list[MetricsRow]
    test_size_original: int
    test_size_fair: int
    baseline: str = "original"
    average: MetricsRow | None = field(default=None)

    def to_dict(self) -> dict:
        def row_dict(r: MetricsRow) -> dict:
            d = asdict(r)
            for k in ("acc_original", "acc_fair", "gap", "rel_gap"):
                if d[k] is not None:
                    d[k] = round(d[k], 6)
            d["rank_change"] = r.rank_change
            return d

        out = {
            "baseline": self.baseline,
            "test_size_original": self.test_size_original,
            "test_size_fair": self.test_size_fair,
            "rows": [row_dict(r) for r in self.rows],
        }
        if self.average is not None:
            avg = row_dict(self.average)
            for k in ("rank_original", "rank_fair", "rank_change"):
                avg.pop(k)
            out["average"] = avg
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    def to_text(self) -> str:
        header = ("Model", "Original", "Fair", "Gap", "Rel. Gap", "Extra err.", "Rank")
        body = []
        for r in self.rows + ([self.average] if self.average else []):
            rank = ""
            if r is not self.average:
                rank = f"{r.rank_original} -> {r.rank_fair}" + (" *" if r.rank_change else "")
            body.append((
                "Average" if r is self.average else r.model,
                f"{r.acc_original:.2f}%",
                f"{r.acc_fair:.2f}%",
                f"{r.gap:.2f}%",
                "n/a" if r.rel_gap is None else f"{r.rel_gap:.2f}%",
                str(r.extra_errors),
                rank,
            ))
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]

        def fmt(row: Sequence[str]) -> str:
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            return "  ".join(cells).rstrip()

        rule = "-" * len(fmt(header))
        lines = [fmt(header), rule, *(fmt(b) for b in body[: len(self.rows)])]
        if self.average:
            lines += [rule, fmt(body[-1])]
        lines.append(f"test images: original={self.test_size_original} fair={self.test_size_fair}")
        if any(r.rank_change for r in self.rows):
            lines.append("* rank-change between splits")
        return "\n".join(lines) + "\n"


def _row(model: str, acc_o: float, acc_f: float, test_size: int, baseline: str) -> MetricsRow:
    try:
        gap, rel = gap_stats(acc_o, acc_f, baseline)
    except RelGapUndefined as exc:
        gap, rel = exc.gap, None
    return MetricsRow(model, acc_o, acc_f, gap, rel, extra_errors(acc_o, acc_f, test_size))


def compare_runs(
    runs: Sequence[tuple[PredictionSet, PredictionSet]],
    truth: DatasetManifest,
    original_test: Iterable[str] | None = None,
    fair_test: Iterable[str] | None = None,
    baseline: str = "original",
) -> MetricsTable:
    """One row per model plus an average row and per-split rankings.

    Ranks order models by descending accuracy, ties broken by model name.
    Extra errors are scaled by the fair test-set size.
    """
    if not runs:
        raise MetricsError("no runs to compare")
    orig_ids = list(truth.ids if original_test is None else original_test)
    fair_ids = list(truth.ids if fair_test is None else fair_test)
    rows = []
    seen = set()
    for original, fair in runs:
        if original.model != fair.model:
            raise MetricsError(f"run pairs {original.model!r} with {fair.model!r}")
        if original.model in seen:
            raise MetricsError(f"model {original.model!r} listed twice")
        seen.add(original.model)
        acc_o = recognition_rate(original, truth, orig_ids)
        acc_f = recognition_rate(fair, truth, fair_ids)
        rows.append(_row(original.model, acc_o, acc_f, len(fair_ids), baseline))

    for attr, key in (("rank_original", "acc_original"), ("rank_fair", "acc_fair")):
        for rank, r in enumerate(sorted(rows, key=lambda r: (-getattr(r, key), r.model)), start=1):
            setattr(r, attr, rank)
    mean_o = sum(r.acc_original for r in rows) / len(rows)
    mean_f = sum(r.acc_fair for r in rows) / len(rows)
    average = _row("average", mean_o, mean_f, len(fair_ids), baseline)
    return MetricsTable(rows, len(orig_ids), len(fair_ids), baseline, average)
