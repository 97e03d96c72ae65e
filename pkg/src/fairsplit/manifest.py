"""Dataset manifests, split files and plate-label normalization.

A manifest is a UTF-8 CSV with the header::

    id,path,label,subset,x1,y1,x2,y2,x3,y3,x4,y4

The quad columns hold the plate corners (top-left, top-right, bottom-right,
bottom-left) in image-plane coordinates and may all be left empty. An empty
label cell marks the record as unlabeled.

A split file is a TSV with one ``<id>\\t<split>`` line per image, sorted by id.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from fairsplit.errors import EmptyLabelError, IntegrityError, ManifestParseError

MANIFEST_HEADER = ("id", "path", "label", "subset", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4")

TRAIN = "train"
VALIDATION = "validation"
TEST = "test"
SPLITS = (TRAIN, VALIDATION, TEST)

_STRIP_CHARS = frozenset("-.")


def normalize_label(raw: str) -> str:
    """Canonicalize a plate string for exact matching.

    ASCII letters are uppercased; whitespace, hyphens and dots are removed.
    Everything else (digits, CJK province glyphs, ...) is kept verbatim. No
    confusable folding is done, so ``O`` and ``0`` stay distinct.

    Raises:
        EmptyLabelError: if nothing is left after stripping.
    """
    out = []
    for ch in raw:
        if ch.isspace() or ch in _STRIP_CHARS:
            continue
        if "a" <= ch <= "z":
            ch = ch.upper()
        out.append(ch)
    label = "".join(out)
    if not label:
        raise EmptyLabelError(f"label {raw!r} is empty after normalization")
    return label


@dataclass(frozen=True)
class QuadAnnotation:
    """Four plate corners ordered top-left, top-right, bottom-right, bottom-left.

    Coordinates are continuous: pixel ``(row, col)`` covers ``[col, col+1) x
    [row, row+1)``, so a quad equal to a pixel-aligned rectangle selects exactly
    the pixels inside it.
    """

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) != 4:
            raise ValueError(f"quad needs exactly 4 points, got {len(pts)}")
        for x, y in pts:
            if not (math.isfinite(x) and math.isfinite(y)) or x < 0 or y < 0:
                raise ValueError(f"quad point ({x}, {y}) must be finite and non-negative")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_flat(cls, coords: Iterable[float]) -> "QuadAnnotation":
        c = list(coords)
        return cls(tuple((c[i], c[i + 1]) for i in range(0, len(c), 2)))

    def flat(self) -> tuple[float, ...]:
        return tuple(v for p in self.points for v in p)

    def signed_area(self) -> float:
        """Shoelace area; positive for clockwise order in image coordinates."""
        total = 0.0
        for i in range(4):
            x0, y0 = self.points[i]
            x1, y1 = self.points[(i + 1) % 4]
            total += x0 * y1 - x1 * y0
        return total / 2.0

    def is_simple(self) -> bool:
        """True when no two opposite edges cross and no three corners are collinear."""
        p = self.points

        def cross(o, a, b):
            return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

        for i in range(4):
            if cross(p[i], p[(i + 1) % 4], p[(i + 2) % 4]) == 0:
                return False

        def segments_cross(a, b, c, d):
            d1, d2 = cross(c, d, a), cross(c, d, b)
            d3, d4 = cross(a, b, c), cross(a, b, d)
            return (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0)

        return not (segments_cross(p[0], p[1], p[2], p[3]) or segments_cross(p[1], p[2], p[3], p[0]))


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    label: str
    subset: str = ""
    quad: QuadAnnotation | None = None

    @property
    def labeled(self) -> bool:
        return bool(self.label)


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered image records; ids are unique.

    ``root`` is the directory relative image paths are resolved against. It
    does not take part in equality.
    """

    records: tuple[ImageRecord, ...]
    name: str = "manifest"
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise IntegrityError(f"duplicate image id {rec.id!r} in manifest {self.name!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    def __contains__(self, image_id: object) -> bool:
        return image_id in self.by_id

    def __getitem__(self, image_id: str) -> ImageRecord:
        return self.by_id[image_id]

    @cached_property
    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.records}

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def resolve(self, record: ImageRecord) -> Path:
        path = Path(record.path)
        if not path.is_absolute() and self.root is not None:
            path = self.root / path
        return path

    def namespaced(self, prefix: str | None = None) -> "DatasetManifest":
        """Copy with every id rewritten to ``<prefix>:<id>`` (prefix defaults to the name)."""
        prefix = self.name if prefix is None else prefix
        recs = []
        for r in self.records:
            path = str(self.resolve(r))
            recs.append(ImageRecord(f"{prefix}:{r.id}", path, r.label, r.subset, r.quad))
        return DatasetManifest(tuple(recs), name=prefix, root=self.root)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ManifestParseError(f"non-numeric quad coordinate {column}={text!r}", line) from None
    return value


def load_manifest(path: str | Path, name: str | None = None) -> DatasetManifest:
    """Parse a manifest CSV, normalizing labels and preserving row order.

    Raises:
        ManifestParseError: on a bad header, wrong column count, partial or
            non-numeric quad, or a label that normalizes to nothing.
        IntegrityError: when an id occurs twice.
    """
    path = Path(path)
    records: list[ImageRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ManifestParseError("empty manifest (missing header)", 1)
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        if tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise ManifestParseError(f"unexpected header {header!r}", 1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestParseError(
                    f"expected {len(MANIFEST_HEADER)} columns, got {len(row)}", line
                )
            image_id, img_path, raw_label, subset = (c.strip() for c in row[:4])
            if not image_id:
                raise ManifestParseError("empty id", line)
            if image_id in seen:
                raise IntegrityError(
                    f"duplicate image id {image_id!r} (lines {seen[image_id]} and {line})"
                )
            seen[image_id] = line
            label = ""
            if raw_label.strip():
                try:
                    label = normalize_label(raw_label)
                except EmptyLabelError as exc:
                    raise ManifestParseError(str(exc), line) from None
            quad_cells = [c.strip() for c in row[4:]]
            quad = None
            if any(quad_cells):
                if not all(quad_cells):
                    raise ManifestParseError("quad columns must be all empty or all filled", line)
                coords = [_parse_float(c, line, MANIFEST_HEADER[4 + i]) for i, c in enumerate(quad_cells)]
                try:
                    quad = QuadAnnotation.from_flat(coords)
                except ValueError as exc:
                    raise ManifestParseError(str(exc), line) from None
            records.append(ImageRecord(image_id, img_path, label, subset, quad))
    return DatasetManifest(tuple(records), name=name or path.stem, root=path.parent)


def _fmt_coord(v: float) -> str:
    return repr(float(v))


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    rows = manifest_rows(manifest.records)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)


def manifest_rows(records: Iterable[ImageRecord]) -> list[list[str]]:
    rows = []
    for r in records:
        quad = [_fmt_coord(v) for v in r.quad.flat()] if r.quad else [""] * 8
        rows.append([r.id, r.path, r.label, r.subset, *quad])
    return rows


@dataclass
class SplitAssignment:
    """Image id to split mapping.

    ``dropped`` lists ids deliberately removed from the split (e.g. leaked
    test images), so they are known to the split without being assigned.
    ``provenance`` carries the strategy report and is excluded from equality.
    """

    assignment: dict[str, str]
    strategy: str = "original"
    seed: int = 0
    dropped: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        for image_id, split in self.assignment.items():
            if split not in SPLITS:
                raise IntegrityError(f"image {image_id!r} has unknown split {split!r}")
        overlap = set(self.dropped) & self.assignment.keys()
        if overlap:
            raise IntegrityError(f"ids both assigned and dropped: {sorted(overlap)[:5]}")
        self.dropped = tuple(sorted(self.dropped))

    def __len__(self) -> int:
        return len(self.assignment)

    def ids_in(self, split: str) -> list[str]:
        return sorted(i for i, s in self.assignment.items() if s == split)

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in SPLITS}
        for s in self.assignment.values():
            out[s] += 1
        return out

    def check_against(self, manifest: DatasetManifest | Mapping[str, object]) -> None:
        known = manifest.by_id if isinstance(manifest, DatasetManifest) else manifest
        for image_id in list(self.assignment) + list(self.dropped):
            if image_id not in known:
                raise IntegrityError(f"split references unknown image id {image_id!r}")


def format_split(assignment: Mapping[str, str]) -> str:
    return "".join(f"{i}\t{assignment[i]}\n" for i in sorted(assignment))


def write_split(assignment: SplitAssignment | Mapping[str, str], path: str | Path) -> None:
    """Write ``<id>\\t<split>`` lines sorted by id; output is byte-deterministic."""
    mapping = assignment.assignment if isinstance(assignment, SplitAssignment) else assignment
    Path(path).write_bytes(format_split(mapping).encode("utf-8"))


def read_split(path: str | Path, strategy: str = "original", seed: int = 0) -> SplitAssignment:
    assignment: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ManifestParseError(f"expected '<id>\\t<split>', got {line!r}", lineno)
        image_id, split = parts[0].strip(), parts[1].strip()
        if split not in SPLITS:
            raise ManifestParseError(f"unknown split {split!r}", lineno)
        if image_id in assignment:
            raise IntegrityError(f"image id {image_id!r} assigned twice (line {lineno})")
        assignment[image_id] = split
    return SplitAssignment(assignment, strategy=strategy, seed=seed)
