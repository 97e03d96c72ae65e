"""Near-duplicate detection by pixel distance inside plate-label buckets.

Only images sharing the exact normalized label are compared. Pairs whose
RMS pixel distance is at most the threshold become edges, and connected
components of the edge graph are the duplicate groups.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from fairsplit.errors import DedupError
from fairsplit.imaging import CanonicalImage
from fairsplit.manifest import DatasetManifest
from fairsplit.unionfind import UnionFind

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.12
DEFAULT_PERCENTILES = (10.0, 50.0, 90.0)


@dataclass(frozen=True, order=True)
class DuplicateEdge:
    a: str
    b: str
    distance: float

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"edge ids must satisfy a < b, got ({self.a!r}, {self.b!r})")
        if not math.isfinite(self.distance) or self.distance < 0:
            raise ValueError(f"invalid edge distance {self.distance!r}")


@dataclass
class DuplicateGraph:
    """Thresholded duplicate edges and the group id of every image.

    Group ids are the lexicographically smallest member id. ``unbucketable``
    lists unlabeled records that were never compared.
    """

    edges: list[DuplicateEdge]
    groups: dict[str, str]
    threshold: float
    unbucketable: tuple[str, ...] = field(default=())

    def members(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for image_id in sorted(self.groups):
            out.setdefault(self.groups[image_id], []).append(image_id)
        return out

    def partition(self) -> set[frozenset[str]]:
        return {frozenset(m) for m in self.members().values()}

    def max_group_size(self) -> int:
        return max((len(m) for m in self.members().values()), default=0)


class PercentileRow(NamedTuple):
    rank: float
    distance: float
    a: str
    b: str


def label_buckets(manifest: DatasetManifest, bucket: bool = True) -> tuple[list[list[str]], list[str]]:
    """Group record ids by label.

    Returns ``(buckets, unbucketable)``; each bucket is sorted so that pairs
    taken in index order are canonically oriented. With ``bucket=False``
    every record, labeled or not, lands in one bucket.
    """
    if not bucket:
        ids = sorted(manifest.ids)
        return ([ids] if ids else []), []
    by_label: dict[str, list[str]] = {}
    unbucketable = []
    for rec in manifest:
        if rec.labeled:
            by_label.setdefault(rec.label, []).append(rec.id)
        else:
            unbucketable.append(rec.id)
    buckets = [sorted(by_label[label]) for label in sorted(by_label)]
    return buckets, sorted(unbucketable)


def candidate_pairs(manifest: DatasetManifest, bucket: bool = True) -> list[tuple[str, str]]:
    """Every unordered same-label pair, oriented ``(a, b)`` with ``a < b``."""
    buckets, _ = label_buckets(manifest, bucket)
    return [pair for ids in buckets for pair in combinations(ids, 2)]


def _row_distances(x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    diff = rows.astype(np.float64) - x.astype(np.float64)
    return np.sqrt(np.sum(diff * diff, axis=1) / x.size)


def pixel_distance(x: CanonicalImage, y: CanonicalImage) -> float:
    """RMS-normalized Euclidean distance, in [0, 1] for unit-range images."""
    if (x.width, x.height) != (y.width, y.height):
        raise DedupError(f"dimension mismatch: {x.width}x{x.height} vs {y.width}x{y.height}")
    return float(_row_distances(x.pixels, y.pixels[None, :])[0])


def bucket_edges(ids: Sequence[str], images: Sequence[CanonicalImage], threshold: float) -> list[DuplicateEdge]:
    """All edges within one bucket; ``ids`` must be sorted."""
    if len(ids) < 2:
        return []
    shape = (images[0].width, images[0].height)
    for image_id, img in zip(ids, images):
        if (img.width, img.height) != shape:
            raise DedupError(f"image {image_id!r} is {img.width}x{img.height}, expected {shape[0]}x{shape[1]}")
    stack = np.stack([img.pixels for img in images])
    edges = []
    for i in range(len(ids) - 1):
        dists = _row_distances(stack[i], stack[i + 1:])
        for j in np.flatnonzero(dists <= threshold):
            edges.append(DuplicateEdge(ids[i], ids[i + 1 + j], float(dists[j])))
    return edges


def _check_threshold(threshold: float) -> float:
    threshold = float(threshold)
    if not 0.0 <= threshold <= 1.0:
        raise DedupError(f"threshold must lie in [0, 1], got {threshold}")
    return threshold


def group_ids(ids: Iterable[str], edges: Iterable[DuplicateEdge]) -> dict[str, str]:
    uf = UnionFind(ids)
    for e in edges:
        uf.union(e.a, e.b)
    groups: dict[str, str] = {}
    for members in uf.groups().values():
        gid = min(members)
        for m in members:
            groups[m] = gid
    return groups


def build_duplicate_graph(
    manifest: DatasetManifest,
    images: Mapping[str, CanonicalImage],
    threshold: float = DEFAULT_THRESHOLD,
    *,
    bucket: bool = True,
    jobs: int = 1,
) -> DuplicateGraph:
    """Compare every candidate pair and group images through thresholded edges.

    ``images`` is only read one bucket at a time, so a lazy mapping keeps
    memory proportional to the largest bucket. Buckets are independent and
    are spread over ``jobs`` threads; the result does not depend on ``jobs``.

    Raises:
        DedupError: if the threshold is outside [0, 1] or an image is missing.
    """
    threshold = _check_threshold(threshold)
    buckets, unbucketable = label_buckets(manifest, bucket)
    work = [ids for ids in buckets if len(ids) > 1]
    for ids in work:
        for image_id in ids:
            if image_id not in images:
                raise DedupError(f"no canonical image for id {image_id!r}")

    def run(ids: list[str]) -> list[DuplicateEdge]:
        return bucket_edges(ids, [images[i] for i in ids], threshold)

    edges: list[DuplicateEdge] = []
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(run, work, chunksize=64):
                edges.extend(part)
    else:
        for ids in work:
            edges.extend(run(ids))
    edges.sort(key=lambda e: (e.a, e.b))
    logger.info("%d candidate buckets, %d edges at threshold %.4f", len(work), len(edges), threshold)
    return DuplicateGraph(edges, group_ids(manifest.ids, edges), threshold, tuple(unbucketable))


def distance_percentiles(graph: DuplicateGraph, qs: Iterable[float] = DEFAULT_PERCENTILES) -> list[PercentileRow]:
    """Nearest-rank percentiles of edge distances with an exemplar pair each.

    Rank ``q`` picks index ``ceil(q / 100 * (E - 1))`` of the ascending
    distances (ties ordered by pair).
    """
    if not graph.edges:
        raise DedupError("no duplicate edges to summarize")
    ordered = sorted(graph.edges, key=lambda e: (e.distance, e.a, e.b))
    last = len(ordered) - 1
    out = []
    for q in qs:
        if not 0 <= q <= 100:
            raise DedupError(f"percentile rank must lie in [0, 100], got {q}")
        idx = math.ceil(Fraction(q) * last / 100)
        e = ordered[idx]
        out.append(PercentileRow(float(q), e.distance, e.a, e.b))
    return out


def edge_line(edge: DuplicateEdge) -> str:
    a = json.dumps(edge.a, ensure_ascii=False)
    b = json.dumps(edge.b, ensure_ascii=False)
    return f'{{"a":{a},"b":{b},"distance":{edge.distance:.6f}}}\n'


def write_edges(edges: Iterable[DuplicateEdge], path: str | Path) -> None:
    """JSON Lines, one edge per line, sorted by ``(a, b)``."""
    text = "".join(edge_line(e) for e in sorted(edges, key=lambda e: (e.a, e.b)))
    Path(path).write_bytes(text.encode("utf-8"))


def read_edges(path: str | Path) -> list[DuplicateEdge]:
    edges = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            edges.append(DuplicateEdge(str(obj["a"]), str(obj["b"]), float(obj["distance"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise DedupError(f"{path}:{lineno}: bad edge record: {exc}") from None
    return edges


def dumps_json(obj: object) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def write_groups(graph: DuplicateGraph, path: str | Path) -> None:
    payload = {
        "threshold": graph.threshold,
        "unbucketable": list(graph.unbucketable),
        "groups": {k: graph.groups[k] for k in sorted(graph.groups)},
    }
    Path(path).write_bytes(dumps_json(payload).encode("utf-8"))


def read_graph(edges_path: str | Path | None, groups_path: str | Path) -> DuplicateGraph:
    """Rebuild a graph from dedup outputs; without an edge file the graph has groups only."""
    try:
        payload = json.loads(Path(groups_path).read_text(encoding="utf-8"))
        groups = {str(k): str(v) for k, v in payload["groups"].items()}
        threshold = float(payload["threshold"])
        unbucketable = tuple(payload.get("unbucketable", ()))
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise DedupError(f"{groups_path}: malformed group file: {exc}") from None
    edges = read_edges(edges_path) if edges_path is not None else []
    for e in edges:
        if e.a not in groups or e.b not in groups:
            raise DedupError(f"edge ({e.a}, {e.b}) references ids missing from {groups_path}")
    return DuplicateGraph(edges, groups, threshold, unbucketable)


def summary(graph: DuplicateGraph, unrectified: Sequence[str] = (),
            qs: Iterable[float] = DEFAULT_PERCENTILES) -> dict:
    members = graph.members()
    rows = distance_percentiles(graph, qs) if graph.edges else []
    return {
        "threshold": graph.threshold,
        "images": len(graph.groups),
        "edges": len(graph.edges),
        "groups": len(members),
        "multi_member_groups": sum(1 for m in members.values() if len(m) > 1),
        "max_group_size": max((len(m) for m in members.values()), default=0),
        "unbucketable": len(graph.unbucketable),
        "unrectified": len(unrectified),
        "percentiles": [
            {"rank": r.rank, "distance": round(r.distance, 6), "a": r.a, "b": r.b} for r in rows
        ],
    }
