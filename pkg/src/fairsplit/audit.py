"""Train/test leakage accounting over a duplicate graph.

A test image is leaked when its duplicate group (the transitive closure of
edges, not just direct neighbours) holds at least one training image.
Validation group-mates are counted separately and are not leakage.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator

from fairsplit.dedup import (
    DEFAULT_PERCENTILES,
    DuplicateGraph,
    PercentileRow,
    build_duplicate_graph,
    distance_percentiles,
)
from fairsplit.errors import IntegrityError
from fairsplit.imaging import DEFAULT_CANONICAL_H, DEFAULT_CANONICAL_W, CanonicalImage, ManifestImages
from fairsplit.manifest import TEST, TRAIN, VALIDATION, DatasetManifest, SplitAssignment

MAX_EXEMPLARS = 20


@dataclass
class LeakageReport:
    total_test: int
    leaked_test: int
    leaked_fraction: float
    duplicate_edge_count: int
    unbucketable: int
    percentiles: list[PercentileRow] = field(default_factory=list)
    exemplars: list[dict] = field(default_factory=list)
    validation_linked_test: int = 0
    leaked_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total_test": self.total_test,
            "leaked_test": self.leaked_test,
            "leaked_fraction": self.leaked_fraction,
            "duplicate_edge_count": self.duplicate_edge_count,
            "unbucketable": self.unbucketable,
            "percentiles": [
                {"rank": p.rank, "distance": round(p.distance, 6), "a": p.a, "b": p.b}
                for p in self.percentiles
            ],
            "exemplars": self.exemplars,
            "validation_linked_test": self.validation_linked_test,
        }


def leakage_report(graph: DuplicateGraph, assignment: SplitAssignment,
                   max_exemplars: int = MAX_EXEMPLARS) -> LeakageReport:
    """Count test images whose duplicate group reaches into the training set.

    Ids listed in ``assignment.dropped`` are known but unassigned and are
    skipped.

    Raises:
        IntegrityError: when a graph id is neither assigned nor dropped, or an
            assigned id is absent from the graph.
    """
    split = assignment.assignment
    dropped = set(assignment.dropped)
    for image_id in graph.groups:
        if image_id not in split and image_id not in dropped:
            raise IntegrityError(f"image id {image_id!r} is missing from the split assignment")
    for image_id in split:
        if image_id not in graph.groups:
            raise IntegrityError(f"split id {image_id!r} is not part of the duplicate graph")

    has_train: set[str] = set()
    has_val: set[str] = set()
    for image_id, gid in graph.groups.items():
        s = split.get(image_id)
        if s == TRAIN:
            has_train.add(gid)
        elif s == VALIDATION:
            has_val.add(gid)

    total_test = 0
    leaked = []
    val_linked = 0
    for image_id in sorted(split):
        if split[image_id] != TEST:
            continue
        total_test += 1
        gid = graph.groups[image_id]
        if gid in has_train:
            leaked.append(image_id)
        elif gid in has_val:
            val_linked += 1

    cross = []
    for e in graph.edges:
        sa, sb = split.get(e.a), split.get(e.b)
        if {sa, sb} == {TRAIN, TEST}:
            test_id, train_id = (e.a, e.b) if sa == TEST else (e.b, e.a)
            cross.append((e.distance, test_id, train_id))
    cross.sort()
    exemplars = [
        {"test": t, "train": tr, "distance": round(d, 6)} for d, t, tr in cross[:max_exemplars]
    ]
    percentiles = distance_percentiles(graph, DEFAULT_PERCENTILES) if graph.edges else []
    return LeakageReport(
        total_test=total_test,
        leaked_test=len(leaked),
        leaked_fraction=len(leaked) / total_test if total_test else 0.0,
        duplicate_edge_count=len(cross),
        unbucketable=len(graph.unbucketable),
        percentiles=percentiles,
        exemplars=exemplars,
        validation_linked_test=val_linked,
        leaked_ids=leaked,
    )


class _NamespacedImages(Mapping):
    """Routes ``<prefix>:<id>`` lookups to per-manifest image mappings."""

    def __init__(self, sources: dict[str, Mapping[str, CanonicalImage]]) -> None:
        self.sources = sources

    def _split(self, key: str) -> tuple[Mapping, str]:
        for prefix, source in self.sources.items():
            if key.startswith(prefix + ":"):
                return source, key[len(prefix) + 1:]
        raise KeyError(key)

    def __getitem__(self, key: str) -> CanonicalImage:
        source, rest = self._split(key)
        return source[rest]

    def __contains__(self, key: object) -> bool:
        try:
            source, rest = self._split(key)  # type: ignore[arg-type]
        except KeyError:
            return False
        return rest in source

    def __iter__(self) -> Iterator[str]:
        for prefix, source in self.sources.items():
            for k in source:
                yield f"{prefix}:{k}"

    def __len__(self) -> int:
        return sum(len(s) for s in self.sources.values())


def cross_manifest_audit(
    manifest_a: DatasetManifest,
    manifest_b: DatasetManifest,
    threshold: float,
    *,
    images_a: Mapping[str, CanonicalImage] | None = None,
    images_b: Mapping[str, CanonicalImage] | None = None,
    size: tuple[int, int] = (DEFAULT_CANONICAL_H, DEFAULT_CANONICAL_W),
    bucket: bool = True,
    jobs: int = 1,
) -> tuple[LeakageReport, DuplicateGraph]:
    """Find images of ``manifest_b`` with duplicates in ``manifest_a``.

    All of A plays the training role and all of B the test role. Ids are
    namespaced as ``<manifest name>:<id>`` in the joint graph. Images default
    to the manifests' files canonicalized at ``size`` (height, width).
    """
    if manifest_a.name == manifest_b.name:
        raise IntegrityError(
            f"both manifests are named {manifest_a.name!r}; ids would collide after namespacing"
        )
    ns_a, ns_b = manifest_a.namespaced(), manifest_b.namespaced()
    joint = DatasetManifest(ns_a.records + ns_b.records, name=f"{ns_a.name}+{ns_b.name}")
    h, w = size
    images = _NamespacedImages({
        manifest_a.name: images_a if images_a is not None else ManifestImages(manifest_a, w, h),
        manifest_b.name: images_b if images_b is not None else ManifestImages(manifest_b, w, h),
    })
    graph = build_duplicate_graph(joint, images, threshold, bucket=bucket, jobs=jobs)
    split = {r.id: TRAIN for r in ns_a.records}
    split.update({r.id: TEST for r in ns_b.records})
    report = leakage_report(graph, SplitAssignment(split, strategy="cross-manifest"))
    return report, graph
