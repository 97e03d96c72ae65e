"""Duplicate-free split construction.

Three strategies, each keeping duplicate groups away from the train/test
boundary:

``group_atomic_ratio``
    Re-split the whole dataset at a train:test ratio with whole groups, then
    carve a validation fraction out of the training pool.
``filter_test``
    Keep training and validation untouched and drop every test image whose
    group reaches into them.
``dup_to_validation``
    Keep the test set untouched, move training images with test group-mates
    into validation and refill the training set from clean validation images.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

from fairsplit.dedup import DuplicateGraph
from fairsplit.errors import IntegrityError, SplitSpecError
from fairsplit.manifest import SPLITS, TEST, TRAIN, VALIDATION, DatasetManifest, SplitAssignment
from fairsplit.rng import ALGORITHM, Xoshiro256

GROUP_ATOMIC_RATIO = "group_atomic_ratio"
FILTER_TEST = "filter_test"
DUP_TO_VALIDATION = "dup_to_validation"
STRATEGIES = (GROUP_ATOMIC_RATIO, FILTER_TEST, DUP_TO_VALIDATION)


@dataclass(frozen=True)
class SplitSpec:
    """Sizing and seeding for a split strategy.

    ``target_counts`` (exact per-split sizes summing to the dataset size)
    overrides the ratio sizing when given. ``per_subset`` makes
    ``dup_to_validation`` refill the training set within each manifest subset
    separately.
    """

    strategy: str = GROUP_ATOMIC_RATIO
    train_ratio: int = 2
    test_ratio: int = 1
    val_fraction: float = 0.2
    target_counts: Mapping[str, int] | None = None
    seed: int = 0
    per_subset: bool = True

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise SplitSpecError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.train_ratio <= 0 or self.test_ratio <= 0:
            raise SplitSpecError("train and test ratios must be positive integers")
        if not 0.0 <= self.val_fraction < 1.0:
            raise SplitSpecError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")
        if self.seed < 0:
            raise SplitSpecError("seed must be unsigned")
        if self.target_counts is not None:
            unknown = set(self.target_counts) - set(SPLITS)
            if unknown:
                raise SplitSpecError(f"unknown split names in target_counts: {sorted(unknown)}")
            if any(v < 0 for v in self.target_counts.values()):
                raise SplitSpecError("target counts must be non-negative")


class SplitVerdict(NamedTuple):
    passed: bool
    violations: list[tuple[str, str, str]]


def _groups(manifest: DatasetManifest, graph: DuplicateGraph) -> list[list[str]]:
    by_gid: dict[str, list[str]] = {}
    for image_id in manifest.ids:
        gid = graph.groups.get(image_id)
        if gid is None:
            raise IntegrityError(f"image id {image_id!r} has no duplicate group")
        by_gid.setdefault(gid, []).append(image_id)
    return [sorted(by_gid[g]) for g in sorted(by_gid)]


def _targets(n: int, spec: SplitSpec) -> dict[str, int]:
    if spec.target_counts is not None:
        t = {s: int(spec.target_counts.get(s, 0)) for s in SPLITS}
        if sum(t.values()) != n:
            raise SplitSpecError(f"target counts {t} sum to {sum(t.values())}, dataset has {n} images")
        return t
    test = n * spec.test_ratio // (spec.train_ratio + spec.test_ratio)
    val = math.floor(Fraction(repr(spec.val_fraction)) * (n - test))
    return {TRAIN: n - test - val, VALIDATION: val, TEST: test}


def _exchanges(rest_sizes: list[int], chosen_sizes: list[int]):
    """Candidate (incoming sizes, outgoing sizes) exchanges of up to two groups each way."""
    def combos(avail: list[int]):
        yield ()
        for i, a in enumerate(avail):
            yield (a,)
            for b in avail[i:]:
                yield (a, b)

    for inc in combos(rest_sizes):
        if inc:
            for out in combos(chosen_sizes):
                yield inc, out


def _fill(order: Sequence[list[str]], target: int) -> tuple[list[list[str]], list[list[str]]]:
    """Pick whole groups summing as close to ``target`` as possible without exceeding it.

    Greedy first fit in ``order``, then repeated exchanges of up to two groups
    in each direction, taking the largest gain that still fits, until no
    exchange helps.
    """
    chosen: dict[int, list[list[str]]] = {}
    rest: dict[int, list[list[str]]] = {}
    count = 0
    for g in order:
        if count + len(g) <= target:
            chosen.setdefault(len(g), []).append(g)
            count += len(g)
        else:
            rest.setdefault(len(g), []).append(g)

    def available(d: dict[int, list[list[str]]]) -> list[int]:
        # each size listed at most twice: enough for two-group exchanges
        return [s for s in sorted(d) for _ in range(min(2, len(d[s])))]

    while count < target:
        deficit = target - count
        best = None  # (gain, -groups moved, incoming, outgoing)
        rest_sizes, chosen_sizes = available(rest), available(chosen)
        for inc, out in _exchanges(rest_sizes, chosen_sizes):
            if any(inc.count(x) > rest_sizes.count(x) for x in inc):
                continue
            if any(out.count(x) > chosen_sizes.count(x) for x in out):
                continue
            gain = sum(inc) - sum(out)
            if not 0 < gain <= deficit:
                continue
            key = (gain, -(len(inc) + len(out)))
            if best is None or key > best[:2]:
                best = (*key, inc, out)
        if best is None:
            break
        gain, _, inc, out = best
        for size in inc:
            chosen.setdefault(size, []).append(rest[size].pop(0))
        for size in out:
            rest.setdefault(size, []).append(chosen[size].pop(0))
        count += gain

    flat = lambda d: [g for size in sorted(d) for g in d[size]]  # noqa: E731
    return flat(chosen), flat(rest)


def _oversized(groups: Sequence[list[str]], target: int, where: str) -> list[str]:
    if target <= 0:
        return []
    return [
        f"group {g[0]!r} ({len(g)} images) exceeds the {where} target of {target}; kept in train"
        for g in groups
        if len(g) > target
    ]


def split_group_atomic_ratio(manifest: DatasetManifest, graph: DuplicateGraph,
                             spec: SplitSpec) -> SplitAssignment:
    """Re-split a dataset with whole duplicate groups.

    Groups are shuffled with the seeded generator; whole groups fill the test
    target (``floor(N * test / (train + test))``), then the validation target
    (``floor(val_fraction * (N - test target))``) is carved from the rest.
    Shortfalls stay in train.
    """
    if spec.strategy != GROUP_ATOMIC_RATIO:
        raise SplitSpecError(f"spec strategy is {spec.strategy!r}, expected {GROUP_ATOMIC_RATIO!r}")
    groups = _groups(manifest, graph)
    n = sum(len(g) for g in groups)
    targets = _targets(n, spec)

    rng = Xoshiro256(spec.seed)
    order = list(groups)
    rng.shuffle(order)

    notes = _oversized(order, targets[TEST], TEST)
    test_groups, pool = _fill(order, targets[TEST])
    pool_order = _reorder(order, pool)
    notes += _oversized(pool_order, targets[VALIDATION], VALIDATION)
    val_groups, train_groups = _fill(pool_order, targets[VALIDATION])

    assignment: dict[str, str] = {}
    for split, gs in ((TEST, test_groups), (VALIDATION, val_groups), (TRAIN, train_groups)):
        for g in gs:
            for image_id in g:
                assignment[image_id] = split
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    result = SplitAssignment(assignment, strategy=GROUP_ATOMIC_RATIO, seed=spec.seed)
    result.provenance = _provenance(result, graph, targets=targets, warnings=notes)
    return result


def _reorder(order: Sequence[list[str]], subset: Sequence[list[str]]) -> list[list[str]]:
    """``subset`` arranged in the order its groups appear in ``order``."""
    keys = {g[0] for g in subset}
    return [g for g in order if g[0] in keys]


def filter_test_duplicates(manifest: DatasetManifest, graph: DuplicateGraph,
                           original: SplitAssignment) -> SplitAssignment:
    """Drop test images whose group holds a training or validation image.

    Training and validation assignments are copied unchanged; dropped ids are
    recorded in ``dropped``.
    """
    original.check_against(manifest)
    split = original.assignment
    tainted = {graph.groups.get(i, i) for i, s in split.items() if s in (TRAIN, VALIDATION)}
    kept: dict[str, str] = {}
    dropped = []
    for image_id, s in split.items():
        if s == TEST and graph.groups.get(image_id, image_id) in tainted:
            dropped.append(image_id)
        else:
            kept[image_id] = s
    result = SplitAssignment(kept, strategy=FILTER_TEST, seed=original.seed,
                             dropped=tuple(original.dropped) + tuple(dropped))
    result.provenance = _provenance(
        result, graph,
        original_counts=original.counts(),
        dropped_test=len(dropped),
    )
    return result


def reallocate_duplicates_to_validation(manifest: DatasetManifest, graph: DuplicateGraph,
                                        original: SplitAssignment, spec: SplitSpec) -> SplitAssignment:
    """Move training images with test group-mates to validation, then refill train.

    The test set is untouched. For every image moved out, one validation image
    whose group has no test member is moved into train (seeded choice), within
    the same subset when ``spec.per_subset`` is set. A shortfall is reported
    as a deficit rather than raised.
    """
    if spec.strategy != DUP_TO_VALIDATION:
        raise SplitSpecError(f"spec strategy is {spec.strategy!r}, expected {DUP_TO_VALIDATION!r}")
    original.check_against(manifest)
    split = dict(original.assignment)
    gid = lambda i: graph.groups.get(i, i)  # noqa: E731
    test_groups = {gid(i) for i, s in split.items() if s == TEST}

    def pool_of(image_id: str) -> str:
        return manifest.by_id[image_id].subset if spec.per_subset else ""

    moved: dict[str, list[str]] = {}
    for image_id in sorted(split):
        if split[image_id] == TRAIN and gid(image_id) in test_groups:
            moved.setdefault(pool_of(image_id), []).append(image_id)

    rng = Xoshiro256(spec.seed)
    per_pool = {}
    notes: list[str] = []
    for pool in sorted(moved):
        out = moved[pool]
        candidates = sorted(
            i for i, s in split.items()
            if s == VALIDATION and pool_of(i) == pool and gid(i) not in test_groups
        )
        rng.shuffle(candidates)
        back = candidates[: len(out)]
        for i in out:
            split[i] = VALIDATION
        for i in back:
            split[i] = TRAIN
        per_pool[pool] = {"moved_to_validation": len(out), "restored_to_train": len(back),
                          "deficit": len(out) - len(back)}
        if len(back) < len(out):
            msg = (f"subset {pool!r}: only {len(back)} clean validation images to replace "
                   f"{len(out)} moved training images")
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)

    result = SplitAssignment(split, strategy=DUP_TO_VALIDATION, seed=spec.seed,
                             dropped=original.dropped)
    result.provenance = _provenance(
        result, graph,
        original_counts=original.counts(),
        pools=per_pool,
        deficit=sum(p["deficit"] for p in per_pool.values()),
        warnings=notes,
    )
    return result


def apply_strategy(manifest: DatasetManifest, graph: DuplicateGraph, spec: SplitSpec,
                   original: SplitAssignment | None = None) -> SplitAssignment:
    if spec.strategy == GROUP_ATOMIC_RATIO:
        return split_group_atomic_ratio(manifest, graph, spec)
    if original is None:
        raise SplitSpecError(f"strategy {spec.strategy!r} needs the original split")
    if spec.strategy == FILTER_TEST:
        return filter_test_duplicates(manifest, graph, original)
    return reallocate_duplicates_to_validation(manifest, graph, original, spec)


def verify_split(graph: DuplicateGraph, assignment: SplitAssignment) -> SplitVerdict:
    """Pass iff no test image shares a duplicate group with a training image.

    Violations are ``(test_id, train_id, group_id)`` triples, sorted.
    """
    train_by_group: dict[str, list[str]] = {}
    test_by_group: dict[str, list[str]] = {}
    for image_id, s in assignment.assignment.items():
        g = graph.groups.get(image_id, image_id)
        if s == TRAIN:
            train_by_group.setdefault(g, []).append(image_id)
        elif s == TEST:
            test_by_group.setdefault(g, []).append(image_id)
    violations = [
        (t, tr, g)
        for g in test_by_group.keys() & train_by_group.keys()
        for t in test_by_group[g]
        for tr in train_by_group[g]
    ]
    violations.sort()
    return SplitVerdict(not violations, violations)


def _provenance(result: SplitAssignment, graph: DuplicateGraph, targets: dict | None = None,
                **extra) -> dict:
    counts = result.counts()
    prov: dict = {
        "strategy": result.strategy,
        "seed": result.seed,
        "rng": ALGORITHM,
        "threshold": graph.threshold,
        "achieved": counts,
    }
    if targets is not None:
        prov["targets"] = dict(targets)
        prov["deviation"] = {s: counts[s] - targets[s] for s in SPLITS}
    prov["dropped"] = len(result.dropped)
    prov.update(extra)
    prov.setdefault("warnings", [])
    prov["verified"] = verify_split(graph, result).passed
    return prov
