"""Fixture builders shared by the test modules."""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from fairsplit.imaging import CanonicalImage
from fairsplit.manifest import TEST, TRAIN, VALIDATION, DatasetManifest, ImageRecord, SplitAssignment

SMALL_W, SMALL_H = 24, 12

# criterion number -> (passed, detail), filled by test_acceptance and printed
# in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


def canon(values, width: int | None = None, height: int = 1) -> CanonicalImage:
    arr = np.asarray(values, dtype=np.float32).reshape(-1)
    return CanonicalImage(width or arr.size // height, height, arr)


def random_label(rng: np.random.Generator, length: int = 6) -> str:
    alphabet = string.ascii_uppercase + string.digits
    return "".join(alphabet[i] for i in rng.integers(len(alphabet), size=length))


def group_images(rng: np.random.Generator, size: int, jitter: float = 0.01,
                 w: int = SMALL_W, h: int = SMALL_H) -> list[CanonicalImage]:
    """``size`` near-identical images: a random base plus small noise."""
    base = rng.random(w * h)
    out = []
    for _ in range(size):
        px = np.clip(base + rng.normal(0.0, jitter, w * h), 0.0, 1.0)
        out.append(CanonicalImage(w, h, px))
    return out


@dataclass
class PlantedFixture:
    manifest: DatasetManifest
    images: dict[str, CanonicalImage]
    original: SplitAssignment
    planted_groups: list[list[str]]


def build_planted(layout: list[tuple[int, tuple[str, ...]]], seed: int, decoys: int = 0,
                  name: str = "fixture") -> PlantedFixture:
    """Dataset whose duplicate groups and original split are fixed by ``layout``.

    ``layout`` holds ``(count, splits)`` entries: ``count`` groups whose members
    are assigned ``splits`` (one entry per member). Each group gets a unique
    label; ``decoys`` singleton groups reuse another group's label but have
    unrelated pixels. Ids are shuffled so they carry no structure.
    """
    rng = np.random.default_rng(seed)
    member_splits: list[list[str]] = []
    for count, splits in layout:
        member_splits.extend([list(splits) for _ in range(count)])
    total = sum(len(m) for m in member_splits)
    id_numbers = rng.permutation(total)
    labels: set[str] = set()
    records, images, split = [], {}, {}
    groups = []
    k = 0
    group_labels = []
    for splits in member_splits:
        label = random_label(rng)
        while label in labels:
            label = random_label(rng)
        labels.add(label)
        group_labels.append(label)
        imgs = group_images(rng, len(splits))
        members = []
        for s, img in zip(splits, imgs):
            image_id = f"img_{id_numbers[k]:06d}"
            k += 1
            records.append(ImageRecord(image_id, f"{image_id}.png", label, "AC"))
            images[image_id] = img
            split[image_id] = s
            members.append(image_id)
        groups.append(members)

    # Decoys: convert singleton groups into label-sharing strangers.
    singletons = [i for i, g in enumerate(groups) if len(g) == 1]
    multi = [i for i, g in enumerate(groups) if len(g) > 1]
    for idx in rng.choice(len(singletons), size=min(decoys, len(singletons)), replace=False):
        g = groups[singletons[idx]]
        target = group_labels[multi[int(rng.integers(len(multi)))]]
        rec_pos = next(p for p, r in enumerate(records) if r.id == g[0])
        r = records[rec_pos]
        records[rec_pos] = ImageRecord(r.id, r.path, target, r.subset)

    order = rng.permutation(len(records))
    manifest = DatasetManifest(tuple(records[i] for i in order), name=name)
    return PlantedFixture(manifest, images, SplitAssignment(split), groups)


# 2049 images: 1093 train / 273 validation / 683 test, 320 test images leaked.
AOLP_A_LAYOUT = [
    (280, (TEST, TRAIN)),
    (20, (TEST, TEST, TRAIN)),
    (30, (TEST, VALIDATION)),
    (20, (TEST, TEST)),
    (293, (TEST,)),
    (100, (TRAIN, TRAIN)),
    (50, (TRAIN, VALIDATION)),
    (543, (TRAIN,)),
    (193, (VALIDATION,)),
]

# 611 test images with 413 leaked; training and validation sets as in the
# AC+LE / RP protocol.
AOLP_B_LAYOUT = [
    (363, (TEST, TRAIN)),
    (25, (TEST, TEST, TRAIN)),
    (20, (TEST, TEST)),
    (158, (TEST,)),
    (40, (TRAIN, VALIDATION)),
    (60, (TRAIN, TRAIN)),
    (603, (TRAIN,)),
    (247, (VALIDATION,)),
]


def aolp_a(seed: int) -> PlantedFixture:
    return build_planted(AOLP_A_LAYOUT, seed, decoys=60, name="aolp_a")


def aolp_b(seed: int) -> PlantedFixture:
    return build_planted(AOLP_B_LAYOUT, seed, decoys=40, name="aolp_b")


def brute_force_graph(manifest: DatasetManifest, images: dict[str, CanonicalImage],
                      threshold: float) -> tuple[set[tuple[str, str]], set[frozenset[str]]]:
    """All-pairs oracle: full distance matrix, label filter, BFS components."""
    ids = list(manifest.ids)
    x = np.stack([images[i].pixels.astype(np.float64) for i in ids])
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).mean(axis=2)
    dist = np.sqrt(sq)
    labels = [manifest[i].label for i in ids]
    edges = set()
    adj: dict[str, list[str]] = {i: [] for i in ids}
    for p in range(len(ids)):
        for q in range(len(ids)):
            if p == q or not labels[p] or labels[p] != labels[q] or dist[p, q] > threshold:
                continue
            a, b = sorted((ids[p], ids[q]))
            edges.add((a, b))
            adj[ids[p]].append(ids[q])
    seen: set[str] = set()
    parts = set()
    for start in ids:
        if start in seen:
            continue
        stack, comp = [start], set()
        seen.add(start)
        while stack:
            node = stack.pop()
            comp.add(node)
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        parts.add(frozenset(comp))
    return edges, parts


def random_dedup_manifest(seed: int, max_n: int = 200) -> tuple[DatasetManifest, dict[str, CanonicalImage]]:
    """Random manifest with planted groups, chains and label-sharing strangers."""
    rng = np.random.default_rng(seed)
    n_target = int(rng.integers(20, max_n + 1))
    records, images = [], {}
    n_labels = max(2, n_target // 4)
    label_pool = [random_label(rng, 4) for _ in range(n_labels)]
    k = 0
    while k < n_target:
        size = min(int(rng.integers(1, 6)), n_target - k)
        label = label_pool[int(rng.integers(n_labels))]
        kind = rng.integers(3)
        if kind == 0:
            imgs = group_images(rng, size, jitter=float(rng.uniform(0.0, 0.15)))
        elif kind == 1:
            # chain: each image drifts from the previous one
            cur = rng.random(SMALL_W * SMALL_H)
            imgs = []
            for _ in range(size):
                cur = np.clip(cur + rng.normal(0, 0.08, cur.size), 0, 1)
                imgs.append(CanonicalImage(SMALL_W, SMALL_H, cur))
        else:
            imgs = [CanonicalImage(SMALL_W, SMALL_H, rng.random(SMALL_W * SMALL_H)) for _ in range(size)]
        for img in imgs:
            image_id = f"r{rng.integers(10**6):06d}_{k}"
            lab = "" if rng.random() < 0.03 else label
            records.append(ImageRecord(image_id, f"{image_id}.png", lab))
            images[image_id] = img
            k += 1
    order = rng.permutation(len(records))
    return DatasetManifest(tuple(records[i] for i in order)), images


def write_fixture_files(fx: PlantedFixture, root, quad_every: int = 2) -> dict[str, object]:
    """Write a planted fixture as PNG files, a manifest CSV and the original split.

    Every ``quad_every``-th record is pasted into a larger canvas and gets a
    quad outlining it, so dedup has to rectify it back.
    """
    from pathlib import Path

    from PIL import Image

    from fairsplit.manifest import QuadAnnotation, write_manifest, write_split

    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for k, rec in enumerate(fx.manifest):
        img = fx.images[rec.id]
        px = np.round(img.as_array() * 255).astype(np.uint8)
        quad = None
        if quad_every and k % quad_every == 0:
            canvas = np.full((img.height + 10, img.width + 14), 17, dtype=np.uint8)
            canvas[4:4 + img.height, 6:6 + img.width] = px
            px = canvas
            quad = QuadAnnotation(((6, 4), (6 + img.width, 4), (6 + img.width, 4 + img.height), (6, 4 + img.height)))
        path = f"images/{rec.id}.png"
        Image.fromarray(px).save(root / path)
        records.append(ImageRecord(rec.id, path, rec.label, rec.subset, quad))
    manifest_path = root / "manifest.csv"
    write_manifest(DatasetManifest(tuple(records)), manifest_path)
    split_path = root / "original.tsv"
    write_split(fx.original, split_path)
    return {"manifest": manifest_path, "split": split_path, "size": f"{SMALL_H}x{SMALL_W}"}


def write_scale_manifest(root, n: int, seed: int = 0, max_bucket: int = 10,
                         canvas: tuple[int, int] = (72, 136)):
    """Write ``n`` grayscale photos with quads, at most ``max_bucket`` per label.

    Each label gets a smooth random plate; its images are that plate pasted at
    a jittered position with sensor noise, so rectification and distances do
    real work. Returns the manifest path.
    """
    from pathlib import Path

    from PIL import Image

    from fairsplit.manifest import QuadAnnotation, write_manifest

    root = Path(root)
    rng = np.random.default_rng(seed)
    ch, cw = canvas
    records = []
    k = 0
    shard = -1
    while k < n:
        size = min(int(rng.integers(1, max_bucket + 1)), n - k)
        label = f"L{k:07d}"
        coarse = rng.integers(0, 256, size=(6, 12)).astype(np.uint8)
        plate = np.asarray(Image.fromarray(coarse).resize((96, 48), Image.BILINEAR), dtype=np.int16)
        for _ in range(size):
            if k // 1000 != shard:
                shard = k // 1000
                (root / f"{shard:03d}").mkdir(parents=True, exist_ok=True)
            y, x = (int(v) for v in rng.integers(2, 12, size=2))
            img = np.full((ch, cw), 40, dtype=np.int16)
            img[y:y + 48, x:x + 96] = plate + rng.integers(-3, 4, size=plate.shape)
            path = f"{shard:03d}/{k:07d}.png"
            Image.fromarray(np.clip(img, 0, 255).astype(np.uint8)).save(root / path, compress_level=1)
            # corners wobble by up to a pixel, so every rectification is a real warp
            j = rng.integers(-1, 2, size=8)
            quad = QuadAnnotation(((x + j[0], y + j[1]), (x + 96 + j[2], y + j[3]),
                                   (x + 96 + j[4], y + 48 + j[5]), (x + j[6], y + 48 + j[7])))
            records.append(ImageRecord(f"{k:07d}", path, label, "AC", quad))
            k += 1
    path = root / "manifest.csv"
    write_manifest(DatasetManifest(tuple(records)), path)
    return path
