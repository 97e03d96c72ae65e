from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from fairsplit.errors import ConfigError
from fairsplit.imaging import load_image, rectify
from fairsplit.manifest import MANIFEST_HEADER, DatasetManifest, ImageRecord, manifest_rows
from fairsplit.rng import derive_seed
from fairsplit.synthgen.augment import AugmentConfig, augment, to_uint8
from fairsplit.synthgen.render import Template, render_plate
from fairsplit.synthgen.text import PlatePattern, generate_plate_text

SYNTH_SUBSET = "synthetic"


@dataclass(eq=False)
class SynthRecord:
    id: str
    label: str
    template: str
    pattern: str
    seed: int
    image: np.ndarray
    base: np.ndarray
    transform_log: list[dict] = field(default_factory=list)

    def manifest_record(self, path: str) -> ImageRecord:
        return ImageRecord(self.id, path, self.label, SYNTH_SUBSET)


def _template_weights(templates: Sequence[Template], weights: Mapping[str, float] | None) -> np.ndarray:
    if weights is None:
        w = np.ones(len(templates))
    else:
        unknown = set(weights) - {t.name for t in templates}
        if unknown:
            raise ConfigError(f"weights given for unknown templates {sorted(unknown)}")
        w = np.array([float(weights.get(t.name, 0.0)) for t in templates])
    if np.any(w < 0) or not w.sum() > 0:
        raise ConfigError("template weights must be non-negative with a positive sum")
    return np.cumsum(w / w.sum())


def make_record(index: int, templates: Sequence[Template], patterns: Mapping[str, Sequence[PlatePattern]],
                cumulative: np.ndarray, config: AugmentConfig, seed: int) -> SynthRecord:
    """Record ``index`` of a batch; depends only on its own derived seed."""
    record_seed = derive_seed(seed, index)
    rng = np.random.default_rng(record_seed)
    t_idx = min(int(np.searchsorted(cumulative, rng.random(), side="right")), len(templates) - 1)
    tpl = templates[t_idx]
    choices = patterns[tpl.name]
    pattern = choices[int(rng.integers(len(choices)))]
    label = generate_plate_text(pattern, rng, tpl.letters)
    base = render_plate(label, tpl)
    image, log = augment(base, rng, config)
    return SynthRecord(f"synth_{index:06d}", label, tpl.name, str(pattern), record_seed,
                       to_uint8(image), base, log)


def generate_batch(
    n: int,
    templates: Sequence[Template],
    config: AugmentConfig | None = None,
    seed: int = 0,
    *,
    patterns: Sequence[PlatePattern] | None = None,
    weights: Mapping[str, float] | None = None,
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> tuple[list[SynthRecord], list[list[str]]]:
    """Generate ``n`` synthetic plates.

    A template is drawn by ``weights`` (uniform by default), then one of its
    patterns (from ``patterns`` with a matching layout, else the template's
    own). When ``out_dir`` is set, images go to ``out_dir/images`` and the
    returned manifest rows point there with subset ``synthetic``.
    """
    if n < 1:
        raise ConfigError("n must be at least 1")
    if not templates:
        raise ConfigError("no templates given")
    config = config or AugmentConfig()
    templates = sorted(templates, key=lambda t: t.name)
    by_layout: dict[str, list[PlatePattern]] = {}
    for t in templates:
        pats = [p for p in patterns if p.layout == t.name] if patterns is not None else t.plate_patterns()
        if not pats:
            raise ConfigError(f"template {t.name!r} has no patterns")
        for p in pats:
            if len(p) != t.slots:
                raise ConfigError(f"pattern {str(p)!r} does not fit template {t.name!r}")
        by_layout[t.name] = pats
    cumulative = _template_weights(templates, weights)

    build = partial(make_record, templates=templates, patterns=by_layout, cumulative=cumulative,
                    config=config, seed=seed)
    if jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(build, range(n), chunksize=max(1, n // (4 * jobs))))
    else:
        records = [build(i) for i in range(n)]

    rows = []
    if out_dir is not None:
        rows = write_records(records, out_dir)
    return records, rows


def save_png(image: np.ndarray, path: Path) -> None:
    Image.fromarray(image).save(path, format="PNG")


def write_records(records: Sequence[SynthRecord], out_dir: str | Path) -> list[list[str]]:
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    recs = []
    for r in records:
        rel = f"images/{r.id}.png"
        save_png(r.image, out_dir / rel)
        recs.append(r.manifest_record(rel))
    return manifest_rows(recs)


def write_rows(rows: Sequence[Sequence[str]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)


def augment_manifest(
    manifest: DatasetManifest,
    out_dir: str | Path,
    config: AugmentConfig | None = None,
    seed: int = 0,
    copies: int = 1,
    size: tuple[int, int] | None = None,
) -> list[list[str]]:
    """Augment real images, keeping their labels and subsets.

    Records with a quad are rectified first (to ``size`` = (height, width)
    when given, else the quad's bounding size). Output ids are
    ``<id>__aug<k>``.
    """
    if copies < 1:
        raise ConfigError("copies must be at least 1")
    config = config or AugmentConfig()
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    recs = []
    for index, rec in enumerate(manifest):
        img = load_image(manifest.resolve(rec))
        if rec.quad is not None:
            if size is not None:
                h, w = size
            else:
                xs = [p[0] for p in rec.quad.points]
                ys = [p[1] for p in rec.quad.points]
                w = max(8, round(max(xs) - min(xs)))
                h = max(8, round(max(ys) - min(ys)))
            img = rectify(img, rec.quad, w, h)
        for k in range(copies):
            rng = np.random.default_rng(derive_seed(seed, index * copies + k))
            out, _ = augment(img, rng, config)
            new_id = f"{rec.id}__aug{k}"
            rel = f"images/{new_id}.png"
            save_png(to_uint8(out), out_dir / rel)
            recs.append(ImageRecord(new_id, rel, rec.label, rec.subset))
    return manifest_rows(recs)
