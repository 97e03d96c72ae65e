"""Template registry and glyph rendering.

A registry is a directory of ``<name>.png`` + ``<name>.json`` pairs. The JSON
lists character anchor boxes ``[x, y, w, h]``, the ink color, the bitmap
font (``<font>.font.json`` in the same directory), the plate patterns the
template supports and letters excluded from its alphabet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from fairsplit.errors import TemplateError
from fairsplit.synthgen.text import PlatePattern, letter_alphabet


def bundled_templates_dir() -> Path:
    return Path(str(resources.files("fairsplit.synthgen") / "templates"))


def load_font(path: str | Path) -> dict[str, np.ndarray]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        glyphs = payload["glyphs"]
    except (OSError, ValueError, KeyError) as exc:
        raise TemplateError(f"cannot load font {path}: {exc}") from exc
    font = {}
    for ch, rows in glyphs.items():
        if len({len(r) for r in rows}) != 1:
            raise TemplateError(f"glyph {ch!r} in {path} has ragged rows")
        font[ch] = np.array([[c == "#" for c in r] for r in rows], dtype=bool)
    return font


@dataclass(eq=False)
class Template:
    name: str
    image: np.ndarray
    boxes: list[tuple[int, int, int, int]]
    ink: tuple[int, int, int]
    font: dict[str, np.ndarray]
    patterns: tuple[str, ...] = ()
    letters_exclude: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def slots(self) -> int:
        return len(self.boxes)

    @property
    def letters(self) -> str:
        return letter_alphabet(self.letters_exclude)

    def plate_patterns(self) -> list[PlatePattern]:
        return [PlatePattern.parse(p, self.name) for p in self.patterns]


def load_template(directory: str | Path, name: str) -> Template:
    directory = Path(directory)
    meta_path = directory / f"{name}.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        image_path = directory / meta.get("image", f"{name}.png")
        with Image.open(image_path) as im:
            image = np.asarray(im.convert("RGB")).copy()
        boxes = [tuple(int(v) for v in b) for b in meta["boxes"]]
        ink = tuple(int(v) for v in meta.get("ink", (0, 0, 0)))
        font_name = meta["font"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise TemplateError(f"cannot load template {name!r} from {directory}: {exc}") from exc
    h, w = image.shape[:2]
    for x, y, bw, bh in boxes:
        if x < 0 or y < 0 or bw <= 0 or bh <= 0 or x + bw > w or y + bh > h:
            raise TemplateError(f"template {name!r}: box {(x, y, bw, bh)} outside {w}x{h} image")
    tpl = Template(
        name=meta.get("name", name),
        image=image,
        boxes=boxes,
        ink=ink,  # type: ignore[arg-type]
        font=load_font(directory / f"{font_name}.font.json"),
        patterns=tuple(meta.get("patterns", ())),
        letters_exclude=meta.get("letters_exclude", ""),
        meta=meta,
    )
    for p in tpl.plate_patterns():
        if len(p) != tpl.slots:
            raise TemplateError(f"template {name!r}: pattern {str(p)!r} has {len(p)} slots, template has {tpl.slots}")
    return tpl


def load_registry(directory: str | Path | None = None) -> dict[str, Template]:
    """All templates in ``directory`` (the bundled ones by default), by name."""
    directory = Path(directory) if directory is not None else bundled_templates_dir()
    names = sorted(p.stem for p in directory.glob("*.json") if not p.name.endswith(".font.json"))
    if not names:
        raise TemplateError(f"no templates found in {directory}")
    return {n: load_template(directory, n) for n in names}


def _scaled_glyph(glyph: np.ndarray, w: int, h: int) -> np.ndarray:
    gh, gw = glyph.shape
    rows = ((np.arange(h) + 0.5) * gh / h).astype(int)
    cols = ((np.arange(w) + 0.5) * gw / w).astype(int)
    return glyph[np.ix_(rows, cols)]


def render_plate(label: str, template: Template) -> np.ndarray:
    """Draw ``label`` into the template's anchor boxes; returns uint8 RGB.

    Glyphs are nearest-neighbour scaled to fill each box, so ink never leaves
    its box.

    Raises:
        TemplateError: on a slot-count mismatch or a character without glyph.
    """
    if len(label) != template.slots:
        raise TemplateError(
            f"label {label!r} has {len(label)} characters, template {template.name!r} has {template.slots} slots"
        )
    out = template.image.copy()
    ink = np.array(template.ink, dtype=np.uint8)
    for ch, (x, y, w, h) in zip(label, template.boxes):
        glyph = template.font.get(ch)
        if glyph is None:
            raise TemplateError(f"template {template.name!r} has no glyph for {ch!r}")
        mask = _scaled_glyph(glyph, w, h)
        out[y:y + h, x:x + w][mask] = ink
    return out
