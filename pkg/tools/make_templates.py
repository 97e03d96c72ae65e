"""Regenerate the bundled plate templates and bitmap font.

Run from the repository root:  python tools/make_templates.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

OUT = Path(__file__).resolve().parents[1] / "src" / "fairsplit" / "synthgen" / "templates"

GLYPHS_5x7 = {
    "0": [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    "1": ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    "2": [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    "3": ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    "4": ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    "5": ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    "6": ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    "7": ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    "8": [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    "9": [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
    "A": [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    "B": ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
    "C": [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    "D": ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."],
    "E": ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
    "F": ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
    "G": [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"],
    "H": ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    "I": [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
    "J": ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
    "K": ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
    "L": ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
    "M": ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
    "N": ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"],
    "O": [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    "P": ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
    "Q": [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
    "R": ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
    "S": [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
    "T": ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
    "U": ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    "V": ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
    "W": ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
    "X": ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
    "Y": ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
    "Z": ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
}

# Coarse 9x9 province glyphs; enough to occupy the literal slot distinctly.
GLYPHS_CJK = {
    "皖": [
        "..#..#...",
        "######.#.",
        "#..#.####",
        "####.#..#",
        "#..#.####",
        "####..#.#",
        "#..#..#.#",
        "#..#.#..#",
        "####.#.##",
    ],
    "京": [
        "....#....",
        "#########",
        ".........",
        ".#######.",
        ".#.....#.",
        ".#######.",
        "....#....",
        ".#..#..#.",
        "#..##...#",
    ],
    "沪": [
        "#....#...",
        ".#.#####.",
        "...#...#.",
        "#..#####.",
        ".#.#.....",
        "...#.....",
        "..#......",
        ".#.......",
        "#........",
    ],
    "苏": [
        "..#...#..",
        "#########",
        "..#...#..",
        "...#.....",
        "#######..",
        "...#..#..",
        ".#.#..#.#",
        "#..#..#..",
        "..##.##..",
    ],
}


def font_json() -> dict:
    return {"name": "block", "glyphs": {**GLYPHS_5x7, **GLYPHS_CJK}}


def plate(width: int, height: int, fill, border, border_px: int) -> np.ndarray:
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = border
    img[border_px:-border_px, border_px:-border_px] = fill
    return img


def boxes(x0: int, y: int, w: int, h: int, step: int, n: int, gaps: dict[int, int] | None = None):
    out, x = [], x0
    for i in range(n):
        x += (gaps or {}).get(i, 0)
        out.append([x, y, w, h])
        x += step
    return out


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "block.font.json").write_text(json.dumps(font_json(), ensure_ascii=False, indent=1) + "\n",
                                         encoding="utf-8")

    # Taiwan-style: dark text on white, six characters with a hyphen gap.
    tw = plate(200, 96, (245, 245, 240), (25, 25, 25), 4)
    tw[46:50, 95:105] = (25, 25, 25)
    Image.fromarray(tw).save(OUT / "taiwan.png")
    tw_meta = {
        "name": "taiwan",
        "image": "taiwan.png",
        "font": "block",
        "ink": [25, 25, 25],
        "boxes": boxes(14, 20, 22, 56, 28, 6, {3: 16}),
        "patterns": ["??####", "####??", "???###", "**####"],
        "letters_exclude": "IO",
    }
    (OUT / "taiwan.json").write_text(json.dumps(tw_meta, indent=1) + "\n", encoding="utf-8")

    # Mainland-style: white text on blue, province glyph then six characters.
    cn = plate(220, 70, (20, 70, 170), (235, 235, 235), 3)
    cn[33:37, 59:63] = (235, 235, 235)
    Image.fromarray(cn).save(OUT / "mainland.png")
    cn_meta = {
        "name": "mainland",
        "image": "mainland.png",
        "font": "block",
        "ink": [240, 240, 240],
        "boxes": boxes(10, 12, 20, 46, 26, 7, {2: 14}),
        "patterns": ["皖?*****", "皖?#####", "京?*****", "沪?*****", "苏?*****"],
        "letters_exclude": "IO",
    }
    (OUT / "mainland.json").write_text(json.dumps(cn_meta, ensure_ascii=False, indent=1) + "\n",
                                       encoding="utf-8")


if __name__ == "__main__":
    main()
