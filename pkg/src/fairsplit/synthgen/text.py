"""Plate text patterns.

Pattern strings use ``#`` for a digit, ``?`` for a letter and ``*`` for
either; every other character is a literal (province glyphs included).
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from fairsplit.errors import ConfigError, EmptyLabelError
from fairsplit.manifest import normalize_label

DIGITS = string.digits
LETTERS = string.ascii_uppercase

LETTER, DIGIT, EITHER, LITERAL = "letter", "digit", "either", "literal"
_CODES = {"?": LETTER, "#": DIGIT, "*": EITHER}


@dataclass(frozen=True)
class Slot:
    kind: str
    char: str = ""

    def __post_init__(self) -> None:
        if self.kind not in (LETTER, DIGIT, EITHER, LITERAL):
            raise ConfigError(f"unknown slot kind {self.kind!r}")
        if self.kind == LITERAL:
            if len(self.char) != 1:
                raise ConfigError(f"literal slot needs exactly one character, got {self.char!r}")
            try:
                ok = normalize_label(self.char) == self.char
            except EmptyLabelError:
                ok = False
            if not ok:
                raise ConfigError(f"literal {self.char!r} would not survive label normalization")


@dataclass(frozen=True)
class PlatePattern:
    slots: tuple[Slot, ...]
    layout: str

    def __post_init__(self) -> None:
        if not self.slots:
            raise ConfigError("pattern needs at least one slot")

    @classmethod
    def parse(cls, text: str, layout: str) -> "PlatePattern":
        slots = tuple(Slot(_CODES[c]) if c in _CODES else Slot(LITERAL, c) for c in text)
        return cls(slots, layout)

    def __str__(self) -> str:
        inv = {v: k for k, v in _CODES.items()}
        return "".join(s.char if s.kind == LITERAL else inv[s.kind] for s in self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def matches(self, label: str, letters: str = LETTERS) -> bool:
        if len(label) != len(self.slots):
            return False
        for s, ch in zip(self.slots, label):
            allowed = {
                LETTER: letters,
                DIGIT: DIGITS,
                EITHER: DIGITS + letters,
                LITERAL: s.char,
            }[s.kind]
            if ch not in allowed:
                return False
        return True


def letter_alphabet(exclude: str = "") -> str:
    return "".join(c for c in LETTERS if c not in set(exclude.upper()))


def generate_plate_text(pattern: PlatePattern, rng: np.random.Generator, letters: str = LETTERS) -> str:
    """Draw a label: uniform over the slot's alphabet, literals copied."""
    needs_letters = any(s.kind == LETTER for s in pattern.slots)
    if needs_letters and not letters:
        raise ConfigError("letter alphabet is empty after exclusions")
    either = DIGITS + letters
    out = []
    for s in pattern.slots:
        if s.kind == LITERAL:
            out.append(s.char)
            continue
        alphabet = {LETTER: letters, DIGIT: DIGITS, EITHER: either}[s.kind]
        out.append(alphabet[int(rng.integers(len(alphabet)))])
    return "".join(out)
