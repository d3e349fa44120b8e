"""Text normalization, character classes, and token counting.

Matching is only well-defined if pool surfaces and document text go
through the *same* normalization, so both sides funnel through
:func:`normalize`. Token counting follows a deterministic word-segmentation
rule: a token is either a maximal run of word characters (letters, digits,
combining marks, connector punctuation) or a single CJK character
(Han ideographs and kana carry no word delimiters, so each counts as
one token).
"""

from __future__ import annotations

import sys
import unicodedata

import numpy as np

# Class bitmask values for the per-codepoint table.
WORD = 1
CJK = 2

# Han ideographs plus kana. Hangul is excluded on purpose: Korean text is
# space-delimited, so Hangul words segment like Latin ones.
_CJK_RANGES = (
    (0x3040, 0x309F),    # hiragana
    (0x30A0, 0x30FF),    # katakana
    (0x31F0, 0x31FF),    # katakana phonetic extensions
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified ideographs
    (0xF900, 0xFAFF),    # CJK compatibility ideographs
    (0xFF66, 0xFF9F),    # halfwidth katakana
    (0x20000, 0x2EBEF),  # CJK extensions B-F
    (0x30000, 0x323AF),  # CJK extensions G-H
)

_WORD_CATEGORIES = ("Lu", "Ll", "Lt", "Lm", "Lo", "Nd", "Nl", "No",
                    "Mn", "Mc", "Me", "Pc")

_class_table: np.ndarray | None = None


def normalize(text: str) -> str:
    """NFC + full case folding + whitespace collapse.

    Case folding can denormalize (e.g. U+0130 folds to "i" + combining
    dot), so NFC is applied again after folding. Whitespace runs collapse
    to single spaces and leading/trailing whitespace is stripped.
    """
    folded = unicodedata.normalize("NFC", text).casefold()
    return " ".join(unicodedata.normalize("NFC", folded).split())


def char_class(ch: str) -> int:
    """Class bitmask for a single character (scalar path)."""
    cls = 0
    if unicodedata.category(ch) in _WORD_CATEGORIES:
        cls |= WORD
    cp = ord(ch)
    for lo, hi in _CJK_RANGES:
        if lo <= cp <= hi:
            cls |= CJK
            break
    return cls


def class_table() -> np.ndarray:
    """uint8 class table indexed by codepoint, built lazily once.

    ~1.1M unicodedata lookups; takes well under a second and is shared
    by every automaton scan in the process.
    """
    global _class_table
    if _class_table is None:
        table = np.zeros(sys.maxunicode + 1, dtype=np.uint8)
        cats = np.array(
            [unicodedata.category(chr(cp)) in _WORD_CATEGORIES
             for cp in range(sys.maxunicode + 1)],
            dtype=bool,
        )
        table[cats] |= WORD
        for lo, hi in _CJK_RANGES:
            table[lo:hi + 1] |= CJK
        _class_table = table
    return _class_table


def encode_codepoints(text: str) -> np.ndarray:
    """Text as a uint32 codepoint array (what the scan kernels consume)."""
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32)


def is_flank_word(ch: str) -> bool:
    """True if `ch` extends a word across a match edge.

    CJK characters act as boundaries even though Unicode classifies them
    as letters: in mixed text an ideograph next to a Latin term does not
    glue onto it.
    """
    cls = char_class(ch)
    return bool(cls & WORD) and not (cls & CJK)


def token_count_from_classes(cls: np.ndarray) -> int:
    """Token count over a per-codepoint class array."""
    if cls.size == 0:
        return 0
    cjk = (cls & CJK) != 0
    word = ((cls & WORD) != 0) & ~cjk
    # A run starts where a word char is not preceded by another word char.
    starts = word.copy()
    starts[1:] &= ~word[:-1]
    return int(cjk.sum()) + int(starts.sum())


def tokenize_count(text: str) -> int:
    """Token count of `text` under the documented segmentation rule.

    Counts maximal non-CJK word-character runs as one token each and
    every CJK character as its own token. Everything else (spaces,
    punctuation, symbols) separates tokens and is not counted.
    """
    if not text:
        return 0
    cps = encode_codepoints(text)
    return token_count_from_classes(class_table()[cps])
