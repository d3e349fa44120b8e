"""Independent reference implementations and generators shared by tests.

Everything here is deliberately written from the documented rules, not
from the package internals: scalar loops, str.find scans, and stdlib
unicodedata, so package bugs cannot hide in a shared code path.
"""

from __future__ import annotations

import unicodedata
from fractions import Fraction

import numpy as np

WORD_CATS = {"Lu", "Ll", "Lt", "Lm", "Lo", "Nd", "Nl", "No",
             "Mn", "Mc", "Me", "Pc"}

CJK_RANGES = (
    (0x3040, 0x309F), (0x30A0, 0x30FF), (0x31F0, 0x31FF),
    (0x3400, 0x4DBF), (0x4E00, 0x9FFF), (0xF900, 0xFAFF),
    (0xFF66, 0xFF9F), (0x20000, 0x2EBEF), (0x30000, 0x323AF),
)

DOMAINS = ("science", "society", "culture", "art", "life")


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in CJK_RANGES)


def is_word(ch: str) -> bool:
    return unicodedata.category(ch) in WORD_CATS


def is_word_noncjk(ch: str) -> bool:
    return is_word(ch) and not is_cjk(ch)


def ref_normalize(text: str) -> str:
    folded = unicodedata.normalize("NFC", text).casefold()
    return " ".join(unicodedata.normalize("NFC", folded).split())


def ref_token_count(text: str) -> int:
    """Scalar-loop reference segmenter: word-char runs + CJK singles."""
    count = 0
    in_word = False
    for ch in text:
        if is_cjk(ch):
            count += 1
            in_word = False
        elif is_word(ch):
            if not in_word:
                count += 1
            in_word = True
        else:
            in_word = False
    return count


def boundary_checked(surface: str) -> bool:
    """Whether the documented word-boundary rule applies to a surface."""
    if any(is_cjk(ch) for ch in surface):
        return False
    return is_word_noncjk(surface[0]) and is_word_noncjk(surface[-1])


def naive_match_counts(text: str, elements: list[tuple[str, str]],
                       boundary: bool = True):
    """Per-pattern str.find scan over normalized text.

    elements are (normalized surface, domain) pairs. Returns
    (n_k, n_distinct, {domain: (occ, distinct)}).
    """
    norm = ref_normalize(text)
    n_k = 0
    per_domain = {m: [0, 0] for m in DOMAINS}
    distinct = 0
    for surface, domain in elements:
        occ = 0
        start = 0
        checked = boundary and boundary_checked(surface)
        while True:
            i = norm.find(surface, start)
            if i < 0:
                break
            start = i + 1
            if checked:
                if i > 0 and is_word_noncjk(norm[i - 1]):
                    continue
                j = i + len(surface)
                if j < len(norm) and is_word_noncjk(norm[j]):
                    continue
            occ += 1
        if occ:
            n_k += occ
            distinct += 1
            per_domain[domain][0] += occ
            per_domain[domain][1] += 1
    return n_k, distinct, {m: tuple(v) for m, v in per_domain.items()}


# Text/pool generators. The alphabet mixes short Latin words, digits,
# accented letters, CJK, and separators; ';' is reserved as a
# never-in-pattern delimiter for additivity tests.
PATTERN_ALPHABET = list("abcdefgh") + list("01") + list("ñéα") + \
    list("数据学习の理") + [" "]
TEXT_ALPHABET = PATTERN_ALPHABET + list(".,!?-_") + ["  ", "Z", "É", "習"]


def random_surface(rng: np.random.Generator, max_len: int = 8) -> str:
    n = int(rng.integers(1, max_len + 1))
    chars = rng.choice(len(PATTERN_ALPHABET), size=n)
    return ref_normalize("".join(PATTERN_ALPHABET[i] for i in chars))


def random_pool_elements(rng: np.random.Generator, max_patterns: int,
                         max_len: int = 8) -> list[tuple[str, str]]:
    count = int(rng.integers(1, max_patterns + 1))
    seen = {}
    for _ in range(count):
        s = random_surface(rng, max_len)
        if s and s not in seen:
            seen[s] = DOMAINS[int(rng.integers(0, len(DOMAINS)))]
    return list(seen.items())


def random_text(rng: np.random.Generator, max_len: int) -> str:
    n = int(rng.integers(0, max_len + 1))
    chars = rng.choice(len(TEXT_ALPHABET), size=n)
    return "".join(TEXT_ALPHABET[i] for i in chars)


def brute_spearman(xs, ys) -> float:
    """Tie-free brute-force rank-difference formula."""
    n = len(xs)
    rank_x = {v: r for r, v in enumerate(sorted(xs), start=1)}
    rank_y = {v: r for r, v in enumerate(sorted(ys), start=1)}
    sd = sum((rank_x[x] - rank_y[y]) ** 2 for x, y in zip(xs, ys))
    return 1.0 - 6.0 * sd / (n * (n * n - 1))


def softmax(scores, tau: float):
    import math
    exps = [math.exp(s / tau) for s in scores]
    z = sum(exps)
    return [e / z for e in exps]


def exact_ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den)


def make_record(doc_id: str, n_p: int, score: float, **extra):
    """A minimal ScoreRecord for selection/analysis tests."""
    from hks import ScoreRecord
    kwargs = dict(doc_id=doc_id, n_p=n_p, n_k=0, n_distinct=0,
                  d=0.0, c=0.0, hks=score)
    kwargs.update(extra)
    return ScoreRecord(**kwargs)
