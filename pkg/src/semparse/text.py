"""Lexical helpers: normalization, tokenization, fuzzy string similarity.

The fuzzy metric is a normalized longest-common-substring ratio over
lowercased, punctuation-stripped strings. The ratio is normalized by the
shorter string so that a name fully contained in a question phrase scores
1.0; strings shorter than 3 characters must match exactly.
"""

from __future__ import annotations

import re
from difflib import SequenceMatcher

_NON_ALNUM = re.compile(r"[^a-z0-9]+")
_NUMBER = re.compile(r"\d+(?:\.\d+)?")

STOPWORDS = frozenset(
    "a an the of is are was were in on at to for with and or who what which "
    "where when how does do did there that".split()
)


def normalize(s: str) -> str:
    """Lowercase, replace punctuation with spaces, collapse whitespace."""
    return _NON_ALNUM.sub(" ", s.lower()).strip()


def stem(token: str) -> str:
    # crude plural stripping, enough for the lexical overlap features
    if len(token) > 3 and token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    return token


def tokenize(s: str, stemmed: bool = True) -> list[str]:
    toks = normalize(s).split()
    return [stem(t) for t in toks] if stemmed else toks


def content_tokens(s: str) -> list[str]:
    """Tokens with stopwords removed (stopwords are matched pre-stemming)."""
    return [stem(t) for t in normalize(s).split() if t not in STOPWORDS]


def char_ngrams(s: str, n: int = 3) -> set[str]:
    t = normalize(s)
    if len(t) < n:
        return {t} if t else set()
    return {t[i : i + n] for i in range(len(t) - n + 1)}


def extract_numbers(s: str) -> list[int | float]:
    """Numeric tokens in order of appearance, deduplicated, ints preferred."""
    out: dict[int | float, None] = {}
    for m in _NUMBER.finditer(s):
        text = m.group(0)
        value = float(text) if "." in text else int(text)
        out.setdefault(value, None)
    return list(out)


def longest_common_substring(a: str, b: str) -> int:
    if not a or not b:
        return 0
    return SequenceMatcher(None, a, b, autojunk=False).find_longest_match(
        0, len(a), 0, len(b)
    ).size


def similarity(a: str, b: str) -> float:
    """Normalized LCS ratio in [0, 1] between two already-normalized strings."""
    if not a or not b:
        return 0.0
    shorter = min(len(a), len(b))
    if shorter < 3:
        return 1.0 if a == b else 0.0
    return longest_common_substring(a, b) / shorter


def word_ngrams(s: str, max_n: int) -> list[str]:
    words = normalize(s).split()
    grams = []
    for n in range(1, max_n + 1):
        for i in range(len(words) - n + 1):
            grams.append(" ".join(words[i : i + n]))
    return grams


def best_phrase_similarity(needle: str, haystack: str, max_ngram: int = 5) -> float:
    """Best fuzzy similarity of `needle` against any word n-gram of `haystack`."""
    target = normalize(needle)
    if not target:
        return 0.0
    best = 0.0
    for gram in word_ngrams(haystack, max_ngram):
        score = similarity(target, gram)
        if score > best:
            best = score
            if best >= 1.0:
                break
    return best
