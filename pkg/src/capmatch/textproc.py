"""Caption text normalization and n-gram enumeration.

Captions are reduced to a flat token sequence before matching: lowercase,
every non-alphanumeric codepoint replaced by a space, split on whitespace
runs. A token's position is its index in the returned list.
"""

from __future__ import annotations

import re
from typing import Iterator

# \W is "not a Unicode word character"; underscore counts as a word
# character, so it needs stripping explicitly.
_NON_TOKEN = re.compile(r"[\W_]+")


def normalize(text: str) -> list[str]:
    """Lowercase, map punctuation to spaces, and split into tokens."""
    return _NON_TOKEN.sub(" ", text.lower()).split()


def join(tokens: list[str]) -> str:
    """Inverse-ish of :func:`normalize`: single-space join."""
    return " ".join(tokens)


def ngrams(tokens: list[str], max_n: int) -> Iterator[tuple[str, int, int]]:
    """Yield (text, start, n) for every contiguous n-gram with n <= max_n.

    Emission order is start position ascending, then n ascending. The text
    of an n-gram is its tokens joined by single spaces.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    length = len(tokens)
    for start in range(length):
        limit = min(max_n, length - start)
        for n in range(1, limit + 1):
            yield " ".join(tokens[start : start + n]), start, n
