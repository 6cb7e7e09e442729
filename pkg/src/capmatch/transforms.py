"""Deterministic caption ablations.

Each transform rewrites one caption string; manifest-level application
lives in the CLI, which derives an independent child seed per sample so
results do not depend on worker count or visit order.
"""

from __future__ import annotations

import hashlib
import random
import string
from dataclasses import dataclass

from .corpus import Sample
from .termdb import TermDatabase
from .textproc import normalize

TRANSFORM_KINDS = ("scramble", "shift_cipher", "token_strip", "simple_caption", "simpler_caption")

DEFAULT_TEMPLATE = "an image of a CLASSNAME"

_LOWER = string.ascii_lowercase
_UPPER = string.ascii_uppercase


def child_seed(seed: int, key: str) -> int:
    """Derive an independent per-sample seed from a run seed and a sample id."""
    digest = hashlib.blake2b(f"{seed}\x00{key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def scramble(caption: str, seed: int) -> str:
    """Uniformly permute the whitespace tokens of a caption, seeded."""
    tokens = caption.split()
    random.Random(seed).shuffle(tokens)
    return " ".join(tokens)


def shift_cipher(caption: str, shift: int) -> str:
    """Rotate each ASCII letter within its case class; everything else is fixed."""
    shift %= 26
    table = str.maketrans(
        _LOWER + _UPPER,
        _LOWER[shift:] + _LOWER[:shift] + _UPPER[shift:] + _UPPER[:shift],
    )
    return caption.translate(table)


def token_strip(caption: str, whitelist: set[str]) -> str:
    """Replace every normalized token outside the whitelist with the token "0".

    "0" is always treated as whitelisted so the transform is idempotent.
    """
    return " ".join(
        tok if tok in whitelist or tok == "0" else "0" for tok in normalize(caption)
    )


def simple_caption(caption: str, lexicon: set[str], template: str = DEFAULT_TEMPLATE) -> str:
    """Template caption whose CLASSNAME is the caption's lexicon tokens.

    Tokens keep caption order, deduplicated; a caption with no lexicon
    token produces empty text so it can be filtered downstream.
    """
    seen: list[str] = []
    for tok in normalize(caption):
        if tok in lexicon and tok not in seen:
            seen.append(tok)
    if not seen:
        return ""
    return template.replace("CLASSNAME", " ".join(seen)).lower()


def simpler_caption(label: int, db: TermDatabase, template: str = DEFAULT_TEMPLATE) -> str:
    """Template caption whose CLASSNAME is the class's canonical name."""
    if not 0 <= label < len(db.classes):
        raise ValueError(f"label {label} out of range for {len(db.classes)}-class database")
    return template.replace("CLASSNAME", db.classes[label].canonical_name).lower()


@dataclass(frozen=True)
class TransformSpec:
    """A fully parameterized transform; validates that the chosen kind has
    the parameters it needs before any data is touched."""

    kind: str
    seed: int = 0
    shift: int = 13
    whitelist: frozenset[str] | None = None
    lexicon: frozenset[str] | None = None
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "shift_cipher" and not 1 <= self.shift <= 25:
            raise ValueError("shift must be in 1..25")
        if self.kind == "token_strip" and self.whitelist is None:
            raise ValueError("token_strip requires a whitelist")
        if self.kind == "simple_caption" and not self.lexicon:
            raise ValueError("simple_caption requires a non-empty lexicon")

    def apply(self, caption: str, sample_id: str = "", db: TermDatabase | None = None,
              label: int | None = None) -> str:
        if self.kind == "scramble":
            return scramble(caption, child_seed(self.seed, sample_id))
        if self.kind == "shift_cipher":
            return shift_cipher(caption, self.shift)
        if self.kind == "token_strip":
            return token_strip(caption, self.whitelist)
        if self.kind == "simple_caption":
            return simple_caption(caption, self.lexicon, self.template)
        if db is None or label is None:
            raise ValueError("simpler_caption requires a term database and a label")
        return simpler_caption(label, db, self.template)


def rewrite_caption(sample: Sample, source: str, text: str) -> Sample:
    """Store a transformed caption back into a sample.

    Single-field sources are rewritten in place; ``tags`` becomes the
    whitespace split of the text; composite sources collapse into the
    title with the other constituent fields cleared, since their content
    is folded into the transformed text.
    """
    if source == "title":
        sample.title = text
    elif source == "descr":
        sample.description = text
    elif source == "alt_text":
        sample.alt_text = text
    elif source == "tags":
        sample.tags = text.split()
    elif source == "titletags":
        sample.title = text
        sample.tags = []
    elif source == "ttd":
        sample.title = text
        sample.tags = []
        sample.description = ""
    else:
        raise ValueError(f"unknown caption source {source!r}")
    return sample
