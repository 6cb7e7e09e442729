"""Shared test utilities: corpus generators and the naive matching oracle.

The oracle is deliberately independent of the engine: for every term of
every class it scans all token positions of the caption, then applies the
strategy rules in the plainest possible way.
"""

from __future__ import annotations

import random

from capmatch.corpus import Sample
from capmatch.termdb import ClassEntry, TermDatabase
from capmatch.textproc import normalize

FILLER = [
    "a", "the", "of", "on", "in", "my", "old", "red", "big", "photo",
    "image", "sunset", "water", "sky", "day", "trip", "nice", "view",
]

WORD_POOL = [
    "lion", "lionn", "goose", "geese", "shark", "barn", "daisy", "acorn",
    "koala", "bee", "fly", "ant", "hen", "fig", "ram", "crab", "slug",
    "piano", "menu", "pizza", "corn", "hay", "bubble", "junco", "stupa",
    "magpie", "mitten", "padlock", "teapot", "espresso", "banana",
]


def dp_levenshtein(a: str, b: str) -> int:
    """Full-matrix reference edit distance."""
    rows = len(a) + 1
    cols = len(b) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[-1][-1]


def dp_similarity(a: str, b: str) -> int:
    if a == b:
        return 100
    return int(100 * (1 - dp_levenshtein(a, b) / max(len(a), len(b))))


def random_termdb(rng: random.Random, max_classes: int = 20, max_words: int = 3) -> TermDatabase:
    n_classes = rng.randint(1, max_classes)
    used: set[str] = set()
    classes = []
    for index in range(n_classes):
        terms = []
        for _ in range(rng.randint(1, 3)):
            words = rng.sample(WORD_POOL, rng.randint(1, max_words))
            term = " ".join(words)
            if term in used or term in terms:
                continue
            used.add(term)
            terms.append(term)
        if not terms:
            fallback = f"class{index}"
            used.add(fallback)
            terms.append(fallback)
        classes.append(ClassEntry(index, terms[0], tuple(terms)))
    return TermDatabase("random", tuple(classes))


def random_caption(rng: random.Random, db: TermDatabase) -> str:
    words: list[str] = []
    for _ in range(rng.randint(0, 12)):
        roll = rng.random()
        if roll < 0.35:
            entry = rng.choice(db.classes)
            words.extend(rng.choice(entry.terms).split())
        elif roll < 0.55:
            words.append(rng.choice(WORD_POOL))
        else:
            words.append(rng.choice(FILLER))
    return " ".join(words)


def random_corpus(rng: random.Random, db: TermDatabase, max_samples: int = 500) -> list[Sample]:
    return [
        Sample(id=f"s{i}", title=random_caption(rng, db))
        for i in range(rng.randint(0, max_samples))
    ]


def oracle_hits(caption: str, db: TermDatabase,
                fuzzy_threshold: int | None = None) -> list[tuple[int, int, str]]:
    """All-substrings scan: sorted (position, class, term) occurrences."""
    tokens = normalize(caption)
    hits: list[tuple[int, int, str]] = []
    for entry in db.classes:
        for term in entry.terms:
            term_tokens = term.split(" ")
            width = len(term_tokens)
            for start in range(len(tokens) - width + 1):
                if tokens[start : start + width] == term_tokens:
                    hits.append((start, entry.index, term))
    if fuzzy_threshold is not None:
        exact_texts = {t for entry in db.classes for t in entry.terms}
        for pos, tok in enumerate(tokens):
            if tok in exact_texts:
                continue
            for entry in db.classes:
                for term in entry.terms:
                    if " " in term:
                        continue
                    if dp_similarity(tok, term) >= fuzzy_threshold:
                        hits.append((pos, entry.index, term))
    hits.sort()
    return hits


def oracle_select(hits: list[tuple[int, int, str]], kind: str, mc_cap: int = 25) -> list[int]:
    first_pos: dict[int, int] = {}
    for pos, cls, _ in hits:
        if cls not in first_pos:
            first_pos[cls] = pos
    order = sorted(first_pos, key=lambda c: (first_pos[c], c))
    if kind == "anticlass":
        return []
    if kind == "strict":
        return order if len(order) == 1 else []
    if kind == "single_class":
        return order[:1]
    if kind == "multi_class":
        return order[:mc_cap]
    raise ValueError(kind)


def oracle_outcome(caption: str, db: TermDatabase, kind: str, mc_cap: int = 25,
                   fuzzy_threshold: int | None = None):
    """Reference matcher: (labels, matched, hits) for one strategy."""
    hits = oracle_hits(caption, db, fuzzy_threshold)
    return oracle_select(hits, kind, mc_cap), bool(hits), hits


def engine_hit_tuples(outcome) -> list[tuple[int, int, str]]:
    return [(h.position, h.class_index, h.term) for h in outcome.hits]
