"""Per-class matching-term databases and synonym-lexicon expansion.

Term files are UTF-8 text, one class per line::

    index<TAB>canonical_name<TAB>term1|term2|...

Lines starting with ``#`` are comments. Class indices must be dense
0..K-1. Every term is normalized on load; a normalized term may belong to
at most one class, since an ambiguous term would label samples into two
classes at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .errors import TermFileError
from .textproc import normalize

RELATIONS = ("synonym", "hypernym", "hyponym", "also_see", "similar_to")


@dataclass(frozen=True)
class ClassEntry:
    index: int
    canonical_name: str
    terms: tuple[str, ...]


@dataclass(frozen=True)
class TermDatabase:
    name: str
    classes: tuple[ClassEntry, ...]

    def __len__(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class SynonymLexicon:
    """Normalized word -> related words, partitioned by relation."""

    entries: dict[str, dict[str, tuple[str, ...]]]


def _normalize_term(term: str) -> str:
    return " ".join(normalize(term))


def load_termdb(stream: Iterable[str], name: str = "termdb") -> TermDatabase:
    """Parse and validate a term file.

    Terms are normalized; duplicates within a class are silently dropped,
    duplicates across classes are an error naming the term and both
    classes involved.
    """
    by_index: dict[int, ClassEntry] = {}
    owner: dict[str, int] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise TermFileError(
                f"line {lineno}: expected index<TAB>name<TAB>terms, found {len(parts)} fields"
            )
        try:
            index = int(parts[0])
        except ValueError as exc:
            raise TermFileError(f"line {lineno}: non-integer class index {parts[0]!r}") from exc
        if index < 0:
            raise TermFileError(f"line {lineno}: negative class index {index}")
        if index in by_index:
            raise TermFileError(f"line {lineno}: class index {index} appears twice")

        canonical = parts[1].strip()
        if not canonical:
            raise TermFileError(f"line {lineno}: empty canonical name")
        raw_terms = [canonical] + [t for t in parts[2].split("|")]
        terms: list[str] = []
        for raw in raw_terms:
            term = _normalize_term(raw)
            if not term:
                raise TermFileError(
                    f"line {lineno}: term {raw!r} is empty after normalization"
                )
            if term in terms:
                continue
            prev = owner.get(term)
            if prev is not None:
                raise TermFileError(
                    f"term {term!r} appears under classes {prev} and {index}"
                )
            owner[term] = index
            terms.append(term)
        by_index[index] = ClassEntry(index, canonical, tuple(terms))

    if not by_index:
        raise TermFileError("term file defines no classes")
    expected = set(range(len(by_index)))
    if set(by_index) != expected:
        missing = sorted(expected - set(by_index))
        raise TermFileError(f"class indices are not dense 0..{len(by_index) - 1}; missing {missing}")
    return TermDatabase(name, tuple(by_index[i] for i in sorted(by_index)))


def load_lexicon(stream: Iterable[str]) -> SynonymLexicon:
    """Parse a synonym lexicon: JSONL, one object per word with relation arrays."""
    entries: dict[str, dict[str, tuple[str, ...]]] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TermFileError(f"lexicon line {lineno}: invalid JSON: {exc.msg}") from exc
        word_tokens = normalize(str(obj.get("word", "")))
        if len(word_tokens) != 1:
            raise TermFileError(
                f"lexicon line {lineno}: 'word' must normalize to a single token"
            )
        relations: dict[str, tuple[str, ...]] = {}
        for rel in RELATIONS:
            values = obj.get(rel, [])
            if not isinstance(values, list):
                raise TermFileError(f"lexicon line {lineno}: {rel!r} must be a list")
            cleaned = []
            for value in values:
                term = _normalize_term(str(value))
                if term and term not in cleaned:
                    cleaned.append(term)
            relations[rel] = tuple(cleaned)
        entries[word_tokens[0]] = relations
    return SynonymLexicon(entries)


def expand_synset(
    db: TermDatabase,
    lexicon: SynonymLexicon,
    relations: Iterable[str],
) -> tuple[TermDatabase, dict[str, list[int]]]:
    """Append lexicon expansions of each single-word term under the chosen relations.

    Returns the expanded database plus a collision report: any term that
    would end up in more than one class is removed from every class and
    recorded as ``term -> sorted class indices``. Multi-word terms are
    kept as-is and never used as lexicon keys.
    """
    chosen = [r for r in RELATIONS if r in set(relations)]
    unknown = set(relations) - set(RELATIONS)
    if unknown:
        raise ValueError(f"unknown relations: {sorted(unknown)}")
    if not chosen:
        raise ValueError("at least one relation is required")

    proposed: dict[int, list[str]] = {}
    for entry in db.classes:
        terms = list(entry.terms)
        for term in entry.terms:
            if " " in term:
                continue
            entry_relations = lexicon.entries.get(term)
            if entry_relations is None:
                continue
            for rel in chosen:
                for new_term in entry_relations[rel]:
                    if new_term not in terms:
                        terms.append(new_term)
        proposed[entry.index] = terms

    owners: dict[str, set[int]] = {}
    for index, terms in proposed.items():
        for term in terms:
            owners.setdefault(term, set()).add(index)
    collisions = {term: sorted(ix) for term, ix in owners.items() if len(ix) > 1}

    classes = tuple(
        ClassEntry(
            entry.index,
            entry.canonical_name,
            tuple(t for t in proposed[entry.index] if t not in collisions),
        )
        for entry in db.classes
    )
    return TermDatabase(db.name, classes), collisions


def max_term_words(db: TermDatabase) -> int:
    """Word count of the longest term; the matcher never needs larger n-grams."""
    longest = 0
    for entry in db.classes:
        for term in entry.terms:
            words = term.count(" ") + 1
            if words > longest:
                longest = words
    if longest == 0:
        raise TermFileError("term database is empty")
    return longest
