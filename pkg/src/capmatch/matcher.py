"""The subset-matching engine.

A caption is labeled with class c when one of c's terms occurs as a
contiguous token n-gram of the normalized caption. What happens when terms
from several classes occur is the matching strategy's call:

* ``strict``      label only when exactly one distinct class was hit
* ``single_class`` take the class hit earliest in the caption
* ``multi_class``  take every hit class, capped at ``mc_cap``
* ``anticlass``    select the complement: no labels, the matched flag marks hits

Lookup goes through a single shared index keyed by normalized term text,
so per-n-gram cost is one dict probe regardless of vocabulary size. The
fuzzy path (token-wise Levenshtein ratio) only runs for caption tokens the
exact index missed, and only against single-word terms.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .corpus import Sample, compose_caption
from .termdb import TermDatabase, max_term_words
from .textproc import normalize

STRATEGY_KINDS = ("strict", "single_class", "multi_class", "anticlass")


@dataclass(frozen=True)
class MatchStrategy:
    kind: str
    mc_cap: int = 25

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.mc_cap < 1:
            raise ValueError("mc_cap must be positive")


@dataclass(frozen=True)
class FuzzyOptions:
    enabled: bool = False
    threshold: int = 55

    def __post_init__(self):
        if not 0 <= self.threshold <= 100:
            raise ValueError("fuzzy threshold must be in [0, 100]")


@dataclass(frozen=True)
class Hit:
    class_index: int
    term: str
    position: int


@dataclass
class MatchOutcome:
    sample_id: str
    labels: list[int]
    hits: list[Hit]
    matched: bool


@dataclass
class CorpusTallies:
    total: int = 0
    matched: int = 0
    labeled: int = 0
    per_class: Counter = field(default_factory=Counter)

    @property
    def hit_rate(self) -> float:
        return self.matched / self.total if self.total else 0.0

    def add(self, outcome: MatchOutcome) -> None:
        self.total += 1
        if outcome.matched:
            self.matched += 1
        if outcome.labels:
            self.labeled += 1
            self.per_class.update(outcome.labels)

    def merge(self, other: "CorpusTallies") -> None:
        self.total += other.total
        self.matched += other.matched
        self.labeled += other.labeled
        self.per_class.update(other.per_class)


def levenshtein(a: str, b: str) -> int:
    """Edit distance, two-row dynamic program."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def fuzzy_similarity(a: str, b: str) -> int:
    """100 * (1 - levenshtein/max_len), floored; 100 iff the tokens are equal."""
    if a == b:
        return 100
    longest = max(len(a), len(b))
    return int(100 * (1 - levenshtein(a, b) / longest))


def _lev_within(a: str, b: str, k: int) -> int:
    """Levenshtein distance when it is <= k; any value > k otherwise.

    Banded two-row DP: a cell whose true distance is <= k always lies in
    the |i - j| <= k band, so everything outside can be pinned at k + 1,
    and a row whose minimum exceeds k can abandon early.
    """
    la, lb = len(a), len(b)
    if la > lb:
        a, b, la, lb = b, a, lb, la
    if lb - la > k:
        return k + 1
    cap = k + 1
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        ca = a[i - 1]
        cur = [cap] * (lb + 1)
        cur[0] = i
        best = i
        for j in range(max(1, i - k), min(lb, i + k) + 1):
            v = prev[j] + 1
            left = cur[j - 1] + 1
            if left < v:
                v = left
            diag = prev[j - 1] + (ca != b[j - 1])
            if diag < v:
                v = diag
            cur[j] = v
            if v < best:
                best = v
        if best > k:
            return cap
        prev = cur
    return prev[lb]


class TermIndex:
    """Read-only lookup structures compiled from a TermDatabase.

    Safe to share across threads and cheap to pickle into worker
    processes; build it once per corpus run.
    """

    def __init__(self, db: TermDatabase):
        self.db = db
        self.exact: dict[str, tuple[int, str]] = {}
        self.single_word: list[tuple[str, int]] = []
        for entry in db.classes:
            for term in entry.terms:
                self.exact[term] = (entry.index, term)
                if " " not in term:
                    self.single_word.append((term, entry.index))
        self.max_words = max_term_words(db)

    def __len__(self) -> int:
        return len(self.exact)


def build_index(db: TermDatabase | TermIndex) -> TermIndex:
    return db if isinstance(db, TermIndex) else TermIndex(db)


def _fuzzy_hits(
    index: TermIndex, tokens: list[str], threshold: int
) -> Iterator[Hit]:
    # similarity >= threshold is exactly levenshtein <= max_len*(100-t)//100,
    # so the scan runs the cutoff-aware distance instead of the full one
    for position, token in enumerate(tokens):
        if token in index.exact:
            continue
        lt = len(token)
        for term, class_index in index.single_word:
            longest = max(lt, len(term))
            k = longest * (100 - threshold) // 100
            if _lev_within(token, term, k) <= k:
                yield Hit(class_index, term, position)


def select_labels(hits: list[Hit], strategy: MatchStrategy) -> list[int]:
    """Apply a strategy's label-selection rule to a sample's hits."""
    if strategy.kind == "anticlass" or not hits:
        return []
    first_pos: dict[int, int] = {}
    for hit in hits:
        if hit.class_index not in first_pos:
            first_pos[hit.class_index] = hit.position
    classes = sorted(first_pos, key=lambda c: (first_pos[c], c))
    if strategy.kind == "strict":
        return classes if len(classes) == 1 else []
    if strategy.kind == "single_class":
        return classes[:1]
    return classes[: strategy.mc_cap]


def match_sample(
    caption: str,
    db: TermDatabase | TermIndex,
    strategy: MatchStrategy,
    fuzzy: FuzzyOptions = FuzzyOptions(),
    sample_id: str = "",
) -> MatchOutcome:
    """Label one caption. Hits record every term occurrence with its position."""
    index = build_index(db)
    tokens = normalize(caption)
    exact = index.exact
    length = len(tokens)
    max_n = min(index.max_words, length)
    hits: list[Hit] = []
    for start in range(length):
        token = tokens[start]
        found = exact.get(token)
        if found is not None:
            hits.append(Hit(found[0], found[1], start))
        limit = min(max_n, length - start)
        for n in range(2, limit + 1):
            found = exact.get(" ".join(tokens[start : start + n]))
            if found is not None:
                hits.append(Hit(found[0], found[1], start))
    if fuzzy.enabled:
        hits.extend(_fuzzy_hits(index, tokens, fuzzy.threshold))
    hits.sort(key=lambda h: (h.position, h.class_index, h.term))
    return MatchOutcome(sample_id, select_labels(hits, strategy), hits, bool(hits))


def match_corpus(
    samples: Iterable[Sample],
    source: str,
    db: TermDatabase | TermIndex,
    strategy: MatchStrategy,
    fuzzy: FuzzyOptions = FuzzyOptions(),
) -> tuple[list[MatchOutcome], CorpusTallies]:
    """Label a corpus. Outcomes come back in input order with corpus tallies."""
    index = build_index(db)
    outcomes: list[MatchOutcome] = []
    tallies = CorpusTallies()
    for sample in samples:
        outcome = match_sample(
            compose_caption(sample, source), index, strategy, fuzzy, sample.id
        )
        outcomes.append(outcome)
        tallies.add(outcome)
    return outcomes, tallies
