"""
Sequential pattern mining over per-phase behavioural sequences.

Each utterance carries one indicator, so every sequence element is a single code and PrefixSpan
reduces to plain sequence mining. A pattern is contained in a sequence when its codes appear in
order, gaps allowed.
"""
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from itertools import groupby

import graphviz
from prefixspan import PrefixSpan

from cpsflow.errors import EmptyDatabaseError, NoQualifyingSupportError, PreconditionError
from cpsflow.ingest import SequenceDatabase
from cpsflow.model.framework import Condition, Phase

logger = logging.getLogger(__name__)

DEFAULT_MIN_SUPPORT = 0.30
SUPPORT_GRID: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(19, 0, -1))


@dataclass(frozen = True)
class FrequentPattern:
    """
    Mined subsequence with its statistics. Occurrence fields stay zero until the pattern goes through
    `pattern_report(...)`.
    """
    items: tuple[str, ...]
    support_count: int
    n_p: int
    occurrence_count: int = 0
    occurrence_pct: float = 0.0

    def __len__(self):
        return len(self.items)

    def __str__(self):
        return "⟨" + ", ".join(self.items) + "⟩"

    @property
    def support_fraction(self) -> float:
        return self.support_count / self.n_p

    @property
    def student_pct(self) -> float:
        return 100.0 * self.support_fraction

    @property
    def sort_key(self) -> tuple[int, tuple[str, ...]]:
        return len(self.items), self.items


def support_threshold(min_support: float, n_p: int) -> int:
    """ Minimum number of supporting sequences, ceil(min_support * n_p), safe against float noise. """
    return max(1, math.ceil(min_support * n_p - 1e-9))


def merge_consecutive(seq: Sequence[str]) -> list[str]:
    """ Collapse every run of equal adjacent codes into one code. """
    return [code for code, _ in groupby(seq)]


def merge_database(db: SequenceDatabase) -> SequenceDatabase:
    return SequenceDatabase(
        phase = db.phase,
        condition = db.condition,
        sequences = {student_id: tuple(merge_consecutive(seq)) for student_id, seq in db.sequences.items()},
    )


def prefix_span(
        db: SequenceDatabase,
        min_support: float,
        max_pattern_length: int | None = None
) -> list[FrequentPattern]:
    """
    All patterns, of any length >= 1, contained in at least ceil(min_support * n_p) sequences.
    Patterns are ordered by length and then lexicographically. `max_pattern_length` of None means
    no length limit.
    """
    if db.n_p == 0:
        raise EmptyDatabaseError(f"No sequences for {db.phase.value} / {db.condition.value}")
    if not 0 < min_support <= 1:
        raise PreconditionError(f"min_support must lie in (0, 1], got {min_support}")

    miner = PrefixSpan([list(seq) for seq in db.as_list()])
    if max_pattern_length is not None:
        miner.maxlen = max_pattern_length
    threshold = support_threshold(min_support, db.n_p)

    patterns = [
        FrequentPattern(items = tuple(items), support_count = support, n_p = db.n_p)
        for support, items in miner.frequent(threshold)
    ]
    return sorted(patterns, key = lambda p: p.sort_key)


def filter_patterns(patterns: list[FrequentPattern]) -> list[FrequentPattern]:
    """ Drop patterns of a single code, progressions need at least two. """
    return [p for p in patterns if len(p.items) >= 2]


def auto_tune_min_support(db: SequenceDatabase) -> float:
    """
    Largest min_support on the grid 0.95, 0.90, ..., 0.05 at which at least one pattern of three or
    more codes is frequent. Raises NoQualifyingSupportError if there is none.
    """
    if db.n_p == 0:
        raise EmptyDatabaseError(f"No sequences for {db.phase.value} / {db.condition.value}")

    tried_thresholds: set[int] = set()
    for min_support in SUPPORT_GRID:
        threshold = support_threshold(min_support, db.n_p)
        if threshold in tried_thresholds:
            continue
        tried_thresholds.add(threshold)
        # a pattern of length >= 3 is frequent iff one of length exactly 3 is
        if any(len(p) == 3 for p in prefix_span(db, min_support, max_pattern_length = 3)):
            return min_support

    raise NoQualifyingSupportError(
        f"No min_support on the grid yields a length-3 pattern for {db.phase.value} / {db.condition.value}"
    )


def count_occurrences(pattern: Sequence[str] | FrequentPattern, db: SequenceDatabase) -> int:
    """
    Disjoint occurrences of the pattern summed over all sequences. Within a sequence the leftmost
    greedy match is taken and matching restarts right after it.
    """
    items = pattern.items if isinstance(pattern, FrequentPattern) else tuple(pattern)
    if len(items) < 2:
        raise PreconditionError("Occurrences are only counted for patterns of at least two codes")

    total = 0
    for seq in db.as_list():
        matched = 0
        for code in seq:
            if code == items[matched]:
                matched += 1
                if matched == len(items):
                    total += 1
                    matched = 0
    return total


def pattern_report(
        db: SequenceDatabase,
        min_support: float,
        max_pattern_length: int | None = None
) -> list[FrequentPattern]:
    """
    Frequent progressions of two or more codes with support, occurrence count and percentage
    contribution to all occurrences of the reported patterns.
    """
    merged = merge_database(db)
    patterns = filter_patterns(prefix_span(merged, min_support, max_pattern_length))
    counts = [count_occurrences(p, merged) for p in patterns]
    total = sum(counts)
    return [
        replace(p, occurrence_count = count, occurrence_pct = 100.0 * count / total if total > 0 else 0.0)
        for p, count in zip(patterns, counts)
    ]


@dataclass(frozen = True)
class PatternReport:
    """ Pattern report of one (phase, condition) cell. `min_support` is None when the cell has no sequences. """
    phase: Phase
    condition: Condition
    n_p: int
    min_support: float | None
    patterns: tuple[FrequentPattern, ...]

    @property
    def name(self) -> str:
        return f"patterns_{self.phase.value}_{self.condition.value.lower()}"

    def to_json(self) -> str:
        return json.dumps({
            "phase": self.phase.value,
            "condition": self.condition.value,
            "n_p": self.n_p,
            "min_support": self.min_support,
            "patterns": [
                {
                    "items": list(p.items),
                    "support_count": p.support_count,
                    "student_pct": p.student_pct,
                    "occurrence_count": p.occurrence_count,
                    "occurrence_pct": p.occurrence_pct,
                }
                for p in self.patterns
            ],
        }, indent = 2) + "\n"

    def to_dot(self) -> str:
        """
        Flow diagram: one node per (step, code) and one chain of edges per pattern, each edge labelled
        with the pattern's student and occurrence percentages.
        """
        dot = graphviz.Digraph(
            name = self.name,
            graph_attr = {
                "rankdir": "LR",
                "label": f"{self.phase.value} {self.phase.label} :: {self.condition.value} (n = {self.n_p})",
            },
        )
        nodes: list[tuple[int, str]] = sorted({(step, code) for p in self.patterns for step, code in enumerate(p.items)})
        for step, code in nodes:
            dot.node(f"n{step}_{code}", label = code)
        for p in self.patterns:
            label = f"{p.student_pct:.1f}% / {p.occurrence_pct:.1f}%"
            for step in range(len(p.items) - 1):
                dot.edge(f"n{step}_{p.items[step]}", f"n{step + 1}_{p.items[step + 1]}", label = label)
        return dot.source
