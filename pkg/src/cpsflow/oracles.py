"""
Brute-force oracles that check the miner, the Mann–Whitney test and the null-model threshold against
direct enumeration on seeded random inputs.
"""
import logging
from collections import Counter
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Any

import numpy as np

from cpsflow.hina import binomial_threshold, null_p_values
from cpsflow.ingest import SequenceDatabase
from cpsflow.spm import prefix_span, support_threshold
from cpsflow.stats import TestMethod, exact_p_value, mann_whitney, normal_p_value

logger = logging.getLogger(__name__)

SPM_ALPHABET = ("a", "b", "c", "d", "e")
SPM_SUPPORTS = (0.25, 0.5)
BINOMIAL_ALPHAS = (0.05, 0.01, 0.1)
# continuity-corrected normal p is off by up to 0.0155 from the exact p at n_a = n_b = 6
NORMAL_TOLERANCE = 0.02


class OracleKind(str, Enum):
    SPM = "spm"
    MWU = "mwu"
    BINOMIAL = "binomial"

    @property
    def default_trials(self) -> int:
        match self:
            case OracleKind.SPM:
                return 1000
            case OracleKind.MWU:
                return 200
            case OracleKind.BINOMIAL:
                return 100

    @staticmethod
    def value_of(s: Any) -> "OracleKind":
        match s:
            case OracleKind():
                return s
            case "spm" | "SPM":
                return OracleKind.SPM
            case "mwu" | "MWU":
                return OracleKind.MWU
            case "binomial" | "BINOMIAL":
                return OracleKind.BINOMIAL
            case _:
                raise RuntimeError(f"Unknown oracle \"{s}\"")


@dataclass(frozen = True)
class OracleOutcome:
    kind: OracleKind
    trials: int
    passed: int
    counterexample: str | None = None

    @property
    def ok(self) -> bool:
        return self.passed == self.trials

    def __str__(self):
        return f"{self.passed}/{self.trials} match"


################################ Shrinking ################################
def _smaller_cases(case: list[list]) -> Iterator[list[list]]:
    for i in range(len(case)):
        yield case[:i] + case[i + 1:]
    for i, part in enumerate(case):
        for j in range(len(part)):
            yield case[:i] + [part[:j] + part[j + 1:]] + case[i + 1:]


def shrink(case: list[list], fails: Callable[[list[list]], bool]) -> list[list]:
    """ Greedily drop whole parts, then single elements, for as long as the case keeps failing. """
    while True:
        smaller = next((c for c in _smaller_cases(case) if fails(c)), None)
        if smaller is None:
            return case
        case = smaller


################################ Sequential pattern mining ################################
def brute_force_frequent(db: SequenceDatabase, min_support: float) -> dict[tuple[str, ...], int]:
    """ Support count of every subsequence contained in at least ceil(min_support * n_p) sequences. """
    threshold = support_threshold(min_support, db.n_p)
    counts: Counter = Counter()
    for seq in db.as_list():
        counts.update({
            tuple(seq[i] for i in positions)
            for size in range(1, len(seq) + 1)
            for positions in combinations(range(len(seq)), size)
        })
    return {pattern: count for pattern, count in counts.items() if count >= threshold}


def _spm_mismatch(sequences: list[list[str]], min_support: float) -> bool:
    db = SequenceDatabase.from_sequences(sequences)
    if db.n_p == 0:
        return False
    mined = {p.items: p.support_count for p in prefix_span(db, min_support)}
    return mined != brute_force_frequent(db, min_support)


def spm_oracle(trials: int = 1000, seed: int = 0) -> OracleOutcome:
    rng = np.random.default_rng(seed)
    passed = 0
    for trial in range(trials):
        n_p = int(rng.integers(1, 9))
        sequences = [
            [SPM_ALPHABET[k] for k in rng.integers(0, len(SPM_ALPHABET), size = int(rng.integers(1, 9)))]
            for _ in range(n_p)
        ]
        min_support = SPM_SUPPORTS[int(rng.integers(0, len(SPM_SUPPORTS)))]
        if not _spm_mismatch(sequences, min_support):
            passed += 1
            continue

        minimal = shrink(sequences, lambda case: _spm_mismatch(case, min_support))
        counterexample = f"min_support = {min_support}, sequences = {minimal}"
        logger.error(f"spm oracle mismatch at trial {trial}: {counterexample}")
        return OracleOutcome(OracleKind.SPM, trials, passed, counterexample)
    return OracleOutcome(OracleKind.SPM, trials, passed)


################################ Mann–Whitney ################################
def enumerated_p_value(a: list[float], b: list[float]) -> float:
    """
    Exact two-sided p-value by splitting the pooled values into every possible sample A of size
    len(a) and counting the pairs won by A directly. Tie-free samples only.
    """
    pooled = list(a) + list(b)
    n_a = len(a)

    def u_of(sample_a: tuple[float, ...]) -> int:
        sample_b = [v for v in pooled if v not in sample_a]
        return sum(1 for x in sample_a for y in sample_b if x > y)

    observed = u_of(tuple(a))
    us = [u_of(split) for split in combinations(pooled, n_a)]
    lower = sum(1 for u in us if u <= observed) / len(us)
    upper = sum(1 for u in us if u >= observed) / len(us)
    return min(1.0, 2.0 * min(lower, upper))


def _mwu_mismatch(case: list[list[float]]) -> bool:
    if len(case) != 2 or len(case[0]) == 0 or len(case[1]) == 0:
        return False
    a, b = case
    forward = mann_whitney(a, b)
    backward = mann_whitney(b, a)
    if forward.u_statistic + backward.u_statistic != len(a) * len(b):
        return True
    if forward.method == TestMethod.EXACT and abs(forward.p_value - enumerated_p_value(a, b)) > 1e-12:
        return True
    return False


def _normal_mismatch(case: list[list[float]]) -> bool:
    if len(case) != 2 or len(case[0]) == 0 or len(case[1]) == 0:
        return False
    a, b = case
    u_a = mann_whitney(a, b).u_statistic
    return abs(normal_p_value(u_a, len(a), len(b)) - exact_p_value(u_a, len(a), len(b))) > NORMAL_TOLERANCE


def _tie_free_sample(rng: np.random.Generator, n: int) -> list[float]:
    return [float(v) for v in rng.permutation(1000)[:n]]


def mwu_oracle(trials: int = 200, seed: int = 0) -> OracleOutcome:
    """
    Half of the trials compare exact p-values with split enumeration on tie-free samples of at most
    ten values; the other half compare the normal approximation with the exact p-value on 6 + 6
    tie-free samples. Every trial also checks U_A + U_B = n_a * n_b.
    """
    rng = np.random.default_rng(seed)
    passed = 0
    for trial in range(trials):
        if trial % 2 == 0:
            n_a = int(rng.integers(1, 10))
            n_b = int(rng.integers(1, 11 - n_a))
            check = _mwu_mismatch
        else:
            n_a, n_b = 6, 6
            check = lambda case: _mwu_mismatch(case) or _normal_mismatch(case)
        values = _tie_free_sample(rng, n_a + n_b)
        case = [values[:n_a], values[n_a:]]
        if not check(case):
            passed += 1
            continue

        minimal = shrink(case, _mwu_mismatch) if _mwu_mismatch(case) else case
        counterexample = f"a = {minimal[0]}, b = {minimal[1]}"
        logger.error(f"mwu oracle mismatch at trial {trial}: {counterexample}")
        return OracleOutcome(OracleKind.MWU, trials, passed, counterexample)
    return OracleOutcome(OracleKind.MWU, trials, passed)


################################ Binomial null model ################################
def exact_binomial_threshold(total_weight: int, cells: int, alpha: float) -> int:
    """
    Smallest q with P(X <= q) >= 1 - alpha for X ~ Binomial(total_weight, 1 / cells), by summing the
    CDF in exact integer arithmetic: P(X = k) * cells^W = C(W, k) * (cells - 1)^(W - k).
    """
    if cells == 1:
        return total_weight

    alpha = Fraction(str(alpha))
    target = (alpha.denominator - alpha.numerator) * cells ** total_weight
    term = (cells - 1) ** total_weight
    cumulative = term
    q = 0
    while cumulative * alpha.denominator < target:
        term = term * (total_weight - q) // ((q + 1) * (cells - 1))
        q += 1
        cumulative += term
    return q


def _binomial_mismatch(total_weight: int, cells: int, alpha: float) -> bool:
    if binomial_threshold(total_weight, cells, alpha) != exact_binomial_threshold(total_weight, cells, alpha):
        return True
    p_values = null_p_values(np.arange(0, total_weight + 1), total_weight, cells)
    return bool(np.any(np.diff(p_values) > 1e-12))


def binomial_oracle(trials: int = 100, seed: int = 0) -> OracleOutcome:
    """ First trial is the W = 20, K = 4 case, the rest draw W <= 10000 and K <= 256 at random. """
    rng = np.random.default_rng(seed)
    passed = 0
    for trial in range(trials):
        if trial == 0:
            total_weight, cells, alpha = 20, 4, 0.05
        else:
            total_weight = int(rng.integers(1, 10001))
            cells = int(rng.integers(1, 257))
            alpha = BINOMIAL_ALPHAS[int(rng.integers(0, len(BINOMIAL_ALPHAS)))]
        if not _binomial_mismatch(total_weight, cells, alpha):
            passed += 1
            continue

        counterexample = (
            f"W = {total_weight}, K = {cells}, alpha = {alpha}: threshold "
            f"{binomial_threshold(total_weight, cells, alpha)} vs exact "
            f"{exact_binomial_threshold(total_weight, cells, alpha)}"
        )
        logger.error(f"binomial oracle mismatch at trial {trial}: {counterexample}")
        return OracleOutcome(OracleKind.BINOMIAL, trials, passed, counterexample)
    return OracleOutcome(OracleKind.BINOMIAL, trials, passed)


def run_oracle(kind: str | OracleKind, trials: int | None = None, seed: int = 0) -> OracleOutcome:
    kind = OracleKind.value_of(kind)
    trials = kind.default_trials if trials is None else trials
    match kind:
        case OracleKind.SPM:
            return spm_oracle(trials, seed)
        case OracleKind.MWU:
            return mwu_oracle(trials, seed)
        case OracleKind.BINOMIAL:
            return binomial_oracle(trials, seed)
