"""
Nonparametric statistics: Mann–Whitney U with rank-biserial effect size, Cohen's kappa and
Tukey-fence boxplot summaries.
"""
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cache
from itertools import combinations

import numpy as np
from scipy.stats import norm, rankdata
from sklearn.metrics import cohen_kappa_score

from cpsflow.errors import EmptySampleError, LengthMismatchError, OutOfRangeUError, PreconditionError

EXACT_TEST_MAX_N = 12


class TestMethod(str, Enum):
    EXACT = "exact"
    NORMAL = "normal-approximation"


@dataclass(frozen = True)
class TestResult:
    """
    Outcome of a two-sided Mann–Whitney U test. `u_statistic` is U of sample A, i.e. the number of
    (a, b) pairs with a > b plus half the tied pairs.
    """
    u_statistic: float
    u_min: float
    p_value: float
    method: TestMethod
    rbc: float
    n_a: int
    n_b: int

    @property
    def u_b(self) -> float:
        return self.n_a * self.n_b - self.u_statistic

    def to_dict(self, metric: str) -> dict:
        return {
            "metric": metric,
            "u": self.u_statistic,
            "u_min": self.u_min,
            "p": self.p_value,
            "method": self.method.value,
            "rbc": self.rbc,
            "n_a": self.n_a,
            "n_b": self.n_b,
        }


@cache
def exact_u_distribution(n_a: int, n_b: int) -> tuple[tuple[int, int], ...]:
    """
    Null distribution of U for tie-free samples as (u, number of rank splits) pairs, found by
    enumerating every way of giving n_a of the ranks 1..n_a+n_b to sample A.
    """
    offset = n_a * (n_a + 1) // 2
    counts = Counter(sum(ranks) - offset for ranks in combinations(range(1, n_a + n_b + 1), n_a))
    return tuple(sorted(counts.items()))


def exact_p_value(u_a: float, n_a: int, n_b: int) -> float:
    """ Two-sided p-value of U against its tie-free null distribution, 2 * min(P(U <= u), P(U >= u)) capped at 1. """
    distribution = exact_u_distribution(n_a, n_b)
    total = sum(count for _, count in distribution)
    lower = sum(count for u, count in distribution if u <= u_a) / total
    upper = sum(count for u, count in distribution if u >= u_a) / total
    return min(1.0, 2.0 * min(lower, upper))


def normal_p_value(u_a: float, n_a: int, n_b: int, tie_sizes: Sequence[int] = ()) -> float:
    """
    Two-sided p-value of U under the normal approximation with tie and continuity correction.
    `tie_sizes` are the sizes of the groups of equal values in the pooled sample.
    """
    n = n_a + n_b
    ties = np.asarray(tie_sizes, dtype = float)
    tie_term = float(np.sum(ties ** 3 - ties)) / (n * (n - 1)) if n > 1 else 0.0
    sigma = np.sqrt(n_a * n_b / 12.0 * ((n + 1) - tie_term))
    if sigma == 0:
        return 1.0
    z = max(0.0, abs(u_a - n_a * n_b / 2.0) - 0.5) / sigma
    return float(min(1.0, 2.0 * norm.sf(z)))


def mann_whitney(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """
    Two-sided Mann–Whitney U test of sample `a` against sample `b`. Tied values get midranks. The
    p-value is exact, by enumeration of all rank splits, when the samples are tie-free and together
    hold at most 12 values; otherwise the tie- and continuity-corrected normal approximation is used.
    """
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise EmptySampleError("Mann–Whitney U needs at least one value in each sample")

    pooled = np.concatenate([np.asarray(a, dtype = float), np.asarray(b, dtype = float)])
    ranks = rankdata(pooled, method = "average")
    u_a = float(np.sum(ranks[:n_a]) - n_a * (n_a + 1) / 2.0)
    _, tie_sizes = np.unique(pooled, return_counts = True)
    has_ties = len(tie_sizes) < len(pooled)

    if n_a + n_b <= EXACT_TEST_MAX_N and not has_ties:
        method = TestMethod.EXACT
        p_value = exact_p_value(u_a, n_a, n_b)
    else:
        method = TestMethod.NORMAL
        p_value = normal_p_value(u_a, n_a, n_b, tie_sizes)

    return TestResult(
        u_statistic = u_a,
        u_min = min(u_a, n_a * n_b - u_a),
        p_value = p_value,
        method = method,
        rbc = rank_biserial(u_a, n_a, n_b),
        n_a = n_a,
        n_b = n_b,
    )


def rank_biserial(u_a: float, n_a: int, n_b: int) -> float:
    """ Rank-biserial correlation 1 - 2 U_A / (n_a n_b). """
    pairs = n_a * n_b
    if n_a <= 0 or n_b <= 0:
        raise PreconditionError("Rank-biserial correlation needs non-empty samples")
    if not 0 <= u_a <= pairs:
        raise OutOfRangeUError(f"U = {u_a} lies outside [0, {pairs}]")
    return 1.0 - 2.0 * u_a / pairs


def cohens_kappa(coder1: Sequence[str], coder2: Sequence[str]) -> float:
    """
    Cohen's kappa of two codings of the same utterances, (p_o - p_e) / (1 - p_e). When chance
    agreement is certain (both coders used one and the same code throughout) kappa is 1.
    """
    if len(coder1) != len(coder2):
        raise LengthMismatchError(f"Codings differ in length: {len(coder1)} vs {len(coder2)}")
    if len(coder1) == 0:
        raise PreconditionError("Kappa needs at least one coded utterance")

    labels = sorted(set(coder1) | set(coder2))
    if len(labels) == 1:
        return 1.0
    return float(cohen_kappa_score(list(coder1), list(coder2), labels = labels))


@dataclass(frozen = True)
class BoxplotSummary:
    q1: float
    median: float
    q3: float
    iqr: float
    lower_fence: float
    upper_fence: float
    outlier_ids: tuple[str, ...]


def boxplot_summary(values: Sequence[tuple[str, float]]) -> BoxplotSummary:
    """
    Quartiles by linear interpolation between closest ranks, Tukey fences at 1.5 IQR and the ids of
    values strictly outside the fences, in input order.
    """
    if len(values) == 0:
        raise EmptySampleError("Boxplot summary needs at least one value")

    data = np.array([v for _, v in values], dtype = float)
    q1, median, q3 = (float(q) for q in np.percentile(data, [25, 50, 75], method = "linear"))
    iqr = q3 - q1
    lower_fence = q1 - 1.5 * iqr
    upper_fence = q3 + 1.5 * iqr
    return BoxplotSummary(
        q1 = q1,
        median = median,
        q3 = q3,
        iqr = iqr,
        lower_fence = lower_fence,
        upper_fence = upper_fence,
        outlier_ids = tuple(student_id for student_id, v in values if v < lower_fence or v > upper_fence),
    )
