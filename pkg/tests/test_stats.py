import warnings

import numpy as np
import pytest

from cpsflow.errors import EmptySampleError, LengthMismatchError, OutOfRangeUError, PreconditionError
from cpsflow.oracles import NORMAL_TOLERANCE
from cpsflow.stats import TestMethod as Method
from cpsflow.stats import (
    boxplot_summary, cohens_kappa, exact_p_value, exact_u_distribution, mann_whitney, normal_p_value,
    rank_biserial
)


def test_mann_whitney_separated_samples():
    r = mann_whitney([1, 2], [3, 4])
    assert r.u_statistic == 0
    assert r.u_b == 4
    assert r.method == Method.EXACT
    assert r.p_value == pytest.approx(1 / 3)
    assert r.rbc == 1.0


def test_mann_whitney_identical_samples():
    r = mann_whitney([1, 2, 3], [1, 2, 3])
    assert r.u_statistic == 4.5
    assert r.u_min == 4.5
    assert r.method == Method.NORMAL
    assert r.p_value == 1.0
    assert r.rbc == 0.0


def test_mann_whitney_empty_sample():
    with pytest.raises(EmptySampleError):
        mann_whitney([], [1.0])
    with pytest.raises(EmptySampleError):
        mann_whitney([1.0], [])


def test_mann_whitney_large_samples_use_normal_approximation():
    r = mann_whitney(list(range(7)), [x + 0.5 for x in range(7)])
    assert r.method == Method.NORMAL
    assert 0 < r.p_value <= 1


def test_mann_whitney_antisymmetry():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.integers(0, 10, size = int(rng.integers(1, 9))).tolist()
        b = rng.integers(0, 10, size = int(rng.integers(1, 9))).tolist()
        ab = mann_whitney(a, b)
        ba = mann_whitney(b, a)
        assert ab.u_statistic + ba.u_statistic == pytest.approx(len(a) * len(b))
        assert ab.u_statistic + ab.u_b == pytest.approx(len(a) * len(b))
        assert ab.p_value == pytest.approx(ba.p_value)
        assert ab.rbc == pytest.approx(-ba.rbc)
        assert 0 < ab.p_value <= 1


def test_mann_whitney_is_rank_based():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.uniform(0, 1, size = 8)
        b = rng.uniform(0, 1, size = 9)
        raw = mann_whitney(a, b)
        # normalizing by a common positive maximum keeps the ranks
        scale = max(a.max(), b.max())
        normalized = mann_whitney(a / scale, b / scale)
        transformed = mann_whitney(np.exp(a), np.exp(b))
        for r in (normalized, transformed):
            assert r.u_statistic == raw.u_statistic
            assert r.p_value == pytest.approx(raw.p_value)


def test_exact_u_distribution():
    assert exact_u_distribution(2, 2) == ((0, 1), (1, 1), (2, 2), (3, 1), (4, 1))
    assert sum(count for _, count in exact_u_distribution(6, 6)) == 924
    assert exact_p_value(2, 2, 2) == 1.0


def test_normal_approximation_is_close_to_exact():
    rng = np.random.default_rng(11)
    for _ in range(100):
        ranks = rng.permutation(12)
        a, b = ranks[:6], ranks[6:]
        r = mann_whitney(a, b)
        assert r.method == Method.EXACT
        assert normal_p_value(r.u_statistic, 6, 6) == pytest.approx(r.p_value, abs = NORMAL_TOLERANCE)


def test_normal_approximation_gap_over_every_u():
    gaps = [abs(normal_p_value(u, 6, 6) - exact_p_value(u, 6, 6)) for u in range(37)]
    worst = max(gaps)
    assert 0.01 < worst < NORMAL_TOLERANCE
    assert gaps[24] > 0.01


def test_normal_p_value_degenerate():
    # every value tied, no spread
    assert normal_p_value(0.5, 1, 1, tie_sizes = [2]) == 1.0


def test_rank_biserial():
    assert rank_biserial(0, 2, 2) == 1.0
    assert rank_biserial(2, 2, 2) == 0.0
    assert rank_biserial(4, 2, 2) == -1.0
    assert rank_biserial(19.5, 3, 13) == 0.0

    with pytest.raises(OutOfRangeUError):
        rank_biserial(5, 2, 2)
    with pytest.raises(OutOfRangeUError):
        rank_biserial(-1, 2, 2)
    with pytest.raises(PreconditionError):
        rank_biserial(0, 0, 2)


def test_result_export():
    d = mann_whitney([1, 2], [3, 4]).to_dict("quantity")
    assert d == {
        "metric": "quantity", "u": 0.0, "u_min": 0.0, "p": pytest.approx(1 / 3), "method": "exact",
        "rbc": 1.0, "n_a": 2, "n_b": 2,
    }


def test_cohens_kappa():
    codes = ["PS04", "S4", "OT2", "PS20"]
    assert cohens_kappa(codes, codes) == 1.0
    assert cohens_kappa(["A", "A", "B", "B"], ["A", "B", "A", "B"]) == pytest.approx(0.0)
    # one code throughout, chance agreement is certain
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert cohens_kappa(["OT2"] * 3, ["OT2"] * 3) == 1.0
    assert cohens_kappa(["PS04", "S4", "S4"], ["PS04", "S4", "OT2"]) == pytest.approx(0.5)

    with pytest.raises(LengthMismatchError):
        cohens_kappa(["A"], ["A", "B"])
    with pytest.raises(PreconditionError):
        cohens_kappa([], [])


def test_cohens_kappa_symmetry():
    rng = np.random.default_rng(13)
    labels = ["PS04", "PS20", "S1", "S4", "OT2"]
    for _ in range(50):
        n = int(rng.integers(2, 30))
        coder1 = rng.choice(labels, size = n).tolist()
        coder2 = [c if rng.uniform() < 0.7 else str(rng.choice(labels)) for c in coder1]
        kappa = cohens_kappa(coder1, coder2)
        assert cohens_kappa(coder2, coder1) == pytest.approx(kappa)

        order = rng.permutation(n)
        assert cohens_kappa([coder1[i] for i in order], [coder2[i] for i in order]) == pytest.approx(kappa)
        assert kappa <= 1.0


def test_boxplot_summary():
    s = boxplot_summary([(f"s{v}", float(v)) for v in (1, 2, 3, 4, 5)])
    assert (s.q1, s.median, s.q3) == (2.0, 3.0, 4.0)
    assert s.iqr == 2.0
    assert (s.lower_fence, s.upper_fence) == (-1.0, 7.0)
    assert s.outlier_ids == ()

    s = boxplot_summary([("s1", 0.4)])
    assert s.q1 == s.median == s.q3 == 0.4
    assert s.outlier_ids == ()

    s = boxplot_summary([("a", 1), ("b", 100), ("c", 1), ("d", 1), ("e", 1)])
    assert s.outlier_ids == ("b",)
    assert s.q1 <= s.median <= s.q3

    with pytest.raises(EmptySampleError):
        boxplot_summary([])
