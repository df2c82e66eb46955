from __future__ import annotations

import math
import random

import pytest
from scipy import stats as scipy_stats
from scipy.special import betainc

from choir.stats import (
    chi_square_sf,
    chi_square_uniform,
    paired_ttest,
    regularized_gamma_q,
    regularized_incomplete_beta,
    student_t_two_sided_p,
)


def test_paired_ttest_textbook_example():
    # Differences 1..5: mean 3, sample sd sqrt(2.5), t = 3 / (sqrt(2.5)/sqrt(5)).
    base = [10.0, 20.0, 30.0, 40.0, 50.0]
    shifted = [b + d for b, d in zip(base, [1, 2, 3, 4, 5])]
    result = paired_ttest(shifted, base)
    assert result.t == pytest.approx(3.0 * math.sqrt(2.0), rel=1e-12)
    assert result.p == pytest.approx(0.0132355995636827, rel=1e-9)
    assert not result.degenerate


def test_paired_ttest_matches_scipy_on_random_inputs():
    rng = random.Random(42)
    for _ in range(50):
        n = rng.randint(2, 12)
        a = [rng.uniform(0, 100) for _ in range(n)]
        b = [rng.uniform(0, 100) for _ in range(n)]
        mine = paired_ttest(a, b)
        ref = scipy_stats.ttest_rel(a, b)
        assert mine.t == pytest.approx(ref.statistic, rel=1e-10)
        assert mine.p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-12)


def test_paired_ttest_identical_inputs_flagged():
    result = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert result.t == 0.0
    assert result.p == 1.0
    assert result.degenerate


def test_paired_ttest_constant_shift_flagged_infinite():
    result = paired_ttest([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
    assert math.isinf(result.t) and result.t > 0
    assert result.p == 0.0
    assert result.degenerate
    negative = paired_ttest([0.0, 1.0], [1.0, 2.0])
    assert math.isinf(negative.t) and negative.t < 0


def test_paired_ttest_input_validation():
    with pytest.raises(ValueError):
        paired_ttest([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_ttest([1.0, 2.0], [1.0])


def test_incomplete_beta_accuracy_against_scipy():
    rng = random.Random(7)
    for _ in range(500):
        a = rng.uniform(0.3, 50.0)
        b = rng.uniform(0.3, 50.0)
        x = rng.random()
        assert regularized_incomplete_beta(a, b, x) == pytest.approx(
            betainc(a, b, x), abs=1e-10
        )
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0


def test_student_t_tail_against_scipy():
    rng = random.Random(9)
    for _ in range(200):
        t = rng.uniform(-8.0, 8.0)
        df = rng.randint(1, 60)
        assert student_t_two_sided_p(t, df) == pytest.approx(
            2.0 * scipy_stats.t.sf(abs(t), df), abs=1e-10
        )
    assert student_t_two_sided_p(math.inf, 4) == 0.0


def test_chi_square_sf_against_scipy():
    rng = random.Random(11)
    for _ in range(200):
        x = rng.uniform(0.0, 60.0)
        k = rng.randint(1, 40)
        assert chi_square_sf(x, k) == pytest.approx(scipy_stats.chi2.sf(x, k), abs=1e-10)
    assert regularized_gamma_q(2.0, 0.0) == 1.0


def test_chi_square_uniform_statistic():
    stat, p = chi_square_uniform([10, 10, 10])
    assert stat == 0.0
    assert p == 1.0
    stat, p = chi_square_uniform([30, 0, 0])
    ref_stat, ref_p = scipy_stats.chisquare([30, 0, 0]).statistic, scipy_stats.chisquare([30, 0, 0]).pvalue
    assert stat == pytest.approx(ref_stat)
    assert p == pytest.approx(ref_p, abs=1e-12)
