"""Self-contained statistics kernel: paired t-test and chi-square tails.

p-values go through an in-house regularized incomplete beta (continued
fraction) and incomplete gamma (series / continued fraction), both accurate
to well under 1e-10 over the ranges used here, so the evaluation contract
carries no statistics dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

_MAX_ITER = 500
_EPS = 1e-15
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    # Lentz's continued fraction for the incomplete beta function.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    n = a
    for _ in range(_MAX_ITER):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cf(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x)."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cf(a, x)


def student_t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    note: str | None = None

    @property
    def degenerate(self) -> bool:
        return self.note is not None


def paired_ttest(scores_a: Sequence[float], scores_b: Sequence[float]) -> TTestResult:
    """Paired t statistic on the differences, two-sided p.

    Zero-variance differences are flagged rather than raised: all-zero
    differences give t = 0, p = 1; a constant nonzero shift gives an
    infinite t with p -> 0.
    """
    if len(scores_a) != len(scores_b):
        raise ValueError("paired t-test needs equally long score lists")
    n = len(scores_a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    diffs = [float(a) - float(b) for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, note="zero variance, zero mean difference")
        return TTestResult(
            t=math.copysign(math.inf, mean), p=0.0, note="zero variance, constant difference"
        )
    t = mean / math.sqrt(var / n)
    return TTestResult(t=t, p=student_t_two_sided_p(t, n - 1))


def chi_square_sf(stat: float, dof: int) -> float:
    """Survival function of the chi-square distribution."""
    if dof < 1:
        raise ValueError("degrees of freedom must be >= 1")
    return regularized_gamma_q(dof / 2.0, stat / 2.0)


def chi_square_uniform(counts: Sequence[int]) -> tuple[float, float]:
    """Chi-square statistic and p-value against the uniform distribution."""
    k = len(counts)
    if k < 2:
        raise ValueError("need at least two categories")
    total = sum(counts)
    if total <= 0:
        raise ValueError("counts must sum to a positive total")
    expected = total / k
    stat = sum((c - expected) ** 2 / expected for c in counts)
    return stat, chi_square_sf(stat, k - 1)
