"""Wigner 3j / 6j symbols and Clebsch-Gordan coefficients (integer spins).

The floating-point path evaluates the Racah single-sum formulas from a
table of log-factorials with compensated summation. An exact path built
on :class:`fractions.Fraction` and big-integer factorials exists for
certification and for printing closed forms; it is never used by the
numerical modules.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import ModeIndexError

__all__ = [
    "ThreeJArgs",
    "SixJArgs",
    "ExactValue",
    "triangle_ok",
    "wigner_3j",
    "wigner_6j",
    "clebsch_gordan",
    "biedenharn_elliott_residual",
    "exact_wigner_3j",
    "exact_wigner_6j",
    "exact_clebsch_gordan",
]

J_MAX = 40
_LOG_FACT = np.array([math.lgamma(k + 1.0) for k in range(4 * J_MAX + 2)])


class ThreeJArgs(NamedTuple):
    j1: int
    j2: int
    j3: int
    m1: int
    m2: int
    m3: int


class SixJArgs(NamedTuple):
    j1: int
    j2: int
    j3: int
    j4: int
    j5: int
    j6: int


def triangle_ok(a, b, c) -> bool:
    """True iff ``|a - b| <= c <= a + b``."""
    return abs(a - b) <= c <= a + b


def _kahan(values):
    total = 0.0
    comp = 0.0
    for v in values:
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _lf(n):
    return _LOG_FACT[n]


def _log_delta(a, b, c):
    return _lf(a + b - c) + _lf(a - b + c) + _lf(-a + b + c) - _lf(a + b + c + 1)


def _check_projections(js, ms):
    for j, m in zip(js, ms):
        if j < 0 or abs(m) > j:
            raise ModeIndexError(f"projection {m} out of range for angular momentum {j}")
    if max(js) > J_MAX:
        raise ModeIndexError(f"angular momentum above supported maximum {J_MAX}")


def _three_j_kmin_kmax(j1, j2, j3, m1, m2):
    kmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    kmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    return kmin, kmax


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol; 0.0 whenever a selection rule fails."""
    _check_projections((j1, j2, j3), (m1, m2, m3))
    if m1 + m2 + m3 != 0 or not triangle_ok(j1, j2, j3):
        return 0.0
    kmin, kmax = _three_j_kmin_kmax(j1, j2, j3, m1, m2)
    if kmin > kmax:
        return 0.0
    log_pre = 0.5 * (
        _log_delta(j1, j2, j3)
        + _lf(j1 + m1) + _lf(j1 - m1)
        + _lf(j2 + m2) + _lf(j2 - m2)
        + _lf(j3 + m3) + _lf(j3 - m3)
    )
    terms = []
    for k in range(kmin, kmax + 1):
        log_den = (
            _lf(k) + _lf(j3 - j2 + k + m1) + _lf(j3 - j1 + k - m2)
            + _lf(j1 + j2 - j3 - k) + _lf(j1 - k - m1) + _lf(j2 - k + m2)
        )
        sign = -1.0 if k % 2 else 1.0
        terms.append(sign * math.exp(log_pre - log_den))
    phase = -1.0 if (j1 - j2 - m3) % 2 else 1.0
    return phase * _kahan(terms)


def clebsch_gordan(j1, m1, j2, m2, j3, m3) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | j3 m3>``."""
    _check_projections((j1, j2, j3), (m1, m2, m3))
    if m3 != m1 + m2:
        return 0.0
    phase = -1.0 if (j1 - j2 + m3) % 2 else 1.0
    return phase * math.sqrt(2 * j3 + 1) * wigner_3j(j1, j2, j3, m1, m2, -m3)


def _six_j_bounds(j1, j2, j3, j4, j5, j6):
    triads = ((j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3))
    if not all(triangle_ok(*t) for t in triads):
        return None
    a = [sum(t) for t in triads]
    b = (j1 + j2 + j4 + j5, j2 + j3 + j5 + j6, j3 + j1 + j6 + j4)
    return triads, a, b


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol ``{j1 j2 j3; j4 j5 j6}``; 0.0 on triangle failure."""
    js = (j1, j2, j3, j4, j5, j6)
    if min(js) < 0:
        raise ModeIndexError(f"angular momenta must be nonnegative, got {js}")
    if max(js) > J_MAX:
        raise ModeIndexError(f"angular momentum above supported maximum {J_MAX}")
    bounds = _six_j_bounds(*js)
    if bounds is None:
        return 0.0
    triads, a, b = bounds
    log_pre = 0.5 * sum(_log_delta(*t) for t in triads)
    terms = []
    for t in range(max(a), min(b) + 1):
        log_num = _lf(t + 1)
        log_den = sum(_lf(t - ai) for ai in a) + sum(_lf(bi - t) for bi in b)
        sign = -1.0 if t % 2 else 1.0
        terms.append(sign * math.exp(log_pre + log_num - log_den))
    return _kahan(terms)


def biedenharn_elliott_residual(a, b, c, d, e, f, p, q, r) -> float:
    """``|LHS - RHS|`` of the Biedenharn-Elliott identity.

    LHS = sum_x (-1)^(S+x) (2x+1) {a b x; c d p} {c d x; e f q} {e f x; b a r}
    RHS = {p q r; e a d} {p q r; f b c},  S = a+b+c+d+e+f+p+q+r.
    """
    s = a + b + c + d + e + f + p + q + r
    x_hi = min(a + b, c + d, e + f)
    x_lo = max(abs(a - b), abs(c - d), abs(e - f))
    terms = []
    for x in range(x_lo, x_hi + 1):
        sign = -1.0 if (s + x) % 2 else 1.0
        terms.append(
            sign * (2 * x + 1)
            * wigner_6j(a, b, x, c, d, p)
            * wigner_6j(c, d, x, e, f, q)
            * wigner_6j(e, f, x, b, a, r)
        )
    lhs = _kahan(terms)
    rhs = wigner_6j(p, q, r, e, a, d) * wigner_6j(p, q, r, f, b, c)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Exact path


class ExactValue(NamedTuple):
    """``rational * sqrt(radicand)`` with both parts exact."""

    rational: Fraction
    radicand: Fraction

    def __float__(self):
        if self.rational == 0:
            return 0.0
        mag = math.sqrt(float(self.square()))
        return math.copysign(mag, self.rational)

    def square(self) -> Fraction:
        return self.rational * self.rational * self.radicand

    def __str__(self):
        if self.rational == 0:
            return "0"
        sq = self.square()
        sign = "-" if self.rational < 0 else ""
        n_out, n_in = _split_square(sq.numerator)
        d_out, d_in = _split_square(sq.denominator)
        num = _radical(n_out, n_in)
        if d_out == 1 and d_in == 1:
            return f"{sign}{num}"
        return f"{sign}{num}/{_radical(d_out, d_in)}"


def _split_square(n):
    outside, inside = 1, 1
    k = 2
    while k * k <= n:
        while n % (k * k) == 0:
            outside *= k
            n //= k * k
        if n % k == 0:
            inside *= k
            n //= k
        k += 1
    return outside, inside * n


def _radical(outside, inside):
    if inside == 1:
        return str(outside)
    if outside == 1:
        return f"sqrt({inside})"
    return f"{outside}*sqrt({inside})"


_fact = math.factorial


def _exact_delta(a, b, c):
    return Fraction(_fact(a + b - c) * _fact(a - b + c) * _fact(-a + b + c), _fact(a + b + c + 1))


def exact_wigner_3j(j1, j2, j3, m1, m2, m3) -> ExactValue:
    """3j symbol in exact arithmetic (slow; certification only)."""
    _check_projections((j1, j2, j3), (m1, m2, m3))
    zero = ExactValue(Fraction(0), Fraction(1))
    if m1 + m2 + m3 != 0 or not triangle_ok(j1, j2, j3):
        return zero
    kmin, kmax = _three_j_kmin_kmax(j1, j2, j3, m1, m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k) * _fact(j3 - j2 + k + m1) * _fact(j3 - j1 + k - m2)
            * _fact(j1 + j2 - j3 - k) * _fact(j1 - k - m1) * _fact(j2 - k + m2)
        )
        total += Fraction((-1) ** k, den)
    radicand = _exact_delta(j1, j2, j3) * (
        _fact(j1 + m1) * _fact(j1 - m1) * _fact(j2 + m2)
        * _fact(j2 - m2) * _fact(j3 + m3) * _fact(j3 - m3)
    )
    phase = -1 if (j1 - j2 - m3) % 2 else 1
    return ExactValue(phase * total, radicand)


def exact_clebsch_gordan(j1, m1, j2, m2, j3, m3) -> ExactValue:
    _check_projections((j1, j2, j3), (m1, m2, m3))
    if m3 != m1 + m2:
        return ExactValue(Fraction(0), Fraction(1))
    three = exact_wigner_3j(j1, j2, j3, m1, m2, -m3)
    phase = -1 if (j1 - j2 + m3) % 2 else 1
    return ExactValue(phase * three.rational, three.radicand * (2 * j3 + 1))


def exact_wigner_6j(j1, j2, j3, j4, j5, j6) -> ExactValue:
    """6j symbol in exact arithmetic (slow; certification only)."""
    bounds = _six_j_bounds(j1, j2, j3, j4, j5, j6)
    if bounds is None:
        return ExactValue(Fraction(0), Fraction(1))
    triads, a, b = bounds
    total = Fraction(0)
    for t in range(max(a), min(b) + 1):
        den = 1
        for ai in a:
            den *= _fact(t - ai)
        for bi in b:
            den *= _fact(bi - t)
        total += Fraction((-1) ** t * _fact(t + 1), den)
    radicand = Fraction(1)
    for tri in triads:
        radicand *= _exact_delta(*tri)
    return ExactValue(total, radicand)
