"""Poisson-Charlier polynomials for the Poisson(1) law.

    H_0 = 1,    H_{q+1}(x) = x H_q(x - 1) - H_q(x)

Coefficients are kept as exact integers.  ``H_q(Z)`` with ``Z ~ Poisson(1)``
has the law of ``I_q(1_B^{(x)q})`` for a set ``B`` of unit mass, which
:func:`chaos_identity_check` compares moment by moment.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import InputError, OutOfRange


@dataclass(frozen=True)
class CharlierPoly:
    """Integer polynomial, coefficients in ascending powers."""

    coefficients: tuple[int, ...]

    def __post_init__(self):
        coeffs = [int(c) for c in self.coefficients]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs) or (0,))

    @property
    def q(self) -> int:
        return len(self.coefficients) - 1

    degree = q

    @property
    def leading(self) -> int:
        return self.coefficients[-1]

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def eval(self, x):
        return self(x)

    def __add__(self, other: "CharlierPoly") -> "CharlierPoly":
        a, b = self.coefficients, other.coefficients
        n = max(len(a), len(b))
        return CharlierPoly(tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)))

    def __neg__(self) -> "CharlierPoly":
        return CharlierPoly(tuple(-c for c in self.coefficients))

    def __sub__(self, other: "CharlierPoly") -> "CharlierPoly":
        return self + (-other)

    def __mul__(self, other: "CharlierPoly | int") -> "CharlierPoly":
        if isinstance(other, int):
            return CharlierPoly(tuple(c * other for c in self.coefficients))
        out = [0] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            if a:
                for j, b in enumerate(other.coefficients):
                    out[i + j] += a * b
        return CharlierPoly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, m: int) -> "CharlierPoly":
        if m < 0:
            raise InputError("negative powers are not polynomials")
        out = CharlierPoly((1,))
        for _ in range(m):
            out = out * self
        return out

    def shift(self, h: int) -> "CharlierPoly":
        """``x -> p(x + h)``."""
        out = CharlierPoly((0,))
        step = CharlierPoly((h, 1))
        for c in reversed(self.coefficients):
            out = out * step + CharlierPoly((c,))
        return out

    def __str__(self):
        terms = []
        for k in range(self.q, -1, -1):
            c = self.coefficients[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            mag = abs(c)
            body = f"{mag}{mono}" if (mag != 1 or k == 0) else mono
            sign = "-" if c < 0 else "+"
            terms.append((sign, body))
        if not terms:
            return "0"
        first_sign, first = terms[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in terms[1:]:
            text += f" {sign} {body}"
        return text


X = CharlierPoly((0, 1))


@lru_cache(maxsize=None)
def charlier(q: int) -> CharlierPoly:
    if q < 0:
        raise InputError(f"degree must be non-negative, got {q}")
    if q == 0:
        return CharlierPoly((1,))
    prev = charlier(q - 1)
    return X * prev.shift(-1) - prev


def _series_cutoff(degree: int, tol: float) -> int:
    """Smallest ``x`` with ``P(Z >= x) * (1 + x)^degree < tol``."""
    x = 0
    log_term = -1.0                 # log P(Z = 0)
    while True:
        # P(Z >= x) <= 2 P(Z = x) once x >= 1
        log_tail = math.log(2) + log_term if x >= 1 else 0.0
        if log_tail + degree * math.log1p(x) < math.log(tol):
            return x
        x += 1
        log_term -= math.log(x)


def poisson_moment(p: "CharlierPoly | Sequence[CharlierPoly]", truncation_tol: float = 1e-15) -> float:
    """``E p(Z)`` for ``Z ~ Poisson(1)``; a sequence is multiplied out first.

    The series ``sum_x p(x) e^{-1} / x!`` is summed exactly in rationals up
    to the cutoff and rounded once.
    """
    if not truncation_tol > 0:
        raise InputError("truncation tolerance must be positive")
    if not isinstance(p, CharlierPoly):
        prod = CharlierPoly((1,))
        for factor in p:
            prod = prod * factor
        p = prod
    stop = _series_cutoff(max(p.q, 1), truncation_tol)
    total = Fraction(0)
    fact = 1
    for x in range(stop + 1):
        if x:
            fact *= x
        total += Fraction(p(x), fact)
    return float(total * Fraction(math.exp(-1)))


@dataclass(frozen=True)
class IdentityCheck:
    q: int
    m: int
    series: float
    partition_sum: float
    residual: float


def chaos_identity_check(q: int, m: int, guard: int | None = None) -> IdentityCheck:
    """Compare ``E H_q(Z)^m`` with the moment of ``m`` copies of ``I_q(1_B^q)``."""
    from .chaos import wi_joint_moment
    from .measure import AtomSpace, SymmetricKernel

    if q < 1 or m < 1:
        raise InputError("q and m must be positive")
    series = poisson_moment(charlier(q) ** m)
    space = AtomSpace(("B",), [1.0])
    g = SymmetricKernel.constant(1, q, 1.0)
    exact = wi_joint_moment([g] * m, space, guard)
    return IdentityCheck(q, m, series, exact, abs(series - exact))


class Regime(str, enum.Enum):
    MDP_HOLDS = "a"
    MDP_FAILS = "b"


@dataclass(frozen=True)
class Scale:
    """The sequence ``a_n = c * n^theta * (log n)^rho``."""

    theta: float
    rho: float = 0.0
    c: float = 1.0

    def __call__(self, n: float) -> float:
        return self.c * n**self.theta * math.log(n) ** self.rho


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(10**6)


def scale_exponents(q: int, scale: Scale) -> tuple[Fraction, Fraction]:
    """Exponents of ``n`` and ``log n`` in ``a_n^(-2+1/q) n^(1/(2q)) log(a_n sqrt n)``."""
    theta, rho = _exact(scale.theta), _exact(scale.rho)
    a = Fraction(-2) + Fraction(1, q)
    return a * theta + Fraction(1, 2 * q), a * rho + 1


def scale_classifier(q: int, scale: Scale) -> Regime:
    """Which part of the Charlier-sum moderate deviation dichotomy applies.

    Only scales with ``a_n -> inf`` and ``a_n / sqrt(n) -> 0`` are admissible;
    the factor ``log(a_n sqrt n)`` then grows like ``(theta + 1/2) log n``.
    """
    if q < 1:
        raise InputError("q must be at least 1")
    if not scale.c > 0:
        raise OutOfRange("scale constant must be positive")
    theta, rho = _exact(scale.theta), _exact(scale.rho)
    if not (theta > 0 or (theta == 0 and rho > 0)):
        raise OutOfRange(f"a_n does not diverge for theta={scale.theta}, rho={scale.rho}")
    if not (theta < Fraction(1, 2) or (theta == Fraction(1, 2) and rho < 0)):
        raise OutOfRange(f"a_n / sqrt(n) does not vanish for theta={scale.theta}, rho={scale.rho}")
    e_poly, e_log = scale_exponents(q, scale)
    if e_poly > 0 or (e_poly == 0 and e_log > 0):
        return Regime.MDP_HOLDS
    return Regime.MDP_FAILS
