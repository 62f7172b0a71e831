"""Quadratic functional of an Ornstein-Uhlenbeck Levy process.

    U_t = sqrt(2 rho) int_{(-inf, t] x R} u e^{-rho (t - x)} (eta - mu)(d(x, u)),
    Q(T) = int_0^T U_t^2 dt,

for a Poisson process ``eta`` on time x marks with intensity ``lambda (x) nu``
and a finite discrete mark measure ``nu``.  Between events ``U_t + c``
decays like ``e^{-rho t}`` (``c = sqrt(2 rho) int u nu(du) / rho`` is the
compensator), so ``Q(T)`` is integrated exactly piece by piece.

``Q(T) - T = I_1(f1) + I_2(f2)`` with ``f1(x, u) = u^2 g1(x)`` and
``f2((x1, u1), (x2, u2)) = u1 u2 g2(x1, x2)``; both time kernels have
``int g1^2 = K`` and ``int g2^2 = K / rho`` where
``K = T - (1 - e^{-2 rho T}) / (2 rho)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import HorizonTooShort, InputError, NonSymmetricNuWithoutCompensator
from ..sampling import derive_seed

NORM_TOL = 1e-12
DEFAULT_TOL = 1e-12
_MOMENT_ORDERS = 256


def _moment_envelope(marks: np.ndarray, weights: np.ndarray) -> float:
    """``sup_m (int |u|^m nu(du))^(1/m)``, floored at 1."""
    absu = np.abs(marks)
    best = max(1.0, float(absu.max()))
    logs = np.log(weights)
    pos = absu > 0
    for m in range(1, _MOMENT_ORDERS + 1):
        # log-sum-exp keeps large orders finite
        terms = logs[pos] + m * np.log(absu[pos])
        top = terms.max()
        val = (top + math.log(np.exp(terms - top).sum())) / m
        best = max(best, math.exp(val))
    return best


@dataclass(frozen=True)
class OuConfig:
    rho: float = 1.0
    T: float = 5.0
    marks: tuple[float, ...] = (-1.0, 1.0)
    weights: tuple[float, ...] = (0.5, 0.5)
    M: float | None = None
    tol: float = DEFAULT_TOL
    compensate: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise InputError("rho must be positive")
        if not self.T > 0:
            raise InputError("T must be positive")
        if len(self.marks) != len(self.weights) or not self.marks:
            raise InputError("marks and weights must be non-empty and of equal length")
        object.__setattr__(self, "marks", tuple(float(u) for u in self.marks))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(not w > 0 for w in self.weights):
            raise InputError("mark weights must be positive")
        if not 0 < self.tol < 1:
            raise InputError("tol must lie in (0, 1)")
        if abs(self.second_moment - 1.0) > NORM_TOL:
            raise InputError(f"int u^2 nu(du) must be 1, got {self.second_moment}")
        if not self.compensate and self.first_moment != 0:
            raise NonSymmetricNuWithoutCompensator(
                f"int u nu(du) = {self.first_moment} != 0 requires the compensator")
        envelope = _moment_envelope(np.array(self.marks), np.array(self.weights))
        if self.M is None:
            object.__setattr__(self, "M", envelope)
        elif self.M < envelope * (1 - 1e-12):
            raise InputError(f"M = {self.M} is below the moment envelope {envelope}")

    def _moment(self, k: int) -> float:
        return math.fsum(w * u**k for u, w in zip(self.marks, self.weights))

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def first_moment(self) -> float:
        return self._moment(1)

    @property
    def second_moment(self) -> float:
        return self._moment(2)

    @property
    def c_nu(self) -> float:
        return self._moment(4)

    @property
    def T0(self) -> float:
        """Length of the pre-history window; ``e^{-rho T0} <= tol``."""
        return math.log(1 / self.tol) / self.rho

    @property
    def compensator(self) -> float:
        return math.sqrt(2 * self.rho) * self.first_moment / self.rho if self.compensate else 0.0

    @classmethod
    def from_dict(cls, doc: Mapping) -> "OuConfig":
        try:
            nu = doc.get("nu")
            kw = {}
            if nu is not None:
                kw["marks"] = tuple(float(a["u"]) for a in nu)
                kw["weights"] = tuple(float(a["weight"]) for a in nu)
            for key in ("rho", "T", "tol"):
                if key in doc:
                    kw[key] = float(doc[key])
            if doc.get("M") is not None:
                kw["M"] = float(doc["M"])
            if "compensate" in doc:
                kw["compensate"] = bool(doc["compensate"])
            return cls(**kw)
        except (KeyError, TypeError) as exc:
            raise InputError(f"ou config is missing or mistyped field: {exc}") from None

    def to_dict(self) -> dict:
        return {"rho": self.rho, "T": self.T, "M": self.M, "tol": self.tol, "compensate": self.compensate,
                "nu": [{"u": u, "weight": w} for u, w in zip(self.marks, self.weights)]}


@dataclass(frozen=True)
class Events:
    times: np.ndarray
    marks: np.ndarray


def sample_events(config: OuConfig, rng: np.random.Generator) -> Events:
    lo = -config.T0
    n = rng.poisson(config.mass * (config.T - lo))
    times = np.sort(rng.uniform(lo, config.T, size=n))
    p = np.array(config.weights) / config.mass
    marks = np.array(config.marks)[rng.choice(len(p), size=n, p=p)] if n else np.empty(0)
    return Events(times, marks)


def q_exact(events: Events, config: OuConfig) -> float:
    """``int_0^T U_t^2 dt`` for the given events, piecewise in closed form."""
    rho, T = config.rho, config.T
    s2 = math.sqrt(2 * rho)
    c = config.compensator
    # V_t = sqrt(2 rho) sum_{x_i <= t} u_i e^{-rho (t - x_i)}, U_t = V_t - c
    v = 0.0
    last = -config.T0
    knots = []
    for x, u in zip(events.times, events.marks):
        if x > 0:
            break
        v = v * math.exp(-rho * (x - last)) + s2 * u
        last = x
    v = v * math.exp(-rho * (0.0 - last))
    start = 0.0
    for x, u in zip(events.times, events.marks):
        if x <= 0:
            continue
        knots.append((start, x, v))
        v = v * math.exp(-rho * (x - start)) + s2 * u
        start = x
    knots.append((start, T, v))
    parts = []
    for a, b, b0 in knots:
        length = b - a
        if length <= 0:
            continue
        e1 = -math.expm1(-rho * length)
        e2 = -math.expm1(-2 * rho * length)
        parts.append(b0 * b0 * e2 / (2 * rho) - 2 * b0 * c * e1 / rho + c * c * length)
    return math.fsum(parts)


def u_path(events: Events, config: OuConfig, t: np.ndarray) -> np.ndarray:
    """``U_t`` at the given times (right-continuous), by direct summation."""
    t = np.asarray(t, dtype=float)
    s2 = math.sqrt(2 * config.rho)
    out = np.full(t.shape, -config.compensator)
    for x, u in zip(events.times, events.marks):
        on = t >= x
        out[on] += s2 * u * np.exp(-config.rho * (t[on] - x))
    return out


def q_quadrature(events: Events, config: OuConfig, nodes: int = 64) -> float:
    """Gauss-Legendre quadrature of ``U_t^2`` between consecutive events in ``[0, T]``."""
    inside = [x for x in events.times if 0 < x < config.T]
    edges = [0.0] + inside + [config.T]
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    parts = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        mid, half = (a + b) / 2, (b - a) / 2
        # U is continuous on [a, b); evaluate the left limit family explicitly
        t = mid + half * gx
        parts.append(half * float(np.dot(gw, u_path(events, config, t) ** 2)))
    return math.fsum(parts)


def ou_simulate(config: OuConfig, seed: int, replica: int = 0) -> float:
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, replica)))
    return q_exact(sample_events(config, rng), config)


def simulate(config: OuConfig, seed: int, replicas: int) -> np.ndarray:
    return np.array([ou_simulate(config, seed, i) for i in range(replicas)])


def g1(x, config: OuConfig):
    """Time part of the first-order kernel."""
    x = np.asarray(x, dtype=float)
    rho, T = config.rho, config.T
    neg = np.exp(2 * rho * np.minimum(x, 0)) * (1 - math.exp(-2 * rho * T))
    pos = 1 - np.exp(-2 * rho * (T - np.clip(x, 0, T)))
    out = np.where(x <= 0, neg, pos)
    return np.where(x <= T, out, 0.0)


def g2(x1, x2, config: OuConfig):
    """Time part of the second-order kernel."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    rho, T = config.rho, config.T
    top = np.maximum(x1, x2)
    lead = np.exp(rho * (np.minimum(x1, T) + np.minimum(x2, T)))
    tail = np.where(top <= 0, 1.0, np.exp(-2 * rho * np.clip(top, 0, T))) - math.exp(-2 * rho * T)
    return np.where(top <= T, lead * tail, 0.0)


def ou_kernels(config: OuConfig):
    """``(f1, f2)`` as callables of ``(x, u)`` and ``(x1, u1, x2, u2)``."""
    def f1(x, u):
        return np.asarray(u, dtype=float) ** 2 * g1(x, config)

    def f2(x1, u1, x2, u2):
        return np.asarray(u1, dtype=float) * np.asarray(u2, dtype=float) * g2(x1, x2, config)

    return f1, f2


def k_horizon(config: OuConfig) -> float:
    rho = config.rho
    return config.T + math.expm1(-2 * rho * config.T) / (2 * rho)


@dataclass(frozen=True)
class OuVariance:
    first: float
    second: float
    variance: float
    lower: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ou_variance_exact(config: OuConfig) -> OuVariance:
    """``Var Q(T) = ||f1||^2 + 2 ||f2||^2`` in closed form."""
    K = k_horizon(config)
    first = config.c_nu * K
    second = config.second_moment**2 * K / config.rho
    lower = config.c_nu * (config.T - 1 / config.rho)
    return OuVariance(first, second, first + 2 * second, lower)


def tau_ou(config: OuConfig) -> float:
    rho, T, M = config.rho, config.T, config.M
    if not T > 1 / rho:
        raise HorizonTooShort(f"T = {T} must exceed 1/rho = {1 / rho}")
    core = config.c_nu * (T - 1 / rho)
    d = 4 * M**4 * max(1.0, 2 / rho)
    return min(1.0, core / (d * d * (T + 1 / (2 * rho)))) * math.sqrt(core) / d / 512
