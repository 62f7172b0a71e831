"""Exact moments and cumulants of Poisson multiple integrals and U-statistics.

All formulas are partition sums of merged tensor integrals:

==========================  =======================================
quantity                    partition class
==========================  =======================================
E[prod I_{q_l}(f_l)]        ``NO_SINGLETONS``
cum(I_{q_1}, ..., I_{q_m})  ``CONNECTED_NO_SINGLETONS``
E[prod (S_l - E S_l)]       ``ROW_COVERING``
cum(S_1, ..., S_m)          ``CONNECTED``
==========================  =======================================
"""
from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateVariance, InputError, NotNormalized, ShapeMismatch
from .measure import (
    AtomSpace,
    SymmetricKernel,
    full_integral,
    l2_norm_sq,
    marginal_kernel,
    merged_tensor_integral,
)
from .partitions import DiagramShape, PartitionClass, block_count_profile, enumerate_partitions

DEFAULT_M_MAX = 5


class Kind(str, enum.Enum):
    WIENER_ITO = "wiener-ito"
    USTATISTIC = "ustatistic"

    @classmethod
    def parse(cls, text: "str | Kind") -> "Kind":
        if isinstance(text, Kind):
            return text
        key = text.strip().lower().replace("_", "-")
        aliases = {"wi": cls.WIENER_ITO, "wienerito": cls.WIENER_ITO, "u": cls.USTATISTIC,
                   "u-statistic": cls.USTATISTIC, "ustat": cls.USTATISTIC}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown element kind {text!r}") from None


def partition_sum(kernels: Sequence[SymmetricKernel], space: AtomSpace, cls: PartitionClass,
                  guard: int | None = None) -> float:
    """Sum of merged tensor integrals over the class.

    On a one-atom space every merged integral is ``prod_l f_l(x..x) * w^|sigma|``,
    so only the number of partitions per block count is needed.
    """
    shape = DiagramShape(tuple(k.order for k in kernels))
    if space.size == 1 and kernels:
        for k in kernels:
            if k.n_atoms != 1:
                raise ShapeMismatch(f"kernel over {k.n_atoms} atoms used with a 1-atom space")
        w = float(space.weights[0])
        prod = math.prod(float(k.values.reshape(-1)[0]) for k in kernels)
        profile = block_count_profile(shape, cls, guard)
        return prod * math.fsum(n * w**b for b, n in profile.items())
    terms = [merged_tensor_integral(kernels, space, s) for s in enumerate_partitions(shape, cls, guard)]
    return math.fsum(terms)


def wi_joint_moment(kernels: Sequence[SymmetricKernel], space: AtomSpace, guard: int | None = None) -> float:
    return partition_sum(kernels, space, PartitionClass.NO_SINGLETONS, guard)


def wi_joint_cumulant(kernels: Sequence[SymmetricKernel], space: AtomSpace, guard: int | None = None) -> float:
    return partition_sum(kernels, space, PartitionClass.CONNECTED_NO_SINGLETONS, guard)


def ustat_joint_cumulant(kernels: Sequence[SymmetricKernel], space: AtomSpace, guard: int | None = None) -> float:
    return partition_sum(kernels, space, PartitionClass.CONNECTED, guard)


def ustat_central_moment(kernels: Sequence[SymmetricKernel], space: AtomSpace, guard: int | None = None) -> float:
    return partition_sum(kernels, space, PartitionClass.ROW_COVERING, guard)


def ustat_mean(f: SymmetricKernel, space: AtomSpace) -> float:
    """``E S = int f d mu^q`` (Mecke formula)."""
    return full_integral(f, space)


def chaos_expansion(f: SymmetricKernel, space: AtomSpace) -> list[SymmetricKernel]:
    """Kernels ``[f_1, ..., f_q]`` with ``S = E S + sum_i I_i(f_i)``."""
    return [marginal_kernel(f, space, i) for i in range(1, f.order + 1)]


def c_qk(q: int, k: int) -> float:
    return 1.0 / (k * q**q) ** 3


@dataclass
class ChaosElement:
    """``sum_i c_i I_{q_i}(f_i)`` or ``sum_i c_i S(f_i)`` over one space.

    Summands of equal order are merged on construction, so orders are
    distinct.
    """

    kind: Kind
    terms: tuple[tuple[SymmetricKernel, float], ...]
    space: AtomSpace
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        if not self.terms:
            raise InputError("a chaos element needs at least one summand")
        merged: dict[int, SymmetricKernel] = {}
        for kernel, coef in self.terms:
            if kernel.n_atoms != self.space.size:
                raise InputError("kernel and space disagree on the number of atoms")
            scaled = kernel * float(coef)
            merged[kernel.order] = merged[kernel.order] + scaled if kernel.order in merged else scaled
        self.terms = tuple((merged[q], 1.0) for q in sorted(merged))

    @classmethod
    def wiener_ito(cls, space: AtomSpace, *kernels: SymmetricKernel) -> "ChaosElement":
        return cls(Kind.WIENER_ITO, tuple((k, 1.0) for k in kernels), space)

    @classmethod
    def ustatistic(cls, space: AtomSpace, *kernels: SymmetricKernel) -> "ChaosElement":
        return cls(Kind.USTATISTIC, tuple((k, 1.0) for k in kernels), space)

    @property
    def kernels(self) -> list[SymmetricKernel]:
        return [k for k, _ in self.terms]

    @property
    def orders(self) -> list[int]:
        return [k.order for k in self.kernels]

    @property
    def max_order(self) -> int:
        return max(self.orders)

    @property
    def k(self) -> int:
        return len(self.terms)

    @property
    def cumulant_class(self) -> PartitionClass:
        if self.kind is Kind.WIENER_ITO:
            return PartitionClass.CONNECTED_NO_SINGLETONS
        return PartitionClass.CONNECTED

    def chaos_kernels(self) -> dict[int, SymmetricKernel]:
        """Combined chaos expansion: order ``i`` -> kernel of ``I_i``."""
        if self.kind is Kind.WIENER_ITO:
            return {k.order: k for k in self.kernels}
        out: dict[int, SymmetricKernel] = {}
        for f in self.kernels:
            for i, fi in enumerate(chaos_expansion(f, self.space), start=1):
                out[i] = out[i] + fi if i in out else fi
        return dict(sorted(out.items()))

    def mean(self) -> float:
        if self.kind is Kind.WIENER_ITO:
            return 0.0
        return math.fsum(ustat_mean(f, self.space) for f in self.kernels)

    def integrals(self, index: tuple[int, ...], guard: int | None = None) -> list[float]:
        """Merged integrals of the selected kernels over the cumulant class."""
        key = (index, guard)
        if key not in self._cache:
            kernels = [self.kernels[i] for i in index]
            shape = DiagramShape(tuple(k.order for k in kernels))
            parts = enumerate_partitions(shape, self.cumulant_class, guard)
            self._cache[key] = [merged_tensor_integral(kernels, self.space, s) for s in parts]
        return self._cache[key]


def variance(element: ChaosElement) -> float:
    """``sum_i i! ||g_i||^2`` over the (combined) chaos kernels ``g_i``."""
    parts = [math.factorial(i) * l2_norm_sq(g, element.space) for i, g in element.chaos_kernels().items()]
    var = math.fsum(parts)
    if not var > 0:
        raise DegenerateVariance("element has zero variance")
    return var


def _index_multisets(k: int, m: int) -> Iterable[tuple[tuple[int, ...], int]]:
    """Sorted index tuples of length ``m`` with their multinomial multiplicity."""
    for combo in itertools.combinations_with_replacement(range(k), m):
        mult = math.factorial(m)
        for c in Counter(combo).values():
            mult //= math.factorial(c)
        yield combo, mult


def cumulant(element: ChaosElement, m: int, guard: int | None = None) -> float:
    """``cum_m`` of the element, expanded by multilinearity."""
    if m < 1:
        raise InputError(f"cumulant order must be >= 1, got {m}")
    if m == 1:
        return element.mean()
    parts = []
    for index, mult in _index_multisets(element.k, m):
        parts.append(mult * math.fsum(element.integrals(index, guard)))
    return math.fsum(parts)


def fit_delta(cumulants: Mapping[int, float], gamma: float, tol: float = 1e-9) -> float:
    """Largest ``Delta`` with ``|kappa_m| <= (m!)^(1+gamma) / Delta^(m-2)`` for the given orders.

    ``cumulants`` maps order to cumulant of the *standardized* variable;
    order 2 must be present and equal to 1.
    """
    if 2 not in cumulants or abs(cumulants[2] - 1.0) > tol:
        raise NotNormalized(f"second cumulant must be 1, got {cumulants.get(2)}")
    orders = [m for m in cumulants if m >= 3]
    if not orders:
        raise InputError("need at least one cumulant of order >= 3")
    if gamma < 0:
        raise InputError("gamma must be non-negative")
    best = math.inf
    for m in sorted(orders):
        km = abs(cumulants[m])
        if km == 0:
            continue
        log_d = ((1 + gamma) * math.lgamma(m + 1) - math.log(km)) / (m - 2)
        best = min(best, math.exp(log_d))
    return best


def alpha_bound(element: ChaosElement, m_max: int = DEFAULT_M_MAX, guard: int | None = None) -> float:
    """Smallest ``alpha`` with ``Var^{-m/2} |integral| <= alpha^{m-2}`` for all checked terms.

    The maximum runs over ``3 <= m <= m_max``, all order tuples and all
    partitions of the element's cumulant class (connected without
    singletons for multiple integrals, connected for U-statistics).
    """
    if m_max < 3:
        raise InputError("m_max must be at least 3")
    var = variance(element)
    best = 0.0
    for m in range(3, m_max + 1):
        for index, _ in _index_multisets(element.k, m):
            for value in element.integrals(index, guard):
                if value == 0:
                    continue
                ratio = math.exp((math.log(abs(value)) - 0.5 * m * math.log(var)) / (m - 2))
                best = max(best, ratio)
    return best


def beta_bound(element: ChaosElement, m_max: int = DEFAULT_M_MAX, guard: int | None = None) -> float:
    if element.kind is not Kind.USTATISTIC:
        raise InputError("beta_bound applies to U-statistic elements")
    return alpha_bound(element, m_max, guard)


def ci_bound(z: float, gamma: float, delta: float) -> float:
    """``2 exp(-min{z^2 / 2^(1+gamma), (z Delta)^(1/(1+gamma))} / 4)``."""
    if z < 0:
        raise InputError("z must be non-negative")
    if not delta > 0:
        raise InputError("Delta must be positive")
    gauss = z * z / 2 ** (1 + gamma)
    tail = (z * delta) ** (1 / (1 + gamma)) if math.isfinite(delta) else math.inf
    if z == 0:
        tail = 0.0
    return 2.0 * math.exp(-0.25 * min(gauss, tail))


@dataclass
class CumulantReport:
    kind: Kind
    orders: list[int]
    cumulants: list[float]
    normalized: list[float]
    variance: float
    gamma: float
    delta: float
    alpha_or_beta: float
    c_qk: float
    bound_delta: float

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "kind": self.kind.value,
            "orders": self.orders,
            "cumulants": [num(x) for x in self.cumulants],
            "normalized": [num(x) for x in self.normalized],
            "variance": self.variance,
            "gamma": self.gamma,
            "delta": num(self.delta),
            "alpha_or_beta": self.alpha_or_beta,
            "c_qk": self.c_qk,
            "bound_delta": num(self.bound_delta),
        }


def cumulant_report(element: ChaosElement, m_max: int = DEFAULT_M_MAX, gamma: float | None = None,
                    guard: int | None = None) -> CumulantReport:
    """Exact cumulants ``1..m_max``, fitted ``Delta`` and the bound constant ``alpha``/``beta``.

    ``gamma`` defaults to ``q - 1`` with ``q`` the largest order present.
    """
    if m_max < 3:
        raise InputError("m_max must be at least 3")
    var = variance(element)
    q = element.max_order
    gamma = float(q - 1) if gamma is None else float(gamma)
    orders = list(range(1, m_max + 1))
    values = [cumulant(element, m, guard) for m in orders]
    values[1] = var
    normalized = [0.0] + [v / var ** (m / 2) for m, v in zip(orders[1:], values[1:])]
    normalized[1] = 1.0
    delta = fit_delta(dict(zip(orders[1:], normalized[1:])), gamma)
    ab = alpha_bound(element, m_max, guard)
    cq = c_qk(q, element.k)
    bound_delta = cq / ab if ab > 0 else math.inf
    return CumulantReport(element.kind, orders, values, normalized, var, gamma, delta, ab, cq, bound_delta)


@dataclass(frozen=True)
class Consistency:
    moment: float
    reconstructed: float
    residual: float
    relative: float


def moment_cumulant_consistency(kernels: Sequence[SymmetricKernel], space: AtomSpace,
                                kind: "Kind | str" = Kind.WIENER_ITO, guard: int | None = None) -> Consistency:
    """Compare the moment sum with products of cumulant sums over row partitions.

    For multiple integrals the raw moment is rebuilt from all set
    partitions of the rows; for U-statistics the central moment is rebuilt
    from partitions without singleton rows (first cumulants drop out).
    """
    kind = Kind.parse(kind)
    m = len(kernels)
    rows_shape = DiagramShape((1,) * m)
    if kind is Kind.WIENER_ITO:
        moment = wi_joint_moment(kernels, space, guard)
        cum = wi_joint_cumulant
        lattice = enumerate_partitions(rows_shape, PartitionClass.ALL)
    else:
        moment = ustat_central_moment(kernels, space, guard)
        cum = ustat_joint_cumulant
        lattice = enumerate_partitions(rows_shape, PartitionClass.NO_SINGLETONS)
    memo: dict[tuple[int, ...], float] = {}
    products = []
    for rho in lattice:
        prod = 1.0
        for block in rho.blocks:
            if block not in memo:
                memo[block] = cum([kernels[i - 1] for i in block], space, guard)
            prod *= memo[block]
        products.append(prod)
    rebuilt = math.fsum(products)
    residual = abs(moment - rebuilt)
    scale = max(abs(moment), math.fsum(abs(p) for p in products), 1e-300)
    return Consistency(moment, rebuilt, residual, residual / scale)
