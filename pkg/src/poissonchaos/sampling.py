"""Seeded Monte Carlo for Poisson processes on finite atom spaces.

Randomness is counter based: the uniform for (replica, atom, draw) is a
hash of those integers and the master seed, so any replica can be
regenerated alone and batches can be split across workers in any way.

The hash is the splitmix64 finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

and keys are folded in one at a time with ``h = mix(h ^ mix(v + GAMMA))``,
``GAMMA = 0x9E3779B97F4A7C15``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import special, stats

from .chaos import ci_bound
from .errors import InputError, TooFewSamples, TooManyPoints
from .measure import AtomSpace, SymmetricKernel, integrate_out

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
INVERSION_MAX_MEAN = 10.0
POINT_GUARD = 10**8
CHUNK = 1 << 18
CHARLIER_SUPPORT = 30


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _fold(h: np.ndarray, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.uint64)
    return _mix(h ^ _mix(v + np.uint64(GAMMA)))


def mix64(x: int) -> int:
    with np.errstate(over="ignore"):
        return int(_mix(np.uint64(x & MASK64)))


def derive_seed(master: int, *path: int) -> int:
    """64-bit seed for the stream at ``path`` below ``master``."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(master & MASK64))
        for v in path:
            h = _fold(h, np.uint64(v & MASK64))
    return int(h)


def uniforms(master: int, replicas: np.ndarray, atom: int, draw: int) -> np.ndarray:
    """Uniforms on (0, 1), one per replica index, for the given atom and draw."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(master & MASK64))
        h = _fold(np.full(len(replicas), h, dtype=np.uint64), np.asarray(replicas, dtype=np.uint64))
        h = _fold(h, atom)
        h = _fold(h, draw)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _inversion_table(lam: float) -> np.ndarray:
    """CDF of Poisson(lam) by sequential accumulation, up to numerical 1."""
    p = math.exp(-lam)
    cdf = [p]
    x = 0
    while cdf[-1] < 1.0 and (x < lam or p > 1e-300):
        x += 1
        p *= lam / x
        if cdf[-1] + p == cdf[-1] and x > lam:
            break
        cdf.append(cdf[-1] + p)
    return np.array(cdf)


def _poisson_inversion(lam: float, u: np.ndarray) -> np.ndarray:
    cdf = _inversion_table(lam)
    return np.minimum(np.searchsorted(cdf, u, side="left"), len(cdf) - 1).astype(np.int64)


def _poisson_ptrs(lam: float, master: int, replicas: np.ndarray, atom: int) -> np.ndarray:
    """Transformed rejection with squeeze for ``lam > 10``, vectorized over replicas."""
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2)
    out = np.full(len(replicas), -1, dtype=np.int64)
    todo = np.arange(len(replicas))
    draw = 0
    while todo.size:
        U = uniforms(master, replicas[todo], atom, draw) - 0.5
        V = uniforms(master, replicas[todo], atom, draw + 1)
        draw += 2
        us = 0.5 - np.abs(U)
        k = np.floor((2 * a / us + b) * U + lam + 0.43)
        accept = (us >= 0.07) & (V <= vr)
        maybe = ~accept & ~((k < 0) | ((us < 0.013) & (V > us)))
        kk = np.where(maybe, k, 0.0)
        lhs = np.log(V) + math.log(invalpha) - np.log(a / (us * us) + b)
        rhs = -lam + kk * loglam - special.gammaln(kk + 1)
        accept |= maybe & (lhs <= rhs)
        out[todo[accept]] = k[accept].astype(np.int64)
        todo = todo[~accept]
    return out


def poisson_counts(lam: float, master: int, replicas: np.ndarray, atom: int) -> np.ndarray:
    replicas = np.asarray(replicas, dtype=np.uint64)
    if lam <= INVERSION_MAX_MEAN:
        return _poisson_inversion(lam, uniforms(master, replicas, atom, 0))
    return _poisson_ptrs(lam, master, replicas, atom)


@dataclass(frozen=True)
class SampleConfig:
    master_seed: int
    replicas: int = 1
    t: float = 1.0

    def __post_init__(self):
        if self.replicas < 1:
            raise InputError("replicas must be at least 1")
        if not self.t > 0:
            raise InputError("scale t must be positive")
        object.__setattr__(self, "master_seed", int(self.master_seed) & MASK64)

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "replicas": self.replicas, "t": self.t}


@dataclass(frozen=True)
class CountSample:
    """Occupation numbers ``n_x`` of one realization, in atom order."""

    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def points(self) -> list[int]:
        """Atom index of every process point (multiplicities expanded)."""
        return [i for i, c in enumerate(self.counts) for _ in range(c)]


def sample_batch(space: AtomSpace, config: SampleConfig, start: int = 0, count: int | None = None) -> np.ndarray:
    """Counts for replicas ``start .. start+count-1`` as an ``(count, n_atoms)`` array."""
    count = config.replicas - start if count is None else count
    if count < 0 or start < 0:
        raise InputError("replica range must be non-negative")
    idx = np.arange(start, start + count, dtype=np.uint64)
    out = np.empty((count, space.size), dtype=np.int64)
    for j, w in enumerate(space.weights):
        out[:, j] = poisson_counts(config.t * float(w), config.master_seed, idx, j)
    return out


def iter_batches(space: AtomSpace, config: SampleConfig, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    for start in range(0, config.replicas, chunk):
        yield sample_batch(space, config, start, min(chunk, config.replicas - start))


def sample(space: AtomSpace, config: SampleConfig, replica_index: int) -> CountSample:
    return CountSample(tuple(int(c) for c in sample_batch(space, config, replica_index, 1)[0]))


def _as_counts(sample_or_counts) -> tuple[np.ndarray, bool]:
    if isinstance(sample_or_counts, CountSample):
        return np.array([sample_or_counts.counts], dtype=np.int64), True
    arr = np.asarray(sample_or_counts, dtype=np.int64)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def _falling(n: np.ndarray, k: int) -> np.ndarray:
    out = np.ones(n.shape, dtype=np.float64)
    for i in range(k):
        out *= n - i
    return out


def eval_ustat(sample_or_counts, f: "SymmetricKernel | float", guard: int = POINT_GUARD):
    """``sum over ordered distinct q-tuples of points of f``.

    Tuples are grouped by the multiset of atoms they hit: a multiset with
    multiplicities ``c_x`` stands for ``q! / prod c_x!`` maps into atoms and
    ``prod (n_x)_{c_x}`` choices of distinct points.  Accepts one sample or
    an ``(R, n_atoms)`` count array (vectorized over rows).  A float ``f``
    is an order-0 kernel and is returned as is.
    """
    counts, single = _as_counts(sample_or_counts)
    if not isinstance(f, SymmetricKernel):
        vals = np.full(len(counts), float(f))
        return float(vals[0]) if single else vals
    if counts.shape[1] != f.n_atoms:
        raise InputError(f"sample has {counts.shape[1]} atoms, kernel {f.n_atoms}")
    if counts.size and float(counts.sum(axis=1).max()) ** f.order > guard:
        raise TooManyPoints(f"(points)^{f.order} exceeds {guard}")
    q = f.order
    ff = [[_falling(counts[:, j], c) for c in range(q + 1)] for j in range(f.n_atoms)]
    total = np.zeros(len(counts))
    qf = math.factorial(q)
    for combo in itertools.combinations_with_replacement(range(f.n_atoms), q):
        value = f.values[combo]
        if value == 0:
            continue
        mult = qf
        term = np.full(len(counts), 1.0)
        for atom, c in _runs(combo):
            mult //= math.factorial(c)
            term = term * ff[atom][c]
        total += (value * mult) * term
    return float(total[0]) if single else total


def _runs(combo: Sequence[int]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for a in combo:
        if out and out[-1][0] == a:
            out[-1] = (a, out[-1][1] + 1)
        else:
            out.append((a, 1))
    return out


def eval_wi_pathwise(sample_or_counts, f: SymmetricKernel, intensity: AtomSpace, guard: int = POINT_GUARD):
    """Pathwise ``I_q(f)`` for a process with intensity measure ``intensity``.

    Inclusion-exclusion over the slots integrated against the process:
    ``sum_j binom(q, j) (-1)^(q-j) [factorial-measure sum of f with q-j
    slots integrated against the intensity]``.
    """
    q = f.order
    counts, single = _as_counts(sample_or_counts)
    total = np.zeros(len(counts))
    for j in range(q + 1):
        reduced = integrate_out(f, intensity, keep=j)
        coef = math.comb(q, j) * (-1) ** (q - j)
        total += coef * np.asarray(eval_ustat(counts, reduced, guard))
    return float(total[0]) if single else total


@dataclass(frozen=True)
class EmpiricalCumulants:
    n: int
    k: tuple[float, float, float, float]
    se: tuple[float, float, float, float]
    method: str

    def to_dict(self) -> dict:
        return {"n": self.n, "k": list(self.k), "se": list(self.se), "se_method": self.method}


def _kstats(values: np.ndarray) -> np.ndarray:
    return np.array([stats.kstat(values, n) for n in (1, 2, 3, 4)])


def k_statistics(values, batches: int = 50) -> EmpiricalCumulants:
    """Unbiased k-statistics ``k_1..k_4`` with standard errors.

    Standard errors come from ``batches`` (at least 20) equal batches when
    every batch has at least 8 values, otherwise from the delete-one
    jackknife.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    n = len(x)
    if n < 8:
        raise TooFewSamples(f"need at least 8 values, got {n}")
    batches = max(20, int(batches))
    k = _kstats(x)
    if n >= 8 * batches:
        per = n // batches
        bk = np.array([_kstats(x[i * per:(i + 1) * per]) for i in range(batches)])
        se = bk.std(axis=0, ddof=1) / math.sqrt(batches)
        method = f"batch:{batches}"
    else:
        jk = np.array([_kstats(np.delete(x, i)) for i in range(n)])
        se = np.sqrt((n - 1) / n * ((jk - jk.mean(axis=0)) ** 2).sum(axis=0))
        method = "jackknife"
    return EmpiricalCumulants(n, tuple(float(v) for v in k), tuple(float(v) for v in se), method)


def within_se(estimate: float, se: float, target: float, mult: float = 5.0) -> bool:
    return abs(estimate - target) <= mult * se


def binomial_band(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="exact")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class TailRow:
    z: float
    exceed: int
    n: int
    empirical: float
    low: float
    high: float
    bound: float
    holds: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def tail_check(values, variance: float, gamma: float, delta: float, z_grid: Sequence[float],
               mean: float | None = None, confidence: float = 0.99) -> list[TailRow]:
    """Empirical ``P(|X - EX| >= z sqrt(Var))`` against ``ci_bound(z, gamma, Delta)``.

    A row holds when the bound is not below the lower end of the
    Clopper-Pearson band of the empirical frequency.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if not variance > 0:
        raise InputError("variance must be positive")
    mu = float(np.mean(x)) if mean is None else float(mean)
    dev = np.abs(x - mu) / math.sqrt(variance)
    rows = []
    for z in z_grid:
        hits = int(np.count_nonzero(dev >= z))
        lo, hi = binomial_band(hits, len(x), confidence)
        bound = ci_bound(float(z), gamma, delta)
        rows.append(TailRow(float(z), hits, len(x), hits / len(x), lo, hi, bound, lo <= bound))
    return rows


@dataclass(frozen=True)
class CramerRow:
    z: float
    ratio: float
    low: float
    high: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def cramer_ratio(values, z_grid: Sequence[float], confidence: float = 0.99) -> list[CramerRow]:
    """``P(X >= z) / (1 - Phi(z))`` for standardized values, with a binomial band."""
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    rows = []
    for z in z_grid:
        hits = int(np.count_nonzero(x >= z))
        lo, hi = binomial_band(hits, len(x), confidence)
        ref = float(stats.norm.sf(z))
        rows.append(CramerRow(float(z), hits / len(x) / ref, lo / ref, hi / ref))
    return rows


# --- Charlier sums ----------------------------------------------------------

def _poisson1_pmf(upto: int) -> np.ndarray:
    return np.array([math.exp(-1 - math.lgamma(x + 1)) for x in range(upto + 1)])


def charlier_sums(q: int, n: int, replicas: int, seed: int, chunk: int = 1 << 16) -> np.ndarray:
    """``S_n = sum_k H_q(Z_k)`` for ``n`` i.i.d. Poisson(1) variables, per replica.

    Only the histogram of the ``Z_k`` matters, and it is multinomial.  The
    support is cut at 30, where the Poisson(1) tail is below 1e-32.
    """
    from .charlier import charlier

    if n < 1 or replicas < 1:
        raise InputError("n and replicas must be positive")
    pmf = _poisson1_pmf(CHARLIER_SUPPORT)
    pmf /= pmf.sum()
    h = charlier(q)
    hv = np.array([float(h(x)) for x in range(CHARLIER_SUPPORT + 1)])
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, q, n)))
    out = np.empty(replicas)
    for start in range(0, replicas, chunk):
        size = min(chunk, replicas - start)
        out[start:start + size] = rng.multinomial(n, pmf, size=size) @ hv
    return out
