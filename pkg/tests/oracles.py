"""Slow reference implementations, written independently of the package code."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def set_partitions(n: int):
    """All set partitions of {1..n} via restricted growth strings."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i, top):
        if i == n:
            blocks: dict[int, list[int]] = {}
            for e, b in enumerate(a, start=1):
                blocks.setdefault(b, []).append(e)
            yield tuple(tuple(blocks[b]) for b in sorted(blocks))
            return
        for b in range(top + 2):
            a[i] = b
            yield from rec(i + 1, max(top, b))

    a[0] = 0
    yield from rec(1, 0)


def row_map(rows):
    out = {}
    e = 1
    for r, q in enumerate(rows, start=1):
        for _ in range(q):
            out[e] = r
            e += 1
    return out


def row_compatible(rows, blocks) -> bool:
    rm = row_map(rows)
    return all(len({rm[e] for e in b}) == len(b) for b in blocks)


def components(rows, blocks) -> list[set[int]]:
    rm = row_map(rows)
    comps = [{r} for r in range(1, len(rows) + 1)]
    for b in blocks:
        touched = {rm[e] for e in b}
        merged = set().union(*[c for c in comps if c & touched])
        comps = [c for c in comps if not c & touched] + [merged]
    return comps


def in_class(rows, blocks, cls: str) -> bool:
    if not row_compatible(rows, blocks):
        return False
    rm = row_map(rows)
    no_single = all(len(b) >= 2 for b in blocks)
    connected = len(components(rows, blocks)) == 1
    covering = all(any(len(b) >= 2 and any(rm[e] == r for e in b) for b in blocks)
                   for r in range(1, len(rows) + 1))
    return {
        "all": True,
        "no-singletons": no_single,
        "connected": connected,
        "connected-no-singletons": connected and no_single,
        "row-covering": covering,
    }[cls]


def brute_class(rows, cls: str) -> set[tuple[tuple[int, ...], ...]]:
    return {p for p in set_partitions(sum(rows)) if in_class(rows, p, cls)}


def brute_merged_integral(kernels, weights, rows, blocks) -> float:
    """Explicit loop over block assignments."""
    rm_label = {}
    for j, b in enumerate(blocks):
        for e in b:
            rm_label[e] = j
    n = len(weights)
    total = 0.0
    offsets = list(itertools.accumulate(rows, initial=0))
    for assign in itertools.product(range(n), repeat=len(blocks)):
        val = 1.0
        for j in assign:
            val *= weights[j]
        for ell, k in enumerate(kernels):
            idx = tuple(assign[rm_label[e]] for e in range(offsets[ell] + 1, offsets[ell + 1] + 1))
            val *= k[idx]
        total += val
    return total


def stirling2(n: int, k: int) -> int:
    return sum((-1) ** (k - j) * math.comb(k, j) * j**n for j in range(k + 1)) // math.factorial(k)


def poisson1_poly_moment(coeffs) -> int:
    """E p(Z), Z ~ Poisson(1), exactly: E Z^k is the Bell number B_k."""
    total = 0
    for k, c in enumerate(coeffs):
        bell = sum(stirling2(k, j) for j in range(k + 1))
        total += c * bell
    return total


def charlier_explicit(q: int) -> list[int]:
    """Coefficients of C_q(x) = sum_k binom(q,k) (-1)^(q-k) (x)_k (falling factorials)."""
    out = [Fraction(0)] * (q + 1)
    for k in range(q + 1):
        falling = [Fraction(1)]
        for i in range(k):
            falling = [Fraction(0)] + falling
            for j in range(len(falling) - 1):
                falling[j] -= i * falling[j + 1]
        for j, c in enumerate(falling):
            out[j] += math.comb(q, k) * (-1) ** (q - k) * c
    return [int(c) for c in out]


def ustat_by_points(counts, kernel) -> float:
    """Sum over ordered tuples of distinct points, points listed explicitly."""
    pts = [i for i, c in enumerate(counts) for _ in range(c)]
    q = kernel.ndim
    total = 0.0
    for tup in itertools.permutations(range(len(pts)), q):
        total += kernel[tuple(pts[i] for i in tup)]
    return total


def graph_copies_brute(n_points_adj, g_edges, q) -> tuple[int, int]:
    """Induced and non-induced copies of G by scanning vertex subsets and bijections."""
    adj = n_points_adj
    n = len(adj)
    induced = 0
    sub = 0
    for subset in itertools.combinations(range(n), q):
        h = {(i, j) for i, j in itertools.combinations(range(q), 2) if subset[j] in adj[subset[i]]}
        maps = 0
        iso = False
        for perm in itertools.permutations(range(q)):
            image = {tuple(sorted((perm[a], perm[b]))) for a, b in g_edges}
            if image <= h:
                maps += 1
                if image == h:
                    iso = True
        aut = sum(1 for perm in itertools.permutations(range(q))
                  if {tuple(sorted((perm[a], perm[b]))) for a, b in g_edges} == set(g_edges))
        sub += maps // aut
        induced += int(iso)
    return induced, sub


def poisson_series_moment(coeffs) -> float:
    return float(poisson1_poly_moment(coeffs))


def random_kernel(rng: np.random.Generator, n: int, q: int, low=-1.0, high=1.0) -> np.ndarray:
    arr = rng.uniform(low, high, size=(n,) * q)
    acc = np.zeros_like(arr)
    perms = list(itertools.permutations(range(q)))
    for p in perms:
        acc += np.transpose(arr, p)
    return acc / len(perms)


def count_by_egf(rows, no_singletons: bool = False) -> int:
    """prod q_l! [x^q] exp(prod_l (1 + x_l) - 1 [- sum_l x_l]).

    Each block picks at most one element per row, so blocks are indexed by
    non-empty row subsets; the multi-sort exponential formula counts sets of
    such blocks with labelled elements.
    """
    m = len(rows)
    cap = tuple(rows)

    def mul(a, b):
        out = {}
        for ka, va in a.items():
            for kb, vb in b.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                if all(x <= c for x, c in zip(k, cap)):
                    out[k] = out.get(k, 0) + va * vb
        return out

    block = {}
    for subset in itertools.product((0, 1), repeat=m):
        if sum(subset) == 0 or (no_singletons and sum(subset) == 1):
            continue
        block[subset] = Fraction(1)
    total = {(0,) * m: Fraction(1)}
    power = {(0,) * m: Fraction(1)}
    for k in range(1, sum(rows) + 1):
        power = mul(power, block)
        if not power:
            break
        for key, v in power.items():
            total[key] = total.get(key, 0) + v / math.factorial(k)
    coef = total.get(cap, Fraction(0)) * math.prod(math.factorial(q) for q in rows)
    assert coef.denominator == 1
    return int(coef)


def poisson_expectation(weights, fn, cutoff: int = 30) -> float:
    """E fn(counts) for independent Poisson(w_x) occupation numbers, by summation."""
    pmfs = []
    for w in weights:
        pmfs.append([math.exp(-w + k * math.log(w) - math.lgamma(k + 1)) for k in range(cutoff + 1)])
    total = []
    for counts in itertools.product(range(cutoff + 1), repeat=len(weights)):
        p = math.prod(pmf[c] for pmf, c in zip(pmfs, counts))
        if p < 1e-300:
            continue
        total.append(p * fn(counts))
    return math.fsum(total)


def ustat_explicit(counts, kernel) -> float:
    """Order 1 or 2 U-statistic from its defining sums."""
    n = np.asarray(counts, dtype=float)
    if kernel.ndim == 1:
        return float(n @ kernel)
    if kernel.ndim == 2:
        return float(n @ kernel @ n - n @ np.diag(kernel))
    raise ValueError("order 1 or 2 only")


def wi_explicit(counts, kernel, weights) -> float:
    """I_1 or I_2 written out: compensate every slot against the intensity."""
    n = np.asarray(counts, dtype=float)
    w = np.asarray(weights, dtype=float)
    if kernel.ndim == 1:
        return float(n @ kernel - w @ kernel)
    s = ustat_explicit(counts, kernel)
    return float(s - 2 * n @ kernel @ w + w @ kernel @ w)


def cumulants_from_moments(raw) -> list[float]:
    """kappa_1..kappa_4 from raw moments m_1..m_4."""
    m1, m2, m3, m4 = raw
    k1 = m1
    k2 = m2 - m1**2
    k3 = m3 - 3 * m2 * m1 + 2 * m1**3
    k4 = m4 - 4 * m3 * m1 - 3 * m2**2 + 12 * m2 * m1**2 - 6 * m1**4
    return [k1, k2, k3, k4]
