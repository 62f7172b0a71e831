"""Subgraph counts in random geometric graphs on a box ``[0, L]^d``.

Two distinct points are adjacent when their distance lies in ``(0, r]``.
Counts run over connected vertex subsets (ESU enumeration), and each subset
is classified by its induced graph, so both induced and non-induced counts
come from one pass.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InputError, TooManyPoints
from ..sampling import derive_seed

POINT_GUARD = 10**8
MAX_VERTICES = 4


def _canon(q: int, edges) -> tuple[tuple[int, int], ...]:
    """Lexicographically smallest relabelled edge list."""
    best = None
    for perm in itertools.permutations(range(q)):
        relabel = tuple(sorted(tuple(sorted((perm[a], perm[b]))) for a, b in edges))
        if best is None or relabel < best:
            best = relabel
    return best


@dataclass(frozen=True)
class Graph:
    q: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""

    def __post_init__(self):
        if not 1 <= self.q <= MAX_VERTICES:
            raise InputError(f"graphs need 1..{MAX_VERTICES} vertices, got {self.q}")
        edges = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < self.q and 0 <= b < self.q):
                raise InputError(f"bad edge ({a}, {b}) for {self.q} vertices")
            edges.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        if not self.is_connected():
            raise InputError(f"graph {self.name or self.edges} is not connected")

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for a, b in self.edges:
                for x, y in ((a, b), (b, a)):
                    if x == v and y not in seen:
                        seen.add(y)
                        stack.append(y)
        return len(seen) == self.q

    @property
    def key(self) -> tuple[int, tuple[tuple[int, int], ...]]:
        return (self.q, _canon(self.q, self.edges))

    def automorphisms(self) -> int:
        return _embeddings(self.key, self.key)

    @classmethod
    def parse(cls, text: str) -> "Graph":
        """A catalogue name (``K2``, ``P3``, ``K3``, ...) or ``q:a-b,c-d``."""
        key = text.strip()
        if key.upper() in {k.upper() for k in CATALOGUE}:
            name = next(k for k in CATALOGUE if k.upper() == key.upper())
            q, edges = CATALOGUE[name]
            return cls(q, edges, name)
        try:
            head, _, body = key.partition(":")
            q = int(head)
            edges = tuple(tuple(int(v) for v in e.split("-")) for e in body.split(",") if e)
        except ValueError:
            raise InputError(f"cannot parse graph {text!r}") from None
        return cls(q, edges, key)

    def serialize(self) -> str:
        return self.name or f"{self.q}:" + ",".join(f"{a}-{b}" for a, b in self.edges)


CATALOGUE: dict[str, tuple[int, tuple[tuple[int, int], ...]]] = {
    "K1": (1, ()),
    "K2": (2, ((0, 1),)),
    "P3": (3, ((0, 1), (1, 2))),
    "K3": (3, ((0, 1), (1, 2), (0, 2))),
    "P4": (4, ((0, 1), (1, 2), (2, 3))),
    "S3": (4, ((0, 1), (0, 2), (0, 3))),
    "C4": (4, ((0, 1), (1, 2), (2, 3), (0, 3))),
    "paw": (4, ((0, 1), (1, 2), (0, 2), (2, 3))),
    "diamond": (4, ((0, 1), (1, 2), (2, 3), (0, 3), (0, 2))),
    "K4": (4, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))),
}


@lru_cache(maxsize=None)
def _embeddings(g_key, h_key) -> int:
    """Edge-preserving bijections from the vertices of ``g`` onto those of ``h``."""
    q, g_edges = g_key
    qh, h_edges = h_key
    if q != qh:
        return 0
    hset = set(h_edges)
    n = 0
    for perm in itertools.permutations(range(q)):
        if all(tuple(sorted((perm[a], perm[b]))) in hset for a, b in g_edges):
            n += 1
    return n


def copies(g: Graph, h_key) -> int:
    """Spanning subgraphs of ``h`` isomorphic to ``g``."""
    return _embeddings(g.key, h_key) // g.automorphisms()


def kappa(d: int) -> float:
    """Volume of the unit ball in ``R^d``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class GraphTerm:
    graph: Graph
    mode: str = "subgraph"
    a: float = 1.0

    def __post_init__(self):
        mode = {"=": "induced", "induced": "induced", "subgraph": "subgraph", "sub": "subgraph",
                "subset": "subgraph"}.get(self.mode)
        if mode is None:
            raise InputError(f"mode must be 'induced' or 'subgraph', got {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if self.a == 0 or not math.isfinite(self.a):
            raise InputError("coefficients must be finite and non-zero")

    def to_dict(self) -> dict:
        return {"graph": self.graph.serialize(), "mode": self.mode, "a": self.a}


@dataclass(frozen=True)
class RggConfig:
    d: int
    L: float
    t: float
    r: float
    terms: tuple[GraphTerm, ...]
    v: float = 1.0
    guard: int = field(default=POINT_GUARD)

    def __post_init__(self):
        if self.d < 1:
            raise InputError("dimension must be positive")
        for name in ("L", "t", "r", "v"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if not self.terms:
            raise InputError("at least one graph term is required")

    @property
    def volume(self) -> float:
        return self.L**self.d

    @property
    def p(self) -> int:
        return min(term.graph.q for term in self.terms)

    @property
    def q(self) -> int:
        return max(term.graph.q for term in self.terms)

    @property
    def a(self) -> float:
        return max(abs(term.a) for term in self.terms)

    @property
    def k(self) -> int:
        return len(self.terms)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RggConfig":
        try:
            terms = tuple(GraphTerm(Graph.parse(str(g["graph"])), str(g.get("mode", "subgraph")),
                                    float(g.get("a", 1.0))) for g in doc["graphs"])
            return cls(int(doc.get("d", 2)), float(doc.get("L", 1.0)), float(doc["t"]), float(doc["r"]),
                       terms, float(doc.get("v", 1.0)), int(doc.get("guard", POINT_GUARD)))
        except (KeyError, TypeError) as exc:
            raise InputError(f"rgg config is missing or mistyped field: {exc}") from None

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "t": self.t, "r": self.r, "v": self.v, "guard": self.guard,
                "graphs": [term.to_dict() for term in self.terms]}


def adjacency(points: np.ndarray, r: float) -> list[set[int]]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    adj: list[set[int]] = [set() for _ in range(len(pts))]
    if len(pts) < 2:
        return adj
    for i, j in cKDTree(pts).query_pairs(r):
        if np.any(pts[i] != pts[j]):
            adj[i].add(j)
            adj[j].add(i)
    return adj


def connected_subsets(adj: Sequence[set[int]], k: int):
    """Every connected vertex set of size ``1..k`` exactly once (ESU)."""
    def extend(sub, ext, root, border):
        yield sub
        if len(sub) == k:
            return
        ext = sorted(ext)
        while ext:
            w = ext.pop()
            fresh = {u for u in adj[w] if u > root and u not in sub and u not in border}
            yield from extend(sub + (w,), set(ext) | fresh, root, border | adj[w] | {w})

    for v in range(len(adj)):
        yield from extend((v,), {u for u in adj[v] if u > v}, v, set(adj[v]) | {v})


def _induced_key(sub: Sequence[int], adj: Sequence[set[int]]):
    edges = [(i, j) for i, j in itertools.combinations(range(len(sub)), 2) if sub[j] in adj[sub[i]]]
    return (len(sub), _canon(len(sub), edges))


def subset_histogram(points, r: float, k: int) -> dict:
    """Number of vertex sets of size ``<= k`` per isomorphism class of connected induced graph."""
    adj = adjacency(points, r)
    hist: dict = {}
    for sub in connected_subsets(adj, k):
        key = _induced_key(sub, adj)
        hist[key] = hist.get(key, 0) + 1
    return hist


@dataclass(frozen=True)
class GraphCounts:
    graph: str
    induced: int
    subgraph: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def rgg_counts(points, config: RggConfig) -> list[GraphCounts]:
    """Induced and non-induced copies of each configured graph."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n and float(n) ** config.q > config.guard:
        raise TooManyPoints(f"{n} points with graphs of {config.q} vertices exceed the guard {config.guard}")
    hist = subset_histogram(pts, config.r, config.q)
    out = []
    for term in config.terms:
        g = term.graph
        induced = hist.get(g.key, 0)
        sub = sum(c * copies(g, key) for key, c in hist.items() if key[0] == g.q)
        out.append(GraphCounts(g.serialize(), induced, sub))
    return out


def statistic(points, config: RggConfig) -> float:
    """``S = sum_i a_i S^{mode_i}(G_i)``."""
    counts = rgg_counts(points, config)
    return math.fsum(term.a * (c.induced if term.mode == "induced" else c.subgraph)
                     for term, c in zip(config.terms, counts))


def kernel_value(xs: Sequence, graph: Graph, mode: str, r: float) -> float:
    """``f_=`` or ``f_sub`` at one tuple of points: ``1/q!`` times the indicator or copy count."""
    pts = np.asarray(xs, dtype=float)
    q = graph.q
    if len(pts) != q:
        raise InputError(f"need {q} points, got {len(pts)}")
    adj = adjacency(pts, r)
    key = _induced_key(tuple(range(q)), adj)
    if GraphTerm(graph, mode).mode == "induced":
        hit = 1 if key == graph.key else 0
    else:
        hit = copies(graph, key)
    return hit / math.factorial(q)


def sample_points(config: RggConfig, rng: np.random.Generator) -> np.ndarray:
    n = rng.poisson(config.t * config.volume)
    return rng.uniform(0.0, config.L, size=(n, config.d))


def simulate(config: RggConfig, seed: int, replicas: int) -> np.ndarray:
    out = np.empty(replicas)
    for i in range(replicas):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, i)))
        out[i] = statistic(sample_points(config, rng), config)
    return out


def tau_rgg(config: RggConfig) -> float:
    t, p, q, a, v = config.t, config.p, config.q, config.a, config.v
    ball = kappa(config.d) * config.r**config.d
    num = math.sqrt(v * t * min(1.0, t * ball) ** (p - 1))
    den = (config.k * q**q) ** 3 * max(a, a**3 * config.volume / v)
    return num / den


@dataclass(frozen=True)
class VarianceCheck:
    bound: float
    estimate: float
    se: float
    holds: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def vrgg_lower(config: RggConfig) -> float:
    t, p, q = config.t, config.p, config.q
    ball = kappa(config.d) * config.r**config.d
    return config.v * max(t ** (2 * q - 1) * ball ** (2 * q - 2), t**p * ball ** (p - 1))


def vrgg_bound(config: RggConfig, estimate: float, se: float = 0.0, mult: float = 5.0) -> VarianceCheck:
    """Is the estimated variance compatible with ``Var S >= v max{...}``?"""
    bound = vrgg_lower(config)
    return VarianceCheck(bound, float(estimate), float(se), estimate + mult * se >= bound)
