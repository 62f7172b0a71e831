"""Row-constrained set partitions of diagrams.

A diagram with row profile ``(q1, ..., qm)`` has ``N = q1 + ... + qm``
elements labelled ``1..N``; row ``l`` holds the consecutive labels
``N_{l-1}+1 .. N_l``.  Every partition handled here is *row compatible*:
no block contains two elements of the same row.

Five classes are supported (see :class:`PartitionClass`).  Partitions are
kept in canonical form (blocks sorted ascending, ordered by their minimum)
and enumerated in lexicographic order of that form.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .errors import (
    IncompatibleShapes,
    InputError,
    KNotEven,
    NotRowCompatible,
    ShapeTooLarge,
)

DEFAULT_GUARD = 20


class PartitionClass(str, enum.Enum):
    ALL = "all"
    NO_SINGLETONS = "no-singletons"
    CONNECTED = "connected"
    CONNECTED_NO_SINGLETONS = "connected-no-singletons"
    ROW_COVERING = "row-covering"

    @classmethod
    def parse(cls, text: "str | PartitionClass") -> "PartitionClass":
        if isinstance(text, PartitionClass):
            return text
        key = text.strip().lower().replace("_", "-")
        aliases = {
            "pi": cls.ALL,
            "pi>=2": cls.NO_SINGLETONS,
            "pi~": cls.CONNECTED,
            "pi~>=2": cls.CONNECTED_NO_SINGLETONS,
            "pibar": cls.ROW_COVERING,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise InputError(f"unknown partition class {text!r}; expected one of {names}") from None


@dataclass(frozen=True)
class DiagramShape:
    rows: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        if not rows:
            raise InputError("a diagram needs at least one row")
        if any(r < 1 for r in rows):
            raise InputError(f"row sizes must be positive, got {rows}")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def of(cls, *rows: int) -> "DiagramShape":
        return cls(tuple(rows))

    @classmethod
    def parse(cls, text: str) -> "DiagramShape":
        try:
            return cls(tuple(int(tok) for tok in text.split(",")))
        except ValueError:
            raise InputError(f"cannot parse shape {text!r}; expected e.g. '2,2'") from None

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def N(self) -> int:
        return sum(self.rows)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Cumulative sizes ``(N_0, N_1, ..., N_m)``."""
        return tuple(itertools.accumulate(self.rows, initial=0))

    def row_elements(self, row: int) -> range:
        off = self.offsets
        return range(off[row - 1] + 1, off[row] + 1)

    def row_of(self, element: int) -> int:
        if not 1 <= element <= self.N:
            raise InputError(f"element {element} outside 1..{self.N}")
        return _row_lookup(self.rows)[element]

    def serialize(self) -> str:
        return ",".join(map(str, self.rows))

    def __str__(self) -> str:
        return self.serialize()


@lru_cache(maxsize=None)
def _row_lookup(rows: tuple[int, ...]) -> tuple[int, ...]:
    # index 0 unused so that element labels index directly
    out = [0]
    for r, size in enumerate(rows, start=1):
        out.extend([r] * size)
    return tuple(out)


@dataclass(frozen=True)
class DiagramPartition:
    shape: DiagramShape
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(int(e) for e in b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in blocks):
            raise InputError("blocks must be non-empty")
        flat = sorted(e for b in blocks for e in b)
        if flat != list(range(1, self.shape.N + 1)):
            raise InputError(f"blocks {blocks} do not partition 1..{self.shape.N}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def _trusted(cls, shape: DiagramShape, blocks: tuple[tuple[int, ...], ...]) -> "DiagramPartition":
        obj = object.__new__(cls)
        object.__setattr__(obj, "shape", shape)
        object.__setattr__(obj, "blocks", blocks)
        return obj

    @classmethod
    def parse(cls, text: str, shape: DiagramShape) -> "DiagramPartition":
        try:
            blocks = tuple(tuple(int(e) for e in part.split(",")) for part in text.split("|"))
        except ValueError:
            raise InputError(f"cannot parse partition {text!r}; expected e.g. '1,3|2,4'") from None
        return cls(shape, blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def serialize(self) -> str:
        return "|".join(",".join(map(str, b)) for b in self.blocks)

    def __str__(self) -> str:
        return self.serialize()

    def sort_key(self) -> tuple[tuple[int, ...], ...]:
        return self.blocks

    def is_row_compatible(self) -> bool:
        rows = _row_lookup(self.shape.rows)
        return all(len({rows[e] for e in b}) == len(b) for b in self.blocks)

    def ascii_diagram(self) -> str:
        """Rows as text lines, each element tagged by a letter naming its block."""
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        tag = {}
        for i, b in enumerate(self.blocks):
            for e in b:
                tag[e] = letters[i % len(letters)]
        lines = []
        for r in range(1, self.shape.m + 1):
            lines.append(" ".join(tag[e] for e in self.shape.row_elements(r)))
        return "\n".join(lines)


@dataclass(frozen=True)
class PartitionFlags:
    row_compatible: bool
    no_singletons: bool
    connected: bool
    row_covering: bool

    def member_of(self, cls: PartitionClass) -> bool:
        if not self.row_compatible:
            return False
        if cls is PartitionClass.ALL:
            return True
        if cls is PartitionClass.NO_SINGLETONS:
            return self.no_singletons
        if cls is PartitionClass.CONNECTED:
            return self.connected
        if cls is PartitionClass.CONNECTED_NO_SINGLETONS:
            return self.connected and self.no_singletons
        return self.row_covering


def _row_components(rows: tuple[int, ...], blocks) -> list[list[int]]:
    lookup = _row_lookup(rows)
    m = len(rows)
    parent = list(range(m + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for b in blocks:
        first = find(lookup[b[0]])
        for e in b[1:]:
            other = find(lookup[e])
            if other != first:
                parent[other] = first
    groups: dict[int, list[int]] = {}
    for r in range(1, m + 1):
        groups.setdefault(find(r), []).append(r)
    return sorted(groups.values())


def _is_connected(rows, blocks) -> bool:
    return len(_row_components(rows, blocks)) == 1


def _is_row_covering(rows, blocks) -> bool:
    lookup = _row_lookup(rows)
    covered = {lookup[e] for b in blocks if len(b) >= 2 for e in b}
    return len(covered) == len(rows)


def classify(p: DiagramPartition) -> PartitionFlags:
    rows = p.shape.rows
    return PartitionFlags(
        row_compatible=p.is_row_compatible(),
        no_singletons=min(len(b) for b in p.blocks) >= 2,
        connected=_is_connected(rows, p.blocks),
        row_covering=_is_row_covering(rows, p.blocks),
    )


def induced_row_partition(p: DiagramPartition) -> tuple[tuple[int, ...], ...]:
    """Partition of the rows ``1..m`` linked through shared blocks."""
    if not p.is_row_compatible():
        raise NotRowCompatible(f"{p} is not row compatible for shape {p.shape}")
    return tuple(tuple(g) for g in _row_components(p.shape.rows, p.blocks))


def _check_guard(shape: DiagramShape, guard: int | None):
    limit = DEFAULT_GUARD if guard is None else guard
    if shape.N > limit:
        raise ShapeTooLarge(f"shape {shape} has N={shape.N} elements, above the enumeration guard {limit}")


def _generate(rows: tuple[int, ...], min_size: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    # Block-at-a-time: the block holding the smallest free element is grown
    # by free elements in increasing order (stopping early first), which
    # emits tuples-of-blocks in lexicographic order.
    lookup = _row_lookup(rows)
    N = sum(rows)
    blocks: list[tuple[int, ...]] = []

    def rec(free: tuple[int, ...]):
        if not free:
            yield tuple(blocks)
            return
        anchor, rest = free[0], free[1:]

        def grow(block, used, start):
            if len(block) >= min_size:
                taken = set(block)
                blocks.append(block)
                yield from rec(tuple(e for e in rest if e not in taken))
                blocks.pop()
            for idx in range(start, len(rest)):
                e = rest[idx]
                r = lookup[e]
                if r in used:
                    continue
                yield from grow(block + (e,), used | {r}, idx + 1)

        yield from grow((anchor,), frozenset((lookup[anchor],)), 0)

    yield from rec(tuple(range(1, N + 1)))


def iter_partitions(shape: DiagramShape, cls: "PartitionClass | str" = PartitionClass.ALL,
                    guard: int | None = None) -> Iterator[DiagramPartition]:
    """Lazily yield the partitions of ``cls`` in canonical order."""
    cls = PartitionClass.parse(cls)
    _check_guard(shape, guard)
    rows = shape.rows
    min_size = 2 if cls in (PartitionClass.NO_SINGLETONS, PartitionClass.CONNECTED_NO_SINGLETONS) else 1
    need_connected = cls in (PartitionClass.CONNECTED, PartitionClass.CONNECTED_NO_SINGLETONS)
    need_cover = cls is PartitionClass.ROW_COVERING
    for blocks in _generate(rows, min_size):
        if need_connected and not _is_connected(rows, blocks):
            continue
        if need_cover and not _is_row_covering(rows, blocks):
            continue
        yield DiagramPartition._trusted(shape, blocks)


@lru_cache(maxsize=256)
def _cached(rows: tuple[int, ...], cls: PartitionClass, guard: int | None) -> tuple[DiagramPartition, ...]:
    return tuple(iter_partitions(DiagramShape(rows), cls, guard))


def enumerate_partitions(shape: DiagramShape, cls: "PartitionClass | str" = PartitionClass.ALL,
                         guard: int | None = None) -> list[DiagramPartition]:
    cls = PartitionClass.parse(cls)
    _check_guard(shape, guard)
    return list(_cached(shape.rows, cls, guard))


def _block_dp(rows: Sequence[int]) -> dict[tuple[int, int], int]:
    # State: (singleton blocks, blocks of size >= 2).  A new row sends j1 of
    # its elements into distinct singletons, j2 into distinct larger blocks,
    # and opens singletons with the rest.
    states = {(0, 0): 1}
    for q in rows:
        nxt: dict[tuple[int, int], int] = {}
        for (s, b), ways in states.items():
            for j1 in range(min(q, s) + 1):
                for j2 in range(min(q - j1, b) + 1):
                    fresh = q - j1 - j2
                    mult = (math.factorial(q) // (math.factorial(j1) * math.factorial(j2) * math.factorial(fresh))
                            * math.perm(s, j1) * math.perm(b, j2))
                    key = (s - j1 + fresh, b + j1)
                    nxt[key] = nxt.get(key, 0) + ways * mult
        states = nxt
    return states


def block_count_profile(shape: DiagramShape, cls: "PartitionClass | str" = PartitionClass.ALL,
                        guard: int | None = None) -> dict[int, int]:
    """Number of partitions in the class with exactly ``k`` blocks, keyed by ``k``."""
    cls = PartitionClass.parse(cls)
    _check_guard(shape, guard)
    out: dict[int, int] = {}
    if cls in (PartitionClass.ALL, PartitionClass.NO_SINGLETONS):
        for (s, b), ways in _block_dp(shape.rows).items():
            if cls is PartitionClass.NO_SINGLETONS and s:
                continue
            out[s + b] = out.get(s + b, 0) + ways
    else:
        for p in iter_partitions(shape, cls, guard):
            out[len(p)] = out.get(len(p), 0) + 1
    return dict(sorted(out.items()))


def count_partitions(shape: DiagramShape, cls: "PartitionClass | str" = PartitionClass.ALL,
                     guard: int | None = None) -> int:
    """Size of the class.

    ``ALL`` and ``NO_SINGLETONS`` are counted by a row-by-row transfer
    recursion; the connectivity-based classes are counted by enumeration.
    """
    return sum(block_count_profile(shape, cls, guard).values())


def theta_embed(p: DiagramPartition, target: DiagramShape) -> DiagramPartition:
    """Shift ``p`` (over reduced rows ``j``) into ``target`` rows ``q >= j``.

    Row ``l`` labels move by ``sum_{i<l} (q_i - j_i)``; the ``q_l - j_l``
    trailing elements of each target row become singletons.
    """
    src = p.shape
    if src.m != target.m or any(j > q for j, q in zip(src.rows, target.rows)):
        raise IncompatibleShapes(f"cannot embed shape {src} into {target}")
    tau = theta_map(src, target)
    moved = [tuple(tau[e] for e in b) for b in p.blocks]
    used = {e for b in moved for e in b}
    extra = [(z,) for z in range(1, target.N + 1) if z not in used]
    return DiagramPartition(target, tuple(moved + extra))


def theta_map(src: DiagramShape, target: DiagramShape) -> dict[int, int]:
    src_off, tgt_off = src.offsets, target.offsets
    tau = {}
    for k in range(src.m):
        for r in range(1, src.rows[k] + 1):
            tau[src_off[k] + r] = tgt_off[k] + r
    return tau


def singleton_profile(p: DiagramPartition) -> tuple[int, ...]:
    lookup = _row_lookup(p.shape.rows)
    counts = [0] * p.shape.m
    for b in p.blocks:
        if len(b) == 1:
            counts[lookup[b[0]] - 1] += 1
    return tuple(counts)


@dataclass(frozen=True)
class UpperBoundReport:
    q: int
    m: int
    count: int
    bound: int
    holds: bool


def verify_upper_bound(q: int, m: int, guard: int | None = None) -> UpperBoundReport:
    """Compare ``|Pi^m(q)|`` with ``q^(q m) (m!)^q`` in integer arithmetic."""
    if q < 2 or m < 1:
        raise InputError(f"need q >= 2 and m >= 1, got q={q}, m={m}")
    shape = DiagramShape((q,) * m)
    count = count_partitions(shape, PartitionClass.ALL, guard)
    bound = q ** (q * m) * math.factorial(m) ** q
    return UpperBoundReport(q, m, count, bound, count <= bound)


def _equal_groupings(items: Sequence[int], size: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All ways to split ``items`` into unordered groups of ``size``."""
    if not items:
        yield ()
        return
    if size == 0:
        return
    anchor, rest = items[0], items[1:]
    for mates in itertools.combinations(rest, size - 1):
        group = (anchor,) + mates
        left = [e for e in rest if e not in mates]
        for tail in _equal_groupings(left, size):
            yield (group,) + tail


@dataclass(frozen=True)
class LowerBoundFamily:
    q: int
    u: int
    k: int
    partitions: tuple[DiagramPartition, ...]
    formula: int

    @property
    def count(self) -> int:
        return len(self.partitions)


def lower_bound_formula(q: int, u: int, k: int) -> int:
    """Number of partitions the three-step construction produces."""
    groups = math.factorial(u * k) // (math.factorial(u) * math.factorial(k) ** u)
    if k == 2:
        # no leftover column-2 elements: exactly one (empty) filler choice
        rest = 1
    else:
        rest = math.factorial((k - 2) * u) // (math.factorial(u) * math.factorial(k - 2) ** u)
    return groups * rest * groups ** (q - 2)


def lower_bound_family(q: int, u: int, k: int, guard: int | None = None) -> LowerBoundFamily:
    """Explicit connected, singleton-free partitions of ``Pi^{uk}(q)``.

    Rows are grouped ``k`` at a time through column 1, the groups are
    chained cyclically through column 2 (leftover column-2 elements form
    blocks of size ``k-2``), and every further column is grouped in blocks
    of size ``k``.  All groupings are realised, so the family size equals
    :func:`lower_bound_formula`.
    """
    if k % 2 or k < 2:
        raise KNotEven(f"k must be an even integer >= 2, got {k}")
    if q < 2 or u < 1:
        raise InputError(f"need q >= 2 and u >= 1, got q={q}, u={u}")
    m = u * k
    shape = DiagramShape((q,) * m)
    _check_guard(shape, guard)

    def elem(row0: int, col: int) -> int:
        return q * row0 + col

    rows0 = list(range(m))
    col_choices = [list(_equal_groupings(rows0, k)) for _ in range(3, q + 1)]
    out = []
    for groups in _equal_groupings(rows0, k):
        # groups come ordered by their smallest row, i.e. by i_1
        base = [tuple(elem(r, 1) for r in g) for g in groups]
        links = []
        for ell in range(u):
            nxt = groups[(ell + 1) % u]
            links.append((groups[ell][0], nxt[-1]))
        linked_rows = {r for pair in links for r in pair}
        leftover = [r for r in rows0 if r not in linked_rows]
        link_blocks = [(elem(a, 2), elem(b, 2)) for a, b in links]
        # k == 2 leaves nothing over: the empty grouping is the only filler
        for fill in _equal_groupings(leftover, k - 2):
            fill_blocks = [tuple(elem(r, 2) for r in g) for g in fill]
            for later in itertools.product(*col_choices):
                later_blocks = [tuple(elem(r, j) for r in g)
                                for j, grouping in zip(range(3, q + 1), later) for g in grouping]
                out.append(DiagramPartition(shape, tuple(base + link_blocks + fill_blocks + later_blocks)))
    out.sort(key=DiagramPartition.sort_key)
    return LowerBoundFamily(q, u, k, tuple(out), lower_bound_formula(q, u, k))
