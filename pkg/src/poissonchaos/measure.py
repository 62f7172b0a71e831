"""Finite weighted atom spaces, symmetric kernels and merged tensor integrals."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import IndexOutOfRange, InputError, OrderMismatch, ShapeMismatch, ShapeTooLarge
from .partitions import DiagramPartition, DiagramShape

DENSE_LIMIT = 10**6
NAIVE_EINSUM_LIMIT = 2 * 10**5


@dataclass(frozen=True)
class AtomSpace:
    """A discrete measure: atom ``atoms[i]`` carries mass ``weights[i] > 0``."""

    atoms: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        w = np.array(self.weights, dtype=float).reshape(-1)
        w.setflags(write=False)
        if len(atoms) != len(w):
            raise InputError(f"{len(atoms)} atoms but {len(w)} weights")
        if len(set(atoms)) != len(atoms):
            raise InputError("atom identifiers must be unique")
        if len(atoms) == 0:
            raise InputError("an atom space needs at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InputError("atom weights must be finite and strictly positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_weights(cls, weights: Sequence[float], prefix: str = "x") -> "AtomSpace":
        return cls(tuple(f"{prefix}{i}" for i in range(len(weights))), np.asarray(weights, dtype=float))

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def index(self, atom: str) -> int:
        try:
            return self.atoms.index(str(atom))
        except ValueError:
            raise InputError(f"unknown atom {atom!r}") from None

    def scaled(self, t: float) -> "AtomSpace":
        """The same atoms with intensity ``t * mu``."""
        if not t > 0:
            raise InputError(f"scale must be positive, got {t}")
        return AtomSpace(self.atoms, self.weights * t)

    def normalized(self) -> "AtomSpace":
        return AtomSpace(self.atoms, self.weights / self.total_mass)

    def permuted(self, order: Sequence[int]) -> "AtomSpace":
        order = list(order)
        return AtomSpace(tuple(self.atoms[i] for i in order), self.weights[order])

    def __eq__(self, other):
        return (isinstance(other, AtomSpace) and self.atoms == other.atoms
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.atoms, self.weights.tobytes()))


def _symmetrize(values: np.ndarray) -> np.ndarray:
    q = values.ndim
    if q <= 1:
        return values.copy()
    acc = np.zeros_like(values)
    perms = list(itertools.permutations(range(q)))
    for p in perms:
        acc += np.transpose(values, p)
    return acc / len(perms)


class SymmetricKernel:
    """Symmetric real function on ``q``-tuples of atoms, stored densely.

    Values are defined on every tuple, diagonal ones included.  Construction
    symmetrizes the input array; use :meth:`from_sorted` to fill values by
    their sorted index tuple instead.
    """

    def __init__(self, values, symmetrize: bool = True):
        arr = np.array(values, dtype=float)
        if arr.ndim == 0:
            raise InputError("kernel order must be at least 1")
        n = arr.shape[0]
        if any(s != n for s in arr.shape):
            raise InputError(f"kernel array must be cubic, got shape {arr.shape}")
        if arr.size > DENSE_LIMIT:
            raise ShapeTooLarge(f"dense kernel with {arr.size} entries exceeds {DENSE_LIMIT}")
        if not np.all(np.isfinite(arr)):
            raise InputError("kernel values must be finite")
        if symmetrize:
            arr = _symmetrize(arr)
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def from_sorted(cls, n_atoms: int, order: int, fn: Callable[[tuple[int, ...]], float]) -> "SymmetricKernel":
        """Evaluate ``fn`` once per sorted index tuple and spread by symmetry."""
        if n_atoms ** order > DENSE_LIMIT:
            raise ShapeTooLarge(f"{n_atoms}^{order} kernel entries exceed {DENSE_LIMIT}")
        arr = np.empty((n_atoms,) * order)
        memo: dict[tuple[int, ...], float] = {}
        for idx in itertools.product(range(n_atoms), repeat=order):
            key = tuple(sorted(idx))
            if key not in memo:
                memo[key] = float(fn(key))
            arr[idx] = memo[key]
        return cls(arr, symmetrize=False)

    @classmethod
    def constant(cls, n_atoms: int, order: int, c: float) -> "SymmetricKernel":
        return cls(np.full((n_atoms,) * order, float(c)), symmetrize=False)

    @classmethod
    def random(cls, n_atoms: int, order: int, rng: np.random.Generator,
               low: float = -1.0, high: float = 1.0) -> "SymmetricKernel":
        return cls.from_sorted(n_atoms, order, lambda _: rng.uniform(low, high))

    @property
    def order(self) -> int:
        return self.values.ndim

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]

    def __call__(self, *idx: int) -> float:
        return float(self.values[tuple(idx)])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def permuted(self, order: Sequence[int]) -> "SymmetricKernel":
        order = np.asarray(order)
        return SymmetricKernel(self.values[np.ix_(*([order] * self.order))], symmetrize=False)

    def __add__(self, other: "SymmetricKernel") -> "SymmetricKernel":
        if other.values.shape != self.values.shape:
            raise OrderMismatch("kernels differ in order or atom count")
        return SymmetricKernel(self.values + other.values, symmetrize=False)

    def __mul__(self, c: float) -> "SymmetricKernel":
        return SymmetricKernel(self.values * float(c), symmetrize=False)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        return f"SymmetricKernel(order={self.order}, n_atoms={self.n_atoms})"


def _check_space(kernel: SymmetricKernel, space: AtomSpace):
    if kernel.n_atoms != space.size:
        raise ShapeMismatch(f"kernel over {kernel.n_atoms} atoms used with a {space.size}-atom space")


def merged_tensor_integral(kernels: Sequence[SymmetricKernel], space: AtomSpace,
                           sigma: DiagramPartition) -> float:
    """Integral of the tensor product with variables identified blockwise.

    Every block of ``sigma`` becomes one summation variable weighted by the
    atom masses; kernel ``l`` reads the variables of the blocks meeting row
    ``l``.  The sum runs over all ``|X|^|sigma|`` assignments (as a tensor
    contraction).
    """
    rows = tuple(k.order for k in kernels)
    if sigma.shape.rows != rows:
        raise ShapeMismatch(f"partition shape {sigma.shape} does not match kernel orders {rows}")
    for k in kernels:
        _check_space(k, space)
    label = {}
    for b_idx, block in enumerate(sigma.blocks):
        for e in block:
            label[e] = b_idx
    offsets = sigma.shape.offsets
    operands: list = []
    for ell, k in enumerate(kernels):
        idx = [label[e] for e in range(offsets[ell] + 1, offsets[ell + 1] + 1)]
        if len(set(idx)) != len(idx):
            raise ShapeMismatch(f"partition {sigma} is not row compatible")
        operands += [k.values, idx]
    for b_idx in range(len(sigma.blocks)):
        operands += [space.weights, [b_idx]]
    # the unoptimized contraction avoids path search, which dominates on small spaces
    naive_cost = space.size ** len(sigma.blocks)
    return float(np.einsum(*operands, [], optimize=naive_cost > NAIVE_EINSUM_LIMIT and "greedy"))


def full_integral(kernel: SymmetricKernel, space: AtomSpace) -> float:
    """``int f d mu^q``."""
    _check_space(kernel, space)
    out = kernel.values
    for _ in range(kernel.order):
        out = out @ space.weights
    return float(out)


def integrate_out(kernel: SymmetricKernel, space: AtomSpace, keep: int) -> "SymmetricKernel | float":
    """Integrate the last ``q - keep`` arguments against ``mu``."""
    _check_space(kernel, space)
    if not 0 <= keep <= kernel.order:
        raise IndexOutOfRange(f"keep={keep} outside 0..{kernel.order}")
    out = kernel.values
    for _ in range(kernel.order - keep):
        out = out @ space.weights
    if keep == 0:
        return float(out)
    return SymmetricKernel(out, symmetrize=False)


def marginal_kernel(f: SymmetricKernel, space: AtomSpace, i: int) -> SymmetricKernel:
    """``f_i = binom(q, i) * int f(y_1..y_i, x_1..x_{q-i}) d mu^{q-i}``."""
    if not 1 <= i <= f.order:
        raise IndexOutOfRange(f"marginal index {i} outside 1..{f.order}")
    return math.comb(f.order, i) * integrate_out(f, space, i)


def inner_product(f: SymmetricKernel, g: SymmetricKernel, space: AtomSpace) -> float:
    if f.order != g.order:
        raise OrderMismatch(f"orders {f.order} and {g.order} differ")
    _check_space(f, space)
    _check_space(g, space)
    q = f.order
    idx = list(range(q))
    operands: list = [f.values, idx, g.values, idx]
    for a in idx:
        operands += [space.weights, [a]]
    return float(np.einsum(*operands, []))


def l2_norm_sq(f: SymmetricKernel, space: AtomSpace) -> float:
    return inner_product(f, f, space)


def all_singletons(rows: Sequence[int]) -> DiagramPartition:
    shape = DiagramShape(tuple(rows))
    return DiagramPartition(shape, tuple((e,) for e in range(1, shape.N + 1)))


# --- kernel files -----------------------------------------------------------

def load_kernel_file(path: "str | Path") -> tuple[AtomSpace, dict[str, SymmetricKernel]]:
    """Read the JSON kernel format.

    ``{"atoms": [{"id", "weight"}], "kernels": [{"name", "order", "entries":
    [{"tuple", "value"}], "default"}]}``; tuples not listed take ``default``.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return kernels_from_dict(doc)


def kernels_from_dict(doc: Mapping) -> tuple[AtomSpace, dict[str, SymmetricKernel]]:
    try:
        atoms = [(str(a["id"]), float(a["weight"])) for a in doc["atoms"]]
        space = AtomSpace(tuple(a for a, _ in atoms), np.array([w for _, w in atoms]))
        kernels = {}
        for spec in doc["kernels"]:
            name = str(spec["name"])
            q = int(spec["order"])
            if q < 1:
                raise InputError(f"kernel {name!r}: order must be >= 1")
            default = float(spec.get("default", 0.0))
            table: dict[tuple[int, ...], float] = {}
            for entry in spec.get("entries", []):
                tup = tuple(sorted(space.index(a) for a in entry["tuple"]))
                if len(tup) != q:
                    raise InputError(f"kernel {name!r}: tuple {entry['tuple']} has length {len(tup)} != {q}")
                table[tup] = float(entry["value"])
            kernels[name] = SymmetricKernel.from_sorted(space.size, q, lambda key: table.get(key, default))
    except (KeyError, TypeError) as exc:
        raise InputError(f"kernel document is missing or mistyped field: {exc}") from None
    if not kernels:
        raise InputError("kernel document defines no kernels")
    return space, kernels


def kernels_to_dict(space: AtomSpace, kernels: Mapping[str, SymmetricKernel]) -> dict:
    out = {"atoms": [{"id": a, "weight": float(w)} for a, w in zip(space.atoms, space.weights)], "kernels": []}
    for name, k in kernels.items():
        entries = []
        for idx in itertools.combinations_with_replacement(range(space.size), k.order):
            entries.append({"tuple": [space.atoms[i] for i in idx], "value": float(k.values[idx])})
        out["kernels"].append({"name": name, "order": k.order, "entries": entries, "default": 0.0})
    return out
