"""Permutations of K temperature slots and the subgroups used for swapping.

Permutations are stored by their 1-based images, ``images[i-1] = sigma(i)``,
matching the ``(a_1, ..., a_K)`` notation.  Composition follows
``compose(p, q)(i) = p(q(i))`` and ``permute_state(p, y)`` places ``y_{p(i)}``
in slot ``i``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityExceededError, InvalidArgumentError
from .state import ReplicaState

DEFAULT_CAP = 10_080
DEFAULT_MAX_BLOCK = 6


@dataclass(frozen=True, order=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(v) for v in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise InvalidArgumentError(f"not a permutation of 1..{len(images)}: {images}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, K: int) -> "Permutation":
        return cls(tuple(range(1, K + 1)))

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        """Parse the comma-separated 1-based form, e.g. ``"2,1,3,4"``."""
        try:
            return cls(tuple(int(tok) for tok in text.split(",")))
        except ValueError as exc:
            raise InvalidArgumentError(f"cannot parse permutation {text!r}") from exc

    @classmethod
    def from_index(cls, index: Sequence[int]) -> "Permutation":
        return cls(tuple(int(i) + 1 for i in index))

    @property
    def K(self) -> int:
        return len(self.images)

    @property
    def index(self) -> np.ndarray:
        """0-based images as an integer array."""
        return np.asarray(self.images, dtype=np.intp) - 1

    def is_identity(self) -> bool:
        return self.images == tuple(range(1, self.K + 1))

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.images)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return ``p o q``, i.e. ``i -> p(q(i))``."""
    if p.K != q.K:
        raise InvalidArgumentError(f"arity mismatch: {p.K} vs {q.K}")
    return Permutation(tuple(p.images[j - 1] for j in q.images))


def invert(p: Permutation) -> Permutation:
    inv = [0] * p.K
    for i, v in enumerate(p.images, start=1):
        inv[v - 1] = i
    return Permutation(tuple(inv))


def permute_state(p: Permutation, y: ReplicaState) -> ReplicaState:
    """Return ``y_p = (y_{p(1)}, ..., y_{p(K)})`` on the same ladder."""
    if p.K != y.K:
        raise InvalidArgumentError(f"permutation of arity {p.K} applied to {y.K} replicas")
    idx = p.index
    energies = None if y.energies is None else y.energies[idx]
    grads = None if y.grads is None else y.grads[idx]
    return y.with_coords(y.coords[idx], energies=energies, grads=grads)


class PermutationSet:
    """An ordered, duplicate-free collection of permutations of equal arity.

    ``is_subgroup`` is set only by constructors that guarantee closure
    (:func:`generate_subgroup`, :func:`block_partition_subgroup`,
    :func:`symmetric_group`) or after :meth:`check_subgroup` succeeds.
    """

    def __init__(self, elements: Iterable[Permutation], K: int | None = None, is_subgroup: bool = False):
        elements = tuple(elements)
        if K is None:
            if not elements:
                raise InvalidArgumentError("cannot infer arity of an empty permutation set")
            K = elements[0].K
        if any(p.K != K for p in elements):
            raise InvalidArgumentError(f"all permutations must have arity {K}")
        if len(set(elements)) != len(elements):
            raise InvalidArgumentError("duplicate permutations in set")
        self._elements = elements
        self.K = K
        self.is_subgroup = is_subgroup

    @classmethod
    def from_strings(cls, items: Iterable[str]) -> "PermutationSet":
        return cls([Permutation.parse(s) for s in items])

    @property
    def elements(self) -> tuple[Permutation, ...]:
        return self._elements

    @property
    def order(self) -> int:
        return len(self._elements)

    def __len__(self) -> int:
        return self.order

    def __iter__(self) -> Iterator[Permutation]:
        return iter(self.elements)

    def __contains__(self, p: Permutation) -> bool:
        return p in self._member_set

    def __eq__(self, other) -> bool:
        if not isinstance(other, PermutationSet):
            return NotImplemented
        return self.K == other.K and self._member_set == other._member_set

    def __hash__(self):
        return hash((self.K, frozenset(self._member_set)))

    def __repr__(self) -> str:
        kind = "subgroup" if self.is_subgroup else "set"
        return f"{type(self).__name__}(K={self.K}, order={self.order}, {kind})"

    @cached_property
    def _member_set(self) -> frozenset:
        return frozenset(self.elements)

    @cached_property
    def table(self) -> np.ndarray:
        """``(order, K)`` array of 0-based images."""
        return np.array([p.images for p in self.elements], dtype=np.intp).reshape(-1, self.K) - 1

    def check_subgroup(self) -> bool:
        """Exhaustively verify the group axioms; flag the set on success."""
        members = self._member_set
        ok = Permutation.identity(self.K) in members and all(
            invert(p) in members and all(compose(p, q) in members for q in self.elements)
            for p in self.elements
        )
        if ok:
            self.is_subgroup = True
        return ok

    def factors(self) -> list[tuple[np.ndarray, "PermutationSet"]]:
        """Independent factors as ``(slots, local set)`` pairs.

        A plain set is a single factor acting on all slots.  Product subgroups
        split into per-block factors so that weights can be computed block by
        block without enumerating the product.
        """
        return [(np.arange(self.K), self)]


class BlockSubgroup(PermutationSet):
    """Direct product of full symmetric groups on contiguous blocks of slots.

    Elements are enumerated lazily and only when the order is within ``cap``;
    samplers work through :meth:`factors`, whose cost is bounded by the
    largest block.
    """

    def __init__(self, block_sizes: Sequence[int], cap: int = DEFAULT_CAP):
        self.block_sizes = tuple(int(b) for b in block_sizes)
        self.K = sum(self.block_sizes)
        self.is_subgroup = True
        self.cap = cap
        self._factors = []
        start = 0
        for size in self.block_sizes:
            if size > 1:
                self._factors.append((np.arange(start, start + size), symmetric_group(size)))
            start += size

    @property
    def order(self) -> int:
        return math.prod(math.factorial(b) for b in self.block_sizes)

    @cached_property
    def _elements(self) -> tuple[Permutation, ...]:
        if self.order > self.cap:
            raise CapacityExceededError(
                f"block subgroup of order {self.order} exceeds cap {self.cap}; use factors()", self.cap
            )
        offsets = np.cumsum((0,) + self.block_sizes[:-1])
        per_block = [itertools.permutations(range(o + 1, o + b + 1)) for o, b in zip(offsets, self.block_sizes)]
        return tuple(sorted(Permutation(sum(combo, ())) for combo in itertools.product(*per_block)))

    def __contains__(self, p: Permutation) -> bool:
        if p.K != self.K:
            return False
        start = 0
        for size in self.block_sizes:
            if sorted(p.images[start:start + size]) != list(range(start + 1, start + size + 1)):
                return False
            start += size
        return True

    def factors(self) -> list[tuple[np.ndarray, PermutationSet]]:
        return list(self._factors)

    def __repr__(self) -> str:
        return f"BlockSubgroup(blocks={list(self.block_sizes)})"


def _closure(gens: list[Permutation], K: int, cap: int) -> list[Permutation]:
    ident = Permutation.identity(K)
    seeds = [ident] + gens + [invert(g) for g in gens]
    seen = set()
    queue = deque()
    for p in seeds:
        if p not in seen:
            seen.add(p)
            queue.append(p)
    while queue:
        p = queue.popleft()
        for g in gens:
            r = compose(p, g)
            if r not in seen:
                seen.add(r)
                if len(seen) > cap:
                    raise CapacityExceededError(f"subgroup closure exceeds cap of {cap} elements", cap)
                queue.append(r)
    if len(seen) > cap:
        raise CapacityExceededError(f"subgroup closure exceeds cap of {cap} elements", cap)
    return sorted(seen)


def generate_subgroup(generators: Iterable[Permutation] | PermutationSet, cap: int = DEFAULT_CAP,
                      K: int | None = None) -> PermutationSet:
    """Smallest subgroup containing the generators, in lexicographic order.

    Raises
    ------
    CapacityExceededError
        If the closure has more than ``cap`` elements.
    """
    if cap < 1:
        raise InvalidArgumentError("cap must be at least 1")
    if isinstance(generators, PermutationSet):
        K = generators.K if K is None else K
        generators = generators.elements
    gens = sorted(set(generators))
    if K is None:
        if not gens:
            raise InvalidArgumentError("arity required when there are no generators")
        K = gens[0].K
    if any(g.K != K for g in gens):
        raise InvalidArgumentError("generators must share one arity")
    return PermutationSet(_closure(gens, K, cap), K=K, is_subgroup=True)


def generates_full_group(subgroups: Sequence[PermutationSet], cap: int = DEFAULT_CAP) -> bool:
    """True iff the union of ``subgroups`` generates the full symmetric group."""
    if not subgroups:
        raise InvalidArgumentError("need at least one subgroup")
    K = subgroups[0].K
    if any(s.K != K for s in subgroups):
        raise InvalidArgumentError("subgroups must share one arity")
    gens = []
    for s in subgroups:
        if isinstance(s, BlockSubgroup):
            # adjacent transpositions inside each block generate the block
            start = 0
            for size in s.block_sizes:
                for i in range(start, start + size - 1):
                    gens.append(transposition(K, i + 1, i + 2))
                start += size
        else:
            gens.extend(s.elements)
    return generate_subgroup(gens, cap=cap, K=K).order == math.factorial(K)


def transposition(K: int, i: int, j: int) -> Permutation:
    """Swap of the 1-based slots ``i`` and ``j``."""
    images = list(range(1, K + 1))
    images[i - 1], images[j - 1] = j, i
    return Permutation(tuple(images))


def symmetric_group(K: int, cap: int = DEFAULT_CAP) -> PermutationSet:
    if math.factorial(K) > cap:
        raise CapacityExceededError(f"S_{K} has {math.factorial(K)} elements, over cap {cap}", cap)
    return PermutationSet(
        [Permutation(p) for p in itertools.permutations(range(1, K + 1))], K=K, is_subgroup=True
    )


def trivial_group(K: int) -> PermutationSet:
    return PermutationSet([Permutation.identity(K)], K=K, is_subgroup=True)


def block_partition_subgroup(K: int, block_sizes: Sequence[int], max_block: int = DEFAULT_MAX_BLOCK,
                             cap: int = DEFAULT_CAP) -> BlockSubgroup:
    """All permutations acting independently within contiguous slot blocks.

    ``block_partition_subgroup(45, [3] + [6] * 7)`` is the lowest-first
    partition; ``[6] * 7 + [3]`` the overlapping companion.
    """
    sizes = [int(b) for b in block_sizes]
    if any(b < 1 for b in sizes):
        raise InvalidArgumentError(f"block sizes must be positive: {sizes}")
    if sum(sizes) != K:
        raise InvalidArgumentError(f"block sizes {sizes} sum to {sum(sizes)}, not {K}")
    too_big = [b for b in sizes if b > max_block]
    if too_big:
        raise CapacityExceededError(f"block of size {too_big[0]} exceeds maximum {max_block}", max_block)
    return BlockSubgroup(sizes, cap=cap)


def staggered_blocks(K: int, max_block: int = DEFAULT_MAX_BLOCK, first: int | None = None) -> tuple[list[int], list[int]]:
    """Two overlapping block partitions, e.g. ``3,6,...,6`` and ``6,...,6,3``.

    The first partition starts with a short block of size ``first`` (default
    ``max_block // 2``) and the second is its mirror image, so every block
    boundary of one falls inside a block of the other.
    """
    first = max_block // 2 if first is None else first
    a = [min(first, K)]
    while sum(a) < K:
        a.append(min(max_block, K - sum(a)))
    b = list(reversed(a))
    return a, b
