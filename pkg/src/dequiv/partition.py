"""Partitions of variable indices and set-partition enumeration."""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

from .errors import PartitionError


class Partition:
    """A partition of {0..n-1} in canonical form.

    Blocks are sorted tuples of indices, ordered by their smallest member.
    The representative of a block is its smallest member. Instances are
    immutable; equality is structural.
    """

    __slots__ = ("blocks", "n", "_block_of", "_hash")

    def __init__(self, blocks: tuple, n: int):
        # internal: blocks must already be canonical (use the classmethods)
        self.blocks = blocks
        self.n = n
        self._block_of = None
        self._hash = None

    @classmethod
    def of_blocks(cls, blocks: Iterable[Iterable[int]], n: int) -> "Partition":
        """Validate and canonicalize a candidate partition of {0..n-1}."""
        seen = [False] * n
        canon = []
        for block in blocks:
            members = sorted(set(block))
            if not members:
                continue
            for i in members:
                if not 0 <= i < n:
                    raise PartitionError(f"index {i} out of range for n={n}")
                if seen[i]:
                    raise PartitionError(f"index {i} appears in two blocks")
                seen[i] = True
            canon.append(tuple(members))
        missing = [i for i in range(n) if not seen[i]]
        if missing:
            raise PartitionError(f"indices not covered: {missing}")
        canon.sort(key=lambda b: b[0])
        return cls(tuple(canon), n)

    @classmethod
    def from_block_ids(cls, ids: Sequence[int]) -> "Partition":
        """Build from a per-index block label array."""
        groups: dict = {}
        for i, b in enumerate(ids):
            groups.setdefault(b, []).append(i)
        blocks = sorted((tuple(g) for g in groups.values()), key=lambda b: b[0])
        return cls(tuple(blocks), len(ids))

    @classmethod
    def discrete(cls, n: int) -> "Partition":
        return cls(tuple((i,) for i in range(n)), n)

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        if n == 0:
            return cls((), 0)
        return cls((tuple(range(n)),), n)

    @property
    def block_of(self) -> tuple:
        """block_of[i] is the index of the block containing i."""
        if self._block_of is None:
            arr = [0] * self.n
            for b, block in enumerate(self.blocks):
                for i in block:
                    arr[i] = b
            self._block_of = tuple(arr)
        return self._block_of

    @property
    def reps(self) -> tuple:
        return tuple(block[0] for block in self.blocks)

    @property
    def rep_of(self) -> list:
        """rep_of[i] is the representative (smallest member) of i's block."""
        reps = self.reps
        return [reps[b] for b in self.block_of]

    @property
    def size(self) -> int:
        return len(self.blocks)

    @property
    def is_discrete(self) -> bool:
        return len(self.blocks) == self.n

    @property
    def is_trivial(self) -> bool:
        return len(self.blocks) <= 1

    def block_containing(self, i: int) -> tuple:
        return self.blocks[self.block_of[i]]

    def refines(self, other: "Partition") -> bool:
        """True if every block of self sits inside one block of other."""
        if self.n != other.n:
            return False
        their = other.block_of
        return all(
            all(their[i] == their[block[0]] for i in block)
            for block in self.blocks
        )

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n == other.n and self.blocks == other.blocks

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self.blocks))
        return self._hash

    def __str__(self):
        return " ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)

    def __repr__(self):
        return f"Partition({self})"


def set_partitions(items: Sequence[int]) -> Iterator[list]:
    """Enumerate all set partitions of items (restricted-growth order)."""
    items = list(items)
    if not items:
        yield []
        return

    def rec(idx: int, blocks: list):
        if idx == len(items):
            yield [list(b) for b in blocks]
            return
        x = items[idx]
        for b in blocks:
            b.append(x)
            yield from rec(idx + 1, blocks)
            b.pop()
        blocks.append([x])
        yield from rec(idx + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def refinements(initial: Partition) -> Iterator[Partition]:
    """Enumerate every partition that refines `initial`."""

    def rec(bidx: int, acc: list):
        if bidx == len(initial.blocks):
            yield Partition.of_blocks(acc, initial.n)
            return
        for sub in set_partitions(initial.blocks[bidx]):
            yield from rec(bidx + 1, acc + sub)

    yield from rec(0, [])
