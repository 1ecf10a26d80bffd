"""Seeded generation of reaction networks with known coarsest reductions.

The generator plants symmetry: species inside a group play identical
reaction roles (same rate constants, same reaction shapes), so by
construction the coarsest backward equivalence merges exactly the
planted groups. That gives scale tests a ground truth without running
any oracle.

Two constructions, chosen by whether auxiliary species fit:

- with room to spare (n > sum of group sizes): every member s of group g
  decays into a shared waste species, `s -> W @ r_g`, and optionally
  through catalysed channels `s + C_f -> C_f + W @ r_{g,f}` — each
  channel adds two monomials per member, so the catalyst count is sized
  from the target monomial count. Catalysts and padding species have
  identically zero derivatives and form one planted block of their own;
  W collects everything and is a planted singleton.
- exactly n = sum of group sizes: self-replication `s -> 2 s @ r_g`,
  plus `s + s -> 3 s @ q_g` when the target needs a second monomial per
  member. No auxiliary species at all.

Unary rates are drawn distinct across groups, which makes the planted
blocks mutually unmergeable; everything is drawn from a seeded RNG, so
equal specs generate identical networks.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import BenchSpecError
from .model import Parameter, Reaction, ReactionNetwork
from .partition import Partition


@dataclass(frozen=True)
class BenchSpec:
    """Benchmark knobs: species count, target monomial count, planted
    group sizes, seed. `m=None` asks for the smallest construction."""

    n: int
    groups: tuple
    m: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))
        if self.n < 1:
            raise BenchSpecError("n must be at least 1")
        if not self.groups:
            raise BenchSpecError("at least one group is required")
        if any(g < 1 for g in self.groups):
            raise BenchSpecError("group sizes must be positive")
        if self.members > self.n:
            raise BenchSpecError(
                f"groups need {self.members} species but n = {self.n}")
        if self.m is not None and self.m < 1:
            raise BenchSpecError("m must be positive when given")

    @property
    def members(self) -> int:
        return sum(self.groups)


def _fresh_rat(rng, used: set) -> Fraction:
    while True:
        q = Fraction(rng.randint(1, 99), rng.randint(1, 99))
        if q not in used:
            used.add(q)
            return q


def _layout(spec: BenchSpec):
    """Shared species layout: members by group, then W, catalysts, pads.

    Returns (catalyst_count, pad_count); both zero in the aux-free case.
    """
    aux = spec.n - spec.members
    if aux == 0:
        want = spec.m if spec.m is not None else spec.members
        if want < spec.members:
            raise BenchSpecError(
                f"m too small for n: n = {spec.n} with no auxiliary room "
                f"generates at least {spec.members} monomials")
        if want > 2 * spec.members:
            raise BenchSpecError(
                f"m too large for n: n = {spec.n} with no auxiliary room "
                f"caps at {2 * spec.members} monomials")
        return (0, 0)
    want = spec.m if spec.m is not None else 2 * spec.members
    if want < 2 * spec.members:
        raise BenchSpecError(
            f"m too small for n: the construction generates at least "
            f"{2 * spec.members} monomials for {spec.members} group members")
    channels = math.ceil(want / (2 * spec.members))  # unary channel + F
    catalysts = channels - 1
    pads = aux - 1 - catalysts
    if pads < 0:
        cap = 2 * spec.members * (aux - 1 if aux > 1 else 1)
        raise BenchSpecError(
            f"m too large for n: {spec.n} species cap at {cap} monomials "
            f"for {spec.members} group members")
    return (catalysts, pads)


def generate_bench(spec: BenchSpec) -> ReactionNetwork:
    """Deterministic network whose coarsest BDE is `planted_partition`."""
    catalysts, _ = _layout(spec)
    rng = random.Random(spec.seed)
    used_rates: set = set()
    members = spec.members
    aux_free = spec.n == members

    names = tuple(f"s{i}" for i in range(1, spec.n + 1))
    reactions = []
    if aux_free:
        quad = (spec.m is not None and spec.m > members)
        idx = 0
        for g, size in enumerate(spec.groups):
            r_g = _fresh_rat(rng, used_rates)
            q_g = _fresh_rat(rng, used_rates) if quad else None
            for _ in range(size):
                reactions.append(Reaction(((idx, 1),), ((idx, 2),), r_g))
                if quad:
                    reactions.append(Reaction(((idx, 2),), ((idx, 3),), q_g))
                idx += 1
    else:
        w = members
        cat_ids = tuple(range(members + 1, members + 1 + catalysts))
        idx = 0
        for g, size in enumerate(spec.groups):
            r_g = _fresh_rat(rng, used_rates)
            r_gf = [_fresh_rat(rng, used_rates) for _ in cat_ids]
            for _ in range(size):
                reactions.append(Reaction(((idx, 1),), ((w, 1),), r_g))
                for c, rate in zip(cat_ids, r_gf):
                    reactions.append(Reaction(
                        ((c, 1), (idx, 1)), ((c, 1), (w, 1)), rate))
                idx += 1

    initial = {}
    for block in _planted_blocks(spec):
        val = Fraction(rng.randint(0, 6), rng.randint(1, 6))
        for i in block:
            initial[i] = val

    return ReactionNetwork(species=names, reactions=tuple(reactions),
                           parameters=(), initial=initial)


def _planted_blocks(spec: BenchSpec) -> list:
    blocks = []
    idx = 0
    for size in spec.groups:
        blocks.append(list(range(idx, idx + size)))
        idx += size
    if spec.n > spec.members:
        blocks.append([spec.members])  # W
        rest = list(range(spec.members + 1, spec.n))
        if rest:
            blocks.append(rest)  # catalysts and padding: derivatives == 0
    return blocks


def planted_partition(spec: BenchSpec) -> Partition:
    """Ground truth: the groups, the waste species, and one block of
    zero-derivative species (catalysts plus padding), when present."""
    return Partition.of_blocks(_planted_blocks(spec), spec.n)
