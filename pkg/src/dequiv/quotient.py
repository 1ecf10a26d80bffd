"""Reduced models: collapse, block sums, and quotient construction."""

from __future__ import annotations

from typing import Mapping

from .errors import (MissingInitialError, NotFbRepresentableError,
                     PartitionError, UnequalBlockInitialsError)
from .model import PolynomialODESystem
from .partition import Partition
from .poly import Polynomial


def collapse(poly: Polynomial, part: Partition) -> Polynomial:
    """Rewrite a polynomial with every variable renamed to its block
    representative, re-canonicalizing (merged monomials accumulate)."""
    return poly.rename_vars(part.rep_of)


def block_sum(system: PolynomialODESystem, part: Partition, block: int) -> Polynomial:
    """Sum of the derivatives of one block's members."""
    total = Polynomial.zero()
    for i in part.blocks[block]:
        total = total + system.derivatives[i]
    return total


class QuotientModel:
    """A reduced system together with its provenance.

    Attributes:
        reduced: the quotient ODE system; variable b is the macro-variable
            of partition block b.
        partition: the partition the quotient was built from.
        mode: "bde" or "fde".
        original_variables: variable names of the source system.
    """

    __slots__ = ("reduced", "partition", "mode", "original_variables")

    def __init__(self, reduced: PolynomialODESystem, partition: Partition,
                 mode: str, original_variables: tuple):
        self.reduced = reduced
        self.partition = partition
        self.mode = mode
        self.original_variables = original_variables

    @property
    def block_map(self) -> dict:
        """Macro-variable name -> tuple of source variable names."""
        return {
            name: tuple(self.original_variables[i] for i in block)
            for name, block in zip(self.reduced.variables, self.partition.blocks)
        }

    def __repr__(self):
        return (f"QuotientModel(mode={self.mode}, "
                f"{len(self.original_variables)}->{self.reduced.n} variables)")


def _require_partition_of(system: PolynomialODESystem, part: Partition):
    if part.n != system.n:
        raise PartitionError(
            f"partition covers {part.n} indices, system has {system.n} variables")


def _bound_env(system: PolynomialODESystem) -> dict:
    return {p.name: p.value for p in system.parameters if p.value is not None}


def build_bde_quotient(system: PolynomialODESystem, part: Partition) -> QuotientModel:
    """Quotient for a backward equivalence: keep one representative equation
    per block, rewriting members to representatives.

    The partition must be a backward equivalence; this is re-verified here
    with bound parameter values substituted, while the emitted quotient
    keeps coefficients symbolic. Initial values must be blockwise equal
    where present; a block whose members are only partially initialized is
    an error.
    """
    _require_partition_of(system, part)
    to_block = part.block_of
    collapsed = [f.rename_vars(to_block) for f in system.derivatives]
    env = _bound_env(system)
    for block in part.blocks:
        ref = collapsed[block[0]].subst_params(env)
        for i in block[1:]:
            if collapsed[i].subst_params(env) != ref:
                raise PartitionError(
                    f"not a backward equivalence: collapsed derivatives of "
                    f"{system.variables[block[0]]} and {system.variables[i]} differ")

    init_map = system.initial_map
    initial = {}
    for b, block in enumerate(part.blocks):
        present = [i for i in block if i in init_map]
        if not present:
            continue
        if len(present) != len(block):
            missing = [system.variables[i] for i in block if i not in init_map]
            raise UnequalBlockInitialsError(
                f"block {{{', '.join(system.variables[i] for i in block)}}} is "
                f"only partially initialized (missing {', '.join(missing)})")
        vals = {init_map[i] for i in block}
        if len(vals) > 1:
            raise UnequalBlockInitialsError(
                f"BDE quotient requires blockwise-equal initial conditions; "
                f"block {{{', '.join(system.variables[i] for i in block)}}} "
                f"has {sorted(vals)}")
        initial[b] = init_map[block[0]]

    names = tuple(system.variables[rep] for rep in part.reps)
    derivs = tuple(collapsed[rep] for rep in part.reps)
    reduced = PolynomialODESystem(names, derivs, system.parameters, initial)
    return QuotientModel(reduced, part, "bde", system.variables)


def _macro_names(system: PolynomialODESystem, part: Partition) -> tuple:
    taken = {p.name for p in system.parameters}
    singles = {system.variables[b[0]] for b in part.blocks if len(b) == 1}
    taken |= singles
    names = []
    for block in part.blocks:
        if len(block) == 1:
            names.append(system.variables[block[0]])
            continue
        name = f"y_{system.variables[block[0]]}"
        while name in taken:
            name = "y" + name
        taken.add(name)
        names.append(name)
    return tuple(names)


def build_fde_quotient(system: PolynomialODESystem, part: Partition) -> QuotientModel:
    """Quotient for a forward equivalence: one macro-variable per block,
    each carrying the block's summed derivative rewritten over macros.

    The rewriting sets every non-representative variable to zero and renames
    representatives to macro indices; it is then verified exactly by
    expanding the candidate back through the aggregation map. A mismatch
    means the block sums are not expressible in the macro-variables alone,
    and raises NotFbRepresentableError.
    """
    _require_partition_of(system, part)
    to_block = part.block_of
    rep_set = set(part.reps)
    env = _bound_env(system)

    # y_b -> sum of block members, for verifying candidates by expansion
    sums = {
        b: Polynomial.from_terms(((((i, 1),), 1) for i in block))
        for b, block in enumerate(part.blocks)
    }

    macros = []
    for b, block in enumerate(part.blocks):
        summed = block_sum(system, part, b)
        candidate = Polynomial.from_terms(
            (tuple((to_block[v], e) for v, e in mono), s)
            for mono, s in summed.raw_terms().items()
            if all(v in rep_set for v, _ in mono)
        )
        expanded = candidate.subst_vars(sums)
        if expanded.subst_params(env) != summed.subst_params(env):
            diff = summed - expanded
            raise NotFbRepresentableError(
                f"block {{{', '.join(system.variables[i] for i in block)}}} is "
                f"not FB-representable: the summed derivative cannot be "
                f"rewritten over the macro-variables (residual {diff}); "
                f"use the SMT check-only path to certify the partition")
        macros.append(candidate)

    init_map = system.initial_map
    initial = {}
    for b, block in enumerate(part.blocks):
        present = [i for i in block if i in init_map]
        if not present:
            continue
        if len(present) != len(block):
            missing = [system.variables[i] for i in block if i not in init_map]
            raise MissingInitialError(
                f"cannot sum initial values of block "
                f"{{{', '.join(system.variables[i] for i in block)}}}: "
                f"missing {', '.join(missing)}")
        initial[b] = sum((init_map[i] for i in block), start=0)

    names = _macro_names(system, part)
    reduced = PolynomialODESystem(names, macros, system.parameters, initial)
    return QuotientModel(reduced, part, "fde", system.variables)
