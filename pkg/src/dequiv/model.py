"""Polynomial ODE systems and mass-action reaction networks."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .errors import DequivError, FreeParameterError
from .poly import (Coeff, Polynomial, Rat, Scalar, as_fraction, norm_rat,
                   scalar_free_params)


class Parameter:
    """A named rational constant, optionally unbound (value None)."""

    __slots__ = ("name", "value")

    def __init__(self, name: str, value: Rat | None = None):
        self.name = name
        self.value = norm_rat(value) if value is not None else None

    @property
    def free(self) -> bool:
        return self.value is None

    def __eq__(self, other):
        if not isinstance(other, Parameter):
            return NotImplemented
        return self.name == other.name and self.value == other.value

    def __hash__(self):
        return hash((self.name, self.value))

    def __repr__(self):
        if self.value is None:
            return f"Parameter({self.name})"
        return f"Parameter({self.name}={self.value})"


def _norm_initial(initial, names: Sequence[str]) -> tuple:
    """Normalize an initial-value mapping to sorted (index, value) pairs."""
    if initial is None:
        return ()
    index = {name: i for i, name in enumerate(names)}
    pairs = {}
    for key, val in dict(initial).items():
        if isinstance(key, str):
            if key not in index:
                raise DequivError(f"initial value for unknown variable {key!r}")
            key = index[key]
        if not 0 <= key < len(names):
            raise DequivError(f"initial value index {key} out of range")
        pairs[key] = norm_rat(as_fraction(val))
    return tuple(sorted(pairs.items()))


def _check_names(kind: str, names: Sequence[str], params: Sequence[Parameter]):
    seen: set = set()
    for name in names:
        if name in seen:
            raise DequivError(f"duplicate {kind} name {name!r}")
        seen.add(name)
    for p in params:
        if p.name in seen:
            raise DequivError(f"name {p.name!r} used for both {kind} and parameter")
        seen.add(p.name)


class PolynomialODESystem:
    """A system d/dt x_i = f_i(x) with exact polynomial right-hand sides.

    Instances are immutable. `derivatives[i]` is the polynomial for
    `variables[i]`; coefficients may mention declared parameter names.
    """

    __slots__ = ("variables", "derivatives", "parameters", "initial")

    def __init__(self, variables: Iterable[str], derivatives: Iterable[Polynomial],
                 parameters: Iterable[Parameter] = (), initial=None):
        self.variables = tuple(variables)
        self.derivatives = tuple(derivatives)
        self.parameters = tuple(parameters)
        _check_names("variable", self.variables, self.parameters)
        if len(self.variables) != len(self.derivatives):
            raise DequivError("one derivative required per variable")
        declared = {p.name for p in self.parameters}
        n = len(self.variables)
        for name, f in zip(self.variables, self.derivatives):
            if f.max_var() >= n:
                raise DequivError(f"d({name}) uses an out-of-range variable index")
            loose = f.free_params() - declared
            if loose:
                raise DequivError(f"d({name}) uses undeclared parameters {sorted(loose)}")
        self.initial = _norm_initial(initial, self.variables)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def term_count(self) -> int:
        return sum(len(f.raw_terms()) for f in self.derivatives)

    def degree(self) -> int:
        return max((f.degree() for f in self.derivatives), default=0)

    def var_index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise DequivError(f"unknown variable {name!r}") from None

    def param(self, name: str) -> Parameter:
        for p in self.parameters:
            if p.name == name:
                return p
        raise DequivError(f"unknown parameter {name!r}")

    @property
    def initial_map(self) -> dict:
        return dict(self.initial)

    def free_param_names(self) -> tuple:
        return tuple(p.name for p in self.parameters if p.free)

    def resolve(self, free: Iterable[str] = ()) -> "PolynomialODESystem":
        """Substitute bound parameter values, keeping `free` ones symbolic.

        Parameters listed in `free` stay symbolic even when they carry a
        value (used for sensitivity queries). The result declares only the
        parameters that remain symbolic.
        """
        keep = set(free)
        for name in keep:
            self.param(name)
        env = {p.name: p.value for p in self.parameters
               if p.value is not None and p.name not in keep}
        remaining = [p for p in self.parameters if p.name in keep or p.free]
        derivs = [f.subst_params(env) for f in self.derivatives] if env else self.derivatives
        return PolynomialODESystem(self.variables, derivs, remaining, self.initial_map)

    def with_initial(self, initial) -> "PolynomialODESystem":
        return PolynomialODESystem(self.variables, self.derivatives,
                                   self.parameters, initial)

    def __eq__(self, other):
        if not isinstance(other, PolynomialODESystem):
            return NotImplemented
        return (self.variables == other.variables
                and self.derivatives == other.derivatives
                and self.parameters == other.parameters
                and self.initial == other.initial)

    def __repr__(self):
        return f"PolynomialODESystem(n={self.n}, m={self.term_count})"


def _norm_multiset(entries) -> tuple:
    acc: dict = {}
    for sp, count in entries:
        if count < 0:
            raise DequivError("negative multiplicity in reaction")
        if count:
            acc[sp] = acc.get(sp, 0) + count
    return tuple(sorted(acc.items()))


class Reaction:
    """reagents -> products @ rate, with species as indices.

    Multisets are sorted (species, multiplicity) tuples. The rate is a
    positive rational or the name of a declared parameter.
    """

    __slots__ = ("reagents", "products", "rate")

    def __init__(self, reagents, products, rate: Union[Rat, str]):
        self.reagents = _norm_multiset(reagents)
        self.products = _norm_multiset(products)
        if not isinstance(rate, str):
            rate = norm_rat(as_fraction(rate))
            if rate <= 0:
                raise DequivError(f"non-positive rate {rate}")
        self.rate = rate
        if not self.reagents and not self.products:
            raise DequivError("reaction with empty reagents and products")

    @property
    def order(self) -> int:
        return sum(c for _, c in self.reagents)

    def __eq__(self, other):
        if not isinstance(other, Reaction):
            return NotImplemented
        return (self.reagents, self.products, self.rate) == \
               (other.reagents, other.products, other.rate)

    def __repr__(self):
        return f"Reaction({self.reagents} -> {self.products} @ {self.rate})"


class ReactionNetwork:
    """A finite set of reactions over named species."""

    __slots__ = ("species", "reactions", "parameters", "initial")

    def __init__(self, species: Iterable[str], reactions: Iterable[Reaction],
                 parameters: Iterable[Parameter] = (), initial=None):
        self.species = tuple(species)
        self.reactions = tuple(reactions)
        self.parameters = tuple(parameters)
        _check_names("species", self.species, self.parameters)
        declared = {p.name for p in self.parameters}
        ns = len(self.species)
        for r in self.reactions:
            for sp, _ in r.reagents + r.products:
                if not 0 <= sp < ns:
                    raise DequivError(f"species index {sp} out of range")
            if isinstance(r.rate, str) and r.rate not in declared:
                raise DequivError(f"reaction rate uses undeclared parameter {r.rate!r}")
        self.initial = _norm_initial(initial, self.species)

    @property
    def n(self) -> int:
        return len(self.species)

    def degree(self) -> int:
        return max((r.order for r in self.reactions), default=0)

    @property
    def initial_map(self) -> dict:
        return dict(self.initial)

    def var_index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise DequivError(f"unknown species {name!r}") from None

    def __eq__(self, other):
        if not isinstance(other, ReactionNetwork):
            return NotImplemented
        return (self.species == other.species
                and self.reactions == other.reactions
                and self.parameters == other.parameters
                and self.initial == other.initial)

    def __repr__(self):
        return f"ReactionNetwork(species={len(self.species)}, reactions={len(self.reactions)})"


def mass_action_odes(net: ReactionNetwork, *, allow_free: bool = False) -> PolynomialODESystem:
    """Expand a reaction network into its mass-action ODE system.

    Each reaction rho -> pi @ a contributes a * x^rho * (pi(s) - rho(s)) to
    d(x_s). Symbolic rates stay symbolic; bound values are substituted later
    via `resolve`. Unbound rate parameters require allow_free=True.
    """
    params = {p.name: p for p in net.parameters}
    contributions: list = [[] for _ in net.species]
    for r in net.reactions:
        if isinstance(r.rate, str):
            if params[r.rate].free and not allow_free:
                raise FreeParameterError(
                    f"rate parameter {r.rate!r} has no value; "
                    f"pass allow_free=True to keep it symbolic")
            rate: Scalar = Coeff.param(r.rate)
        else:
            rate = r.rate
        mono = r.reagents
        net_change: dict = {}
        for sp, c in r.reagents:
            net_change[sp] = net_change.get(sp, 0) - c
        for sp, c in r.products:
            net_change[sp] = net_change.get(sp, 0) + c
        for sp, delta in net_change.items():
            if delta:
                contributions[sp].append((mono, rate * delta))
    derivs = [Polynomial.from_terms(c) for c in contributions]
    return PolynomialODESystem(net.species, derivs, net.parameters, net.initial_map)
