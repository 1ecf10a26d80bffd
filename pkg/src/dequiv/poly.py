"""Exact sparse multivariate polynomials over the rationals.

Variables are nonnegative integer indices. Coefficients are either plain
rationals (int or Fraction) or `Coeff` objects, which are themselves
polynomials in declared parameter names over the rationals. The invariant
throughout: a coefficient is stored as a `Coeff` if and only if it mentions
at least one parameter, so equality and hashing never mix the two kinds.

Monomials are sparse exponent tuples `((var, exp), ...)` with strictly
increasing variable indices and positive exponents. Terms are kept in a
canonical dict with no zero coefficients, so structural equality is
mathematical equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

Rat = Union[int, Fraction]
# ((name, exp), ...) sorted by graded key, exps >= 1
PMono = tuple
# ((var, exp), ...) strictly increasing var indices, exps >= 1
Mono = tuple


def norm_rat(q: Rat) -> Rat:
    """Collapse integral Fractions to int so equal values share one form."""
    if isinstance(q, Fraction) and q.denominator == 1:
        return int(q)
    return q


def as_fraction(q: Rat) -> Fraction:
    return q if isinstance(q, Fraction) else Fraction(q)


def _pmono_key(pm: PMono):
    return (sum(e for _, e in pm), pm)


def _pmono_mul(a: PMono, b: PMono) -> PMono:
    if not a:
        return b
    if not b:
        return a
    acc: dict = {}
    for name, e in a:
        acc[name] = acc.get(name, 0) + e
    for name, e in b:
        acc[name] = acc.get(name, 0) + e
    return tuple(sorted(acc.items()))


class Coeff:
    """A coefficient with parameter content, e.g. ``k1 + 2*k2``.

    Instances are immutable and canonical: terms are sorted, nonzero, and
    at least one term carries a parameter (param-free values are demoted to
    plain rationals by `make_coeff`).
    """

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: tuple):
        self.terms = terms
        self._hash = None

    @staticmethod
    def param(name: str) -> "Coeff":
        return Coeff(((((name, 1),), 1),))

    def free_params(self) -> frozenset:
        return frozenset(name for pm, _ in self.terms for name, _ in pm)

    @property
    def single_param_linear(self) -> bool:
        """True when the value is rational*param^1 (no constant part)."""
        if len(self.terms) != 1:
            return False
        pm, _ = self.terms[0]
        return len(pm) == 1 and pm[0][1] == 1

    def substitute(self, env: Mapping[str, Rat]) -> "Scalar":
        acc: dict = {}
        for pm, q in self.terms:
            val: Rat = q
            kept = []
            for name, e in pm:
                if name in env:
                    val = val * as_fraction(env[name]) ** e
                else:
                    kept.append((name, e))
            key = tuple(kept)
            acc[key] = acc.get(key, 0) + val
        return make_coeff(acc)

    def _as_dict(self) -> dict:
        return dict(self.terms)

    def __add__(self, other):
        acc = self._as_dict()
        if isinstance(other, Coeff):
            for pm, q in other.terms:
                acc[pm] = acc.get(pm, 0) + q
        elif isinstance(other, (int, Fraction)):
            acc[()] = acc.get((), 0) + other
        else:
            return NotImplemented
        return make_coeff(acc)

    __radd__ = __add__

    def __neg__(self):
        return Coeff(tuple((pm, norm_rat(-q)) for pm, q in self.terms))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        acc: dict = {}
        if isinstance(other, Coeff):
            for pm1, q1 in self.terms:
                for pm2, q2 in other.terms:
                    pm = _pmono_mul(pm1, pm2)
                    acc[pm] = acc.get(pm, 0) + q1 * q2
        elif isinstance(other, (int, Fraction)):
            if other == 0:
                return 0
            for pm, q in self.terms:
                acc[pm] = q * other
        else:
            return NotImplemented
        return make_coeff(acc)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, Coeff):
            return self.terms == other.terms
        # param-free values are never stored as Coeff
        return False

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __str__(self):
        return format_scalar(self)

    def __repr__(self):
        return f"Coeff({format_scalar(self)})"


# A scalar is a rational or a parameter polynomial.
Scalar = Union[int, Fraction, Coeff]


def make_coeff(d: Mapping[PMono, Rat]) -> Scalar:
    """Canonicalize a pmono->rational map into a Scalar."""
    items = [(pm, norm_rat(q)) for pm, q in d.items() if q != 0]
    if not items:
        return 0
    if len(items) == 1 and items[0][0] == ():
        return items[0][1]
    items.sort(key=lambda t: _pmono_key(t[0]))
    return Coeff(tuple(items))


def scalar_free_params(s: Scalar) -> frozenset:
    if isinstance(s, Coeff):
        return s.free_params()
    return frozenset()


def scalar_substitute(s: Scalar, env: Mapping[str, Rat]) -> Scalar:
    if isinstance(s, Coeff):
        return s.substitute(env)
    return s


def scalar_as_fraction(s: Scalar) -> Fraction:
    if isinstance(s, Coeff):
        raise ValueError(f"coefficient is not rational: {s}")
    return as_fraction(s)


def _format_addend(pm: PMono, q: Rat) -> str:
    factors = [] if q == 1 and pm else [str(q)]
    if q == -1 and pm:
        factors = ["-"]
    factors += [name if e == 1 else f"{name}^{e}" for name, e in pm]
    if factors and factors[0] == "-":
        return "-" + "*".join(factors[1:])
    return "*".join(factors)


def format_scalar(s: Scalar) -> str:
    """Human-readable form for diagnostics, e.g. ``k1 - 2*k2``."""
    if not isinstance(s, Coeff):
        return str(s)
    parts = []
    for idx, (pm, q) in enumerate(s.terms):
        text = _format_addend(pm, q)
        if idx == 0:
            parts.append(text)
        elif text.startswith("-"):
            parts.append(" - " + text[1:])
        else:
            parts.append(" + " + text)
    return "".join(parts)


def mono_degree(mono: Mono) -> int:
    return sum(e for _, e in mono)


def mono_key(mono: Mono):
    """Graded order: total degree first, then sparse exponent tuples."""
    return (mono_degree(mono), mono)


def mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    acc: dict = {}
    for v, e in a:
        acc[v] = acc.get(v, 0) + e
    for v, e in b:
        acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def mono_rename(mono: Mono, target: Sequence[int]) -> Mono:
    """Apply a variable renaming; exponents of merged variables add up."""
    if not mono:
        return mono
    if len(mono) == 1:
        v, e = mono[0]
        return ((target[v], e),)
    acc: dict = {}
    for v, e in mono:
        t = target[v]
        acc[t] = acc.get(t, 0) + e
    return tuple(sorted(acc.items()))


class Polynomial:
    """Immutable sparse polynomial; construct via the classmethods."""

    __slots__ = ("_terms", "_key", "_hash")

    def __init__(self, terms: dict):
        # terms must already be canonical: no zero coefficients
        self._terms = terms
        self._key = None
        self._hash = None

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls({})

    @classmethod
    def constant(cls, s: Scalar) -> "Polynomial":
        s = norm_rat(s) if not isinstance(s, Coeff) else s
        return cls({(): s} if s != 0 or isinstance(s, Coeff) else {})

    @classmethod
    def variable(cls, v: int, exp: int = 1) -> "Polynomial":
        if exp < 0:
            raise ValueError("negative exponent")
        if exp == 0:
            return cls.constant(1)
        return cls({((v, exp),): 1})

    @classmethod
    def from_terms(cls, pairs: Iterable) -> "Polynomial":
        acc: dict = {}
        for mono, s in pairs:
            acc[mono] = acc.get(mono, 0) + s
        return cls(_strip_zeros(acc))

    def terms(self) -> Iterator:
        """Yield (mono, scalar) pairs in graded order."""
        return iter(self._sorted())

    def raw_terms(self) -> dict:
        """The underlying canonical dict; callers must never mutate it."""
        return self._terms

    def _sorted(self) -> tuple:
        if self._key is None:
            self._key = tuple(sorted(self._terms.items(), key=lambda t: mono_key(t[0])))
        return self._key

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, mono: Mono) -> Scalar:
        return self._terms.get(mono, 0)

    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(mono_degree(m) for m in self._terms)

    def max_var(self) -> int:
        """Largest variable index used, or -1 for constant polynomials."""
        top = -1
        for mono in self._terms:
            if mono and mono[-1][0] > top:
                top = mono[-1][0]
        return top

    def vars_used(self) -> frozenset:
        return frozenset(v for mono in self._terms for v, _ in mono)

    def free_params(self) -> frozenset:
        out: set = set()
        for s in self._terms.values():
            if isinstance(s, Coeff):
                out |= s.free_params()
        return frozenset(out)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        if not self._terms:
            return other
        if not other._terms:
            return self
        acc = dict(self._terms)
        for mono, s in other._terms.items():
            acc[mono] = acc.get(mono, 0) + s
        return Polynomial(_strip_zeros(acc))

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return Polynomial({m: -s for m, s in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        acc: dict = {}
        for m1, s1 in self._terms.items():
            for m2, s2 in other._terms.items():
                mono = mono_mul(m1, m2)
                acc[mono] = acc.get(mono, 0) + s1 * s2
        return Polynomial(_strip_zeros(acc))

    def scale(self, s: Scalar) -> "Polynomial":
        if not isinstance(s, Coeff) and s == 0:
            return Polynomial.zero()
        acc = {m: c * s for m, c in self._terms.items()}
        return Polynomial(_strip_zeros(acc))

    def pow_int(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative exponent")
        out = Polynomial.constant(1)
        for _ in range(k):
            out = out * self
        return out

    def rename_vars(self, target: Sequence[int]) -> "Polynomial":
        """Rename variable v to target[v]; merged monomials accumulate."""
        acc: dict = {}
        for mono, s in self._terms.items():
            new = mono_rename(mono, target)
            acc[new] = acc.get(new, 0) + s
        return Polynomial(_strip_zeros(acc))

    def subst_params(self, env: Mapping[str, Rat]) -> "Polynomial":
        acc: dict = {}
        for mono, s in self._terms.items():
            acc[mono] = scalar_substitute(s, env)
        return Polynomial(_strip_zeros(acc))

    def subst_vars(self, mapping: Mapping[int, "Polynomial"]) -> "Polynomial":
        """Substitute a polynomial for every variable that occurs.

        The mapping must cover all used variables.
        """
        out = Polynomial.zero()
        for mono, s in self._terms.items():
            term = Polynomial.constant(s)
            for v, e in mono:
                if v not in mapping:
                    raise ValueError(f"substitution missing variable {v}")
                term = term * mapping[v].pow_int(e)
            out = out + term
        return out

    def evaluate(self, point: Sequence[Fraction],
                 params: Mapping[str, Rat] | None = None) -> Fraction:
        total = Fraction(0)
        for mono, s in self._terms.items():
            if isinstance(s, Coeff):
                if params is None:
                    raise ValueError(f"unbound parameters in {s}")
                s = s.substitute(params)
            val = as_fraction(s)
            for v, e in mono:
                val *= as_fraction(point[v]) ** e
            total += val
        return total

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._sorted())
        return self._hash

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for mono, s in self._sorted():
            factors = [f"x{v}" if e == 1 else f"x{v}^{e}" for v, e in mono]
            coeff = format_scalar(s)
            if isinstance(s, Coeff) and len(s.terms) > 1:
                coeff = f"({coeff})"
            parts.append("*".join([coeff] + factors))
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"Polynomial({self})"


def _strip_zeros(acc: dict) -> dict:
    dead = [m for m, s in acc.items() if not isinstance(s, Coeff) and s == 0]
    for m in dead:
        del acc[m]
    for m, s in acc.items():
        if not isinstance(s, Coeff):
            acc[m] = norm_rat(s)
    return acc
