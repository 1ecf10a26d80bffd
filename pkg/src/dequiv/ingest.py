"""Text formats: .ode systems, .rn reaction networks, .part partitions.

Numeric literals are exact: decimals become the rational they denote
(0.1 = 1/10). Expressions must stay polynomial, so division is only legal
by a nonzero rational constant. Printers emit a canonical form (graded term
order, explicit coefficients) and parse(print(x)) == x holds structurally.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence, Union

from .errors import DequivError, ParseError, PartitionError
from .model import (Parameter, PolynomialODESystem, Reaction, ReactionNetwork)
from .partition import Partition
from .poly import Coeff, Polynomial, Rat, Scalar, as_fraction
from .quotient import QuotientModel

_PUNCT = ("->", "+", "-", "*", "/", "^", "(", ")", "{", "}", "=", ",", ";", "@")


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind  # "ident" | "number" | punctuation | "eof"
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"_Token({self.kind!r}, {self.text!r})"


def _lex(text: str) -> list:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(_Token("number", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c == "-" and i + 1 < n and text[i + 1] == ">":
            tokens.append(_Token("->", "->", line, start_col))
            i += 2
            col += 2
            continue
        if c in "+-*/^(){}=,;@":
            tokens.append(_Token(c, c, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return self.next()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # ---- expressions ----------------------------------------------------

    def parse_number(self) -> Fraction:
        tok = self.expect("number")
        return Fraction(tok.text)

    def parse_expr(self, resolve: Callable[[_Token], Polynomial]) -> Polynomial:
        left = self.parse_term(resolve)
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            right = self.parse_term(resolve)
            left = left + right if op == "+" else left - right
        return left

    def parse_term(self, resolve) -> Polynomial:
        left = self.parse_unary(resolve)
        while self.peek().kind in ("*", "/"):
            tok = self.next()
            right = self.parse_unary(resolve)
            if tok.kind == "*":
                left = left * right
                continue
            val = _constant_rational(right)
            if val is None or val == 0:
                raise ParseError(
                    "division is only allowed by a nonzero rational constant",
                    tok.line, tok.col)
            left = left.scale(Fraction(1) / val)
        return left

    def parse_unary(self, resolve) -> Polynomial:
        tok = self.peek()
        if tok.kind == "-":
            self.next()
            return -self.parse_unary(resolve)
        if tok.kind == "+":
            self.next()
            return self.parse_unary(resolve)
        return self.parse_power(resolve)

    def parse_power(self, resolve) -> Polynomial:
        base = self.parse_atom(resolve)
        if self.peek().kind != "^":
            return base
        caret = self.next()
        tok = self.expect("number")
        if "." in tok.text:
            raise ParseError("exponent must be an integer", tok.line, tok.col)
        exp = int(tok.text)
        if exp > 64:
            raise ParseError("exponent too large", caret.line, caret.col)
        return base.pow_int(exp)

    def parse_atom(self, resolve) -> Polynomial:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return Polynomial.constant(Fraction(tok.text))
        if tok.kind == "ident":
            self.next()
            return resolve(tok)
        if tok.kind == "(":
            self.next()
            inner = self.parse_expr(resolve)
            self.expect(")")
            return inner
        raise ParseError(f"expected an expression, found {tok.text or 'end of input'!r}",
                         tok.line, tok.col)

    def parse_const(self) -> Fraction:
        """A constant expression: numbers, + - * /, parentheses."""

        def no_idents(tok: _Token) -> Polynomial:
            raise ParseError(f"expected a rational constant, found {tok.text!r}",
                             tok.line, tok.col)

        expr = self.parse_expr(no_idents)
        val = _constant_rational(expr)
        if val is None:
            self.fail("expected a rational constant")
        return val


def _constant_rational(poly: Polynomial) -> Fraction | None:
    if poly.is_zero:
        return Fraction(0)
    terms = poly.raw_terms()
    if len(terms) == 1 and () in terms and not isinstance(terms[()], Coeff):
        return as_fraction(terms[()])
    return None


# ---- .ode files ---------------------------------------------------------


def parse_ode(text: str) -> PolynomialODESystem:
    """Parse an .ode description.

    Statements (each ';'-terminated, '#' starts a comment):
        param k;   param k = 3/2;
        var x1, x2;
        init x1 = 1, x2 = 0.5;
        d(x1) = k*x1 - x2;
    Every declared variable needs exactly one d(...) equation.
    """
    p = _Parser(text)
    names: list = []
    index: dict = {}
    params: dict = {}
    initial: dict = {}
    derivs: dict = {}

    def resolve(tok: _Token) -> Polynomial:
        if tok.text in index:
            return Polynomial.variable(index[tok.text])
        if tok.text in params:
            return Polynomial.constant(Coeff.param(tok.text))
        raise ParseError(f"unknown name {tok.text!r}", tok.line, tok.col)

    while p.peek().kind != "eof":
        tok = p.expect("ident")
        if tok.text == "param":
            name_tok = p.expect("ident")
            _declare(name_tok, index, params)
            value = None
            if p.peek().kind == "=":
                p.next()
                value = p.parse_const()
            params[name_tok.text] = Parameter(name_tok.text, value)
            p.expect(";")
        elif tok.text == "var":
            while True:
                name_tok = p.expect("ident")
                _declare(name_tok, index, params)
                index[name_tok.text] = len(names)
                names.append(name_tok.text)
                if p.peek().kind != ",":
                    break
                p.next()
            p.expect(";")
        elif tok.text == "init":
            while True:
                name_tok = p.expect("ident")
                if name_tok.text not in index:
                    raise ParseError(f"init for undeclared variable {name_tok.text!r}",
                                     name_tok.line, name_tok.col)
                if index[name_tok.text] in initial:
                    raise ParseError(f"repeated init for {name_tok.text!r}",
                                     name_tok.line, name_tok.col)
                p.expect("=")
                initial[index[name_tok.text]] = p.parse_const()
                if p.peek().kind != ",":
                    break
                p.next()
            p.expect(";")
        elif tok.text == "d":
            p.expect("(")
            name_tok = p.expect("ident")
            if name_tok.text not in index:
                raise ParseError(f"d(...) for undeclared variable {name_tok.text!r}",
                                 name_tok.line, name_tok.col)
            if index[name_tok.text] in derivs:
                raise ParseError(f"repeated equation for {name_tok.text!r}",
                                 name_tok.line, name_tok.col)
            p.expect(")")
            p.expect("=")
            derivs[index[name_tok.text]] = p.parse_expr(resolve)
            p.expect(";")
        else:
            raise ParseError(
                f"expected 'param', 'var', 'init' or 'd', found {tok.text!r}",
                tok.line, tok.col)

    missing = [name for name, i in index.items() if i not in derivs]
    if missing:
        raise ParseError(f"no d(...) equation for {', '.join(sorted(missing))}",
                         p.peek().line, p.peek().col)
    return PolynomialODESystem(
        names, [derivs[i] for i in range(len(names))], params.values(), initial)


def _declare(tok: _Token, index: dict, params: dict):
    if tok.text in index or tok.text in params:
        raise ParseError(f"name {tok.text!r} declared twice", tok.line, tok.col)
    if tok.text in ("param", "var", "species", "init", "d", "unlisted"):
        raise ParseError(f"{tok.text!r} is a reserved word", tok.line, tok.col)


# ---- .rn files ----------------------------------------------------------


def parse_rn(text: str) -> ReactionNetwork:
    """Parse a .rn reaction network.

    Statements:
        param k = 2;
        species A, B, C;
        init A = 10;
        2 A + B -> 3 C @ 1/2;      # '0' denotes the empty multiset
        A -> 0 @ k;
    """
    p = _Parser(text)
    names: list = []
    index: dict = {}
    params: dict = {}
    initial: dict = {}
    reactions: list = []

    def parse_multiset() -> list:
        tok = p.peek()
        if tok.kind == "number" and tok.text == "0" and p.peek(1).kind in ("->", "@", ";"):
            p.next()
            return []
        entries = []
        while True:
            count = 1
            tok = p.peek()
            if tok.kind == "number":
                p.next()
                if "." in tok.text:
                    raise ParseError("multiplicity must be a positive integer",
                                     tok.line, tok.col)
                count = int(tok.text)
                if count <= 0:
                    raise ParseError("multiplicity must be a positive integer",
                                     tok.line, tok.col)
            name_tok = p.expect("ident")
            if name_tok.text not in index:
                raise ParseError(f"unknown species {name_tok.text!r}",
                                 name_tok.line, name_tok.col)
            entries.append((index[name_tok.text], count))
            if p.peek().kind != "+":
                return entries
            p.next()

    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind == "ident" and tok.text == "param":
            p.next()
            name_tok = p.expect("ident")
            _declare(name_tok, index, params)
            value = None
            if p.peek().kind == "=":
                p.next()
                value = p.parse_const()
            params[name_tok.text] = Parameter(name_tok.text, value)
            p.expect(";")
        elif tok.kind == "ident" and tok.text == "species":
            p.next()
            while True:
                name_tok = p.expect("ident")
                _declare(name_tok, index, params)
                index[name_tok.text] = len(names)
                names.append(name_tok.text)
                if p.peek().kind != ",":
                    break
                p.next()
            p.expect(";")
        elif tok.kind == "ident" and tok.text == "init":
            p.next()
            while True:
                name_tok = p.expect("ident")
                if name_tok.text not in index:
                    raise ParseError(f"init for undeclared species {name_tok.text!r}",
                                     name_tok.line, name_tok.col)
                if index[name_tok.text] in initial:
                    raise ParseError(f"repeated init for {name_tok.text!r}",
                                     name_tok.line, name_tok.col)
                p.expect("=")
                initial[index[name_tok.text]] = p.parse_const()
                if p.peek().kind != ",":
                    break
                p.next()
            p.expect(";")
        else:
            reagents = parse_multiset()
            p.expect("->")
            products = parse_multiset()
            p.expect("@")
            rate_tok = p.peek()
            rate: Union[Rat, str]
            if rate_tok.kind == "ident" and p.peek(1).kind == ";":
                p.next()
                if rate_tok.text not in params:
                    raise ParseError(f"unknown rate parameter {rate_tok.text!r}",
                                     rate_tok.line, rate_tok.col)
                rate = rate_tok.text
            else:
                rate = p.parse_const()
                if rate <= 0:
                    raise ParseError("rate must be positive", rate_tok.line, rate_tok.col)
            try:
                reactions.append(Reaction(reagents, products, rate))
            except DequivError as exc:
                raise ParseError(str(exc), rate_tok.line, rate_tok.col) from None
            p.expect(";")

    return ReactionNetwork(names, reactions, params.values(), initial)


# ---- .part files --------------------------------------------------------


def parse_partition(text: str, model: Union[PolynomialODESystem, ReactionNetwork]) -> Partition:
    """Parse a .part file against a model's variable names.

    Blocks are brace-delimited name lists: {x1} {x2, x3}. Names left
    unlisted form one shared block by default; the policy can be set with
    'unlisted = block;', 'unlisted = singletons;' or 'unlisted = error;'.
    """
    names = model.variables if isinstance(model, PolynomialODESystem) else model.species
    index = {name: i for i, name in enumerate(names)}
    p = _Parser(text)
    blocks: list = []
    listed: set = set()
    policy = "block"

    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind == "ident" and tok.text == "unlisted":
            p.next()
            p.expect("=")
            ptok = p.expect("ident")
            if ptok.text not in ("block", "singletons", "error"):
                raise ParseError(
                    "unlisted policy must be 'block', 'singletons' or 'error'",
                    ptok.line, ptok.col)
            policy = ptok.text
            p.expect(";")
            continue
        p.expect("{")
        block = []
        while True:
            name_tok = p.expect("ident")
            if name_tok.text not in index:
                raise ParseError(f"unknown variable {name_tok.text!r}",
                                 name_tok.line, name_tok.col)
            i = index[name_tok.text]
            if i in listed:
                raise ParseError(f"variable {name_tok.text!r} listed twice",
                                 name_tok.line, name_tok.col)
            listed.add(i)
            block.append(i)
            if p.peek().kind != ",":
                break
            p.next()
        p.expect("}")
        blocks.append(block)

    rest = [i for i in range(len(names)) if i not in listed]
    if rest:
        if policy == "error":
            raise PartitionError(
                f"variables not covered: {', '.join(names[i] for i in rest)}")
        if policy == "block":
            blocks.append(rest)
        else:
            blocks.extend([i] for i in rest)
    return Partition.of_blocks(blocks, len(names))


# ---- printers -----------------------------------------------------------


def format_rat(q: Rat) -> str:
    return str(q)


def _scalar_addends(s: Scalar) -> list:
    if isinstance(s, Coeff):
        return list(s.terms)
    return [((), s)]


def format_poly(poly: Polynomial, names: Sequence[str]) -> str:
    """Canonical text: graded term order, explicit rational coefficients,
    parameter factors before variable factors (e.g. ``-1*k1*x1^2``)."""
    if poly.is_zero:
        return "0"
    parts = []
    for mono, s in poly.terms():
        var_factors = [
            names[v] if e == 1 else f"{names[v]}^{e}" for v, e in mono
        ]
        for pmono, q in _scalar_addends(s):
            param_factors = [
                name if e == 1 else f"{name}^{e}" for name, e in pmono
            ]
            body = "*".join([format_rat(abs(q))] + param_factors + var_factors)
            parts.append(("-" if q < 0 else "+", body))
    sign, body = parts[0]
    out = [("-" if sign == "-" else "") + body]
    for sign, body in parts[1:]:
        out.append(f" {sign} {body}")
    return "".join(out)


def _param_lines(parameters) -> list:
    lines = []
    for p in parameters:
        if p.value is None:
            lines.append(f"param {p.name};")
        else:
            lines.append(f"param {p.name} = {format_rat(p.value)};")
    return lines


def _init_line(initial, names) -> list:
    if not initial:
        return []
    entries = ", ".join(f"{names[i]} = {format_rat(v)}" for i, v in initial)
    return [f"init {entries};"]


def print_ode(system: PolynomialODESystem) -> str:
    lines = _param_lines(system.parameters)
    lines.append(f"var {', '.join(system.variables)};")
    lines += _init_line(system.initial, system.variables)
    for name, f in zip(system.variables, system.derivatives):
        lines.append(f"d({name}) = {format_poly(f, system.variables)};")
    return "\n".join(lines) + "\n"


def _format_multiset(entries, names) -> str:
    if not entries:
        return "0"
    parts = []
    for sp, count in entries:
        parts.append(names[sp] if count == 1 else f"{count} {names[sp]}")
    return " + ".join(parts)


def print_rn(net: ReactionNetwork) -> str:
    lines = _param_lines(net.parameters)
    lines.append(f"species {', '.join(net.species)};")
    lines += _init_line(net.initial, net.species)
    for r in net.reactions:
        rate = r.rate if isinstance(r.rate, str) else format_rat(r.rate)
        lines.append(f"{_format_multiset(r.reagents, net.species)} -> "
                     f"{_format_multiset(r.products, net.species)} @ {rate};")
    return "\n".join(lines) + "\n"


def print_model(model) -> str:
    """Canonical text for a system, network, or quotient."""
    if isinstance(model, QuotientModel):
        return print_ode(model.reduced)
    if isinstance(model, PolynomialODESystem):
        return print_ode(model)
    if isinstance(model, ReactionNetwork):
        return print_rn(model)
    raise DequivError(f"cannot print {type(model).__name__}")


def print_partition(part: Partition, names: Sequence[str]) -> str:
    lines = ["{" + ", ".join(names[i] for i in block) + "}" for block in part.blocks]
    return "\n".join(lines) + "\n"


def print_report(report: dict) -> str:
    """Reports are JSON with sorted keys so equal runs give equal bytes."""
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# ---- file IO ------------------------------------------------------------


def load_model(path) -> Union[PolynomialODESystem, ReactionNetwork]:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".ode":
        return parse_ode(text)
    if path.suffix == ".rn":
        return parse_rn(text)
    raise DequivError(f"unrecognized model extension {path.suffix!r} "
                      f"(expected .ode or .rn)")


def load_partition(path, model) -> Partition:
    return parse_partition(Path(path).read_text(), model)
