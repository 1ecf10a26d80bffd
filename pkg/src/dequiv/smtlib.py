"""SMT-LIB v2.6 plumbing shared by the solver client and the bundled solver.

S-expressions are represented as nested Python lists with string atoms.
Rational constants travel as decimals and (/ p q) applications so that any
conformant solver for real arithmetic accepts them.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Sequence

from .poly import Coeff, Polynomial, Rat, Scalar

# ---- writing ------------------------------------------------------------


def fmt_rat(q: Rat) -> str:
    """Render an exact rational as a conformant Real term."""
    if q < 0:
        return f"(- {fmt_rat(-q)})"
    if isinstance(q, Fraction) and q.denominator != 1:
        return f"(/ {q.numerator}.0 {q.denominator}.0)"
    return f"{int(q)}.0"


def _apply(op: str, args: Sequence[str]) -> str:
    return f"({op} {' '.join(args)})"


def term_product(q: Rat, symbols: Sequence[str]) -> str:
    """(* q s1 s2 ...) with powers already expanded into repetition."""
    if not symbols:
        return fmt_rat(q)
    factors = list(symbols)
    if q != 1:
        factors = [fmt_rat(q)] + factors
    if len(factors) == 1:
        return factors[0]
    return _apply("*", factors)


def poly_to_smt(poly: Polynomial, var_sym: Sequence[str],
                param_sym: dict | None = None) -> str:
    """Encode a polynomial as a sum of flat products over Real symbols."""
    addends = []
    for mono, s in poly.terms():
        var_factors = [var_sym[v] for v, e in mono for _ in range(e)]
        if isinstance(s, Coeff):
            if param_sym is None:
                raise ValueError("polynomial has parameters but no symbol map")
            for pm, q in s.terms:
                factors = [param_sym[name] for name, e in pm for _ in range(e)]
                addends.append(term_product(q, factors + var_factors))
        else:
            addends.append(term_product(s, var_factors))
    if not addends:
        return "0.0"
    if len(addends) == 1:
        return addends[0]
    return _apply("+", addends)


def smt_sum(symbols: Sequence[str]) -> str:
    if not symbols:
        return "0.0"
    if len(symbols) == 1:
        return symbols[0]
    return _apply("+", symbols)


def smt_eq(a: str, b: str) -> str:
    return _apply("=", (a, b))


def smt_not(a: str) -> str:
    return _apply("not", (a,))


def smt_or(args: Sequence[str]) -> str:
    if not args:
        return "false"
    if len(args) == 1:
        return args[0]
    return _apply("or", args)


def smt_and(args: Sequence[str]) -> str:
    if not args:
        return "true"
    if len(args) == 1:
        return args[0]
    return _apply("and", args)


# ---- reading ------------------------------------------------------------


def tokenize(text: str) -> Iterator[str]:
    """Yield s-expression tokens: parens, atoms, and quoted strings."""
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            yield text[i:j + 1]
            i = j + 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();\"|":
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list:
    """Parse text into a list of s-expressions (nested lists of atoms)."""
    stack: list = [[]]
    for tok in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


class FormReader:
    """Incrementally assemble complete top-level s-expressions from text."""

    def __init__(self):
        self._buf: list = []
        self._depth = 0
        self._in_string = False
        self._in_comment = False

    def feed(self, chunk: str) -> list:
        """Add text; return any newly completed top-level forms as text."""
        forms = []
        start = 0
        i = 0
        n = len(chunk)
        while i < n:
            c = chunk[i]
            if self._in_comment:
                if c == "\n":
                    self._in_comment = False
                    if self._depth == 0:
                        start = i
                i += 1
                continue
            if self._in_string:
                if c == '"':
                    self._in_string = False
                i += 1
                continue
            if c == '"':
                self._in_string = True
                i += 1
                continue
            if c == ";":
                # flush pending bare-atom text, then swallow the comment
                if self._depth == 0:
                    self._buf.append(chunk[start:i])
                    text = "".join(self._buf).strip()
                    self._buf = []
                    start = i
                    if text:
                        forms.append(text)
                self._in_comment = True
                i += 1
                continue
            if c == "(":
                self._depth += 1
            elif c == ")":
                self._depth -= 1
                if self._depth < 0:
                    raise ValueError("unbalanced ')' in stream")
                if self._depth == 0:
                    self._buf.append(chunk[start:i + 1])
                    forms.append("".join(self._buf).strip())
                    self._buf = []
                    start = i + 1
            elif self._depth == 0 and c == "\n":
                # bare atoms on their own line (e.g. "sat") complete a form
                self._buf.append(chunk[start:i])
                text = "".join(self._buf).strip()
                self._buf = []
                start = i + 1
                if text:
                    forms.append(text)
            i += 1
        if self._in_comment:
            if self._depth == 0:
                start = n
        self._buf.append(chunk[start:n])
        return forms


def rat_from_sexpr(node) -> Fraction | None:
    """Exact rational from a model value; None when not rational."""
    if isinstance(node, str):
        try:
            return Fraction(node)
        except ValueError:
            return None
    if not node:
        return None
    head = node[0]
    if head == "-" and len(node) == 2:
        inner = rat_from_sexpr(node[1])
        return None if inner is None else -inner
    if head == "/" and len(node) == 3:
        num = rat_from_sexpr(node[1])
        den = rat_from_sexpr(node[2])
        if num is None or den is None or den == 0:
            return None
        return num / den
    if head == "to_real" and len(node) == 2:
        return rat_from_sexpr(node[1])
    return None


def parse_model(form) -> dict:
    """Extract symbol -> Fraction|None from a get-model response form.

    Accepts both `(model (define-fun ...) ...)` and the bare
    `((define-fun ...) ...)` shapes.
    """
    if isinstance(form, str):
        raise ValueError(f"expected a model, got {form!r}")
    entries = form
    if entries and entries[0] == "model":
        entries = entries[1:]
    out: dict = {}
    for entry in entries:
        if not isinstance(entry, list) or len(entry) < 5 or entry[0] != "define-fun":
            continue
        name = entry[1]
        if isinstance(name, str) and entry[2] == []:
            out[name] = rat_from_sexpr(entry[4])
    return out
