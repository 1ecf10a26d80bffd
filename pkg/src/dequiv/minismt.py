"""Bundled SMT-LIB v2.6 solver for the fragment this package emits.

The reduction encoders only ever produce boolean combinations of polynomial
equalities over real constants with rational coefficients. That fragment
has an exact decision procedure: distribute to DNF, eliminate the linear
equalities of each branch by exact Gaussian substitution, absorb nonlinear
equalities that become linear along the way, and satisfy the remaining
disequalities by a deterministic search for a rational point (each
disequality excludes finitely many values per coordinate). Everything is
exact rational arithmetic; anything outside the fragment (inequalities,
uninterpreted functions, non-constant divisors) answers `unknown`, never a
wrong verdict.

Runs as a console script (`dequiv-minismt`) reading SMT-LIB from stdin and
writing results to stdout, so it is interchangeable with any external
solver. Supported commands: set-logic, set-option, set-info, declare-const,
declare-fun (0-ary), assert, check-sat, get-model, push, pop, echo, reset,
exit.
"""

from __future__ import annotations

import os
import sys
import time
from fractions import Fraction
from typing import Iterator

from .poly import Polynomial
from .smtlib import FormReader, fmt_rat, parse_sexprs

_MAX_BRANCHES = 100_000


class _SolverError(Exception):
    """Reported to the client as (error "...")."""


class _OutOfFragment(Exception):
    """Construct outside the decidable fragment; check-sat answers unknown."""


# ---- term translation ----------------------------------------------------


class _Terms:
    """Translate SMT terms over declared constants into polynomials and
    boolean trees (('eq'|'ne', poly) atoms under 'and'/'or'/'not')."""

    def __init__(self, var_index: dict):
        self.var_index = var_index

    def to_poly(self, node) -> Polynomial:
        if isinstance(node, str):
            if node in self.var_index:
                return Polynomial.variable(self.var_index[node])
            try:
                return Polynomial.constant(Fraction(node))
            except ValueError:
                if node in ("true", "false"):
                    raise _OutOfFragment("boolean in arithmetic position")
                raise _SolverError(f"unknown constant {node}")
        if not node:
            raise _SolverError("empty term")
        head, args = node[0], node[1:]
        if head == "+":
            out = Polynomial.zero()
            for a in args:
                out = out + self.to_poly(a)
            return out
        if head == "-":
            if len(args) == 1:
                return -self.to_poly(args[0])
            out = self.to_poly(args[0])
            for a in args[1:]:
                out = out - self.to_poly(a)
            return out
        if head == "*":
            out = Polynomial.constant(1)
            for a in args:
                out = out * self.to_poly(a)
            return out
        if head == "/":
            if len(args) != 2:
                raise _SolverError("/ takes two arguments")
            num = self.to_poly(args[0])
            den = self.to_poly(args[1])
            dterms = den.raw_terms()
            if den.is_zero or list(dterms.keys()) != [()]:
                raise _OutOfFragment("division by a non-constant")
            return num.scale(Fraction(1, 1) / Fraction(dterms[()]))
        if head == "to_real":
            return self.to_poly(args[0])
        raise _OutOfFragment(f"operator {head}")

    def to_bool(self, node):
        if isinstance(node, str):
            if node == "true":
                return ("true",)
            if node == "false":
                return ("false",)
            raise _OutOfFragment(f"boolean atom {node}")
        if not node:
            raise _SolverError("empty term")
        head, args = node[0], node[1:]
        if head == "=":
            if len(args) < 2:
                raise _SolverError("= takes at least two arguments")
            parts = tuple(
                ("eq", self.to_poly(a) - self.to_poly(b))
                for a, b in zip(args, args[1:]))
            return parts[0] if len(parts) == 1 else ("and", parts)
        if head == "distinct":
            if len(args) < 2:
                raise _SolverError("distinct takes at least two arguments")
            parts = []
            for i in range(len(args)):
                for j in range(i + 1, len(args)):
                    parts.append(("ne", self.to_poly(args[i]) - self.to_poly(args[j])))
            return parts[0] if len(parts) == 1 else ("and", tuple(parts))
        if head == "not":
            if len(args) != 1:
                raise _SolverError("not takes one argument")
            return ("not", self.to_bool(args[0]))
        if head == "and":
            return ("and", tuple(self.to_bool(a) for a in args))
        if head == "or":
            return ("or", tuple(self.to_bool(a) for a in args))
        if head == "=>":
            if len(args) < 2:
                raise _SolverError("=> takes at least two arguments")
            out = self.to_bool(args[-1])
            for a in reversed(args[:-1]):
                out = ("or", (("not", self.to_bool(a)), out))
            return out
        raise _OutOfFragment(f"boolean operator {head}")


def _nnf(node, neg: bool):
    kind = node[0]
    if kind == "true":
        return ("false",) if neg else ("true",)
    if kind == "false":
        return ("true",) if neg else ("false",)
    if kind == "eq":
        return ("ne", node[1]) if neg else node
    if kind == "ne":
        return ("eq", node[1]) if neg else node
    if kind == "not":
        return _nnf(node[1], not neg)
    if kind == "and":
        parts = tuple(_nnf(p, neg) for p in node[1])
        return ("or" if neg else "and", parts)
    if kind == "or":
        parts = tuple(_nnf(p, neg) for p in node[1])
        return ("and" if neg else "or", parts)
    raise _SolverError(f"bad node {kind}")


def _dnf(node) -> Iterator[list]:
    """Yield branches (lists of eq/ne atoms); 'false' yields nothing."""
    kind = node[0]
    if kind in ("eq", "ne"):
        yield [node]
    elif kind == "true":
        yield []
    elif kind == "false":
        return
    elif kind == "or":
        for part in node[1]:
            yield from _dnf(part)
    elif kind == "and":
        parts = node[1]
        if not parts:
            yield []
            return

        def rec(idx: int, acc: list):
            if idx == len(parts):
                yield list(acc)
                return
            for branch in _dnf(parts[idx]):
                acc.extend(branch)
                yield from rec(idx + 1, acc)
                del acc[len(acc) - len(branch):]

        yield from rec(0, [])
    else:
        raise _SolverError(f"bad node {kind}")


# ---- branch decision -----------------------------------------------------


def _subst_map(p: Polynomial, solved: dict) -> Polynomial:
    used = p.vars_used()
    if not any(v in solved for v in used):
        return p
    mapping = {v: solved[v] if v in solved else Polynomial.variable(v)
               for v in used}
    return p.subst_vars(mapping)


def _solve_linear_for(p: Polynomial, v: int) -> Polynomial:
    """For affine p with a nonzero x_v coefficient: x_v = expr."""
    c = p.coefficient(((v, 1),))
    rest = p - Polynomial.variable(v).scale(c)
    return rest.scale(Fraction(-1) / Fraction(c))


def _presolve(eqs: list, solved: dict | None = None):
    """Exact Gaussian elimination of equality polynomials.

    Repeatedly substitutes solved variables, picks the highest-index
    variable of each affine equation as pivot, and retries nonlinear
    equations whenever a pass made progress (a substitution may
    linearise them). Returns (status, solved, leftover) with status
    'unsat', 'ok', or 'stuck' (nonlinear equations remain).
    """
    solved = dict(solved) if solved else {}
    pending = list(eqs)
    while pending:
        progress = False
        leftover = []
        for p in pending:
            q = _subst_map(p, solved)
            if q.is_zero:
                continue
            if q.degree() == 0:
                return ("unsat", solved, [])
            if q.degree() > 1:
                leftover.append(q)
                continue
            pivot = q.max_var()
            expr = _solve_linear_for(q, pivot)
            for u, e in list(solved.items()):
                if pivot in e.vars_used():
                    solved[u] = e.subst_vars(
                        {w: (expr if w == pivot else Polynomial.variable(w))
                         for w in e.vars_used()})
            solved[pivot] = expr
            progress = True
        if leftover and not progress:
            return ("stuck", solved, leftover)
        pending = leftover
    return ("ok", solved, [])


def _decide_branch(atoms: list, n_vars: int, base=None, verify_extra=()):
    base_solved, base_pending = base if base is not None else ({}, ())
    eqs = list(base_pending) + [p for kind, p in atoms if kind == "eq"]
    status, solved, _ = _presolve(eqs, base_solved)
    if status == "unsat":
        return ("unsat", None)
    if status == "stuck":
        return ("unknown", None)

    residues = []
    for kind, p in atoms:
        if kind != "ne":
            continue
        q = _subst_map(p, solved)
        if q.is_zero:
            return ("unsat", None)
        if q.degree() == 0:
            continue
        residues.append(q)

    # pick values one variable at a time; a candidate is rejected if it
    # makes any residue identically zero, which each residue can do for
    # only finitely many values, so the stream below always terminates
    assignment: dict = {}
    for v in sorted({w for q in residues for w in q.vars_used()}):
        for num in _candidates():
            ok = True
            shrunk = []
            for q in residues:
                if v in q.vars_used():
                    r = q.subst_vars(
                        {w: (Polynomial.constant(num) if w == v
                             else Polynomial.variable(w))
                         for w in q.vars_used()})
                    if r.is_zero:
                        ok = False
                        break
                    shrunk.append(r)
                else:
                    shrunk.append(q)
            if ok:
                assignment[v] = num
                residues = shrunk
                break
        else:
            return ("unknown", None)

    point = [Fraction(assignment.get(v, 0)) for v in range(n_vars)]
    model = list(point)
    for v, expr in solved.items():
        model[v] = expr.evaluate(point)

    # exactness guard: re-check every atom before answering sat
    for kind, p in list(atoms) + list(verify_extra):
        val = p.evaluate(model)
        if (kind == "eq" and val != 0) or (kind == "ne" and val == 0):
            return ("unknown", None)
    return ("sat", model)


def _candidates() -> Iterator[int]:
    yield 0
    k = 1
    while True:
        yield k
        yield -k
        k += 1


def _flatten_and(node, out: list):
    if node[0] == "and":
        for part in node[1]:
            _flatten_and(part, out)
    else:
        out.append(node)


def _or_combos(ors: list) -> Iterator[list]:
    if not ors:
        yield []
        return
    for atom in ors[0]:
        for tail in _or_combos(ors[1:]):
            yield [atom] + tail


def _decide(assertions: list, n_vars: int, deadline: float | None):
    root = _nnf(("and", tuple(assertions)), False)

    # fast path for the shape the encoders emit: a conjunction of
    # equalities plus disjunctions of atoms. The equalities are
    # eliminated once and shared across all branches.
    parts: list = []
    _flatten_and(root, parts)
    base_eqs: list = []
    plain: list = []
    ors: list = []
    structured = True
    for part in parts:
        kind = part[0]
        if kind == "false":
            return ("unsat", None)
        if kind == "true":
            continue
        if kind == "eq":
            base_eqs.append(part)
        elif kind == "ne":
            plain.append(part)
        elif kind == "or" and all(q[0] in ("eq", "ne") for q in part[1]):
            ors.append(list(part[1]))
        else:
            structured = False
            break

    if structured:
        status, solved, leftover = _presolve([p for _, p in base_eqs])
        if status == "unsat":
            return ("unsat", None)
        base = (solved, leftover)
        saw_unknown = False
        count = 0
        for combo in _or_combos(ors):
            count += 1
            if count > _MAX_BRANCHES:
                return ("unknown", None)
            if deadline is not None and time.monotonic() > deadline:
                return ("unknown", None)
            verdict, model = _decide_branch(plain + combo, n_vars,
                                            base=base, verify_extra=base_eqs)
            if verdict == "sat":
                return (verdict, model)
            if verdict == "unknown":
                saw_unknown = True
        return ("unknown" if saw_unknown else "unsat", None)

    saw_unknown = False
    count = 0
    for branch in _dnf(root):
        count += 1
        if count > _MAX_BRANCHES:
            return ("unknown", None)
        if deadline is not None and time.monotonic() > deadline:
            return ("unknown", None)
        verdict, model = _decide_branch(branch, n_vars)
        if verdict == "sat":
            return (verdict, model)
        if verdict == "unknown":
            saw_unknown = True
    return ("unknown" if saw_unknown else "unsat", None)


# ---- session state and command loop ---------------------------------------


class MiniSolver:
    """One solver instance: declarations, assertion stack, last model."""

    def __init__(self, out=None):
        self.out = out if out is not None else sys.stdout
        self.reset()

    def reset(self):
        self.var_index: dict = {}
        self.var_names: list = []
        # each frame: (assertions, declared names, out_of_fragment flag)
        self.frames: list = [([], [], [False])]
        self.model = None
        self.print_success = False
        self.timeout_ms: float | None = None

    # -- helpers

    def _respond(self, text: str):
        self.out.write(text + "\n")
        self.out.flush()

    def _success(self):
        if self.print_success:
            self._respond("success")

    def _all_assertions(self) -> list:
        out = []
        for asserts, _, _ in self.frames:
            out.extend(asserts)
        return out

    def _out_of_fragment(self) -> bool:
        return any(flag[0] for _, _, flag in self.frames)

    # -- commands

    def execute(self, form):
        if isinstance(form, str):
            raise _SolverError(f"unexpected input {form!r}")
        if not form or not isinstance(form[0], str):
            raise _SolverError("malformed command")
        head = form[0]
        handler = getattr(self, "_cmd_" + head.replace("-", "_"), None)
        if handler is None:
            raise _SolverError(f"unsupported command {head}")
        return handler(form)

    def _cmd_set_logic(self, form):
        self._success()

    def _cmd_set_info(self, form):
        self._success()

    def _cmd_set_option(self, form):
        if len(form) >= 3 and form[1] == ":print-success":
            self.print_success = form[2] == "true"
            if self.print_success:
                self._respond("success")
            return
        if len(form) >= 3 and form[1] == ":timeout":
            try:
                self.timeout_ms = float(form[2])
            except (TypeError, ValueError):
                raise _SolverError("bad :timeout value")
        self._success()

    def _declare(self, name, sort):
        if not isinstance(name, str):
            raise _SolverError("bad declaration name")
        if sort != "Real":
            raise _OutOfFragment(f"sort {sort}")
        if name in self.var_index:
            raise _SolverError(f"constant {name} already declared")
        self.var_index[name] = len(self.var_names)
        self.var_names.append(name)
        self.frames[-1][1].append(name)
        self._success()

    def _cmd_declare_const(self, form):
        if len(form) != 3:
            raise _SolverError("declare-const takes a name and a sort")
        self._declare(form[1], form[2])

    def _cmd_declare_fun(self, form):
        if len(form) != 4 or form[2] != []:
            raise _OutOfFragment("only 0-ary declare-fun is supported")
        self._declare(form[1], form[3])

    def _cmd_assert(self, form):
        if len(form) != 2:
            raise _SolverError("assert takes one term")
        try:
            tree = _Terms(self.var_index).to_bool(form[1])
            self.frames[-1][0].append(tree)
        except _OutOfFragment:
            self.frames[-1][2][0] = True
        self._success()

    def _cmd_check_sat(self, form):
        self.model = None
        if self._out_of_fragment():
            self._respond("unknown")
            return
        deadline = None
        if self.timeout_ms is not None:
            deadline = time.monotonic() + self.timeout_ms / 1000.0
        try:
            verdict, model = _decide(self._all_assertions(),
                                     len(self.var_names), deadline)
        except (_SolverError, _OutOfFragment, OverflowError, RecursionError):
            verdict, model = "unknown", None
        if model is not None:
            self.model = model
        self._respond(verdict)

    def _cmd_get_model(self, form):
        if self.model is None:
            raise _SolverError("model is not available")
        lines = ["("]
        for name in self.var_names:
            if name not in self.var_index:
                continue
            val = self.model[self.var_index[name]]
            lines.append(f"  (define-fun {name} () Real {fmt_rat(val)})")
        lines.append(")")
        self._respond("\n".join(lines))

    def _cmd_push(self, form):
        count = int(form[1]) if len(form) > 1 else 1
        for _ in range(count):
            self.frames.append(([], [], [False]))
        self._success()

    def _cmd_pop(self, form):
        count = int(form[1]) if len(form) > 1 else 1
        if count >= len(self.frames):
            raise _SolverError("pop exceeds the assertion stack")
        for _ in range(count):
            _, declared, _ = self.frames.pop()
            for name in declared:
                del self.var_index[name]
        self.model = None
        self._success()

    def _cmd_echo(self, form):
        self._respond(form[1] if len(form) > 1 else '""')

    def _cmd_reset(self, form):
        out = self.out
        ps = False
        self.reset()
        self.out = out
        self.print_success = ps
        self._success()

    def _cmd_exit(self, form):
        raise SystemExit(0)


def main() -> int:
    solver = MiniSolver()
    reader = FormReader()
    fd = sys.stdin.fileno()
    while True:
        # os.read returns as soon as the pipe has any data; a buffered
        # text read would sit waiting for a full chunk or EOF
        try:
            chunk = os.read(fd, 65536)
        except OSError:
            break
        if not chunk:
            break
        chunk = chunk.decode(errors="replace")
        try:
            forms = reader.feed(chunk)
        except ValueError as exc:
            solver._respond(f'(error "{exc}")')
            return 1
        for text in forms:
            try:
                parsed = parse_sexprs(text)
            except ValueError as exc:
                solver._respond(f'(error "{exc}")')
                continue
            for form in parsed:
                try:
                    solver.execute(form)
                except SystemExit:
                    return 0
                except _SolverError as exc:
                    solver._respond(f'(error "{exc}")')
                except _OutOfFragment as exc:
                    solver._respond(f'(error "out of fragment: {exc}")')
    return 0


if __name__ == "__main__":
    sys.exit(main())
