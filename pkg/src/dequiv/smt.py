"""Counterexample-guided equivalence checking through an SMT solver.

A candidate partition is valid iff the negation of its defining condition
is unsatisfiable over the reals. This module builds those negated
conditions as SMT-LIB v2.6 scripts, drives an external solver process over
stdin/stdout, validates every model in exact arithmetic before believing
it, and refines candidates by splitting blocks on witness derivatives.

The solver is any SMT-LIB v2.6 executable supporting QF_NRA; by default
the bundled `dequiv.minismt` is spawned, so reductions work with no
external install. One session owns one process; queries are isolated with
push/pop and each is bounded by a wall-clock limit enforced on our side
(a stuck solver is killed and respawned on the next query).
"""

from __future__ import annotations

import os
import random
import select
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import SolverModelError, SolverTransportError
from .model import PolynomialODESystem
from .partition import Partition
from .smtlib import (FormReader, fmt_rat, parse_model, parse_sexprs,
                     poly_to_smt, smt_eq, smt_not, smt_or, smt_sum)

__all__ = [
    "SolverConfig", "SolverSession", "Formula", "Witness",
    "Valid", "Counterexample", "Unknown", "SmtReduction",
    "encode_bde", "encode_fde", "check_partition", "check_uncertain",
    "split_by_witness", "largest_bde_smt",
]

_RESAMPLE_ATTEMPTS = 64
_RESAMPLE_SEED = 0x5EED


def bundled_solver_command() -> tuple:
    """Command line for the packaged fallback solver."""
    return (sys.executable, "-m", "dequiv.minismt")


@dataclass(frozen=True)
class SolverConfig:
    """How to run the solver: executable, per-query limit, logic."""

    command: tuple = ()
    time_limit: float = 60.0
    logic: str = "QF_NRA"
    dump_dir: str | None = None

    def resolved_command(self) -> tuple:
        return tuple(self.command) if self.command else bundled_solver_command()

    @property
    def bundled(self) -> bool:
        return not self.command


# ---- encodings -------------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    """One solver script: declarations plus the asserted negated condition.

    `declarations` and `assertions` are SMT-LIB command strings; `script()`
    renders a standalone file, while a session replays the same commands
    inside a push/pop frame.
    """

    mode: str
    logic: str
    declarations: tuple
    assertions: tuple
    variables: tuple
    var_syms: tuple
    var_syms2: tuple | None
    param_names: tuple
    param_syms: tuple

    def commands(self) -> tuple:
        return self.declarations + self.assertions

    def script(self) -> str:
        lines = [f"; negated {self.mode.upper()} condition"]
        for name, sym in zip(self.variables, self.var_syms):
            lines.append(f"; {sym} = {name}")
        if self.var_syms2:
            for name, sym in zip(self.variables, self.var_syms2):
                lines.append(f"; {sym} = {name} (second copy)")
        for name, sym in zip(self.param_names, self.param_syms):
            lines.append(f"; {sym} = parameter {name}")
        lines.append(f"(set-logic {self.logic})")
        lines.extend(self.commands())
        lines.append("(check-sat)")
        lines.append("(exit)")
        return "\n".join(lines) + "\n"


def _prepare(system: PolynomialODESystem, free_params):
    """Resolve bound parameters and name the remaining symbols."""
    prepared = system.resolve(free=free_params)
    params = sorted({p for f in prepared.derivatives for p in f.free_params()})
    n = prepared.n
    var_syms = tuple(f"v{i}" for i in range(n))
    var_syms2 = tuple(f"w{i}" for i in range(n))
    param_syms = {name: f"p{j}" for j, name in enumerate(params)}
    return prepared, tuple(params), var_syms, var_syms2, param_syms


def encode_bde(system: PolynomialODESystem, part: Partition,
               free_params=()) -> Formula:
    """Negated backward condition: related variables equal, some related
    derivatives unequal. Unsatisfiable iff the partition is a BDE."""
    prepared, params, var_syms, _, param_syms = _prepare(system, free_params)
    decls = [f"(declare-const {s} Real)" for s in var_syms]
    decls += [f"(declare-const {param_syms[p]} Real)" for p in params]

    f_terms = [poly_to_smt(f, var_syms, param_syms)
               for f in prepared.derivatives]
    assertions = []
    disequalities = []
    for block in part.blocks:
        rep = block[0]
        for i in block[1:]:
            assertions.append(f"(assert {smt_eq(var_syms[i], var_syms[rep])})")
            disequalities.append(smt_not(smt_eq(f_terms[i], f_terms[rep])))
    assertions.append(f"(assert {smt_or(disequalities)})")

    return Formula(mode="bde", logic="QF_NRA",
                   declarations=tuple(decls), assertions=tuple(assertions),
                   variables=tuple(prepared.variables), var_syms=var_syms,
                   var_syms2=None, param_names=params,
                   param_syms=tuple(param_syms[p] for p in params))


def encode_fde(system: PolynomialODESystem, part: Partition,
               free_params=()) -> Formula:
    """Negated forward condition over two copies: all block sums equal,
    some block derivative sums unequal. Unsatisfiable iff FDE."""
    prepared, params, var_syms, var_syms2, param_syms = _prepare(
        system, free_params)
    decls = [f"(declare-const {s} Real)" for s in var_syms]
    decls += [f"(declare-const {s} Real)" for s in var_syms2]
    decls += [f"(declare-const {param_syms[p]} Real)" for p in params]

    f1 = [poly_to_smt(f, var_syms, param_syms) for f in prepared.derivatives]
    f2 = [poly_to_smt(f, var_syms2, param_syms) for f in prepared.derivatives]
    assertions = []
    disequalities = []
    for block in part.blocks:
        sum1 = smt_sum([var_syms[i] for i in block])
        sum2 = smt_sum([var_syms2[i] for i in block])
        assertions.append(f"(assert {smt_eq(sum1, sum2)})")
        fs1 = smt_sum([f1[i] for i in block])
        fs2 = smt_sum([f2[i] for i in block])
        disequalities.append(smt_not(smt_eq(fs1, fs2)))
    assertions.append(f"(assert {smt_or(disequalities)})")

    return Formula(mode="fde", logic="QF_NRA",
                   declarations=tuple(decls), assertions=tuple(assertions),
                   variables=tuple(prepared.variables), var_syms=var_syms,
                   var_syms2=var_syms2, param_names=params,
                   param_syms=tuple(param_syms[p] for p in params))


# ---- solver session --------------------------------------------------------


class SolverSession:
    """Single-owner handle to one solver process.

    The process is spawned on first use and each query runs inside its
    own push/pop frame. Answers are read with a wall-clock deadline; on
    expiry the process is killed, the query reports "timeout", and the
    next query starts a fresh process.
    """

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        self.solver_calls = 0
        self._proc = None
        self._reader = FormReader()
        self._pending: list = []
        self._stderr_file = None
        self._dump_count = 0

    # -- process management

    def _spawn(self):
        cmd = self.config.resolved_command()
        self._stderr_file = tempfile.TemporaryFile()
        try:
            self._proc = subprocess.Popen(
                list(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=self._stderr_file, bufsize=0)
        except OSError as exc:
            raise SolverTransportError(
                f"could not start solver {' '.join(cmd)}: {exc}") from exc
        self._reader = FormReader()
        self._pending = []
        prelude = ["(set-option :print-success false)",
                   "(set-option :produce-models true)"]
        if self.config.bundled and self.config.time_limit is not None:
            ms = max(1, int(self.config.time_limit * 1000))
            prelude.append(f"(set-option :timeout {ms})")
        prelude.append(f"(set-logic {self.config.logic})")
        self._write("\n".join(prelude) + "\n")

    def _alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    def _kill(self):
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except OSError:
                pass
            self._proc = None
        if self._stderr_file is not None:
            self._stderr_file.close()
            self._stderr_file = None

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._write("(exit)\n")
                self._proc.wait(timeout=2)
            except (SolverTransportError, OSError, subprocess.TimeoutExpired):
                pass
        self._kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- wire I/O

    def _write(self, text: str):
        try:
            self._proc.stdin.write(text.encode())
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise SolverTransportError(
                f"solver process closed its input: {exc}") from exc

    def _stderr_tail(self) -> str:
        if self._stderr_file is None:
            return ""
        try:
            self._stderr_file.seek(0, os.SEEK_END)
            size = self._stderr_file.tell()
            self._stderr_file.seek(max(0, size - 2000))
            return self._stderr_file.read().decode(errors="replace").strip()
        except OSError:
            return ""

    def _read_form(self, deadline: float | None) -> str | None:
        """Next complete response form, or None when the deadline passes."""
        while True:
            if self._pending:
                return self._pending.pop(0)
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
            else:
                remaining = None
            fd = self._proc.stdout.fileno()
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                return None
            chunk = os.read(fd, 65536)
            if not chunk:
                tail = self._stderr_tail()
                detail = f" (stderr: {tail})" if tail else ""
                raise SolverTransportError(
                    "solver process closed its output" + detail)
            self._pending.extend(self._reader.feed(
                chunk.decode(errors="replace")))

    # -- queries

    def _dump(self, formula: Formula):
        if not self.config.dump_dir:
            return
        directory = Path(self.config.dump_dir)
        directory.mkdir(parents=True, exist_ok=True)
        self._dump_count += 1
        path = directory / f"query_{self._dump_count:04d}.smt2"
        path.write_text(formula.script())

    def query(self, formula: Formula):
        """Run one check. Returns (verdict, model) with verdict one of
        "sat" | "unsat" | "unknown" | "timeout"; model is a symbol ->
        Fraction|None dict for sat, else None."""
        self._dump(formula)
        if not self._alive():
            self._kill()
            self._spawn()
        self.solver_calls += 1

        limit = self.config.time_limit
        deadline = (time.monotonic() + limit) if limit is not None else None

        self._write("(push 1)\n")
        self._write("\n".join(formula.commands()) + "\n(check-sat)\n")
        verdict = self._read_form(deadline)
        if verdict is None:
            self._kill()
            return ("timeout", None)
        verdict = verdict.strip()
        if verdict not in ("sat", "unsat", "unknown"):
            raise SolverTransportError(
                f"unexpected solver answer to check-sat: {verdict!r}")

        model = None
        if verdict == "sat":
            self._write("(get-model)\n")
            form = self._read_form(deadline)
            if form is None:
                self._kill()
                return ("timeout", None)
            if form.lstrip().startswith("(error"):
                raise SolverTransportError(f"get-model failed: {form.strip()}")
            try:
                parsed = parse_sexprs(form)
            except ValueError as exc:
                raise SolverTransportError(f"unreadable model: {exc}") from exc
            if not parsed:
                raise SolverTransportError("empty model response")
            model = parse_model(parsed[0])
        self._write("(pop 1)\n")
        return (verdict, model)


# ---- results ---------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """A model refuting a candidate partition, re-validated exactly.

    `values` (and `values2` for the forward mode's second copy) assign a
    rational to every variable; `derivs` are the derivative values at
    that point. `params` carries refuting parameter values when the
    query left parameters free.
    """

    variables: tuple
    values: tuple
    derivs: tuple
    values2: tuple | None = None
    derivs2: tuple | None = None
    params: tuple = ()
    exact: bool = True

    @property
    def assignment(self) -> dict:
        return dict(zip(self.variables, self.values))

    @property
    def assignment2(self) -> dict | None:
        if self.values2 is None:
            return None
        return dict(zip(self.variables, self.values2))

    @property
    def derivative_values(self) -> dict:
        return dict(zip(self.variables, self.derivs))

    @property
    def param_values(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class Valid:
    mode: str
    kind = "valid"


@dataclass(frozen=True)
class Counterexample:
    mode: str
    witness: Witness
    kind = "counterexample"


@dataclass(frozen=True)
class Unknown:
    mode: str
    reason: str
    kind = "unknown"


# ---- model validation ------------------------------------------------------


def _evaluate_derivs(prepared, point, params) -> tuple:
    return tuple(f.evaluate(point, params) for f in prepared.derivatives)


def _violates_bde(part, point, derivs) -> bool:
    for block in part.blocks:
        rep = block[0]
        for i in block[1:]:
            if point[i] != point[rep]:
                return False
    return any(derivs[i] != derivs[block[0]]
               for block in part.blocks for i in block[1:])


def _violates_fde(part, point1, point2, derivs1, derivs2) -> bool:
    for block in part.blocks:
        if sum(point1[i] for i in block) != sum(point2[i] for i in block):
            return False
    return any(
        sum(derivs1[i] for i in block) != sum(derivs2[i] for i in block)
        for block in part.blocks)


def _model_values(model: dict, syms) -> list | None:
    """Values for `syms`, defaulting omitted symbols to 0; None when the
    solver printed something non-rational."""
    out = []
    for s in syms:
        if s in model:
            val = model[s]
            if val is None:
                return None
            out.append(val)
        else:
            out.append(Fraction(0))
    return out


def _rand_rat(rng) -> Fraction:
    return Fraction(rng.randint(-8, 8), rng.randint(1, 6))


def _resample_bde(prepared, part, params):
    """Deterministic search for a rational refuting point: blockwise-equal
    values with some related derivatives unequal."""
    rng = random.Random(_RESAMPLE_SEED)
    n = prepared.n
    for _ in range(_RESAMPLE_ATTEMPTS):
        point = [Fraction(0)] * n
        for block in part.blocks:
            val = _rand_rat(rng)
            for i in block:
                point[i] = val
        env = {name: _rand_rat(rng) for name in params} if params else {}
        derivs = _evaluate_derivs(prepared, point, env)
        if _violates_bde(part, point, derivs):
            return point, derivs, env
    return None


def _resample_fde(prepared, part, params):
    """As `_resample_bde` for the forward condition: both copies share
    block sums, some block derivative sums differ."""
    rng = random.Random(_RESAMPLE_SEED)
    n = prepared.n
    for _ in range(_RESAMPLE_ATTEMPTS):
        point1 = [_rand_rat(rng) for _ in range(n)]
        point2 = [Fraction(0)] * n
        for block in part.blocks:
            total = sum(point1[i] for i in block)
            for i in block[:-1]:
                point2[i] = _rand_rat(rng)
            point2[block[-1]] = total - sum(point2[i] for i in block[:-1])
        env = {name: _rand_rat(rng) for name in params} if params else {}
        derivs1 = _evaluate_derivs(prepared, point1, env)
        derivs2 = _evaluate_derivs(prepared, point2, env)
        if _violates_fde(part, point1, point2, derivs1, derivs2):
            return point1, point2, derivs1, derivs2, env
    return None


def _witness_from_model(prepared, part, mode, formula, model):
    """Exact validation of a sat model; falls back to deterministic
    rational resampling when the model is irrational or does not actually
    refute the condition. Returns a Witness or None."""
    params = formula.param_names
    param_vals = _model_values(model, formula.param_syms)
    values = _model_values(model, formula.var_syms)

    if mode == "bde":
        if values is not None and param_vals is not None:
            env = dict(zip(params, param_vals))
            derivs = _evaluate_derivs(prepared, values, env)
            if _violates_bde(part, values, derivs):
                return Witness(variables=formula.variables,
                               values=tuple(values), derivs=derivs,
                               params=tuple(zip(params, param_vals)))
        found = _resample_bde(prepared, part, params)
        if found is None:
            return None
        point, derivs, env = found
        return Witness(variables=formula.variables, values=tuple(point),
                       derivs=derivs,
                       params=tuple((p, env[p]) for p in params))

    values2 = _model_values(model, formula.var_syms2)
    if values is not None and values2 is not None and param_vals is not None:
        env = dict(zip(params, param_vals))
        derivs1 = _evaluate_derivs(prepared, values, env)
        derivs2 = _evaluate_derivs(prepared, values2, env)
        if _violates_fde(part, values, values2, derivs1, derivs2):
            return Witness(variables=formula.variables,
                           values=tuple(values), derivs=derivs1,
                           values2=tuple(values2), derivs2=derivs2,
                           params=tuple(zip(params, param_vals)))
    found = _resample_fde(prepared, part, params)
    if found is None:
        return None
    point1, point2, derivs1, derivs2, env = found
    return Witness(variables=formula.variables, values=tuple(point1),
                   derivs=derivs1, values2=tuple(point2), derivs2=derivs2,
                   params=tuple((p, env[p]) for p in params))


# ---- checking and refinement -----------------------------------------------


def _check(session, system, part, mode, free_params):
    if mode not in ("bde", "fde"):
        raise ValueError(f"mode must be 'bde' or 'fde', not {mode!r}")
    encode = encode_bde if mode == "bde" else encode_fde
    formula = encode(system, part, free_params=free_params)
    prepared = system.resolve(free=free_params)
    verdict, model = session.query(formula)
    if verdict == "unsat":
        return Valid(mode=mode)
    if verdict == "timeout":
        return Unknown(mode=mode, reason="timeout")
    if verdict == "unknown":
        return Unknown(mode=mode, reason="solver returned unknown")
    witness = _witness_from_model(prepared, part, mode, formula, model or {})
    if witness is None:
        return Unknown(mode=mode,
                       reason="sat model could not be validated exactly")
    return Counterexample(mode=mode, witness=witness)


def check_partition(session: SolverSession, system: PolynomialODESystem,
                    part: Partition, mode: str, free_params=()):
    """Decide one candidate: Valid, Counterexample(witness), or Unknown.

    Bound parameters are substituted; unbound ones are implicitly free.
    A sat answer is never trusted as-is: the model is re-evaluated in
    exact arithmetic (resampling rationally if the solver returned
    irrational values), and only a genuine refutation is reported.
    """
    return _check(session, system, part, mode, tuple(free_params))


def check_uncertain(session: SolverSession, system: PolynomialODESystem,
                    part: Partition, mode: str, uncertain):
    """check_partition with the listed parameters left free even when
    they carry values: Valid means the partition is an equivalence for
    every assignment of those parameters; a Counterexample's witness
    includes the refuting parameter values."""
    return _check(session, system, part, mode, tuple(uncertain))


def split_by_witness(part: Partition, witness: Witness) -> Partition:
    """Refine: group each block's members by their exact derivative value
    at the witness. The result must strictly refine `part`; a witness
    that separates nothing indicates an inconsistent solver model."""
    new_blocks = []
    for block in part.blocks:
        groups: dict = {}
        for i in block:
            groups.setdefault(witness.derivs[i], []).append(i)
        new_blocks.extend(groups.values())
    if len(new_blocks) == len(part.blocks):
        raise SolverModelError(
            "witness does not separate any block; solver model is "
            "inconsistent with its sat answer")
    return Partition.of_blocks(new_blocks, part.n)


@dataclass(frozen=True)
class SmtReduction:
    """Outcome of the iterative backward reduction.

    `conclusive` is False when a solver Unknown stopped the loop; the
    partition is then the last candidate, not certified."""

    partition: Partition
    conclusive: bool
    solver_calls: int
    witnesses: tuple
    reason: str = ""


def largest_bde_smt(session: SolverSession, system: PolynomialODESystem,
                    initial: Partition | None = None,
                    free_params=()) -> SmtReduction:
    """Largest backward equivalence refining `initial` (default trivial).

    Repeats check/split until Valid; each split strictly refines, so at
    most n iterations run. An Unknown stops the loop inconclusively with
    the last candidate."""
    part = initial if initial is not None else Partition.trivial(system.n)
    calls_before = session.solver_calls
    witnesses = []
    while True:
        result = check_partition(session, system, part, "bde",
                                 free_params=free_params)
        if isinstance(result, Valid):
            return SmtReduction(
                partition=part, conclusive=True,
                solver_calls=session.solver_calls - calls_before,
                witnesses=tuple(witnesses))
        if isinstance(result, Unknown):
            return SmtReduction(
                partition=part, conclusive=False,
                solver_calls=session.solver_calls - calls_before,
                witnesses=tuple(witnesses), reason=result.reason)
        witnesses.append(result.witness)
        part = split_by_witness(part, result.witness)
