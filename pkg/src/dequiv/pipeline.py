"""End-to-end reduction pipelines shared by the CLI and tests.

Each pipeline loads a model, runs the requested engine, optionally
builds and validates the quotient, and assembles a JSON-ready report.
Exit codes are part of the contract: 0 success, 1 usage/parse/build
errors, 2 a checked partition is not an equivalence, 3 the solver could
not decide, 4 numerical validation failed.
"""

from __future__ import annotations

import shlex
import time
from dataclasses import dataclass

from .errors import (DegreeError, DequivError, FreeParameterError,
                     MissingInitialError, NotFbRepresentableError,
                     QuotientError, UnequalBlockInitialsError)
from .ingest import format_rat, load_model, load_partition, print_model
from .model import PolynomialODESystem, ReactionNetwork, mass_action_odes
from .partition import Partition
from .quotient import QuotientModel, build_bde_quotient, build_fde_quotient
from .smt import (Counterexample, SmtReduction, SolverConfig, SolverSession,
                  Unknown, Valid, Witness, check_partition, largest_bde_smt)
from .syntactic import CheckResult, check_bde, check_fb, refine_bde, refine_fb
from .validate import ValidationReport, validate_reduction

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID_PARTITION = 2
EXIT_UNDECIDED = 3
EXIT_VALIDATION_FAILED = 4


def solver_config(solver: str | None, time_limit: float,
                  dump_dir: str | None) -> SolverConfig:
    command = tuple(shlex.split(solver)) if solver else ()
    return SolverConfig(command=command, time_limit=time_limit,
                        dump_dir=dump_dir)


def _load(model_path: str):
    """Model file -> (original model, its polynomial ODE system)."""
    model = load_model(model_path)
    if isinstance(model, ReactionNetwork):
        return model, mass_action_odes(model, allow_free=True)
    return model, model


def _blocks_by_name(part: Partition, variables) -> list:
    return [[variables[i] for i in block] for block in part.blocks]


def _witness_dict(w: Witness) -> dict:
    out = {
        "assignment": {v: format_rat(x)
                       for v, x in zip(w.variables, w.values)},
        "derivatives": {v: format_rat(x)
                        for v, x in zip(w.variables, w.derivs)},
    }
    if w.values2 is not None:
        out["assignment2"] = {v: format_rat(x)
                              for v, x in zip(w.variables, w.values2)}
        out["derivatives2"] = {v: format_rat(x)
                               for v, x in zip(w.variables, w.derivs2)}
    if w.params:
        out["parameters"] = {p: format_rat(x) for p, x in w.params}
    return out


def _violations_list(res: CheckResult) -> list:
    return [{"kind": v.kind, "members": list(v.members), "detail": v.detail}
            for v in res.violations]


@dataclass
class PipelineResult:
    """What a pipeline produced: exit code, report dict, and the pieces."""

    exit_code: int
    report: dict
    partition: Partition | None = None
    quotient: QuotientModel | None = None
    validation: ValidationReport | None = None


def _base_report(model_path: str, system: PolynomialODESystem, mode: str,
                 backend: str) -> dict:
    return {
        "model": model_path,
        "n": system.n,
        "m": system.term_count,
        "mode": mode,
        "backend": backend,
    }


def _resolve_for_syntactic(system: PolynomialODESystem, uncertain):
    return system.resolve(free=uncertain) if uncertain else system


def reduce_pipeline(model_path: str, mode: str = "bde",
                    backend: str = "syntactic",
                    partition_path: str | None = None,
                    uncertain=(), solver: str | None = None,
                    time_limit: float = 60.0, do_validate: bool = False,
                    horizon: float = 10.0, step: float = 1e-3,
                    tol: float = 1e-6, dump_dir: str | None = None,
                    output_path: str | None = None) -> PipelineResult:
    """Compute the coarsest reduction refining the initial partition and
    emit quotient, report, and optional validation."""
    t0 = time.perf_counter()
    _, system = _load(model_path)
    initial = (load_partition(partition_path, system)
               if partition_path else Partition.trivial(system.n))
    uncertain = tuple(uncertain)
    for name in uncertain:
        system.param(name)

    report = _base_report(model_path, system, mode, backend)
    report["initial_partition"] = partition_path or "trivial"
    report["blocks_before"] = initial.size
    if uncertain:
        report["uncertain"] = list(uncertain)

    part: Partition | None = None
    exit_code = EXIT_OK
    if backend == "syntactic":
        target = _resolve_for_syntactic(system, uncertain)
        if mode == "bde":
            part = refine_bde(target, initial)
        else:
            try:
                part = refine_fb(target, initial)
            except (DegreeError, FreeParameterError) as exc:
                raise DequivError(
                    f"{exc} (the syntactic forward engine cannot handle "
                    f"this input; retry with --backend smt)") from exc
    elif backend == "smt":
        config = solver_config(solver, time_limit, dump_dir)
        with SolverSession(config) as session:
            if mode == "bde":
                red: SmtReduction = largest_bde_smt(
                    session, system, initial, free_params=uncertain)
                part = red.partition
                report["solver_calls"] = red.solver_calls
                report["conclusive"] = red.conclusive
                if red.witnesses:
                    report["witnesses"] = [
                        _witness_dict(w) for w in red.witnesses]
                if not red.conclusive:
                    report["reason"] = red.reason
                    exit_code = EXIT_UNDECIDED
            else:
                # forward mode is check-only: the syntactic engine
                # proposes (falling back to the initial partition when it
                # cannot run), the solver certifies
                try:
                    proposal = refine_fb(
                        _resolve_for_syntactic(system, uncertain), initial)
                    report["proposal"] = "syntactic"
                except (DegreeError, FreeParameterError):
                    proposal = initial
                    report["proposal"] = "initial-partition"
                outcome = check_partition(session, system, proposal, "fde",
                                          free_params=uncertain)
                report["solver_calls"] = session.solver_calls
                part = proposal
                if isinstance(outcome, Counterexample):
                    report["witness"] = _witness_dict(outcome.witness)
                    report["certified"] = False
                    exit_code = EXIT_INVALID_PARTITION
                elif isinstance(outcome, Unknown):
                    report["certified"] = False
                    report["reason"] = outcome.reason
                    exit_code = EXIT_UNDECIDED
                else:
                    report["certified"] = True
    else:
        raise DequivError(f"unknown backend {backend!r}")

    report["blocks_after"] = part.size
    report["partition"] = _blocks_by_name(part, system.variables)

    quotient = None
    validation = None
    if exit_code == EXIT_OK:
        try:
            build = build_bde_quotient if mode == "bde" else build_fde_quotient
            quotient = build(system, part)
        except (UnequalBlockInitialsError, NotFbRepresentableError,
                MissingInitialError, QuotientError) as exc:
            report["quotient_error"] = str(exc)
            if output_path or do_validate:
                raise
        if quotient is not None:
            if output_path:
                with open(output_path, "w") as fh:
                    fh.write(print_model(quotient))
                report["output"] = output_path
            if do_validate:
                validation = validate_reduction(
                    system, quotient, tol=tol, horizon=horizon, step=step)
                report["validation"] = validation.to_dict()
                if not validation.passed:
                    exit_code = EXIT_VALIDATION_FAILED

    report["wall_time_s"] = round(time.perf_counter() - t0, 6)
    return PipelineResult(exit_code=exit_code, report=report, partition=part,
                          quotient=quotient, validation=validation)


def check_pipeline(model_path: str, partition_path: str, mode: str = "bde",
                   backend: str = "syntactic", uncertain=(),
                   solver: str | None = None, time_limit: float = 60.0,
                   dump_dir: str | None = None) -> PipelineResult:
    """Decide whether a given partition is an equivalence of the model."""
    t0 = time.perf_counter()
    _, system = _load(model_path)
    part = load_partition(partition_path, system)
    uncertain = tuple(uncertain)
    for name in uncertain:
        system.param(name)

    report = _base_report(model_path, system, mode, backend)
    report["partition"] = _blocks_by_name(part, system.variables)
    if uncertain:
        report["uncertain"] = list(uncertain)

    exit_code = EXIT_OK
    if backend == "syntactic":
        target = _resolve_for_syntactic(system, uncertain)
        if mode == "bde":
            res = check_bde(target, part)
        else:
            try:
                res = check_fb(target, part)
            except (DegreeError, FreeParameterError) as exc:
                raise DequivError(
                    f"{exc} (the syntactic forward engine cannot handle "
                    f"this input; retry with --backend smt)") from exc
        report["valid"] = res.valid
        if not res.valid:
            report["violations"] = _violations_list(res)
            exit_code = EXIT_INVALID_PARTITION
    elif backend == "smt":
        config = solver_config(solver, time_limit, dump_dir)
        with SolverSession(config) as session:
            outcome = check_partition(session, system, part, mode,
                                      free_params=uncertain)
            report["solver_calls"] = session.solver_calls
        if isinstance(outcome, Valid):
            report["valid"] = True
        elif isinstance(outcome, Counterexample):
            report["valid"] = False
            report["witness"] = _witness_dict(outcome.witness)
            exit_code = EXIT_INVALID_PARTITION
        else:
            report["valid"] = None
            report["reason"] = outcome.reason
            exit_code = EXIT_UNDECIDED
    else:
        raise DequivError(f"unknown backend {backend!r}")

    report["wall_time_s"] = round(time.perf_counter() - t0, 6)
    return PipelineResult(exit_code=exit_code, report=report, partition=part)


def validate_pipeline(model_path: str, partition_path: str,
                      mode: str = "bde", horizon: float = 10.0,
                      step: float = 1e-3, tol: float = 1e-6,
                      output_path: str | None = None) -> PipelineResult:
    """Build the quotient for a given partition and gate it numerically."""
    t0 = time.perf_counter()
    _, system = _load(model_path)
    part = load_partition(partition_path, system)

    report = _base_report(model_path, system, mode, "simulation")
    report["partition"] = _blocks_by_name(part, system.variables)

    build = build_bde_quotient if mode == "bde" else build_fde_quotient
    quotient = build(system, part)
    if output_path:
        with open(output_path, "w") as fh:
            fh.write(print_model(quotient))
        report["output"] = output_path
    validation = validate_reduction(system, quotient, tol=tol,
                                    horizon=horizon, step=step)
    report["validation"] = validation.to_dict()
    exit_code = EXIT_OK if validation.passed else EXIT_VALIDATION_FAILED

    report["wall_time_s"] = round(time.perf_counter() - t0, 6)
    return PipelineResult(exit_code=exit_code, report=report, partition=part,
                          quotient=quotient, validation=validation)


def bench_pipeline(sizes, group_size: int = 2, m: int | None = None,
                   seed: int = 0, backends=("syntactic",),
                   solver: str | None = None,
                   time_limit: float = 60.0) -> PipelineResult:
    """Generate planted-symmetry networks and time each backend on them.

    Sizes are species counts; each network is aux-free with n/group_size
    planted groups (n must divide evenly). Results are keyed by model
    name, deterministically ordered."""
    from .bench import BenchSpec, generate_bench, planted_partition

    t0 = time.perf_counter()
    rows = []
    exit_code = EXIT_OK
    for n in sizes:
        if n % group_size:
            raise DequivError(
                f"bench size {n} is not divisible by group size {group_size}")
        spec = BenchSpec(n=n, groups=(group_size,) * (n // group_size),
                         m=m, seed=seed)
        system = mass_action_odes(generate_bench(spec))
        planted = planted_partition(spec)
        row = {"name": f"bench-n{n}", "n": system.n, "m": system.term_count,
               "groups": len(spec.groups)}
        if "syntactic" in backends:
            t = time.perf_counter()
            got = refine_bde(system, Partition.trivial(system.n))
            row["syntactic_s"] = round(time.perf_counter() - t, 6)
            row["syntactic_matches_planted"] = got == planted
            if not got == planted:
                exit_code = EXIT_INVALID_PARTITION
        if "smt" in backends:
            config = solver_config(solver, time_limit, None)
            t = time.perf_counter()
            with SolverSession(config) as session:
                red = largest_bde_smt(session, system)
            row["smt_s"] = round(time.perf_counter() - t, 6)
            row["smt_conclusive"] = red.conclusive
            row["smt_solver_calls"] = red.solver_calls
            if red.conclusive:
                row["smt_matches_planted"] = red.partition == planted
                if not row["smt_matches_planted"]:
                    exit_code = EXIT_INVALID_PARTITION
            else:
                exit_code = EXIT_UNDECIDED
        rows.append(row)

    report = {"bench": sorted(rows, key=lambda r: r["name"]),
              "seed": seed, "wall_time_s": round(time.perf_counter() - t0, 6)}
    return PipelineResult(exit_code=exit_code, report=report)
