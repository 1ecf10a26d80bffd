"""Command-line interface.

Subcommands: reduce, check, validate, bench, gen. Exit codes: 0 success,
1 usage or input errors, 2 a checked partition is not an equivalence,
3 the solver was inconclusive, 4 numerical validation failed.
"""

from __future__ import annotations

import sys

import click

from .errors import DequivError
from .ingest import print_partition, print_report, print_rn
from .pipeline import (PipelineResult, bench_pipeline, check_pipeline,
                       reduce_pipeline, validate_pipeline)


def _split_names(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip()) if text else ()


def _parse_groups(text: str) -> tuple:
    """Group sizes: comma-separated entries, each SIZE or COUNTxSIZE
    (e.g. "2,2" or "196x50")."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "x" in item:
            count, size = item.split("x", 1)
            out.extend([int(size)] * int(count))
        else:
            out.append(int(item))
    if not out:
        raise click.BadParameter("no group sizes given")
    return tuple(out)


def _emit(result: PipelineResult, report_file: str | None) -> int:
    if report_file:
        with open(report_file, "w") as fh:
            fh.write(print_report(result.report))
    return result.exit_code


def _echo_partition(result: PipelineResult):
    for block in result.report.get("partition", []):
        click.echo("{" + ", ".join(block) + "}")


_solver_opts = [
    click.option("--solver", default=None, metavar="CMD",
                 help="External SMT solver command (default: the bundled "
                      "solver)."),
    click.option("--time-limit", type=float, default=60.0,
                 show_default=True, help="Per-query solver limit, seconds."),
    click.option("--dump-smt2", "dump_dir", default=None, metavar="DIR",
                 help="Write every solver query to DIR as .smt2 files."),
]

_sim_opts = [
    click.option("--horizon", type=float, default=10.0, show_default=True),
    click.option("--step", type=float, default=1e-3, show_default=True),
    click.option("--tol", type=float, default=1e-6, show_default=True),
]


def _with(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f
    return deco


@click.group()
@click.version_option(package_name="dequiv")
def cli():
    """Exact aggregation of polynomial ODE systems and reaction networks
    by forward and backward differential equivalence."""


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["bde", "fde"]), default="bde",
              show_default=True, help="Backward (variables merge) or "
              "forward (block sums close) equivalence.")
@click.option("--backend", type=click.Choice(["syntactic", "smt"]),
              default="syntactic", show_default=True)
@click.option("--partition", "partition_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Initial partition (.part); default: one shared block.")
@click.option("--uncertain", default="", metavar="P1,P2",
              help="Parameters treated as free in the check.")
@_with(_solver_opts)
@click.option("--validate", "do_validate", is_flag=True,
              help="Gate the reduction with trajectory comparison.")
@_with(_sim_opts)
@click.option("--output", "output_file", default=None,
              type=click.Path(dir_okay=False),
              help="Write the quotient model (.ode).")
@click.option("--report", "report_file", default=None,
              type=click.Path(dir_okay=False), help="Write a JSON report.")
def reduce(model, mode, backend, partition_file, uncertain, solver,
           time_limit, dump_dir, do_validate, horizon, step, tol,
           output_file, report_file):
    """Compute the coarsest equivalence refining the initial partition."""
    result = reduce_pipeline(
        model, mode=mode, backend=backend, partition_path=partition_file,
        uncertain=_split_names(uncertain), solver=solver,
        time_limit=time_limit, do_validate=do_validate, horizon=horizon,
        step=step, tol=tol, dump_dir=dump_dir, output_path=output_file)
    rep = result.report
    click.echo(f"{mode} via {backend}: {rep['blocks_before']} -> "
               f"{rep['blocks_after']} blocks")
    _echo_partition(result)
    if "certified" in rep:
        click.echo(f"certified: {rep['certified']}")
    if rep.get("reason"):
        click.echo(f"inconclusive: {rep['reason']}")
    if "quotient_error" in rep:
        click.echo(f"no quotient: {rep['quotient_error']}")
    if result.validation is not None:
        click.echo("validation: "
                   + ("pass" if result.validation.passed else "FAIL")
                   + f" (max abs err {result.validation.max_abs_err:.3g})")
    if output_file and "output" in rep:
        click.echo(f"quotient written to {output_file}")
    return _emit(result, report_file)


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--partition", "partition_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["bde", "fde"]), default="bde",
              show_default=True)
@click.option("--backend", type=click.Choice(["syntactic", "smt"]),
              default="syntactic", show_default=True)
@click.option("--uncertain", default="", metavar="P1,P2",
              help="Parameters treated as free in the check.")
@_with(_solver_opts)
@click.option("--report", "report_file", default=None,
              type=click.Path(dir_okay=False))
def check(model, partition_file, mode, backend, uncertain, solver,
          time_limit, dump_dir, report_file):
    """Decide whether a partition is an equivalence of the model."""
    result = check_pipeline(
        model, partition_file, mode=mode, backend=backend,
        uncertain=_split_names(uncertain), solver=solver,
        time_limit=time_limit, dump_dir=dump_dir)
    rep = result.report
    if rep.get("valid") is True:
        click.echo("valid")
    elif rep.get("valid") is False:
        click.echo("not an equivalence")
        for v in rep.get("violations", []):
            click.echo(f"  {v['detail']}")
        if "witness" in rep:
            pairs = sorted(rep["witness"]["assignment"].items())
            click.echo("  witness: "
                       + ", ".join(f"{k} = {v}" for k, v in pairs))
            if "parameters" in rep["witness"]:
                ppairs = sorted(rep["witness"]["parameters"].items())
                click.echo("  parameters: "
                           + ", ".join(f"{k} = {v}" for k, v in ppairs))
    else:
        click.echo(f"undecided: {rep.get('reason', 'unknown')}")
    return _emit(result, report_file)


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--partition", "partition_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["bde", "fde"]), default="bde",
              show_default=True)
@_with(_sim_opts)
@click.option("--output", "output_file", default=None,
              type=click.Path(dir_okay=False),
              help="Write the quotient model (.ode).")
@click.option("--report", "report_file", default=None,
              type=click.Path(dir_okay=False))
def validate(model, partition_file, mode, horizon, step, tol, output_file,
             report_file):
    """Build the quotient for a partition and compare trajectories."""
    result = validate_pipeline(model, partition_file, mode=mode,
                               horizon=horizon, step=step, tol=tol,
                               output_path=output_file)
    v = result.validation
    click.echo(("pass" if v.passed else "FAIL")
               + f" (max abs err {v.max_abs_err:.3g}, tol {v.tol:g})")
    for row in v.rows:
        click.echo(f"  {row.comparison}: abs {row.max_abs_err:.3g} "
                   f"rel {row.max_rel_err:.3g}")
    return _emit(result, report_file)


@cli.command()
@click.option("--sizes", default="50,100,200", show_default=True,
              metavar="N1,N2", help="Species counts to generate and time.")
@click.option("--group-size", type=int, default=2, show_default=True)
@click.option("--m", "m_target", type=int, default=None,
              help="Target monomial count per instance.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--backend", "backends", multiple=True,
              type=click.Choice(["syntactic", "smt"]),
              help="Backends to time (repeatable; default: syntactic).")
@_with(_solver_opts)
@click.option("--report", "report_file", default=None,
              type=click.Path(dir_okay=False))
def bench(sizes, group_size, m_target, seed, backends, solver, time_limit,
          dump_dir, report_file):
    """Time the engines on generated planted-symmetry networks."""
    del dump_dir  # accepted for flag uniformity; queries are not dumped
    ns = [int(s) for s in sizes.split(",") if s.strip()]
    result = bench_pipeline(ns, group_size=group_size, m=m_target, seed=seed,
                            backends=tuple(backends) or ("syntactic",),
                            solver=solver, time_limit=time_limit)
    for row in result.report["bench"]:
        parts = [f"{row['name']}: n={row['n']} m={row['m']}"]
        if "syntactic_s" in row:
            parts.append(f"syntactic {row['syntactic_s']}s"
                         + ("" if row["syntactic_matches_planted"]
                            else " MISMATCH"))
        if "smt_s" in row:
            parts.append(f"smt {row['smt_s']}s"
                         + ("" if row.get("smt_matches_planted", True)
                            else " MISMATCH"))
        click.echo("  ".join(parts))
    return _emit(result, report_file)


@cli.command()
@click.option("--n", "n_species", type=int, required=True,
              help="Total species count.")
@click.option("--groups", required=True, metavar="SIZES",
              help='Planted group sizes: "2,2" or "196x50".')
@click.option("--m", "m_target", type=int, default=None,
              help="Target monomial count.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "output_file", required=True,
              type=click.Path(dir_okay=False), help="Network file (.rn).")
@click.option("--partition-out", "partition_file", default=None,
              type=click.Path(dir_okay=False),
              help="Also write the planted partition (.part).")
def gen(n_species, groups, m_target, seed, output_file, partition_file):
    """Generate a reaction network with a known coarsest reduction."""
    from .bench import BenchSpec, generate_bench, planted_partition
    spec = BenchSpec(n=n_species, groups=_parse_groups(groups), m=m_target,
                     seed=seed)
    net = generate_bench(spec)
    with open(output_file, "w") as fh:
        fh.write(print_rn(net))
    click.echo(f"network written to {output_file}")
    if partition_file:
        part = planted_partition(spec)
        with open(partition_file, "w") as fh:
            fh.write(print_partition(part, net.species))
        click.echo(f"planted partition written to {partition_file}")
    return 0


def main(argv=None) -> int:
    """Console entry point with the contract's exit-code mapping."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except DequivError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
