"""
Command-line interface for hodg
"""

import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, Optional

import click

from . import __version__
from .config import ENV_LOG_LEVEL, output_dir, parse_meshes, resolve_config
from .core import StudyRunner
from .errors import HodgError, exit_code_for
from .formatters import format_problem_list, format_report, format_run, format_table, format_trace
from .models import RunManifest, StudyConfig
from .problems import list_problems
from .storage import ResultStore, source_commit
from .suites import SuiteManager

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
FORMATS = click.Choice(["table", "simple", "json"])


def fail(exc: BaseException):
    """Report an error and exit with its code"""
    click.echo(f"❌ {exc}", err=True)
    sys.exit(exit_code_for(exc))


def study_options(fn):
    """Options shared by every command that solves a problem"""
    options = [
        click.option("--problem", "-p", help="ex7.1 ... ex7.5, order:<n>[:odd-plus] or custom"),
        click.option("--k", "-k", type=int, help="Polynomial degree"),
        click.option("--meshes", "-m", help="Mesh ladder, e.g. 10,20,40"),
        click.option("--flux", help="Flux, e.g. alt1 | alt3,lf | theta:0.3,central | pm (2D)"),
        click.option("--tfinal", "t_final", type=float, help="Final time"),
        click.option("--init", help="l2 (default), radau-minus/plus, p1-minus/plus, p2-minus/plus, pi-minus/plus"),
        click.option("--quad-pts", type=int, help="Quadrature points for nonlinear terms"),
        click.option("--nodes", type=int, help="Gauss-Lobatto nodes per SDC step"),
        click.option("--sweeps", type=int, help="SDC correction sweeps (default k+1)"),
        click.option("--sweep-mode", type=click.Choice(["implicit", "explicit"]), help="SDC sweep type"),
        click.option("--dt", type=float, help="Fixed time step"),
        click.option("--dt-factor", type=float, help="dt = dt_factor * h when --dt is not given"),
        click.option("--perturbation", type=float, help="Random mesh perturbation (fraction of h)"),
        click.option("--seed", type=int, help="Seed for mesh perturbation and random data"),
        click.option("--order", type=int, help="Spatial order of a custom problem"),
        click.option("--convention", type=click.Choice(["intro", "odd-plus"]), help="Sign convention"),
        click.option("--exact", help="Exact solution of a custom problem, e.g. 'exp(-t)*sin(x)'"),
        click.option("--b-expr", help="Coefficient b(u) for fourth order, e.g. 'u**2'"),
        click.option("--f-expr", help="Flux f(v) for odd orders, e.g. 'v**3'"),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="key = value config file (default $HODG_CONFIG)"),
        click.option("--out-dir", help="Output directory (default $HODG_OUTPUT_DIR or .)"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def build_config(params: Dict[str, Any]) -> StudyConfig:
    overrides = dict(params)
    config_file = overrides.pop("config_file", None)
    overrides.pop("out_dir", None)
    for flag in ("aux", "check_dt", "reproducible"):
        if not overrides.get(flag):
            overrides.pop(flag, None)
    if overrides.get("meshes"):
        overrides["meshes"] = parse_meshes(overrides["meshes"])
    return resolve_config(overrides, Path(config_file) if config_file else None)


def result_store(config: StudyConfig, out_dir: Optional[str], suffix: str = "") -> ResultStore:
    stem = f"{config.problem.replace(':', '-')}_k{config.k}{suffix}"
    return ResultStore(output_dir(out_dir), stem)


def manifest_for(command: str, config: StudyConfig, started: float) -> RunManifest:
    return RunManifest(command=command, config=config.to_dict(), config_hash=config.config_hash(),
                       version=__version__, commit=source_commit(),
                       wall_time=time.perf_counter() - started)


@click.group(invoke_without_command=True)
@click.option("--version", "-v", is_flag=True, help="Show version")
@click.option("--log-level", envvar=ENV_LOG_LEVEL, default="WARNING",
              type=click.Choice(LOG_LEVELS, case_sensitive=False), help="Logging level")
@click.pass_context
def cli(ctx, version, log_level):
    """hodg - DG solvers for high-order time-dependent PDEs

    Convergence studies, single solves, energy traces and property
    suites for fourth- to seventh-order (and general order) equations in
    1D and the biharmonic equation in 2D.
    """
    logging.basicConfig(level=getattr(logging, log_level.upper()),
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    if version:
        click.echo(f"hodg version {__version__}")
        ctx.exit()

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command()
@study_options
@click.option("--aux", is_flag=True, help="Also tabulate errors of the auxiliary variables")
@click.option("--check-dt", is_flag=True, help="Rerun the finest mesh with dt/2")
@click.option("--reproducible", is_flag=True, help="Serial, deterministic run")
@click.option("--out", "-o", "out_path", help="CSV file for the table")
@click.option("--format", "-f", "fmt", type=FORMATS, default="table", help="Output format")
def study(out_path, fmt, **params):
    """Run a convergence study over a mesh ladder"""
    started = time.perf_counter()
    out_dir = params.get("out_dir")
    try:
        config = build_config(params)
        if out_path:
            config.output = out_path
        table = StudyRunner(config).run_study()
        store = result_store(config, out_dir)
        store.save_table(table, Path(config.output) if config.output else None)
        store.save_manifest(manifest_for("study", config, started))
    except HodgError as e:
        fail(e)

    click.echo(format_table(table, fmt))
    dt_check = table.metadata.get("dt_check")
    if dt_check and fmt != "json":
        click.echo(f"dt/2 check at N={dt_check['n']}: relative change {dt_check['relative_change']:.2%}")


@cli.command()
@study_options
@click.option("--n", "-n", "n_cells", type=int, help="Cells per direction (default: finest of the ladder)")
@click.option("--dump", is_flag=True, help="Write the final u_h (and auxiliaries) as CSV")
@click.option("--aux", is_flag=True, help="Also report errors of the auxiliary variables")
@click.option("--reproducible", is_flag=True, help="Serial, deterministic run")
def run(n_cells, dump, **params):
    """Solve once and report the errors at the final time"""
    started = time.perf_counter()
    out_dir = params.get("out_dir")
    try:
        config = build_config(params)
        n = n_cells or config.meshes[-1]
        runner = StudyRunner(config)
        result = runner.run_single(n)
        if dump:
            store = result_store(config, out_dir, f"_N{n}")
            meta = {"problem": config.problem, "t": runner.t_final, "n": n}
            store.save_field(result.u, "u", meta)
            for name, aux_field in result.aux.items():
                store.save_field(aux_field, name, meta)
            store.save_manifest(manifest_for("run", config, started))
            click.echo(f"💾 Wrote {len(store.written)} files to {store.output_dir}")
    except HodgError as e:
        fail(e)

    click.echo(format_run(result.summary()))


@cli.command()
@study_options
@click.option("--n", "-n", "n_cells", type=int, default=16, show_default=True, help="Cells")
@click.option("--every", type=int, default=1, help="Print every n-th step")
@click.option("--strict", is_flag=True, help="Exit 1 if the energy ever increases")
@click.option("--reproducible", is_flag=True, help="Serial, deterministic run")
@click.option("--format", "-f", "fmt", type=FORMATS, default="table", help="Output format")
def energy(n_cells, every, strict, fmt, **params):
    """Record ||u_h||^2 after every time step"""
    started = time.perf_counter()
    out_dir = params.get("out_dir")
    try:
        config = build_config(params)
        trace = StudyRunner(config).energy_trace(n_cells)
        store = result_store(config, out_dir, f"_N{n_cells}")
        store.save_trace(trace)
        store.save_manifest(manifest_for("energy", config, started))
    except HodgError as e:
        fail(e)

    click.echo(format_trace(trace, fmt, every))
    if strict and not trace.is_monotone():
        click.echo("❌ Energy increased during the run", err=True)
        sys.exit(1)


@cli.command()
@click.option("--suite", "-s", "names", multiple=True, help="Suite name (repeatable; default: all)")
@click.option("--seed", type=int, default=0, show_default=True, help="Random seed")
@click.option("--report", "report_dir", help="Directory for the JSON reports")
@click.option("--verbose", is_flag=True, help="List passing checks too")
@click.option("--format", "-f", "fmt", type=FORMATS, default="table", help="Output format")
def verify(names, seed, report_dir, verbose, fmt):
    """Run property suites; exits 1 if any check fails"""
    manager = SuiteManager()
    names = names or [suite.name for suite in manager.list_suites()]
    passed = True
    try:
        for name in names:
            report = manager.run(name, seed).to_dict()
            if report_dir:
                ResultStore(output_dir(report_dir), f"verify_{name}").save_report(report)
            click.echo(format_report(report, fmt, verbose))
            passed = passed and report["passed"]
    except HodgError as e:
        fail(e)

    if not passed:
        sys.exit(1)


@cli.command()
@click.option("--format", "-f", "fmt", type=FORMATS, default="table", help="Output format")
def problems(fmt):
    """List the registered problems"""
    try:
        click.echo(format_problem_list(list_problems(), fmt))
    except HodgError as e:
        fail(e)


@cli.command()
def suites():
    """List the property suites"""
    for suite in SuiteManager().list_suites():
        click.echo(f"  {suite.name:<18} {suite.description}")


if __name__ == "__main__":
    cli()
