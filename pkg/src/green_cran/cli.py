"""Command line entry point for the experiment harness."""

from __future__ import annotations

import sys

import click

from . import experiments


def _parse_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",")) if text else ()


def _parse_names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",")) if text else ()


@click.command()
@click.argument("experiment",
                type=click.Choice(experiments.EXPERIMENTS))
@click.option("--scenario", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Scenario YAML file (see scenarios/README.md).")
@click.option("--seeds", default="10", show_default=True,
              help="Seed count N (runs 0..N-1) or an explicit "
                   "comma-separated list.")
@click.option("--sinr-db", default="", help="Comma-separated target SINR "
              "sweep in dB; empty uses the scenario file's value.")
@click.option("--algos", default="", help="Comma-separated algorithm list; "
              "empty selects the experiment's full set.")
@click.option("--p", "p_values", default="1.0", show_default=True,
              help="Comma-separated smoothing exponents (1.0 and/or 0.5).")
@click.option("--tol", default=1e-6, show_default=True,
              help="Conic solver tolerance.")
@click.option("--max-iters", default=20000, show_default=True,
              help="Conic solver iteration cap.")
@click.option("--out", "out_dir", default="results", show_default=True,
              type=click.Path(file_okay=False), help="Output directory.")
def main(experiment, scenario, seeds, sinr_db, algos, p_values, tol,
         max_iters, out_dir):
    """Run EXPERIMENT on a scenario and write its CSV outputs.

    Experiments: convergence (objective traces), netpower (network power
    sweep), admission (admitted-user sweep), oracle-audit (bisection
    verified against a linear feasibility scan). The environment variable
    GREEN_CRAN_THREADS caps the worker count (default 1).
    """
    if "," in seeds:
        seed_list = tuple(int(s) for s in seeds.split(","))
    else:
        seed_list = tuple(range(int(seeds)))
    algo_list = _parse_names(algos)
    if not algo_list:
        algo_list = experiments.NETPOWER_ALGOS \
            if experiment == "netpower" else experiments.ADMISSION_ALGOS
    spec = experiments.ExperimentSpec(
        scenario=scenario, experiment=experiment, seeds=seed_list,
        sinr_db=_parse_floats(sinr_db), algos=algo_list,
        p_values=_parse_floats(p_values), out_dir=out_dir,
        tol=tol, max_iters=max_iters)
    status = experiments.run(spec)
    if status:
        click.echo("invariant audit failed; see CSV rows", err=True)
    sys.exit(status)


if __name__ == "__main__":
    main()
