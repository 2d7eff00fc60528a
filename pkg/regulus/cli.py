import functools
import json
import logging
import os
import sys
import typing

import click

import regulus.base
import regulus.errors
import regulus.models
import regulus.utils


if os.getenv("REGULUS_DEBUG"):
    logging_level = logging.DEBUG
else:
    logging_level = logging.WARNING


def _token(value: str) -> int | str:
    value = value.strip()
    try:
        return int(value)
    except ValueError:
        return value


def _split(value: str) -> typing.List[int | str]:
    return [_token(v) for v in value.split(",") if v.strip()]


def run_options(command: typing.Callable) -> typing.Callable:
    """Options shared by every command that runs the pipeline."""

    options = [
        click.option("--seed", type=int, help="Seed of every random choice."),
        click.option("--growth", help="Growth function, e.g. 'exp:2' or 'affine:2,1'."),
        click.option("--oracle", help="Discrepancy oracle: 'exact' or 'heuristic[:R]'."),
        click.option("--cap", type=int, help="Largest product space to enumerate."),
        click.option("--out", help="File path of the JSON report."),
        click.option("--csv", "csv_path", help="File path of the CSV table."),
        click.option(
            "--exact-rational",
            is_flag=True,
            help="Report energies and densities as exact fractions.",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def handle_errors(command: typing.Callable) -> typing.Callable:
    """Report library errors as one JSON line and exit with 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except regulus.errors.RegulusError as ex:
            print(json.dumps({"error": type(ex).__name__, "message": str(ex)}))
            sys.exit(1)

    return wrapper


def make_config(
    settings: typing.Dict[str, typing.Any],
    command: str,
    inputs: typing.List[str],
    seed: int | None = None,
    growth: str | None = None,
    oracle: str | None = None,
    cap: int | None = None,
    out: str | None = None,
    csv_path: str | None = None,
    exact_rational: bool = False,
    randomized: bool = False,
) -> regulus.models.RunConfig:
    logging.basicConfig(format="%(levelname)s:%(message)s", level=logging_level)

    resolved = regulus.utils.resolve_settings(
        settings, seed=seed, growth=growth, oracle=oracle, cap=cap
    )
    return regulus.models.RunConfig(
        command=command,
        inputs=inputs,
        output=out,
        csv=csv_path,
        exact_rational=exact_rational,
        randomized=randomized,
        **resolved,
    )


@click.group()
@click.pass_context
def main(ctx) -> None:
    ctx.obj = regulus.utils.load_toml_app_config()


@main.command(name="validate")
@click.option("--instance", required=True, help="File path to a system or instance file.")
@click.option("--cap", type=int, help="Largest product space to enumerate.")
@click.pass_obj
@handle_errors
def validate(ctx, instance: str, cap: int | None) -> None:
    config = make_config(ctx, "validate", [instance], cap=cap)
    ret_code = regulus.base.cmd_validate(instance, config.cap)
    sys.exit(ret_code)


@main.command(name="gen-random")
@click.option("--system", "system_path", help="File path to a system file.")
@click.option("--sizes", help="Comma separated class sizes, e.g. '4,4,4'.")
@click.option("--labels", help="Comma separated class labels, default 1, 2, ...")
@click.option(
    "--edge", "edges", multiple=True, help="A top edge, e.g. '1,2'. Repeat per edge."
)
@click.option("--density", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, help="Seed of the sampling.")
@click.option("--cap", type=int, help="Largest product space to enumerate.")
@click.option("--out", help="File path of the generated instance.")
@click.pass_obj
@handle_errors
def gen_random(
    ctx,
    system_path: str | None,
    sizes: str | None,
    labels: str | None,
    edges: typing.Tuple[str, ...],
    density: float,
    seed: int | None,
    cap: int | None,
    out: str | None,
) -> None:
    config = make_config(
        ctx, "gen-random", [], seed=seed, cap=cap, out=out, randomized=True
    )

    if system_path:
        instance, _, _ = regulus.base.load_instance(system_path, config.cap)
        description = instance.description
    elif sizes and edges:
        parsed_sizes = [int(n) for n in _split(sizes)]
        parsed_edges = [_split(e) for e in edges]
        description = regulus.models.SystemDescription(
            labels=_split(labels) if labels else list(range(1, len(parsed_sizes) + 1)),
            sizes=parsed_sizes,
            d=len(parsed_edges[0]),
            H_d=parsed_edges,
        )
    else:
        raise click.UsageError("Pass either --system or both --sizes and --edge.")

    ret_code = regulus.base.cmd_gen_random(
        description, density, typing.cast(int, config.seed), config.output, config.cap
    )
    sys.exit(ret_code)


@main.command(name="regularize")
@click.option("--instance", required=True, help="File path to a system or instance file.")
@run_options
@click.pass_obj
@handle_errors
def regularize(ctx, instance: str, **flags) -> None:
    config = make_config(ctx, "regularize", [instance], **flags)
    logging.info(f"Regularizing {instance}")
    sys.exit(regulus.base.cmd_regularize(config))


@main.command(name="count-check")
@click.option("--instance", required=True, help="File path to a system or instance file.")
@run_options
@click.pass_obj
@handle_errors
def count_check(ctx, instance: str, **flags) -> None:
    config = make_config(ctx, "count-check", [instance], **flags)
    sys.exit(regulus.base.cmd_count_check(config))


@main.command(name="remove")
@click.option("--instance", required=True, help="File path to an instance file.")
@click.option("--subgraph", is_flag=True, help="Keep only subsets of the input sets.")
@run_options
@click.pass_obj
@handle_errors
def remove(ctx, instance: str, subgraph: bool, **flags) -> None:
    config = make_config(ctx, "remove", [instance], **flags)
    sys.exit(regulus.base.cmd_remove(config, subgraph))


@main.command(name="triangles")
@click.option("--instance", required=True, help="File path to a tripartite instance.")
@click.option("--subgraph", is_flag=True, help="Keep only subsets of the input graph.")
@run_options
@click.pass_obj
@handle_errors
def triangles(ctx, instance: str, subgraph: bool, **flags) -> None:
    config = make_config(ctx, "triangles", [instance], **flags)
    sys.exit(regulus.base.cmd_triangles(config, subgraph))


@main.command(name="demo-roth")
@click.option("--modulus", "-n", type=int, required=True, help="Odd modulus N.")
@click.option("--set", "difference_set", help="Comma separated residues of S.")
@click.option(
    "--density",
    type=float,
    default=0.5,
    show_default=True,
    help="Density of a random S when --set is not given.",
)
@click.option("--subgraph", is_flag=True, help="Keep only subsets of the input graph.")
@run_options
@click.pass_obj
@handle_errors
def demo_roth(
    ctx,
    modulus: int,
    difference_set: str | None,
    density: float,
    subgraph: bool,
    **flags,
) -> None:
    config = make_config(
        ctx, "demo-roth", [], randomized=difference_set is None, **flags
    )
    members = None
    if difference_set is not None:
        members = [int(s) for s in _split(difference_set)]

    sys.exit(
        regulus.base.cmd_demo_roth(config, modulus, members, density, subgraph)
    )
