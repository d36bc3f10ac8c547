"""Command-line front end: solve and evaluate stored instances, generate
synthetic ones, run the meal optimizer, and launch the HTTP service.

Exit codes: 0 ok, 2 input error, 3 capability error, 4 backend/provider
error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import evaluate, formats, generate
from .config import (
    AppConfig,
    BackendConfig,
    backend_factory,
    build_backend,
    build_provider,
    load_config,
)
from .knapsack import EmptyInstance, KnapsackConfig, plan_meal
from .knapsack import InstanceTooLarge as MealTooLarge
from .llm import LlmError
from .model import InstanceError
from .opsolver import METHODS, InstanceTooLarge, SolverConfig, solve
from .providers import ApiUnavailable
from .session import SessionEngine, SessionStore

EXIT_INPUT = 2
EXIT_CAPABILITY = 3
EXIT_BACKEND = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file")
@click.option("--provider", "provider_mode",
              type=click.Choice(["offline", "live"]), default=None,
              help="override provider mode")
@click.option("--mock-llm", "mock_fixtures", default=None,
              help="mock LLM fixture directory ('builtin' for the bundled set)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def main(ctx, config_path, provider_mode, mock_fixtures, seed):
    """Preference-driven trip and meal planning with exact solvers."""
    try:
        config = load_config(config_path)
    except (OSError, ValueError) as exc:
        _fail(EXIT_INPUT, f"cannot load config: {exc}")
    if provider_mode:
        config.provider.mode = provider_mode
    if mock_fixtures:
        fixtures = None if mock_fixtures == "builtin" else mock_fixtures
        config.backends = [BackendConfig(id="mock-1", kind="mock", fixtures=fixtures)]
    ctx.obj = {"config": config, "seed": seed}


@main.command("solve")
@click.argument("instance_file", type=click.Path())
@click.option("--method", type=click.Choice(list(METHODS)), default="subset_dp",
              show_default=True)
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="write the itinerary JSON here")
@click.option("--plot", "plot_out", type=click.Path(), default=None,
              help="render the route figure here")
@click.pass_context
def cmd_solve(ctx, instance_file, method, json_out, plot_out):
    """Solve one instance file and print the ordered plan."""
    try:
        instance = formats.load_op_instance(instance_file)
    except (OSError, formats.FormatError) as exc:
        _fail(EXIT_INPUT, str(exc))
    try:
        itinerary = solve(instance, SolverConfig(method=method))
    except InstanceTooLarge as exc:
        _fail(EXIT_CAPABILITY, str(exc))
    except InstanceError as exc:
        _fail(EXIT_INPUT, str(exc))
    from .report import itinerary_text, route_figure

    doc = formats.itinerary_to_dict(itinerary)
    click.echo(itinerary_text(formats.op_instance_to_dict(instance), doc))
    if json_out:
        formats.write_json(json_out, doc)
        click.echo(f"itinerary JSON written to {json_out}")
    if plot_out:
        route_figure(instance, itinerary, plot_out)
        click.echo(f"route figure written to {plot_out}")


@main.command("eval")
@click.argument("instances_dir", type=click.Path())
@click.option("--solvers", default="subset_dp", show_default=True,
              help="comma-separated: subset_dp,lazy_dfj,brute_force,llm_op_baseline")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="write metrics.csv, metrics.png, and per-run itineraries here")
@click.pass_context
def cmd_eval(ctx, instances_dir, solvers, out_dir):
    """Evaluate solvers over a directory of instance files."""
    solver_names = [s.strip() for s in solvers.split(",") if s.strip()]
    backend = None
    if evaluate.BASELINE_SOLVER in solver_names:
        backend = build_backend(ctx.obj["config"].backends[0])
    try:
        report = evaluate.eval_directory(
            instances_dir, solver_names, backend=backend, out_dir=out_dir
        )
    except FileNotFoundError as exc:
        _fail(EXIT_INPUT, str(exc))
    except InstanceTooLarge as exc:
        _fail(EXIT_CAPABILITY, str(exc))
    except (LlmError, ApiUnavailable) as exc:
        _fail(EXIT_BACKEND, str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    for name, why in report.skipped.items():
        click.echo(f"skipped {name}: {why}", err=True)
    click.echo(evaluate.pretty_table(report))
    if out_dir:
        from .report import metrics_figure

        metrics_figure(report, Path(out_dir) / "metrics.png")
        click.echo(f"report written to {out_dir}")


@main.command("gen")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--n-spots", type=int, default=6, show_default=True)
@click.option("--budget-policy", type=float, default=0.6, show_default=True,
              help="budget as a fraction of total stay + nearest-neighbour tour time")
@click.pass_context
def cmd_gen(ctx, out_dir, count, n_spots, budget_policy):
    """Generate deterministic synthetic instances (seeded by --seed)."""
    if n_spots < 1:
        _fail(EXIT_INPUT, "n-spots must be >= 1")
    if count < 1:
        _fail(EXIT_INPUT, "count must be >= 1")
    paths = generate.write_instances(
        out_dir, ctx.obj["seed"], count, n_spots, budget_policy
    )
    click.echo(f"wrote {len(paths)} instance(s) to {out_dir}")


@main.command("knapsack")
@click.argument("meal_file", type=click.Path())
@click.option("--json", "json_out", type=click.Path(), default=None)
@click.option("--granularity", type=int, default=1, show_default=True)
def cmd_knapsack(meal_file, json_out, granularity):
    """Optimize a meal instance file."""
    try:
        instance = formats.load_meal_instance(meal_file)
    except (OSError, formats.FormatError) as exc:
        _fail(EXIT_INPUT, str(exc))
    try:
        plan = plan_meal(instance, KnapsackConfig(calorie_granularity=granularity))
    except EmptyInstance as exc:
        _fail(EXIT_INPUT, str(exc))
    except MealTooLarge as exc:
        _fail(EXIT_CAPABILITY, str(exc))
    doc = formats.meal_plan_to_dict(plan)
    if plan.scale_factor < 1.0:
        click.echo(
            f"must-have calories exceed the limit: scaled quantities by "
            f"{plan.scale_factor:.4f}, no optional ingredients"
        )
    else:
        picked = ", ".join(sorted(plan.selected_optionals)) or "(none)"
        click.echo(f"optional ingredients: {picked}")
    click.echo(
        f"total {plan.total_calories:g} kcal of {instance.calorie_limit:g} kcal "
        f"limit, priority {plan.total_priority:g}"
    )
    if json_out:
        formats.write_json(json_out, doc)
        click.echo(f"plan JSON written to {json_out}")


@main.command("serve")
@click.option("--host", default=None, help="override the configured listen host")
@click.option("--port", type=int, default=None, help="override the configured port")
@click.pass_context
def cmd_serve(ctx, host, port):
    """Launch the session service."""
    import uvicorn

    from .service import create_app

    config: AppConfig = ctx.obj["config"]
    cfg_host, _, cfg_port = config.listen.partition(":")
    app = create_app(config)
    uvicorn.run(
        app,
        host=host or cfg_host or "127.0.0.1",
        port=port or int(cfg_port or 8734),
    )


def make_engine(config: AppConfig) -> SessionEngine:
    """Engine wired from config; used by scripts and tests."""
    return SessionEngine(
        store=SessionStore(config.store_path),
        provider=build_provider(config.provider),
        backend_factory=backend_factory(config),
    )


if __name__ == "__main__":
    main()
