import os
from contextlib import (
    contextmanager,
)
from dataclasses import (
    dataclass,
    field,
)
from pathlib import (
    Path,
)
from typing import (
    Any,
    Generator,
    Optional,
)

import click
import typer
from dotenv import (
    load_dotenv,
)

from fracvol import (
    __version__,
)
from fracvol.codec import (
    LOADINGS_HEADER,
    PATHS_HEADER,
    TABLE_HEADER,
    WEIGHTS_HEADER,
    encode_json,
    write_csv_file,
)
from fracvol.config import (
    ConfigError,
    Estimator,
    FreezeMode,
    Model,
    RunConfig,
    load_config_file,
)
from fracvol.dynamics import (
    StockScheme,
    VolKind,
)
from fracvol.experiments import (
    TABLE_ASSUMPTIONS,
    figure_config,
    preset_config,
    run_table,
    sample_paths,
)
from fracvol.fbm import (
    FbmScheme,
)
from fracvol.pricing import (
    estimate,
)
from fracvol.utils.cli import (
    LogLevelOption,
    VersionOption,
    get_envvar_name,
)
from fracvol.utils.logging import (
    LogLevel,
    get_logger,
)
from fracvol.verify import (
    Level,
    run_checks,
)

app = typer.Typer(
    invoke_without_command=True,
    no_args_is_help=True,
)

logger = get_logger()

ENVVAR_SEED = get_envvar_name("seed")

# fields a reduced-scale table run may change
TABLE_OVERRIDES = ("sims", "trials", "steps", "seed", "threads")

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

load_dotenv(".env")
load_dotenv(Path(".local") / ".env")


@dataclass
class Config:
    log_level: LogLevel
    config_file: Path | None = None
    preset: str | None = None
    flags: dict[str, Any] = field(default_factory=dict)


def get_config(ctx: click.Context) -> Config:
    return ctx.obj


@contextmanager
def exit_on_error() -> Generator[None, None, None]:
    """Map library errors to exit statuses, 1 for invalid input and 2 at run time."""
    try:
        yield
    except (click.exceptions.Exit, click.exceptions.Abort, click.ClickException):
        raise
    except ValueError as e:
        logger.error(f"{type(e).__name__}: {e}")
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_VALIDATION) from e
    except (ArithmeticError, RuntimeError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_RUNTIME) from e


def parse_epsilon(value: str | None) -> float | str | None:
    if value is None or value == "auto":
        return value
    try:
        return float(value)
    except ValueError as e:
        raise typer.BadParameter(f"expected a number or 'auto', got '{value}'") from e


def file_and_flag_values(config: Config) -> dict[str, Any]:
    values = load_config_file(config.config_file) if config.config_file else {}
    values = {key.replace("-", "_"): value for key, value in values.items()}
    values.update(config.flags)
    env_seed = os.environ.get(ENVVAR_SEED)
    if "seed" not in values and env_seed:
        try:
            values["seed"] = int(env_seed)
        except ValueError as e:
            raise ConfigError(
                f"{ENVVAR_SEED} must be an integer, got {env_seed!r}"
            ) from e
    return values


def resolve_run_config(config: Config, figure: str | None = None) -> RunConfig:
    """defaults < preset or figure < FRACVOL_SEED < config file < flags"""
    if figure is not None:
        base = figure_config(figure)
    elif config.preset is not None:
        base = preset_config(config.preset)
    else:
        base = RunConfig()
    cfg = RunConfig.from_dict(file_and_flag_values(config), base)
    logger.debug(f"Resolved {cfg!r}")
    return cfg


@app.callback()
def cli_callback(
    ctx: click.Context,
    log_level: str = LogLevelOption(),
    version: bool = VersionOption(__version__),
    config_file: Optional[Path] = typer.Option(
        None,
        "--config",
        exists=True,
        dir_okay=False,
        help="JSON file of RunConfig fields.",
    ),
    preset: Optional[str] = typer.Option(
        None, help="Start from a preset: table1..table4, ou or figure2.1..figure2.4."
    ),
    model: Optional[Model] = typer.Option(None),
    hurst: Optional[float] = typer.Option(None),
    epsilon: Optional[str] = typer.Option(
        None, help="Regularisation, a number or 'auto'."
    ),
    nu: Optional[float] = typer.Option(None),
    theta: Optional[float] = typer.Option(None),
    mu: Optional[float] = typer.Option(None),
    kappa: Optional[float] = typer.Option(None),
    c: Optional[float] = typer.Option(None, "--c"),
    sigma: Optional[VolKind] = typer.Option(None),
    sigma_a: Optional[float] = typer.Option(None),
    sigma_b: Optional[float] = typer.Option(None),
    eta: Optional[float] = typer.Option(None),
    rate: Optional[float] = typer.Option(None),
    rho: Optional[float] = typer.Option(None),
    spot: Optional[float] = typer.Option(None),
    strike: Optional[float] = typer.Option(None),
    horizon: Optional[float] = typer.Option(None),
    steps: Optional[int] = typer.Option(None),
    sims: Optional[int] = typer.Option(None),
    trials: Optional[int] = typer.Option(None),
    seed: Optional[int] = typer.Option(
        None, help=f"Defaults to ${ENVVAR_SEED} when set."
    ),
    estimator: Optional[Estimator] = typer.Option(None),
    threads: Optional[int] = typer.Option(None),
    z0: Optional[float] = typer.Option(None),
    fbm_scheme: Optional[FbmScheme] = typer.Option(None),
    stock_scheme: Optional[StockScheme] = typer.Option(None),
    freeze: Optional[FreezeMode] = typer.Option(None),
) -> None:
    flags = {
        "model": model,
        "hurst": hurst,
        "epsilon": parse_epsilon(epsilon),
        "nu": nu,
        "theta": theta,
        "mu": mu,
        "kappa": kappa,
        "c": c,
        "sigma": sigma,
        "sigma_a": sigma_a,
        "sigma_b": sigma_b,
        "eta": eta,
        "rate": rate,
        "rho": rho,
        "spot": spot,
        "strike": strike,
        "horizon": horizon,
        "steps": steps,
        "sims": sims,
        "trials": trials,
        "seed": seed,
        "estimator": estimator,
        "threads": threads,
        "z0": z0,
        "fbm_scheme": fbm_scheme,
        "stock_scheme": stock_scheme,
        "freeze": freeze,
    }
    ctx.obj = Config(
        log_level=LogLevel(log_level),
        config_file=config_file,
        preset=preset,
        flags={key: value for key, value in flags.items() if value is not None},
    )


@app.command()
def about() -> None:
    typer.echo(f"fracvol CLI version {__version__}")


@app.command()
def paths(
    ctx: click.Context,
    out: Path = typer.Option(..., help="CSV file of the sample paths."),
    figure: Optional[str] = typer.Option(
        None, help="Figure preset: 2.1, 2.2, 2.3 or 2.4."
    ),
) -> None:
    """
    Sample paths of S, Y, Z and W^H, one row per path and grid point.
    The run configuration is written next to the CSV as JSON.
    """
    with exit_on_error():
        cfg = resolve_run_config(get_config(ctx), figure)
        sample = sample_paths(cfg)
        times = cfg.grid.points
        rows = (
            (
                path,
                float(times[i]),
                float(sample.stock.s[path, i]),
                float(sample.zpath.y[path, i]),
                float(sample.zpath.z[path, i]),
                float(sample.bundle.wh[path, i]),
            )
            for path in range(cfg.sims)
            for i in range(cfg.steps + 1)
        )
        count = write_csv_file(out, PATHS_HEADER, rows)
        echo = encode_json(cfg.to_echo()) + "\n"
        out.with_suffix(".json").write_text(echo, encoding="utf-8")
        logger.info(f"Wrote {count} rows of {cfg.sims} paths to {out}")


@app.command()
def price(
    ctx: click.Context,
    out: Optional[Path] = typer.Option(
        None, help="Also write the JSON records to this file."
    ),
) -> None:
    """Monte Carlo price of the call-plus-binary payoff, one record per estimator."""
    with exit_on_error():
        config = get_config(ctx)
        cfg = resolve_run_config(config)
        assumptions = (
            list(TABLE_ASSUMPTIONS) if (config.preset or "").startswith("table") else []
        )
        records = [
            {
                "config_echo": cfg.to_echo(),
                "estimator": result.estimator,
                "mean": result.mean,
                "cv": result.cv,
                "std_err": result.std_err,
                "n_excluded": result.n_excluded,
                "flagged": result.flagged,
                "wall_time": result.wall_time,
                "assumptions": assumptions,
            }
            for result in estimate(cfg)
        ]
        text = encode_json(records)
        typer.echo(text)
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text + "\n", encoding="utf-8")


@app.command()
def table(
    ctx: click.Context,
    name: int = typer.Argument(..., min=1, max=4, help="Table number, 1 to 4."),
    out: Path = typer.Option(..., help="CSV file of the table."),
) -> None:
    """
    Full H x sigma grid of a published table next to the published values.
    Only the sims, trials, steps, seed and threads settings apply.
    """
    with exit_on_error():
        values = file_and_flag_values(get_config(ctx))
        overrides = {key: values[key] for key in TABLE_OVERRIDES if key in values}
        ignored = sorted(set(values) - set(TABLE_OVERRIDES))
        if ignored:
            logger.warning(f"Settings ignored by the table run: {', '.join(ignored)}")
        cells = run_table(name, overrides)
        rows = (
            (cell.sigma, cell.hurst, cell.mean, cell.cv, cell.paper_mean, cell.paper_cv)
            for cell in cells
        )
        write_csv_file(out, TABLE_HEADER, rows)
        for assumption in TABLE_ASSUMPTIONS:
            logger.info(f"Assumed: {assumption}")
        logger.info(f"Wrote table {name} to {out}")


@app.command()
def verify(
    level: Level = typer.Option(
        Level.FAST, help="fast, or full with the Monte Carlo checks."
    ),
) -> None:
    """Run the self-checks; the exit status is 1 when any of them fails."""
    results = run_checks(level)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        typer.echo(f"{status} {result.name}: {result.message} ({result.seconds:.1f}s)")
    failed = sum(not result.passed for result in results)
    typer.echo(f"{len(results) - failed} passed, {failed} failed")
    if failed:
        raise typer.Exit(EXIT_VALIDATION)


@app.command()
def kernel(
    ctx: click.Context,
    out: Path = typer.Option(..., help="CSV file of the Volterra weights."),
    loadings: Optional[Path] = typer.Option(
        None, help="CSV file of the hybrid loadings."
    ),
) -> None:
    """Dump the kernel weights of the resolved run configuration."""
    with exit_on_error():
        cfg = resolve_run_config(get_config(ctx))
        weights = cfg.weights()
        times = cfg.grid.points
        n = cfg.steps
        rows = (
            (j, i, float(times[j]), weights.entry(j, i))
            for j in range(1, n + 1)
            for i in range(1, j + 1)
        )
        count = write_csv_file(out, WEIGHTS_HEADER, rows)
        logger.info(f"Wrote {count} weights to {out}")
        if loadings is not None:
            if not weights.uses_residual:
                logger.warning(f"{weights!r} has no loadings, writing zeros")
            loading_rows = (
                (
                    j,
                    float(times[j]),
                    float(weights.origin[j - 1]),
                    float(weights.diagonal[j - 1]),
                )
                for j in range(1, n + 1)
            )
            write_csv_file(loadings, LOADINGS_HEADER, loading_rows)
            logger.info(f"Wrote loadings to {loadings}")


if __name__ == "__main__":
    app()
