from typing import (
    Any,
    List,
    Optional,
)

import typer

from fracvol.utils.logging import (
    LogLevel,
    init_logging,
)

# Only prefixed environment variables are read, other tools keep their own settings
ENVVAR_PREFIX = "FRACVOL"

ROOT_LOGGER = "fracvol"


def VersionOption(  # noqa: N802
    version: str,
) -> Any:  # noqa: ANN401 Any disallowed
    """
    Print the package version and exit.
    """

    def _handle_option(value: bool) -> bool:
        if value:
            typer.echo(version)
            raise typer.Exit()
        return value

    return typer.Option(
        False,
        "--version",
        callback=_handle_option,
        is_eager=True,
        help="Show the version and exit.",
    )


def LogLevelOption(  # noqa: N802
    *,
    envvar_scope: Optional[str] = None,
    use_global: bool = True,
) -> Any:  # noqa: ANN401 Any disallowed
    """
    Set the log level of the fracvol root logger and initialise logging.
    Typed as 'str' on purpose: an Enum-typed option loses its default when the
    envvar is unset (https://github.com/tiangolo/typer/issues/223).
    """
    choices = ", ".join(LogLevel.__members__.keys())

    def _handle_option(log_level: Optional[str]) -> str:
        log_level = (log_level or LogLevel.INFO.value).upper()
        if log_level not in LogLevel.__members__.keys():
            raise typer.BadParameter(
                f"invalid choice {log_level} (choose from {choices})"
            )
        init_logging(LogLevel(log_level), ROOT_LOGGER)
        return log_level

    return typer.Option(
        None,
        envvar=get_envvar_names("LOG_LEVEL", envvar_scope, use_global),
        callback=_handle_option,
        help=f"Logging level to use (choose from {choices})",
    )


def get_envvar_name(setting_name: str, envvar_scope: Optional[str] = None) -> str:
    """
    Normalized environment variable name for a setting, e.g. "seed" -> FRACVOL_SEED.
    A scope inserts one more component: ("seed", "table") -> FRACVOL_TABLE_SEED.
    """
    result = f"{ENVVAR_PREFIX}_"
    if envvar_scope is not None:
        result = f'{result}{envvar_scope.replace(" ", "_").replace("-", "_").upper()}_'
    return f'{result}{setting_name.replace(" ", "_").replace("-", "_").upper()}'


def get_envvar_names(
    setting_name: str,
    envvar_scope: Optional[str] = None,
    use_global: bool = True,
) -> List[str]:
    """
    Environment variables read for a setting, the scoped one first.
    """
    names = [get_envvar_name(setting_name)] if use_global else []
    if envvar_scope is not None:
        names = [get_envvar_name(setting_name, envvar_scope), *names]
    return names
