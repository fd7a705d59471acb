import os
import time
from contextlib import (
    contextmanager,
)
from enum import (
    Enum,
)

# Ignoring type errors here because our logging.py shadows std logging
from logging import Formatter as BaseFormatter  # type: ignore
from logging import Logger  # type: ignore
from logging import LogRecord  # type: ignore
from logging import StreamHandler  # type: ignore
from logging import getLogger  # type: ignore # noqa: N813
from pathlib import (
    Path,
)
from typing import (
    Generator,
    Optional,
    Union,
)

import colorama
from colorama import (
    Fore,
    Style,
)


def _find_project_root() -> Path:
    current = Path(__file__)
    while current.name != "src":
        current = current.parent
    return current.parent


PROJECT_ROOT = _find_project_root()


class LogLevel(str, Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


LEVEL_COLORS = {
    LogLevel.DEBUG.value: Fore.CYAN,
    LogLevel.INFO.value: Fore.GREEN,
    LogLevel.WARNING.value: Fore.YELLOW,
    LogLevel.ERROR.value: Fore.RED,
}

colorama.init()


def set_level(level: LogLevel, *loggers: Union[str, Logger]) -> None:
    import logging

    numeric_level = getattr(logging, level.value)
    for logger in loggers:
        if isinstance(logger, str):
            logger = get_logger(logger)
        logger.setLevel(numeric_level)


class Formatter(BaseFormatter):
    def format(self, record: LogRecord) -> str:  # noqa: A003
        """
        One line per record: time, level initial, message, then the logger name,
        thread, process and a "./relative/path:lineno" location that editors can open.
        """
        try:
            location = (
                f"{os.curdir}{os.sep}{Path(record.pathname).relative_to(PROJECT_ROOT)}"
            )
        except ValueError:  # pragma: no cover
            location = record.pathname
        record.asctime = self.formatTime(record, self.datefmt)
        message = super().format(record)
        color = LEVEL_COLORS.get(record.levelname, "")
        return (
            f"{color}{record.asctime} {record.levelname[0]}{Fore.RESET} {message} "
            f"{Style.DIM}({record.name} {record.threadName} {record.processName} "
            f"{location}:{record.lineno}){Style.RESET_ALL}"
        )


STREAM_HANDLER = StreamHandler()
STREAM_HANDLER.setFormatter(Formatter())


def init_logging(
    level: LogLevel,
    *root_loggers: Union[str, Logger],
) -> None:
    if len(root_loggers) == 0:
        raise ValueError("Specify at least one root logger to initialize")

    for root_logger in root_loggers:
        if isinstance(root_logger, str):
            root_logger = get_logger(root_logger)

        root_logger.removeHandler(STREAM_HANDLER)
        root_logger.addHandler(STREAM_HANDLER)
        set_level(level, root_logger)

        root_logger.debug(
            f"Logging initialized with level {level.value} for {root_logger.name}",
        )


def get_logger(name: Optional[str] = None) -> Logger:
    if name is not None:
        return getLogger(name)

    import inspect

    frame = inspect.stack()[1]
    module = inspect.getmodule(frame[0])
    if module is None:
        raise RuntimeError("Unable to get module of caller")  # pragma: no cover
    if module.__name__ == "__main__":
        return getLogger(f"{module.__package__}.__main__")  # pragma: no cover
    return getLogger(module.__name__)


@contextmanager
def log_duration(logger: Logger, what: str) -> Generator[None, None, None]:
    """Log at DEBUG level how long the enclosed block took."""
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.debug(f"{what} took {time.perf_counter() - start:.3f}s")
