import os
import sys
import logging

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
# scipy/numpy numerical warnings arrive through the warnings module
WARNINGS_LOGGER = "py.warnings"


def _console_handler(logger: logging.Logger) -> logging.Handler:
    for handler in logger.handlers:
        if type(handler) is logging.StreamHandler:
            return handler
    raise LookupError(f"logger {logger.name} has no console handler")


def setup_logger(
    name: str, log_dir: str, level: int = logging.INFO, capture_warnings: bool = False
) -> logging.Logger:
    """
    Configure the package logger for a command run.

    Module loggers (``rfso.core.analysis`` and so on) propagate here, so
    configuring ``"rfso"`` covers the library. The console handler writes to
    stderr at ``level``; the file ``<log_dir>/<name>.log`` keeps at least INFO
    so a quiet run still leaves the sweep and validation trail on disk.
    With ``capture_warnings`` the quadrature and overflow warnings raised by
    scipy/numpy are routed into the same handlers.

    Calling again with the same name keeps the existing handlers and only
    moves the console to the new level.

    Args:
        name: The name of the logger.
        log_dir: Directory where log files will be stored.
        level: Console logging level.
        capture_warnings: Also log Python warnings through these handlers.

    Returns:
        logging.Logger: A configured logger instance.
    """
    os.makedirs(log_dir, exist_ok=True)
    file_level = min(level, logging.INFO)

    logger = logging.getLogger(name)
    logger.setLevel(file_level)

    if logger.handlers:
        _console_handler(logger).setLevel(level)
        return logger

    file_handler = logging.FileHandler(os.path.join(log_dir, f"{name}.log"), encoding="utf-8")
    file_handler.setLevel(file_level)

    # stdout is reserved for command summaries
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)

    formatter = logging.Formatter(LOG_FORMAT)
    for handler in (file_handler, console_handler):
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    if capture_warnings:
        _route_warnings(file_handler, console_handler)

    return logger


def _route_warnings(*handlers: logging.Handler) -> None:
    logging.captureWarnings(True)
    warnings_logger = logging.getLogger(WARNINGS_LOGGER)
    warnings_logger.propagate = False
    for handler in handlers:
        if handler not in warnings_logger.handlers:
            warnings_logger.addHandler(handler)
