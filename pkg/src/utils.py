import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from time import time
from typing import Any

from dotenv import load_dotenv

LOGGER_NAME = "xccy_pricer"

# Environment variable holding the number of Monte Carlo worker threads
MC_WORKERS_ENV_VAR: str = "XCCY_MC_WORKERS"


class CurveError(ValueError):
    """Raised when a term structure violates its invariants."""


class ModelError(ValueError):
    """Raised on invalid model inputs or a regime mismatch."""


class QuadratureError(ValueError):
    """Raised when an integrand produces a non-finite sample."""


class InputFileError(ValueError):
    """Raised when an input file cannot be parsed or fails validation."""


@dataclass
class RunContext:
    """
    Context dataclass to hold the effective settings of a pricing run.
    Attributes
    ----------
    command : str
        The verb being run (price, validate, inspect, converge).
    instrument : str
        The instrument selector.
    curves_path : Path
        Path of the curves JSON file.
    model_path : Path
        Path of the model JSON file.
    out_path : Path
        Path of the results CSV file.
    overrides : dict[str, Any]
        Command line overrides that beat the model file values.
    effective : dict[str, Any]
        The settings in force after merging overrides and file defaults.
    mc_workers : int
        Number of Monte Carlo worker threads, read from the environment.
    """

    command: str
    instrument: str
    curves_path: Path
    model_path: Path
    out_path: Path
    overrides: dict[str, Any] = field(default_factory=dict)
    effective: dict[str, Any] = field(default_factory=dict)
    mc_workers: int = field(default=1, init=False)

    def __post_init__(self) -> None:
        """
        Load the number of Monte Carlo workers from the environment if available.
        """
        load_dotenv()
        if workers := os.getenv(MC_WORKERS_ENV_VAR):
            self.mc_workers = max(1, int(workers))

    def settings(self) -> dict[str, Any]:
        """
        Return the effective settings as flat `setting.*` diagnostics. The worker
        count is only logged, so the results do not depend on it.
        """
        settings: dict[str, Any] = {
            "setting.command": self.command,
            "setting.instrument": self.instrument,
        }
        settings.update(
            {f"setting.{k}": v for k, v in self.effective.items() if v is not None}
        )
        return settings

    def __repr__(self) -> str:
        return " -- ".join(
            (
                f"Command: {self.command}",
                f"Instrument: {self.instrument}",
                f"Curves Path: {self.curves_path}",
                f"Model Path: {self.model_path}",
                f"Out Path: {self.out_path}",
                f"Overrides: {self.overrides}",
                f"Effective: {self.effective}",
                f"MC Workers: {self.mc_workers}",
            )
        )


def set_logger(log_level: str = "INFO", log_file: Path | None = None) -> None:
    """
    Set up the logger with the specified log level.
    Parameters
    ----------
    log_level : str
        The logging level (e.g., 'DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL').
        Default is 'INFO'.
    log_file : Path | None
        The path to the log file. If None, logs will only be printed to console.
        Default is None.
    """
    # Configure logger
    logging_formatter: logging.Formatter = logging.Formatter(
        "%(asctime)s [%(levelname)s] %(name)s/%(module)s:%(funcName)s@%(lineno)d "
        "-->> %(message)s"
    )
    _logger: logging.Logger = logging.getLogger(LOGGER_NAME)
    _logger.setLevel(log_level)
    # Drop handlers left over from a previous run in the same process
    for handler in list(_logger.handlers):
        _logger.removeHandler(handler)
        handler.close()
    #  Add console handler
    console_handler: logging.StreamHandler = logging.StreamHandler()
    console_handler.setFormatter(logging_formatter)
    _logger.addHandler(console_handler)
    if log_file is not None:
        # Add file handler
        file_handler: logging.FileHandler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging_formatter)
        _logger.addHandler(file_handler)
    _logger.propagate = False


def get_logger() -> logging.Logger:
    """
    Get the configured logger.
    Returns
    -------
    logging.Logger
        The configured logger instance.
    """
    return logging.getLogger(LOGGER_NAME)


def elapsed_time(from_time: float = 0) -> float:
    """
    Calculate the elapsed time since a given starting time.
    Parameters
    ----------
    from_time : float, optional
        The starting time in seconds since the epoch. Default is 0.
    Returns
    -------
    float
        The elapsed time in seconds.
    """
    return time() - from_time


def load_dict_from_json_file(file_path: Path) -> tuple[dict[str, Any], str]:
    """
    Load a dictionary of key-value pairs from a JSON file.
    Parameters
    ----------
    file_path : Path
        Path to the JSON file.
    Returns
    -------
    tuple[dict[str, Any], str]
        Dictionary containing the key-value pairs and the raw file text.
    Raises
    ------
    InputFileError
        If the file does not exist, is empty or is improperly formatted.
    """
    try:
        with file_path.open("r", encoding="utf-8") as f:
            raw: str = f.read()
    except OSError as e:
        raise InputFileError(f"{file_path}: cannot read file ({e})") from e
    try:
        data: Any = json.loads(raw)
    except json.JSONDecodeError as e:
        raise InputFileError(
            f"{file_path}:{e.lineno}: invalid JSON ({e.msg})"
        ) from e
    if not data or not isinstance(data, dict):
        raise InputFileError(f"{file_path}: no data found")
    return data, raw


def key_line(raw: str, key: str) -> int:
    """
    Find the 1-based line number where a JSON key first appears.
    Parameters
    ----------
    raw : str
        The raw JSON text.
    key : str
        The key to look for.
    Returns
    -------
    int
        The line number, or 0 when the key is not present.
    """
    for line_number, line in enumerate(raw.splitlines(), 1):
        if f'"{key}"' in line:
            return line_number
    return 0


def dict_combinations(input_dict: dict) -> list[dict[str, Any]]:
    """
    Generate all combinations of values from a dictionary.
    Parameters
    ----------
    input_dict : dict
        Dictionary containing parameter names and their possible values.
    Returns
    -------
    list of dict
        List of dictionaries, each representing a unique combination of parameters.
    """
    return [
        dict(zip(input_dict.keys(), combo))
        for combo in itertools.product(*input_dict.values())
    ]
