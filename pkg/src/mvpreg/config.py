# ABOUTME: Configuration management for mvpreg using pydantic-settings.
# ABOUTME: Layers defaults, environment variables, a key=value file and CLI flags.

import hashlib
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from dotenv import dotenv_values
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from mvpreg.errors import ConfigError

# Settings that change where or how loudly results are written, not the results.
_NON_SEMANTIC_FIELDS = {"out", "log_level", "workers", "config"}


class ExperimentConfig(BaseSettings):
    """Settings shared by every mvpreg subcommand.

    Precedence, lowest first: field defaults, ``MVPREG_*`` environment
    variables, the optional config file, command-line flags.
    """

    # shared
    seed: int = 0
    restarts: int = Field(default=10, ge=1)
    max_iters: int = Field(default=200, ge=1)
    grad_tol: float = Field(default=1e-6, gt=0)
    kernel: Literal["se", "seard"] = "seard"
    model: Literal["mvgp", "mvtp", "gp", "tp"] = "mvtp"
    families: str = "mvgp,gp,mvtp,tp"
    workers: int = Field(default=1, ge=1)
    out: str = "results"
    log_level: str = "INFO"
    config: str | None = None

    # simulate
    repetitions: int = Field(default=100, ge=1)
    noise: Literal["mgp", "mtp", "both"] = "both"
    bands: bool = False
    retry_budget: int = Field(default=3, ge=0)

    # fit / predict / crossval
    train: str | None = None
    test: str | None = None
    data: str | None = None
    inputs: str = ""
    outputs: str = ""
    manifest: str | None = None
    model_file: str = "model.txt"
    folds: int = Field(default=9, ge=2)
    drop_incomplete: bool = False

    # backtest
    stocks: str = ""
    indices: str = ""
    train_len: int = Field(default=303, ge=2)
    horizon: int = Field(default=10, ge=1)
    windows: int = Field(default=20, ge=1)
    fee: float = Field(default=0.00025, ge=0, lt=1)
    initial: float = Field(default=100.0, gt=0)
    standardize: bool = True

    model_config = SettingsConfigDict(env_prefix="MVPREG_", extra="forbid")

    @property
    def input_columns(self) -> list[str]:
        """Input column names parsed from the comma-separated ``inputs`` setting."""
        return _split_list(self.inputs)

    @property
    def output_columns(self) -> list[str]:
        """Output column names parsed from the comma-separated ``outputs`` setting."""
        return _split_list(self.outputs)

    @property
    def family_list(self) -> list[str]:
        """Model families compared by simulate, crossval and backtest."""
        families = _split_list(self.families)
        unknown = [f for f in families if f not in ("mvgp", "mvtp", "gp", "tp")]
        if unknown or not families:
            raise ConfigError(f"Unknown model families {unknown} in '{self.families}'")
        return families

    @property
    def stock_paths(self) -> list[str]:
        """Stock CSV paths parsed from the comma-separated ``stocks`` setting."""
        return _split_list(self.stocks)

    @property
    def index_paths(self) -> list[str]:
        """Index CSV paths parsed from the comma-separated ``indices`` setting."""
        return _split_list(self.indices)

    def config_hash(self) -> str:
        """Return the SHA-256 hex digest of the settings that affect results.

        Returns:
            64-character hex digest, stable across output directories and worker counts.
        """
        payload = self.model_dump_json(exclude=_NON_SEMANTIC_FIELDS)
        return hashlib.sha256(payload.encode()).hexdigest()


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def read_config_file(path: str | Path) -> dict[str, str]:
    """Read a flat ``key = value`` config file.

    Args:
        path: Path to the file. Blank lines and ``#`` comments are ignored.

    Returns:
        Mapping of lower-cased keys to raw string values.

    Raises:
        ConfigError: If the file does not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return {key.strip().lower(): value for key, value in values.items() if value is not None}


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional file plus flag overrides.

    Args:
        path: Optional flat key=value config file.
        overrides: Values from command-line flags; ``None`` entries are skipped.

    Returns:
        Validated configuration.

    Raises:
        ConfigError: If a key is unknown or a value fails validation.
    """
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


@lru_cache
def get_settings() -> ExperimentConfig:
    """Return cached environment-only ExperimentConfig instance (singleton pattern)."""
    return ExperimentConfig()
