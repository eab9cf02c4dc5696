import os
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Tuple

from dotenv import dotenv_values

from lib.decomposition import LARGEST_GAP, REDUCE_POLICIES
from lib.errors import ConfigError
from lib.link_simulator import DEFAULT_FIT_POINTS, DEFAULT_SNR_GRID_DB, SimConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "DOFCSIT_"
FIELDS = (
    "profile",
    "out",
    "owner",
    "reduce_policy",
    "snr_db",
    "trials",
    "seed",
    "fit_points",
    "workers",
    "log_level",
)
DEFAULTS = {
    "profile": None,
    "out": "./out",
    "owner": 1,
    "reduce_policy": LARGEST_GAP,
    "snr_db": DEFAULT_SNR_GRID_DB,
    "trials": 2000,
    "seed": 2024,
    "fit_points": DEFAULT_FIT_POINTS,
    "workers": 1,
    "log_level": "INFO",
}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Settings:
    profile: Optional[str]
    out: str
    owner: int
    reduce_policy: str
    snr_db: Tuple[float, ...]
    trials: int
    seed: int
    fit_points: int
    workers: int
    log_level: str

    def sim_config(self) -> SimConfig:
        return SimConfig(
            snr_grid_db=self.snr_db,
            trials=self.trials,
            seed=self.seed,
            fit_points=self.fit_points,
            workers=self.workers,
        )


def parse_snr_list(value) -> Tuple[float, ...]:
    if isinstance(value, (tuple, list)):
        items = list(value)
    else:
        items = [x for x in str(value).replace(" ", "").split(",") if x]
    try:
        grid = tuple(float(x) for x in items)
    except ValueError:
        raise ConfigError(f"snr_db must be a comma-separated list of numbers, got {value!r}")
    if not grid:
        raise ConfigError("snr_db is empty")
    return grid


def _integer(name, value, minimum):
    try:
        number = int(str(value).strip())
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if number < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {number}")
    return number


def _coerce(name, value):
    if name in ("profile", "out"):
        return str(value)
    if name == "owner":
        owner = _integer(name, value, 1)
        if owner not in (1, 2):
            raise ConfigError(f"owner must be 1 or 2, got {owner}")
        return owner
    if name == "reduce_policy":
        policy = str(value).strip()
        if policy not in REDUCE_POLICIES:
            raise ConfigError(f"reduce_policy must be one of {REDUCE_POLICIES}, got {policy!r}")
        return policy
    if name == "snr_db":
        return parse_snr_list(value)
    if name in ("trials", "workers"):
        return _integer(name, value, 1)
    if name == "fit_points":
        return _integer(name, value, 2)
    if name == "seed":
        return _integer(name, value, 0)
    if name == "log_level":
        level = str(value).strip().upper()
        if level not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {LOG_LEVELS}, got {value!r}")
        return level
    raise ConfigError(f"unknown setting {name!r}")


def _read_config_file(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file '{path}' not found")
    values = {}
    for key, value in dotenv_values(path).items():
        name = key.lower()
        if name.startswith(ENV_PREFIX.lower()):
            name = name[len(ENV_PREFIX):]
        if name not in FIELDS:
            logger.warning(f"⚠️ Ignoring unknown key '{key}' in {path}")
            continue
        if value is not None and value != "":
            values[name] = value
    return values


def load_settings(
    cli: Optional[Mapping[str, Any]] = None,
    config_path: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> Settings:
    """
    Merges the configuration layers, highest first:
    command-line values (None = not given), the --config file, DOFCSIT_* env, defaults.
    """
    cli = cli or {}
    environ = os.environ if environ is None else environ
    from_file = _read_config_file(config_path) if config_path else {}

    merged = {}
    for name in FIELDS:
        env_value = environ.get(f"{ENV_PREFIX}{name.upper()}")
        if cli.get(name) is not None:
            raw = cli[name]
        elif name in from_file:
            raw = from_file[name]
        elif env_value:
            raw = env_value
        else:
            merged[name] = DEFAULTS[name]
            continue
        merged[name] = _coerce(name, raw)

    return Settings(**merged)
