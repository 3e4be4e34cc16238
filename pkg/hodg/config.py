"""
Configuration files and environment defaults

A config file holds one ``key = value`` pair per line; keys are the long
CLI flag names (dashes or underscores), ``#`` starts a comment. Values
are resolved as: problem presets < config file < explicit flags.
"""

import logging
import os
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import ConfigurationError
from .models import StudyConfig
from .problems import preset_for

logger = logging.getLogger(__name__)

ENV_CONFIG = "HODG_CONFIG"
ENV_OUTPUT_DIR = "HODG_OUTPUT_DIR"
ENV_LOG_LEVEL = "HODG_LOG_LEVEL"

ALIASES = {"tfinal": "t_final", "out": "output", "b": "b_expr", "f": "f_expr"}
INT_KEYS = {"k", "nodes", "sweeps", "min_steps", "newton_max_iter", "seed", "quad_pts", "order"}
FLOAT_KEYS = {"t_final", "dt", "dt_factor", "newton_tol", "perturbation"}
BOOL_KEYS = {"aux", "check_dt", "reproducible"}
TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def normalize_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return ALIASES.get(key, key)


def parse_meshes(text: str) -> List[int]:
    """'10,20,40' -> [10, 20, 40]"""
    try:
        return [int(token) for token in text.replace(" ", "").split(",") if token]
    except ValueError:
        raise ConfigurationError(f"Mesh ladder must be comma-separated integers (got {text!r})")


def coerce(key: str, raw: str) -> Any:
    """Convert a text value to the type of the StudyConfig field"""
    value = raw.strip()
    if value.lower() in ("none", "null", ""):
        return None
    try:
        if key == "meshes":
            return parse_meshes(value)
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ConfigurationError(f"Invalid value for {key}: {raw!r}")
    if key in BOOL_KEYS:
        if value.lower() in TRUE_WORDS:
            return True
        if value.lower() in FALSE_WORDS:
            return False
        raise ConfigurationError(f"Invalid boolean for {key}: {raw!r}")
    return value


def read_config_file(path: Path) -> Dict[str, Any]:
    """Parse a key = value file into StudyConfig keyword arguments

    Raises:
        ConfigurationError: For unreadable files, malformed lines or unknown keys
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}")

    known = {f.name for f in fields(StudyConfig)}
    values: Dict[str, Any] = {}
    for number, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigurationError(f"{path}:{number}: expected 'key = value', got {line!r}")
        key, raw = text.split("=", 1)
        key = normalize_key(key)
        if key not in known:
            raise ConfigurationError(f"{path}:{number}: unknown key {key!r}")
        values[key] = coerce(key, raw)
    logger.debug("read %d settings from %s", len(values), path)
    return values


def config_file_from_env() -> Optional[Path]:
    env_path = os.environ.get(ENV_CONFIG)
    return Path(env_path) if env_path else None


def resolve_config(overrides: Optional[Dict[str, Any]] = None,
                   config_file: Optional[Path] = None) -> StudyConfig:
    """Merge presets, the config file and explicit values into a StudyConfig

    Args:
        overrides: Explicit values (None entries are ignored)
        config_file: Path of a key = value file (defaults to $HODG_CONFIG)
    """
    explicit = {key: value for key, value in (overrides or {}).items() if value is not None}
    config_file = config_file or config_file_from_env()
    from_file = read_config_file(config_file) if config_file else {}

    merged = {**from_file, **explicit}
    problem_id = merged.get("problem", StudyConfig.problem)
    preset = preset_for(problem_id, merged.get("k"))
    settings = {**preset, **merged, "problem": problem_id}
    return StudyConfig.from_dict(settings).validate()


def output_dir(explicit: Optional[str] = None) -> Path:
    """Explicit directory, else $HODG_OUTPUT_DIR, else the working directory"""
    if explicit:
        return Path(explicit)
    env_path = os.environ.get(ENV_OUTPUT_DIR)
    return Path(env_path) if env_path else Path.cwd()
