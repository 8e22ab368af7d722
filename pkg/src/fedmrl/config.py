"""Flat key=value configuration files with typed validation and overrides.

The file format is one ``key = value`` pair per line, ``#`` comments, and
dotted keys for the nested sections (``partition.eta = 1.0``).  Overrides
passed by the CLI beat file values, which beat the built-in defaults.
Unknown keys and constraint violations are rejected with the offending key
path in the message.
"""

from __future__ import annotations

from dataclasses import fields

from .errors import ConfigurationError, FedmrlError
from .orchestrator import (
    ALGORITHMS,
    DataConfig,
    ExperimentConfig,
    PartitionConfig,
    SomConfig,
)
from .qmix_controller import RlConfig


def _parse_int(key, raw):
    try:
        return int(str(raw).strip())
    except ValueError:
        raise ConfigurationError(f"{key} must be an integer, got {raw!r}") from None


def _parse_float(key, raw):
    try:
        return float(str(raw).strip())
    except ValueError:
        raise ConfigurationError(f"{key} must be a number, got {raw!r}") from None


def _parse_str(key, raw):
    return str(raw).strip()


def _parse_int_tuple(key, raw):
    if isinstance(raw, (tuple, list)):
        return tuple(int(v) for v in raw)
    parts = [p.strip() for p in str(raw).split(",") if p.strip()]
    if not parts:
        raise ConfigurationError(f"{key} must list at least one integer")
    return tuple(_parse_int(key, p) for p in parts)


# key -> (section attribute path, parser)
_KEY_SPECS = {
    "algo": ("algo", _parse_str),
    "clients": ("clients", _parse_int),
    "rounds": ("rounds", _parse_int),
    "hidden": ("hidden", _parse_int_tuple),
    "activation": ("activation", _parse_str),
    "lr": ("lr", _parse_float),
    "batch_size": ("batch_size", _parse_int),
    "local_epochs": ("local_epochs", _parse_int),
    "mu": ("mu", _parse_float),
    "lambda_fair": ("lambda_fair", _parse_float),
    "seed": ("seed", _parse_int),
    "eval_fraction": ("eval_fraction", _parse_float),
    "data.source": ("data.source", _parse_str),
    "data.classes": ("data.classes", _parse_int),
    "data.per_class": ("data.per_class", _parse_int),
    "data.dim": ("data.dim", _parse_int),
    "data.separation": ("data.separation", _parse_float),
    "data.csv_path": ("data.csv_path", _parse_str),
    "partition.eta": ("partition.eta", _parse_float),
    "partition.shards_per_class": ("partition.shards_per_class", _parse_int),
    "rl.gamma": ("rl.gamma", _parse_float),
    "rl.zeta": ("rl.zeta", _parse_float),
    "rl.epsilon_start": ("rl.epsilon_start", _parse_float),
    "rl.epsilon_end": ("rl.epsilon_end", _parse_float),
    "rl.epsilon_decay_rounds": ("rl.epsilon_decay_rounds", _parse_int),
    "rl.replay_capacity": ("rl.replay_capacity", _parse_int),
    "rl.batch_size": ("rl.batch_size", _parse_int),
    "rl.target_sync": ("rl.target_sync", _parse_int),
    "rl.lr": ("rl.lr", _parse_float),
    "som.feature_dim": ("som.feature_dim", _parse_int),
    "som.rows": ("som.rows", _parse_int),
    "som.cols": ("som.cols", _parse_int),
    "som.sigma0": ("som.sigma0", _parse_float),
    "som.lr0": ("som.lr0", _parse_float),
    "som.decay_horizon": ("som.decay_horizon", _parse_int),
}


def read_config_file(path) -> dict[str, str]:
    """Raw key -> value strings from a config file."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{line_no}: expected 'key = value', got {raw_line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated ExperimentConfig from a file and/or overrides."""
    raw: dict = {}
    if path is not None:
        raw.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    parsed: dict[str, dict] = {"": {}, "data": {}, "partition": {}, "rl": {}, "som": {}}
    for key, value in raw.items():
        if key not in _KEY_SPECS:
            raise ConfigurationError(f"unknown config key {key!r}")
        target, parser = _KEY_SPECS[key]
        section, _, attr = target.rpartition(".")
        parsed[section][attr] = parser(key, value)

    if "decay_horizon" in parsed["som"] and parsed["som"]["decay_horizon"] <= 0:
        parsed["som"]["decay_horizon"] = None

    try:
        return ExperimentConfig(
            data=DataConfig(**parsed["data"]),
            partition=PartitionConfig(**parsed["partition"]),
            rl=RlConfig(**parsed["rl"]),
            som=SomConfig(**parsed["som"]),
            **parsed[""],
        )
    except FedmrlError:
        raise
    except TypeError as err:
        raise ConfigurationError(str(err)) from None


def config_to_dict(cfg: ExperimentConfig) -> dict[str, object]:
    """Flatten a config back to the file format's key space."""
    flat: dict[str, object] = {}
    sections = {"": cfg, "data": cfg.data, "partition": cfg.partition, "rl": cfg.rl, "som": cfg.som}
    for key, (target, _) in _KEY_SPECS.items():
        section, _, attr = target.rpartition(".")
        value = getattr(sections[section], attr)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        flat[key] = value
    return flat


def write_config(cfg: ExperimentConfig, path) -> None:
    """Emit a config file that `parse_config` reads back identically."""
    flat = config_to_dict(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(flat):
            fh.write(f"{key} = {flat[key]}\n")


def validate_algos(names) -> list[str]:
    algos = [n.strip() for n in names if n.strip()]
    for name in algos:
        if name not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
    if not algos:
        raise ConfigurationError("no algorithms given")
    return algos
