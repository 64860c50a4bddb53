"""Strict flat key-value configuration with sections.

Format: an optional leading ``schema = 1`` line, then ``[section]``
headers with ``key = value`` lines; ``#`` starts a comment. Unknown
sections or keys are rejected, as are duplicate keys. The same schema
backs config files, inline target specs (``gaussian:d=2,kappa=4``) and
``--set section.key=value`` overrides.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .linalg import load_spd_text
from .targets import (
    Target,
    make_gaussian_target,
    make_gaussian_target_from_kappa,
    make_logcosh_target,
)

SCHEMA_VERSION = 1


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text}")


# section -> key -> (caster, default)
SCHEMA = {
    "target": {
        "kind": (str, "gaussian"),
        "d": (int, 1),
        "kappa": (float, 1.0),
        "m": (float, 1.0),
        "covariance_file": (str, ""),
        "mean": (_floats, None),
    },
    "plan": {
        "mode": (str, "unpre"),
        "eps": (float, 0.3),
        "n": (int, 10),
        "delta": (float, 0.25),
        "delta_rel": (float, 0.5),
        "c": (float, 1.0),
        "d_bound": (float, 0.0),
    },
    "run": {
        "seed": (int, 0),
        "threads": (int, 0),
        "out": (str, ""),
    },
    "verify": {
        "mc_draws": (int, 20000),
        "replications": (int, 1),
        "scale_burn": (float, 1.0),
        "scale_thin": (float, 1.0),
    },
    "experiment": {
        "name": (str, "experiment"),
        "repetitions": (int, 200),
        "n_grid": (_ints, None),
    },
}


def default_config() -> dict:
    return {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }


def _assign(cfg: dict, section: str, key: str, raw: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"unknown config section [{section}]")
    key = key.strip().lower()
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key '{key}' in section [{section}]")
    caster, _ = SCHEMA[section][key]
    try:
        cfg[section][key] = caster(raw.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from exc


def parse_config_text(text: str, cfg: dict | None = None) -> dict:
    """Parse config text into a validated nested dict."""
    cfg = cfg if cfg is not None else default_config()
    section = None
    seen: set[tuple[str, str]] = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if section is None:
            if key == "schema":
                if int(value) != SCHEMA_VERSION:
                    raise ConfigError(
                        f"unsupported schema version {value.strip()}; this build reads "
                        f"schema {SCHEMA_VERSION}"
                    )
                continue
            raise ConfigError(f"line {lineno}: key outside any section: {key!r}")
        if (section, key) in seen:
            raise ConfigError(f"line {lineno}: duplicate key {section}.{key}")
        seen.add((section, key))
        _assign(cfg, section, key, value)
    return cfg


def load_config(path, cfg: dict | None = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, cfg)


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` override strings in order."""
    for item in overrides:
        head, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        section, dot, key = head.strip().partition(".")
        if not dot:
            raise ConfigError(f"override key must be section.key: {item!r}")
        _assign(cfg, section.strip().lower(), key, value)
    return cfg


def parse_target_spec(spec: str, cfg: dict) -> dict:
    """Parse an inline target spec like ``gaussian:d=2,kappa=4``."""
    kind, sep, rest = spec.partition(":")
    cfg["target"]["kind"] = kind.strip()
    if sep:
        for item in rest.split(","):
            if not item.strip():
                continue
            key, eq, value = item.partition("=")
            if not eq:
                raise ConfigError(f"bad target spec item {item!r} in {spec!r}")
            _assign(cfg, "target", key, value)
    return cfg


def build_target(cfg: dict) -> Target:
    """Construct the configured target distribution."""
    t = cfg["target"]
    kind = t["kind"].strip().lower()
    if kind == "gaussian":
        if t["covariance_file"]:
            try:
                text = Path(t["covariance_file"]).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read covariance file: {exc}") from exc
            cov = load_spd_text(text)
            mean = t["mean"] if t["mean"] is not None else np.zeros(cov.dim)
            if len(mean) != cov.dim:
                raise ConfigError("mean length does not match covariance dimension")
            return make_gaussian_target(np.asarray(mean), cov)
        mean = t["mean"]
        if mean is not None and len(mean) != t["d"]:
            raise ConfigError("mean length does not match target dimension")
        return make_gaussian_target_from_kappa(
            t["d"], t["kappa"], m=t["m"], mean=None if mean is None else np.asarray(mean)
        )
    if kind == "logcosh-product":
        return make_logcosh_target(t["d"])
    raise ConfigError(f"unknown target kind {t['kind']!r} (gaussian | logcosh-product)")
