"""Engine configuration: tolerances, simulation options, injected operators.

The config file is JSON.  Matrices are written row-major with each entry
a two-element ``[re, im]`` list:

    {
      "tolerances": {"rank": 1e-9, "ortho": 1e-10, "incl": 1e-7, "eig1": 1e-7},
      "sim": {"max_while_iters": 1000, "residual_tol": 1e-10},
      "operators": {
        "Rz": [[[0.894, -0.447], [0.0, 0.0]],
               [[0.0, 0.0], [0.894, 0.447]]]
      }
    }

Injected operators extend the built-in gate table at startup; they are
looked up by bare name in scripts.
"""

import dataclasses
import json
import os

import numpy as np

from .lattice import DEFAULT_TOL, Tolerances
from .qop import MatrixOp
from .semantics import SimOptions

ENV_CONFIG_PATH = "QREFINE_CONFIG"


class ConfigError(Exception):
    """Unreadable or malformed configuration."""


@dataclasses.dataclass(frozen=True)
class Config:
    tolerances: Tolerances = DEFAULT_TOL
    sim: SimOptions = SimOptions()
    operators: dict = dataclasses.field(default_factory=dict)


DEFAULT_CONFIG = Config()


def _decode_matrix(name, rows):
    try:
        arr = np.asarray(
            [[complex(e[0], e[1]) for e in row] for row in rows],
            dtype=np.complex128)
    except (TypeError, ValueError, IndexError):
        raise ConfigError(
            f"operator {name!r}: entries must be [re, im] pairs") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"operator {name!r}: matrix must be square")
    try:
        MatrixOp(arr)
    except ValueError as exc:
        raise ConfigError(f"operator {name!r}: {exc}") from None
    return arr


def _pick(data, key, fields, build):
    section = data.get(key)
    if section is None:
        return build()
    if not isinstance(section, dict):
        raise ConfigError(f"{key!r} section must be an object")
    unknown = set(section) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {key} option(s): {sorted(unknown)}")
    for k, v in section.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}.{k} must be a number")
    return build(**{k: section[k] for k in fields if k in section})


def parse_config(data):
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    unknown = set(data) - {"tolerances", "sim", "operators"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    tol = _pick(data, "tolerances", ("rank", "ortho", "incl", "eig1"),
                Tolerances)
    sim = _pick(data, "sim", ("max_while_iters", "residual_tol"), SimOptions)
    ops = {}
    section = data.get("operators", {})
    if not isinstance(section, dict):
        raise ConfigError("'operators' section must be an object")
    for name, rows in section.items():
        if not isinstance(name, str) or not name:
            raise ConfigError("operator names must be non-empty strings")
        ops[name] = _decode_matrix(name, rows)
    return Config(tolerances=tol, sim=sim, operators=ops)


def load_config(path):
    """Read and validate a config file; `None` yields the defaults."""
    if path is None:
        return DEFAULT_CONFIG
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    return parse_config(data)


def resolve_config_path(cli_path=None):
    """Config path precedence: explicit CLI flag, then the
    QREFINE_CONFIG environment variable, then none."""
    if cli_path is not None:
        return cli_path
    return os.environ.get(ENV_CONFIG_PATH) or None
