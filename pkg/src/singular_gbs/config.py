"""Run configuration (TOML), matrix CSV input and 17-digit output.

A configuration looks like::

    seed = 7
    stream = 0

    [model]
    n = 2
    column_dim = "support"
    xi2 = { identity = 3, value = 0.25 }     # shape matrix Xi^2
    beta = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]

    [model.kernel]
    kind = "pearson7"
    nu = 5.0
    theta = 3.0

    [validate]
    draws = 40000
    shapes = [[3, 2, 1, 1], [3, 2, 2, 2]]

A matrix is a scalar (1 x 1), a nested list (dense, checked for symmetry
and positive semidefiniteness within 1e-8 and required to have distinct
nonzero eigenvalues), ``{identity = m, value = c}`` for ``c I_m``, or
``{vectors = [[...]], eigenvalues = [...]}`` with eigenvectors as columns.
Unknown keys anywhere are errors.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .distributions import GbsParams, UnivariateGbsParams
from .errors import ConfigError, GbsError
from .kernels import make_generator
from .linalg import PsdRankQ, psd_power
from .sampling import RngSpec

__all__ = ["RunConfig", "load_config", "parse_config", "matrix_from_spec", "read_matrix_csv", "dumps17", "fmt17"]

_TOP = {"seed", "stream", "model", "io", "validate"}
_MODEL = {"n", "xi2", "beta", "kernel", "column_dim"}
_IO = {"matrix", "out", "report"}
_VALIDATE = {"draws", "univ_draws", "bins", "shapes", "trials", "epsrel"}


def _reject_unknown(table: dict, allowed: set, where: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in [{where}]; allowed: {sorted(allowed)}")


def matrix_from_spec(spec, where: str = "matrix") -> PsdRankQ:
    """Build a :class:`PsdRankQ` from a config value (see module docstring)."""
    try:
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return PsdRankQ(np.eye(1), [float(spec)])
        if isinstance(spec, list):
            return PsdRankQ.from_matrix(np.array(spec, dtype=float), require_distinct=True)
        if isinstance(spec, dict):
            if "identity" in spec:
                _reject_unknown(spec, {"identity", "value"}, where)
                return PsdRankQ.scaled_identity(int(spec["identity"]), float(spec.get("value", 1.0)))
            _reject_unknown(spec, {"vectors", "eigenvalues"}, where)
            if set(spec) != {"vectors", "eigenvalues"}:
                raise ConfigError(f"[{where}] needs both 'vectors' and 'eigenvalues'")
            return PsdRankQ.from_eigen(np.array(spec["vectors"], dtype=float), spec["eigenvalues"])
    except ConfigError:
        raise
    except (GbsError, ValueError, TypeError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None
    raise ConfigError(f"[{where}] must be a number, a nested list or a table")


def _kernel(spec):
    if isinstance(spec, str):
        return spec, {}
    if isinstance(spec, dict):
        if "kind" not in spec:
            raise ConfigError("[model.kernel] needs 'kind'")
        params = {k: v for k, v in spec.items() if k != "kind"}
        return spec["kind"], params
    raise ConfigError("kernel must be a string or a table")


@dataclass
class RunConfig:
    """Parsed configuration; ``model`` is ``None`` when no [model] table was given."""

    model: GbsParams | None = None
    rng: RngSpec = field(default_factory=RngSpec)
    io: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)

    def univariate(self) -> UnivariateGbsParams:
        """The scalar parameters ``(alpha, beta, h)`` of a 1 x 1 model."""
        mp = self.require_model()
        if mp.n != 1 or mp.m != 1:
            raise ConfigError("the univariate suite needs n = 1 and 1 x 1 parameters")
        return UnivariateGbsParams(float(mp.Xi.eigenvalues[0]), float(mp.beta.eigenvalues[0]), mp.h)

    def require_model(self) -> GbsParams:
        if self.model is None:
            raise ConfigError("configuration has no [model] table")
        return self.model


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded TOML document and build a :class:`RunConfig`."""
    _reject_unknown(data, _TOP, "top level")
    cfg = RunConfig()
    try:
        cfg.rng = RngSpec(int(data.get("seed", 0)), int(data.get("stream", 0)))
    except GbsError as exc:
        raise ConfigError(str(exc)) from None
    io = data.get("io", {})
    _reject_unknown(io, _IO, "io")
    cfg.io = dict(io)
    val = data.get("validate", {})
    _reject_unknown(val, _VALIDATE, "validate")
    cfg.validate = dict(val)
    if "model" in data:
        m = data["model"]
        _reject_unknown(m, _MODEL, "model")
        missing = {"n", "xi2", "beta"} - set(m)
        if missing:
            raise ConfigError(f"[model] is missing {sorted(missing)}")
        xi2 = matrix_from_spec(m["xi2"], "model.xi2")
        beta = matrix_from_spec(m["beta"], "model.beta")
        kind, kparams = _kernel(m.get("kernel", "gaussian"))
        try:
            n = int(m["n"])
            h = make_generator(kind, kparams, dims=n * xi2.rank)
            cfg.model = GbsParams(n, psd_power(xi2, 0.5), beta, h, m.get("column_dim", "support"))
        except GbsError as exc:
            raise ConfigError(f"[model]: {type(exc).__name__}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def read_matrix_csv(path) -> np.ndarray:
    """Read a dense matrix from CSV; ragged rows and non-numbers are errors."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path} is empty")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path} has rows of different lengths")
    try:
        return np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def fmt17(x) -> str:
    """Round-trippable text for a double."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps17(obj, indent: int | None = None, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {dumps17(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{dumps17(v, indent, _level + 1)}" for v in obj]
        return "[" + sep.join(items) + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt17(obj)
    if isinstance(obj, Path):
        return _json_str(str(obj))
    if isinstance(obj, str):
        return _json_str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_str(s: str) -> str:
    return json.dumps(s)
