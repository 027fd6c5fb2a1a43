"""Load model definitions from JSON or TOML files.

A config file declares a complete two-time-scale system with coefficient
expressions in the package's expression language:

    model_id = "cubic-demo"
    d1 = 1
    d2 = 1
    f = ["x1 - x1^3 + y1"]
    sigma = [["0.3"]]
    B = ["-y1"]
    g = [["1.4142135623730951"]]

    [scales]
    alpha = 0.5
    gamma = 0.5

    [meta]
    eta = 1.0

``f`` and ``sigma`` may reference t, x1..xd1 (and y1..yd2 for f); B, b and
g may reference x and y but not t.  Unknown keys are rejected by name so a
typo never silently drops a setting.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .dsl import CompiledExpr, DslError, compile_expression
from .models import AssumptionMeta, ModelError, ModelSpec, ScaleExponents

try:
    import tomllib as _toml  # python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml


class ConfigError(ValueError):
    """Raised for malformed model configuration data."""


_TOP_KEYS = {
    "model_id",
    "d1",
    "d2",
    "scales",
    "meta",
    "f",
    "sigma",
    "B",
    "b",
    "g",
    "f_bar",
    "sigma_bar",
    "averaged_dissipation_rate",
    "forcing_frequencies",
}
_SCALE_KEYS = {"alpha", "beta", "gamma", "epsilon"}
_META_KEYS = {
    "eta",
    "eta_prime",
    "eta_tilde",
    "theta",
    "theta1",
    "theta2",
    "kappa1",
    "kappa2",
    "lambda1",
    "lambda2",
    "K1",
    "K2",
    "K3",
    "K4",
    "K5",
    "K6",
    "K7",
    "K8",
    "M",
    "L_sigma",
    "L_g",
    "L_b",
    "pair_dissipative",
    "extras",
    "warnings",
}


def _reject_unknown(mapping: Mapping, allowed: set[str], where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key{'s' if len(unknown) > 1 else ''} in {where}: "
            f"{', '.join(unknown)}; allowed keys: {', '.join(sorted(allowed))}"
        )


def _require(mapping: Mapping, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where} is missing the required key '{key}'")
    return mapping[key]


def _positive_int(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{where} must be a positive integer, got {value!r}")
    return value


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _expr_list(value, length: int, where: str) -> list[str]:
    if not isinstance(value, list) or len(value) != length:
        raise ConfigError(
            f"{where} must be a list of {length} expression string"
            f"{'s' if length > 1 else ''}, got {value!r}"
        )
    for i, entry in enumerate(value):
        if not isinstance(entry, str):
            raise ConfigError(f"{where}[{i}] must be an expression string, got {entry!r}")
    return list(value)


def _expr_matrix(value, d: int, where: str) -> list[list[str]]:
    if not isinstance(value, list) or len(value) != d:
        raise ConfigError(f"{where} must be a {d}x{d} matrix of expression strings")
    return [_expr_list(row, d, f"{where}[{i}]") for i, row in enumerate(value)]


def _compile(source: str, d1: int, d2: int, allow_time: bool, where: str) -> CompiledExpr:
    try:
        return compile_expression(source, d1, d2, allow_time=allow_time)
    except DslError as err:
        raise ConfigError(f"in {where}: {err}") from err


def _vector_field(exprs: list[CompiledExpr], time_first: bool):
    """Adapter from compiled expressions to the batched callable contract."""

    def with_time(t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 1:
            return np.array([c(t, x, y) for c in exprs])
        return np.stack([c.eval_batch(t, x, y) for c in exprs], axis=-1)

    def sans_time(x, y):
        return with_time(0.0, x, y)

    return with_time if time_first else sans_time


def _matrix_field(rows: list[list[CompiledExpr]], d: int, time_arg: bool):
    flat = [c for row in rows for c in row]

    def with_time(t, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.array([c(t, x, ()) for c in flat]).reshape(d, d)
        cols = [c.eval_batch(t, x, None) for c in flat]
        return np.stack(cols, axis=-1).reshape(x.shape[0], d, d)

    def sans_time(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim == 1:
            return np.array([c(0.0, x, y) for c in flat]).reshape(d, d)
        cols = [c.eval_batch(0.0, x, y) for c in flat]
        return np.stack(cols, axis=-1).reshape(x.shape[0], d, d)

    return with_time if time_arg else sans_time


def _build_meta(raw: Mapping, where: str) -> AssumptionMeta:
    _reject_unknown(raw, _META_KEYS, where)
    kwargs: dict = {}
    for key, value in raw.items():
        if key == "pair_dissipative":
            if not isinstance(value, bool):
                raise ConfigError(f"{where}.pair_dissipative must be a boolean")
            kwargs[key] = value
        elif key == "warnings":
            if not isinstance(value, list) or not all(isinstance(w, str) for w in value):
                raise ConfigError(f"{where}.warnings must be a list of strings")
            kwargs[key] = tuple(value)
        elif key == "extras":
            if not isinstance(value, dict):
                raise ConfigError(f"{where}.extras must be a table of numbers")
            kwargs[key] = {k: _number(v, f"{where}.extras.{k}") for k, v in value.items()}
        else:
            kwargs[key] = _number(value, f"{where}.{key}")
    if "eta" not in kwargs:
        raise ConfigError(f"{where} is missing the required key 'eta'")
    return AssumptionMeta(**kwargs)


def model_from_mapping(data: Mapping) -> ModelSpec:
    """Build a :class:`ModelSpec` from an already-parsed configuration."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"configuration root must be a table, got {type(data).__name__}")
    _reject_unknown(data, _TOP_KEYS, "the configuration")

    model_id = _require(data, "model_id", "the configuration")
    if not isinstance(model_id, str) or not model_id:
        raise ConfigError(f"model_id must be a nonempty string, got {model_id!r}")
    d1 = _positive_int(_require(data, "d1", "the configuration"), "d1")
    d2 = _positive_int(_require(data, "d2", "the configuration"), "d2")

    scales_raw = _require(data, "scales", "the configuration")
    if not isinstance(scales_raw, Mapping):
        raise ConfigError("scales must be a table")
    _reject_unknown(scales_raw, _SCALE_KEYS, "scales")
    try:
        scales = ScaleExponents(
            alpha=_number(_require(scales_raw, "alpha", "scales"), "scales.alpha"),
            beta=_number(scales_raw.get("beta", 0.0), "scales.beta"),
            gamma=_number(scales_raw.get("gamma", 0.5), "scales.gamma"),
            epsilon=_number(scales_raw.get("epsilon", 1.0), "scales.epsilon"),
        )
    except ModelError as err:
        raise ConfigError(f"in scales: {err}") from err

    meta_raw = _require(data, "meta", "the configuration")
    if not isinstance(meta_raw, Mapping):
        raise ConfigError("meta must be a table")
    try:
        meta = _build_meta(meta_raw, "meta")
    except ModelError as err:
        raise ConfigError(f"in meta: {err}") from err

    f_src = _expr_list(_require(data, "f", "the configuration"), d1, "f")
    f_exprs = [_compile(s, d1, d2, True, f"f[{i}]") for i, s in enumerate(f_src)]

    sigma_src = _expr_matrix(_require(data, "sigma", "the configuration"), d1, "sigma")
    sigma_exprs = [
        [_compile(s, d1, 0, True, f"sigma[{i}][{j}]") for j, s in enumerate(row)]
        for i, row in enumerate(sigma_src)
    ]

    b_src = _expr_list(_require(data, "B", "the configuration"), d2, "B")
    b_exprs = [_compile(s, d1, d2, False, f"B[{i}]") for i, s in enumerate(b_src)]

    g_src = _expr_matrix(_require(data, "g", "the configuration"), d2, "g")
    g_exprs = [
        [_compile(s, d1, d2, False, f"g[{i}][{j}]") for j, s in enumerate(row)]
        for i, row in enumerate(g_src)
    ]

    small_b = None
    if "b" in data:
        small_src = _expr_list(data["b"], d2, "b")
        small_exprs = [_compile(s, d1, d2, False, f"b[{i}]") for i, s in enumerate(small_src)]
        small_b = _vector_field(small_exprs, time_first=False)

    f_bar = None
    if "f_bar" in data:
        bar_src = _expr_list(data["f_bar"], d1, "f_bar")
        bar_exprs = [_compile(s, d1, 0, False, f"f_bar[{i}]") for i, s in enumerate(bar_src)]

        def f_bar(x, _exprs=bar_exprs):
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                return np.array([c(0.0, x, ()) for c in _exprs])
            return np.stack([c.eval_batch(0.0, x, None) for c in _exprs], axis=-1)

    sigma_bar = None
    if "sigma_bar" in data:
        raw = data["sigma_bar"]
        if not isinstance(raw, list):
            raise ConfigError("sigma_bar must be a numeric matrix")
        arr = np.asarray(
            [[_number(v, f"sigma_bar[{i}][{j}]") for j, v in enumerate(row)]
             for i, row in enumerate(raw)],
            dtype=float,
        )
        if arr.shape != (d1, d1):
            raise ConfigError(f"sigma_bar must be {d1}x{d1}, got shape {arr.shape}")
        sigma_bar = arr

    rate = None
    if "averaged_dissipation_rate" in data:
        rate = _number(data["averaged_dissipation_rate"], "averaged_dissipation_rate")
        if rate <= 0.0:
            raise ConfigError("averaged_dissipation_rate must be positive")

    freqs: tuple[float, ...] = ()
    if "forcing_frequencies" in data:
        raw = data["forcing_frequencies"]
        if not isinstance(raw, list):
            raise ConfigError("forcing_frequencies must be a list of positive numbers")
        freqs = tuple(_number(v, f"forcing_frequencies[{i}]") for i, v in enumerate(raw))
        if any(w <= 0.0 for w in freqs):
            raise ConfigError("forcing_frequencies must be positive")

    uses_t = any(c.uses("t") for c in f_exprs) or any(
        c.uses("t") for row in sigma_exprs for c in row
    )
    if freqs and not uses_t:
        raise ConfigError(
            "forcing_frequencies were given but no coefficient references t"
        )

    return ModelSpec(
        model_id=model_id,
        d1=d1,
        d2=d2,
        f=_vector_field(f_exprs, time_first=True),
        sigma=_matrix_field(sigma_exprs, d1, time_arg=True),
        B=_vector_field(b_exprs, time_first=False),
        g=_matrix_field(g_exprs, d2, time_arg=False),
        scales=scales,
        meta=meta,
        b=small_b,
        f_bar=f_bar,
        sigma_bar=sigma_bar,
        averaged_dissipation_rate=rate,
        sigma_is_constant=all(c.is_constant for row in sigma_exprs for c in row),
        g_is_constant=all(c.is_constant for row in g_exprs for c in row),
        f_is_time_dependent=uses_t,
        forcing_frequencies=freqs,
    )


def load_model_config(path: str | Path) -> ModelSpec:
    """Read a .json or .toml model file and build the model it describes."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path} is not valid JSON: {err}") from err
    elif suffix == ".toml":
        try:
            data = _toml.loads(path.read_text())
        except _toml.TOMLDecodeError as err:
            raise ConfigError(f"{path} is not valid TOML: {err}") from err
    else:
        raise ConfigError(
            f"unsupported model file extension {suffix!r}; use .json or .toml"
        )
    try:
        return model_from_mapping(data)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from err
