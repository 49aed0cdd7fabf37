"""Key-value configuration files for the command-line tools.

Simulation config: keys before the first section are defaults shared by all
scenarios; each ``[scenario NAME]`` section defines one scenario; ``[fit]``
sets :class:`FitConfig` fields.  A file without scenario sections describes a
single scenario through its top-level keys.

Fit config: ``[fit]`` as above plus ``[model]`` for the data pipeline (spline
order, knot grid, derivative preprocessing, covariate expansion, split).
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass

from .dataio import ROOT_SECTION, read_key_values
from .estimator import FitConfig
from .exceptions import DataError
from .simulation import Scenario

__all__ = ["ModelOptions", "parse_fit_section", "load_simulation_config", "load_fit_config"]

_SCENARIO_KEYS = {"n": int, "p": int, "rho": float, "c": float, "M": int, "seed": int,
                  "grid_size": int, "test_size": int}


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _convert(name: str, value: str, tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        inner = [a for a in args if a is not type(None)]
        if value.strip().lower() in ("", "none"):
            return None
        return _convert(name, value, inner[0])
    if origin is tuple:
        elem = args[0] if args else float
        return tuple(_convert(name, v, elem) for v in value.split(",") if v.strip())
    if tp is bool:
        return _bool(value)
    if tp in (int, float, str):
        return tp(value.strip())
    raise TypeError(f"unsupported config type for {name}: {tp}")


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def parse_fit_section(items) -> FitConfig:
    hints = _hints(FitConfig)
    kwargs = {}
    for key, value in items:
        if key not in hints:
            raise DataError(f"unknown fit option {key!r}")
        try:
            kwargs[key] = _convert(key, value, hints[key])
        except (TypeError, ValueError) as exc:
            raise DataError(f"fit option {key!r}: {exc}") from None
    try:
        return FitConfig(**kwargs)
    except ValueError as exc:
        raise DataError(f"invalid fit configuration: {exc}") from None


def _scenario(name: str, values: dict) -> Scenario:
    kwargs = {}
    for key, value in values.items():
        if key not in _SCENARIO_KEYS:
            raise DataError(f"scenario {name!r}: unknown key {key!r}")
        try:
            kwargs[key] = _SCENARIO_KEYS[key](value)
        except ValueError:
            raise DataError(f"scenario {name!r}: bad value for {key!r}: {value!r}") from None
    missing = [k for k in ("n", "p", "rho", "c") if k not in kwargs]
    if missing:
        raise DataError(f"scenario {name!r}: missing keys {missing}")
    try:
        return Scenario(name=name, **kwargs)
    except ValueError as exc:
        raise DataError(f"scenario {name!r}: {exc}") from None


def load_simulation_config(path, M: int | None = None):
    """Returns ``(scenarios, fit_config)``; ``M`` overrides every replicate count."""
    cp = read_key_values(path)
    root = dict(cp[ROOT_SECTION])
    fit = parse_fit_section(cp["fit"].items() if cp.has_section("fit") else [])
    names = [s for s in cp.sections() if s.startswith("scenario")]
    scenarios = []
    if names:
        for sec in names:
            label = sec[len("scenario"):].strip()
            vals = {**root, **{k: v for k, v in cp[sec].items()}}
            scenarios.append(_scenario(label, vals))
    else:
        scenarios.append(_scenario("", root))
    other = set(cp.sections()) - set(names) - {ROOT_SECTION, "fit"}
    if other:
        raise DataError(f"unknown sections {sorted(other)}")
    if M is not None:
        scenarios = [dataclasses.replace(s, M=M) for s in scenarios]
    labels = [s.label for s in scenarios]
    if len(set(labels)) != len(labels):
        raise DataError("scenario labels must be unique")
    return scenarios, fit


@dataclass(frozen=True)
class ModelOptions:
    """Data pipeline for ``fit``: spline layout and preprocessing."""

    spline_order: int = 3
    knots_grid: tuple[int, ...] = (2, 3, 4, 5, 6)
    derivative: bool = False
    derivative_basis_size: int = 20
    expand_degree: int | None = None
    interaction: bool = True
    n_train: int | None = None
    link_grid_size: int = 101


def load_fit_config(path=None):
    """Returns ``(fit_config, model_options)``; ``path=None`` gives the defaults."""
    if path is None:
        return FitConfig(), ModelOptions()
    cp = read_key_values(path)
    fit = parse_fit_section(cp["fit"].items() if cp.has_section("fit") else [])
    hints = _hints(ModelOptions)
    kwargs = {}
    if cp.has_section("model"):
        for key, value in cp["model"].items():
            if key not in hints:
                raise DataError(f"unknown model option {key!r}")
            try:
                kwargs[key] = _convert(key, value, hints[key])
            except (TypeError, ValueError) as exc:
                raise DataError(f"model option {key!r}: {exc}") from None
    return fit, ModelOptions(**kwargs)
