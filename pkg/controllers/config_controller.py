"""Controller logic for scenario configuration files.

A config file holds one scenario object or ``{"scenarios": [...]}``. Every
problem found while reading it becomes a diagnostic ``{"path", "message"}``;
all diagnostics are reported together through :class:`ppa.errors.ConfigError`.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ppa.counterfn import ID, CounterFn, parse_counterfn
from ppa.errors import ConfigError, PPAError
from ppa.schedules import builtin_schedule
from ppa.space_ops import build_operator
from ppa.verifier import Statement
from utils.types_enum import ErrorMode, StatementKind

SCENARIO_FIELDS = {
    "name", "operator", "u", "z0", "schedule", "moduli", "direction", "horizon", "seed",
    "budget", "probes", "constants", "statements",
}
BUDGET_FIELDS = {"steps", "bits"}
STATEMENT_FIELDS = {"kind", "k", "f"}
CONSTANT_FIELDS = {"D", "d0", "d1", "d2"}
MODULI_FUNCTIONS = {"h", "ell", "L", "E", "Cfun"}

DEFAULT_SETTINGS = {
    "horizon": 100_000,
    "seed": 0,
    "budget_steps": 1_000_000,
    "budget_bits": 1 << 20,
    "probes": 50,
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario.

    Attributes:
        name: scenario name, also its output sub-directory.
        operator: operator description for :func:`ppa.space_ops.build_operator`.
        u, z0: anchor and starting point.
        schedule: catalog name of the schedule.
        moduli: parsed replacements for the schedule's moduli.
        direction: error direction, None for the first basis vector.
        horizon, seed, budget_steps, budget_bits, probes: run settings.
        constants: explicit D, d0, d1, d2 (validated against the derived ones).
        statements: statements to certify.
    """

    name: str
    operator: Dict[str, Any]
    u: Tuple[float, ...]
    z0: Tuple[float, ...]
    schedule: str
    moduli: Dict[str, Any] = field(default_factory=dict)
    direction: Optional[Tuple[float, ...]] = None
    horizon: int = DEFAULT_SETTINGS["horizon"]
    seed: int = DEFAULT_SETTINGS["seed"]
    budget_steps: int = DEFAULT_SETTINGS["budget_steps"]
    budget_bits: int = DEFAULT_SETTINGS["budget_bits"]
    probes: int = DEFAULT_SETTINGS["probes"]
    constants: Dict[str, int] = field(default_factory=dict)
    statements: Tuple[Statement, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.u)


class _Diagnostics:
    """Collects field-level problems."""

    def __init__(self):
        self.items: List[Dict[str, str]] = []

    def add(self, path: str, message: str) -> None:
        self.items.append({"path": path, "message": message})

    def unknown_fields(self, data: Dict[str, Any], allowed: set, path: str) -> None:
        for key in sorted(set(data) - allowed):
            self.add(f"{path}.{key}" if path else key, "unknown field")

    def natural(self, data: Dict[str, Any], key: str, path: str, default: int,
                minimum: int = 0) -> int:
        value = data.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            self.add(path, f"expected an integer, got {type(value).__name__}")
            return default
        if value < minimum:
            self.add(path, f"must be at least {minimum}, got {value}")
        return value

    def vector(self, data: Dict[str, Any], key: str, path: str) -> Optional[Tuple[float, ...]]:
        value = data.get(key)
        if not isinstance(value, list) or not value or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            self.add(path, "expected a non-empty list of numbers")
            return None
        return tuple(float(x) for x in value)


def _parse_fn(diag: _Diagnostics, text: Any, path: str) -> Optional[CounterFn]:
    if not isinstance(text, str):
        diag.add(path, "expected a counter-function expression string")
        return None
    try:
        return parse_counterfn(text)
    except PPAError as err:
        diag.add(path, str(err))
        return None


def _parse_moduli(diag: _Diagnostics, data: Any, path: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        diag.add(path, "expected an object")
        return {}
    diag.unknown_fields(data, MODULI_FUNCTIONS | {"c", "err_mode"}, path)
    moduli: Dict[str, Any] = {}
    for key in sorted(MODULI_FUNCTIONS & set(data)):
        fn = _parse_fn(diag, data[key], f"{path}.{key}")
        if fn is not None:
            moduli[key] = fn
    if "c" in data:
        moduli["c"] = diag.natural(data, "c", f"{path}.c", 1, minimum=1)
    if "err_mode" in data:
        try:
            moduli["err_mode"] = ErrorMode(data["err_mode"])
        except ValueError:
            diag.add(f"{path}.err_mode", f"unknown error mode {data['err_mode']!r}")
    return moduli


def _parse_statements(diag: _Diagnostics, data: Any, path: str) -> Tuple[Statement, ...]:
    if not isinstance(data, list):
        diag.add(path, "expected a list of statements")
        return ()
    statements = []
    for index, item in enumerate(data):
        where = f"{path}[{index}]"
        if not isinstance(item, dict):
            diag.add(where, "expected an object")
            continue
        diag.unknown_fields(item, STATEMENT_FIELDS, where)
        try:
            kind = StatementKind(item.get("kind"))
        except ValueError:
            diag.add(f"{where}.kind", f"unknown statement {item.get('kind')!r}")
            continue
        if "k" not in item:
            diag.add(f"{where}.k", "missing field")
            continue
        k = diag.natural(item, "k", f"{where}.k", 0)
        f = _parse_fn(diag, item.get("f", "id"), f"{where}.f") or ID
        if k >= 0:
            statements.append(Statement(kind, k, f))
    return tuple(statements)


def _parse_scenario(diag: _Diagnostics, data: Any, path: str, index: int,
                    settings: Dict[str, Any]) -> Optional[ScenarioConfig]:
    prefix = f"{path}." if path else ""
    if not isinstance(data, dict):
        diag.add(path or "$", "expected a scenario object")
        return None
    before = len(diag.items)
    diag.unknown_fields(data, SCENARIO_FIELDS, path)

    name = data.get("name", f"scenario{index}")
    if not isinstance(name, str) or not name or "/" in name or name.startswith("."):
        diag.add(f"{prefix}name", "expected a plain non-empty name")
    u = diag.vector(data, "u", f"{prefix}u")
    z0 = diag.vector(data, "z0", f"{prefix}z0")
    if u and z0 and len(u) != len(z0):
        diag.add(f"{prefix}z0", f"dimension {len(z0)} differs from u's {len(u)}")
    direction = diag.vector(data, "direction", f"{prefix}direction") \
        if "direction" in data else None

    budget = data.get("budget", {})
    if not isinstance(budget, dict):
        diag.add(f"{prefix}budget", "expected an object")
        budget = {}
    diag.unknown_fields(budget, BUDGET_FIELDS, f"{prefix}budget")
    constants = data.get("constants", {})
    if not isinstance(constants, dict):
        diag.add(f"{prefix}constants", "expected an object")
        constants = {}
    diag.unknown_fields(constants, CONSTANT_FIELDS, f"{prefix}constants")

    config_values = dict(
        horizon=diag.natural(data, "horizon", f"{prefix}horizon", settings["horizon"], 1),
        seed=diag.natural(data, "seed", f"{prefix}seed", settings["seed"]),
        budget_steps=diag.natural(budget, "steps", f"{prefix}budget.steps",
                                  settings["budget_steps"], 1),
        budget_bits=diag.natural(budget, "bits", f"{prefix}budget.bits",
                                 settings["budget_bits"], 16),
        probes=diag.natural(data, "probes", f"{prefix}probes", settings["probes"]),
        constants={key: diag.natural(constants, key, f"{prefix}constants.{key}", 1, 1)
                   for key in sorted(CONSTANT_FIELDS & set(constants))},
        moduli=_parse_moduli(diag, data.get("moduli", {}), f"{prefix}moduli"),
        statements=_parse_statements(diag, data.get("statements", []), f"{prefix}statements"),
    )

    schedule = data.get("schedule")
    operator = data.get("operator")
    if not isinstance(schedule, str):
        diag.add(f"{prefix}schedule", "expected a schedule name")
    if not isinstance(operator, dict) or "kind" not in operator:
        diag.add(f"{prefix}operator", "expected an object with a kind")
    if len(diag.items) > before or u is None:
        return None

    # catalog lookups and parameter checks need the fields above
    try:
        builtin_schedule(schedule, len(u), config_values["moduli"], direction)
    except KeyError:
        diag.add(f"{prefix}schedule", f"unknown schedule {schedule!r}")
    except PPAError as err:
        diag.add(f"{prefix}direction", str(err))
    try:
        build_operator(operator, len(u), config_values["seed"])
    except KeyError as err:
        missing = err.args[0] if err.args else "kind"
        if isinstance(err, PPAError):
            diag.add(f"{prefix}operator.kind", str(err))
        else:
            diag.add(f"{prefix}operator.{missing}", "missing field")
    except (PPAError, TypeError, ValueError) as err:
        diag.add(f"{prefix}operator", str(err))
    if len(diag.items) > before:
        return None
    return ScenarioConfig(name=name, operator=operator, u=u, z0=z0, schedule=schedule,
                          direction=direction, **config_values)


def parse_config(text: str, settings: Optional[Dict[str, Any]] = None) -> List[ScenarioConfig]:
    """Parse and validate config text.

    Args:
        text: JSON text.
        settings: defaults for horizon, seed, budget_steps, budget_bits and probes.

    Returns:
        The scenarios in file order.

    Raises:
        ConfigError: with one diagnostic per offending field.
    """
    settings = {**DEFAULT_SETTINGS, **(settings or {})}
    diag = _Diagnostics()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError([{"path": "$", "message": f"invalid JSON: {err}"}]) from err

    if isinstance(data, dict) and "scenarios" in data:
        diag.unknown_fields(data, {"scenarios"}, "")
        items = data["scenarios"]
        if not isinstance(items, list) or not items:
            raise ConfigError([{"path": "scenarios", "message": "expected a non-empty list"}])
        scenarios = [_parse_scenario(diag, item, f"scenarios[{i}]", i, settings)
                     for i, item in enumerate(items)]
    else:
        scenarios = [_parse_scenario(diag, data, "", 0, settings)]

    names = [scenario.name for scenario in scenarios if scenario is not None]
    for name in sorted({name for name in names if names.count(name) > 1}):
        diag.add("scenarios", f"duplicate scenario name {name!r}")
    if diag.items:
        raise ConfigError(diag.items)
    return scenarios


def load_config(path: str, settings: Optional[Dict[str, Any]] = None) -> List[ScenarioConfig]:
    """Read and parse a config file.

    Raises:
        ConfigError: unreadable file or invalid content.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except (OSError, UnicodeDecodeError) as err:
        raise ConfigError([{"path": path, "message": f"cannot read config: {err}"}]) from err
    return parse_config(text, settings)


def apply_overrides(config: ScenarioConfig, **overrides: Optional[int]) -> ScenarioConfig:
    """Replace settings given on the command line (None values are ignored).

    Raises:
        ConfigError: an override is out of range.
    """
    minimums = {"horizon": 1, "seed": 0, "budget_steps": 1, "budget_bits": 16, "probes": 0}
    values = {key: value for key, value in overrides.items() if value is not None}
    problems = [{"path": f"--{key.replace('_', '-')}", "message": f"must be at least {minimums[key]}"}
                for key, value in sorted(values.items()) if value < minimums[key]]
    if problems:
        raise ConfigError(problems)
    return dataclasses.replace(config, **values)


def _serialize_moduli(moduli: Dict[str, Any]) -> Dict[str, Any]:
    result = {}
    for key, value in moduli.items():
        if isinstance(value, CounterFn):
            result[key] = value.to_expr()
        elif isinstance(value, ErrorMode):
            result[key] = value.value
        else:
            result[key] = value
    return result


def config_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """JSON-safe form of a scenario; parsing it gives the same scenario back."""
    payload = {
        "name": config.name,
        "operator": config.operator,
        "u": list(config.u),
        "z0": list(config.z0),
        "schedule": config.schedule,
        "moduli": _serialize_moduli(config.moduli),
        "horizon": config.horizon,
        "seed": config.seed,
        "budget": {"steps": config.budget_steps, "bits": config.budget_bits},
        "probes": config.probes,
        "constants": dict(config.constants),
        "statements": [
            {"kind": st.kind.value, "k": st.k, "f": st.f.to_expr()} for st in config.statements
        ],
    }
    if config.direction is not None:
        payload["direction"] = list(config.direction)
    return payload
