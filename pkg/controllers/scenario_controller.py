"""Controller logic for scenario commands.

This module contains the orchestration behind ``run``, ``bounds``, ``audit``
and ``validate``. Commands sit between the CLI layer and the numerical core:
they load configs, build runs, call the verifier and write reports. Every
handler returns ``(payload, exit_status)``; exceptions from the core are
mapped to statuses here and never reach the CLI.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from flask import current_app

from controllers.config_controller import (
    ScenarioConfig,
    apply_overrides,
    config_to_dict,
    load_config,
)
from controllers.ledger_controller import record_run
from ppa.errors import ConfigError, PPAError
from ppa.iteration_engine import coupling_gap, generate_probes, run as run_iteration
from ppa.rate_calculus import BoundContext, RateCalculus
from ppa.schedules import Schedule, ScenarioConstants, builtin_schedule, derive_constants, \
    validate_conditions
from ppa.space_ops import MonotoneOperator, as_point, build_operator
from ppa.verifier import (
    AuditReport,
    RunBundle,
    audit_lemmas,
    audit_synthetic,
    certify,
    projection_probe_search,
    statement_bound,
)
from utils.report_io import dumps, write_csv, write_json, write_text
from utils.types_enum import StatementKind, Variant, Verdict

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

AUX_EXPORTS = 3
RATE_REPORT_KS = range(7)
SUMMARY_DIGITS = 24


@dataclass
class Scenario:
    """A config turned into core objects."""

    config: ScenarioConfig
    operator: MonotoneOperator
    schedule: Schedule
    u: np.ndarray
    z0: np.ndarray
    constants: ScenarioConstants
    calculus: RateCalculus
    bundle: Optional[RunBundle] = None

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.config.name,
            "schedule": self.schedule.name,
            "operator": self.operator.kind.value,
            "horizon": self.config.horizon,
            "seed": self.config.seed,
        }


def _settings() -> Dict[str, Any]:
    config = current_app.config
    return {
        "horizon": config["PPA_HORIZON"],
        "seed": config["PPA_SEED"],
        "budget_steps": config["PPA_BUDGET_STEPS"],
        "budget_bits": config["PPA_BUDGET_BITS"],
        "probes": config["PPA_PROBES"],
    }


def _build(config: ScenarioConfig) -> Tuple[MonotoneOperator, Schedule, np.ndarray, np.ndarray]:
    op = build_operator(config.operator, config.dim, config.seed)
    schedule = builtin_schedule(config.schedule, config.dim, config.moduli, config.direction)
    return op, schedule, as_point(config.u, op.dim), as_point(config.z0, op.dim)


def prepare(config: ScenarioConfig, with_runs: bool = True) -> Scenario:
    """Build operator, schedule, constants, calculus and (optionally) both runs.

    Raises:
        ConfigError: the schedule fails its conditions on the horizon.
        PPAError: invalid parameters or a non-finite iterate.
    """
    op, schedule, u, z0 = _build(config)
    validation = validate_conditions(schedule, config.horizon)
    if not validation.passed:
        raise ConfigError([
            {"path": f"{config.name}.schedule",
             "message": f"condition {result.condition} fails"
                        + (f" at k={result.k}" if result.k is not None else "")
                        + (f": {result.detail}" if result.detail else "")}
            for result in validation.failures()
        ])

    exact = inexact = gaps = None
    if with_runs:
        tables = schedule.tabulate(config.horizon)
        exact = run_iteration(Variant.EXACT, op, u, z0, schedule, config.horizon, tables)
        inexact = run_iteration(Variant.INEXACT, op, u, z0, schedule, config.horizon, tables)
        gaps = coupling_gap(inexact, exact)
    constants = derive_constants(schedule, op.zero, u, z0, gaps, config.constants or None)
    context = BoundContext.from_scenario(schedule.moduli, constants)
    calculus = RateCalculus(context, config.budget_steps, config.budget_bits)

    scenario = Scenario(config, op, schedule, u, z0, constants, calculus)
    if with_runs:
        probes = generate_probes(op.zero, constants.D, config.probes, config.seed,
                                 extra=(z0, exact.points[-1]))
        scenario.bundle = RunBundle(config.name, exact, inexact, constants, probes,
                                    schedule.moduli.c)
    return scenario


# ----------------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------------

def _short(decimal: str) -> str:
    if len(decimal) <= SUMMARY_DIGITS:
        return decimal
    return f"{decimal[:SUMMARY_DIGITS // 2]}...({len(decimal)} digits)"


def _summary_text(scenario: Scenario, certificates: List[Dict[str, Any]],
                  audit: Optional[AuditReport]) -> str:
    described = scenario.describe()
    lines = [
        f"scenario: {described['name']}",
        f"schedule: {described['schedule']}  operator: {described['operator']}  "
        f"horizon: {described['horizon']}  seed: {described['seed']}",
        "constants: " + " ".join(f"{key}={value}"
                                 for key, value in scenario.constants.to_dict().items()),
    ]
    if certificates:
        lines.append("certificates:")
        for payload in certificates:
            bound = payload["bound"] if payload["exact"] else \
                f"budget-exceeded (>= {_short(payload['lower_bound'])})"
            lines.append(f"  {payload['statement']}(k={payload['k']}, f={payload['f']}): "
                         f"{payload['verdict']} witness={payload['witness']} "
                         f"bound={_short(bound)}")
    if audit is not None:
        checked = sum(check.checked for check in audit.checks.values())
        lines.append(f"audit: {'passed' if audit.passed else 'FAILED'} "
                     f"({len(audit.checks)} properties, {checked} instances)")
        for check in audit.failures():
            lines.append(f"  {check.name}: {check.failures} failures, "
                         f"first {dumps(check.counterexample).strip()}")
    return "\n".join(lines) + "\n"


def _write_runs(directory: str, bundle: RunBundle) -> List[str]:
    paths = [
        write_csv(os.path.join(directory, "trajectory_z.csv"), bundle.inexact.csv_rows()),
        write_csv(os.path.join(directory, "trajectory_y.csv"), bundle.exact.csv_rows()),
    ]
    for index in range(min(AUX_EXPORTS, len(bundle.probes))):
        paths.append(write_csv(os.path.join(directory, f"aux_probe_{index}.csv"),
                               bundle.aux(index).csv_rows()))
    return paths


# ----------------------------------------------------------------------------
# Handlers
# ----------------------------------------------------------------------------

def _certify_all(scenario: Scenario) -> Tuple[list, Dict[str, Any]]:
    bundle, calculus = scenario.bundle, scenario.calculus
    certificates = [certify(statement, bundle, calculus)
                    for statement in scenario.config.statements]
    projections = {}
    for statement in scenario.config.statements:
        if statement.kind is StatementKind.SMALLNESS:
            found = projection_probe_search(calculus, bundle, statement.k, statement.f)
            projections[statement.label()] = found.to_dict() if found else None
    return certificates, projections


def handle_run(config: ScenarioConfig, out_dir: str) -> Dict[str, Any]:
    """Run both iterations, certify every statement, audit and write the reports."""
    scenario = prepare(config)
    certificates, projections = _certify_all(scenario)
    audit = audit_lemmas(scenario.calculus, scenario.bundle, scenario.schedule.moduli.c,
                         seed=config.seed)
    payloads = [certificate.to_dict() for certificate in certificates]
    violated = [p for p in payloads if p["verdict"] == Verdict.VIOLATED.value]
    status = EXIT_FAILED if violated or not audit.passed else EXIT_OK

    directory = os.path.join(out_dir, config.name)
    paths = _write_runs(directory, scenario.bundle)
    paths.append(write_json(os.path.join(directory, "certificates.json"), {
        "scenario": scenario.describe(),
        "config": config_to_dict(config),
        "constants": scenario.constants.to_dict(),
        "context": scenario.calculus.ctx.to_dict(),
        "certificates": payloads,
        "projection_search": projections,
    }))
    paths.append(write_json(os.path.join(directory, "audit.json"), audit.to_dict()))
    paths.append(write_text(os.path.join(directory, "summary.txt"),
                            _summary_text(scenario, payloads, audit)))
    # timings differ between reruns and stay out of the reports above
    paths.append(write_json(os.path.join(directory, "timings.json"), {
        certificate.statement.label(): certificate.timings for certificate in certificates
    }))
    for path in paths:
        current_app.logger.debug("wrote %s", path)
    current_app.logger.info("scenario %s finished: %d certificates, audit %s, status %d",
                            config.name, len(payloads), "passed" if audit.passed else "FAILED",
                            status)
    return {"scenario": scenario.describe(), "status": status, "certificates": payloads,
            "audit_passed": audit.passed, "directory": directory}


def handle_audit(config: ScenarioConfig, out_dir: str) -> Dict[str, Any]:
    """Run both iterations and audit them; no certificates."""
    scenario = prepare(config)
    audit = audit_lemmas(scenario.calculus, scenario.bundle, scenario.schedule.moduli.c,
                         seed=config.seed)
    directory = os.path.join(out_dir, config.name)
    write_json(os.path.join(directory, "audit.json"), audit.to_dict())
    write_text(os.path.join(directory, "summary.txt"), _summary_text(scenario, [], audit))
    status = EXIT_OK if audit.passed else EXIT_FAILED
    current_app.logger.info("scenario %s audited: %s", config.name,
                            "passed" if audit.passed else "FAILED")
    return {"scenario": scenario.describe(), "status": status, "certificates": [],
            "audit_passed": audit.passed, "directory": directory}


def handle_bounds(config: ScenarioConfig, out_dir: str) -> Dict[str, Any]:
    """Evaluate the bounds of every statement, with derivation traces, without running."""
    scenario = prepare(config, with_runs=False)
    calculus = scenario.calculus
    bounds = {
        statement.label(): statement_bound(calculus, statement).to_dict(with_trace=True)
        for statement in config.statements
    }
    rates = {str(k): calculus.Theta(k).to_dict() for k in RATE_REPORT_KS}
    payload = {
        "scenario": scenario.describe(),
        "constants": scenario.constants.to_dict(),
        "context": calculus.ctx.to_dict(),
        "bounds": bounds,
        "Theta": rates,
    }
    directory = os.path.join(out_dir, config.name)
    write_json(os.path.join(directory, "bounds.json"), payload)
    return {"scenario": scenario.describe(), "status": EXIT_OK, "bounds": bounds,
            "Theta": rates, "directory": directory}


def handle_validate(config: ScenarioConfig, out_dir: str) -> Dict[str, Any]:  # pylint: disable=unused-argument
    """Check the schedule's conditions on the horizon."""
    _, schedule, _, _ = _build(config)
    report = validate_conditions(schedule, config.horizon)
    for failure in report.failures():
        current_app.logger.warning("%s: condition %s fails (k=%s, first violation %s)",
                                   config.name, failure.condition, failure.k,
                                   failure.first_violation)
    return {"scenario": {"name": config.name, "schedule": schedule.name},
            "status": EXIT_OK if report.passed else EXIT_FAILED,
            "validation": report.to_dict()}


HANDLERS: Dict[str, Callable[[ScenarioConfig, str], Dict[str, Any]]] = {
    "run": handle_run,
    "audit": handle_audit,
    "bounds": handle_bounds,
    "validate": handle_validate,
}


def _guarded(handler, config: ScenarioConfig, out_dir: str) -> Dict[str, Any]:
    """Run a handler, mapping failures to statuses like an HTTP controller."""
    failed = {"scenario": {"name": config.name}, "certificates": []}
    try:
        return handler(config, out_dir)
    except ConfigError as err:
        current_app.logger.error("%s: %s", config.name, err)
        return {**failed, "status": EXIT_CONFIG, "message": "Invalid config",
                "diagnostics": err.diagnostics}
    except PPAError as err:
        current_app.logger.error("%s: %s", config.name, err)
        return {**failed, "status": EXIT_CONFIG, "message": str(err)}
    except OSError as err:
        current_app.logger.error("%s: cannot write %s: %s", config.name, err.filename, err)
        return {**failed, "status": EXIT_CONFIG,
                "message": f"I/O error on {err.filename}: {err.strerror}"}
    except Exception as err:  # pylint: disable=broad-except
        current_app.logger.exception("%s: unexpected failure", config.name)
        return {**failed, "status": EXIT_FAILED, "message": f"Something went wrong: {err}"}


def execute(command: str, options: Dict[str, Any]) -> Tuple[Dict[str, Any], int]:
    """Load the config named in options and run command on every scenario.

    Args:
        command: ``run``, ``audit``, ``bounds`` or ``validate``.
        options: CLI flags: ``config``, ``horizon``, ``seed``, ``budget``,
            ``budget_bits``, ``out``, ``jobs``.

    Returns:
        The payload to print and the process exit status (the worst one
        among the scenarios).
    """
    handler = HANDLERS[command]
    out_dir = options.get("out") or current_app.config["PPA_OUTPUT_DIR"]
    jobs = options.get("jobs") or current_app.config["PPA_JOBS"]
    try:
        configs = [
            apply_overrides(config, horizon=options.get("horizon"), seed=options.get("seed"),
                            budget_steps=options.get("budget"),
                            budget_bits=options.get("budget_bits"))
            for config in load_config(options["config"], _settings())
        ]
    except ConfigError as err:
        current_app.logger.error("%s", err)
        return {"command": command, "status": EXIT_CONFIG, "message": "Invalid config",
                "diagnostics": err.diagnostics}, EXIT_CONFIG

    app = current_app._get_current_object()  # pylint: disable=protected-access

    def work(config):
        with app.app_context():
            current_app.logger.info("%s: starting %s", config.name, command)
            return _guarded(handler, config, out_dir)

    if jobs > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, configs))
    else:
        results = [work(config) for config in configs]

    payload: Dict[str, Any] = {"command": command, "scenarios": results}
    if command == "audit":
        synthetic = audit_synthetic(seed=configs[0].seed)
        path = write_json(os.path.join(out_dir, "synthetic_audit.json"), synthetic.to_dict())
        current_app.logger.info("synthetic audit %s, written to %s",
                                "passed" if synthetic.passed else "FAILED", path)
        payload["synthetic_audit_passed"] = synthetic.passed
        if not synthetic.passed:
            results.append({"scenario": {"name": "synthetic"}, "status": EXIT_FAILED})

    if command in ("run", "audit"):
        for result in results:
            if "schedule" in result["scenario"]:
                record_run(result["scenario"], command, result["status"],
                           result.get("certificates", []))

    status = max(result["status"] for result in results)
    payload["status"] = status
    return payload, status
