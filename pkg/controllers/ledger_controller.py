"""Controller logic for the run ledger.

Runs and their certificates are recorded after every ``run`` and ``audit``
invocation when a ledger database is configured. Controllers return
``(payload, exit_status)`` pairs, mirroring the status codes of an HTTP
controller.
"""

import datetime
from typing import Any, Dict, List, Optional

from flask import current_app
from sqlalchemy.exc import SQLAlchemyError
from orm_models import db, ScenarioRun, CertificateRecord
from utils.types_enum import StatementKind, Verdict


def ledger_enabled() -> bool:
    """True when the app was created with a ledger database."""
    return bool(current_app.config.get("LEDGER_ENABLED"))


def _serialize_certificate(record: CertificateRecord) -> dict:
    """Serialize a CertificateRecord ORM object to a JSON-safe dict."""
    return {
        "statement": record.statement.value,
        "k": record.k,
        "f": record.f_expr,
        "witness": record.witness,
        "bound": record.bound,
        "lower_bound": record.lower_bound,
        "exact": record.exact,
        "verdict": record.verdict.value,
    }


def _serialize_run(run: ScenarioRun) -> dict:
    """Serialize a ScenarioRun ORM object, certificates included.

    Args:
        run: ScenarioRun model instance.

    Returns:
        A dictionary with primitive/JSON-serializable values.
    """
    return {
        "id": run.id,
        "scenario": run.scenario,
        "command": run.command,
        "schedule": run.schedule,
        "operator": run.operator_kind,
        "horizon": run.horizon,
        "seed": run.seed,
        "exit_status": run.exit_status,
        "date_created": run.date_created.isoformat() if run.date_created else None,
        "certificates": [_serialize_certificate(record) for record in run.certificates],
    }


def init_ledger():
    """Create the ledger tables (no-op for existing ones)."""
    if not ledger_enabled():
        return {"message": "Ledger disabled (LEDGER_DATABASE_URI is empty)"}, 2
    try:
        db.create_all()
        current_app.logger.info("ledger tables created")
        return {"message": "Tables created successfully"}, 0
    except SQLAlchemyError as err:
        return {"message": f"Database error: {err}"}, 2


def record_run(scenario: Dict[str, Any], command: str, exit_status: int,
               certificates: List[Dict[str, Any]]) -> Optional[int]:
    """Persist one processed scenario.

    Args:
        scenario: ``name``, ``schedule``, ``operator``, ``horizon`` and ``seed``.
        command: the command that processed it.
        exit_status: the scenario's status.
        certificates: certificate payloads as written to ``certificates.json``.

    Returns:
        The new run id, or None when the ledger is disabled or unavailable.
    """
    if not ledger_enabled():
        return None
    try:
        run = ScenarioRun(
            scenario=scenario["name"],
            command=command,
            schedule=scenario["schedule"],
            operator_kind=scenario["operator"],
            horizon=scenario["horizon"],
            seed=scenario["seed"],
            exit_status=exit_status,
            date_created=datetime.datetime.now(),
        )
        for payload in certificates:
            run.certificates.append(CertificateRecord(
                statement=StatementKind(payload["statement"]),
                k=payload["k"],
                f_expr=payload["f"],
                witness=payload["witness"],
                bound=payload["bound"],
                lower_bound=payload["lower_bound"],
                exact=payload["exact"],
                verdict=Verdict(payload["verdict"]),
            ))
        db.session.add(run)
        db.session.commit()
        return run.id
    except KeyError as err:
        db.session.rollback()
        current_app.logger.error("ledger record is missing %s", err)
    except SQLAlchemyError as err:
        db.session.rollback()
        current_app.logger.error("ledger write failed: %s", err)
    return None


def list_runs(scenario: Optional[str] = None):
    """Return all non-deleted runs, newest first, optionally for one scenario."""
    if not ledger_enabled():
        return {"message": "Ledger disabled (LEDGER_DATABASE_URI is empty)"}, 2
    try:
        query = ScenarioRun.query.filter_by(date_deleted=None)
        if scenario:
            query = query.filter_by(scenario=scenario)
        runs = query.order_by(ScenarioRun.id.desc()).all()
        return {"runs": [_serialize_run(run) for run in runs]}, 0
    except SQLAlchemyError as err:
        return {"message": f"Database error: {err}"}, 2
    except Exception as err:  # pylint: disable=broad-except
        return {"message": f"Something went wrong: {err}"}, 2


def soft_delete_run(run_id: int):
    """Soft-delete a run by setting the date_deleted timestamp.

    Args:
        run_id: Primary key of the run.
    """
    if not ledger_enabled():
        return {"message": "Ledger disabled (LEDGER_DATABASE_URI is empty)"}, 2
    try:
        run = db.session.get(ScenarioRun, run_id)
        if not run or run.date_deleted:
            return {"message": "Run not found"}, 2
        run.date_deleted = datetime.datetime.now()
        db.session.commit()
        return {"message": f"Run {run.id} deleted successfully"}, 0
    except SQLAlchemyError as err:
        db.session.rollback()
        return {"message": f"Database error: {err}"}, 2
