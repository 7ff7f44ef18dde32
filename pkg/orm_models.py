"""SQLAlchemy ORM models for the run ledger.

This module defines the ledger entities:
- ScenarioRun: one scenario processed by a ``run`` or ``audit`` command.
- CertificateRecord: one certified statement of a run.

Notes:
- Soft deletes are supported via the nullable ``date_deleted`` field.
- Bounds are stored as decimal strings; they routinely exceed any integer
  column type.
"""

import datetime  # stdlib
from flask_sqlalchemy import SQLAlchemy  # third-party
from sqlalchemy import Enum  # third-party
from utils.types_enum import StatementKind, Verdict  # local

db = SQLAlchemy()


class BaseModel(db.Model):
    """Abstract base model with common primary key and timestamps.

    Attributes:
        id: Surrogate integer primary key.
        date_created: Creation timestamp (server-side default).
        date_deleted: Soft-delete timestamp (null means active).
    """

    __abstract__ = True

    id = db.Column(db.Integer, primary_key=True)

    date_created = db.Column(db.DateTime, default=datetime.datetime.now)

    # Null when active; set to a timestamp to "soft delete" records.
    date_deleted = db.Column(db.DateTime, nullable=True, default=None)


class ScenarioRun(BaseModel):
    """A scenario processed by one command invocation.

    Attributes:
        scenario: Scenario name from the config.
        command: ``run`` or ``audit``.
        schedule: Schedule catalog name.
        operator_kind: Operator catalog name.
        horizon: Index of the last iterate.
        seed: Probe and audit seed.
        exit_status: 0 success, 1 verification failure.
        certificates: One-to-many: certificates issued by the run.
    """

    __tablename__ = "scenario_run"

    scenario = db.Column(db.String(255), nullable=False)
    command = db.Column(db.String(32), nullable=False)
    schedule = db.Column(db.String(64), nullable=False)
    operator_kind = db.Column(db.String(64), nullable=False)
    horizon = db.Column(db.Integer, nullable=False)
    seed = db.Column(db.Integer, nullable=False)
    exit_status = db.Column(db.Integer, nullable=False)

    certificates = db.relationship(
        "CertificateRecord",
        back_populates="run",
        lazy=True,
        cascade="all, delete-orphan",
        order_by="CertificateRecord.id",
    )


class CertificateRecord(BaseModel):
    """A certificate as written to ``certificates.json``.

    Attributes:
        statement: Statement kind.
        k: Precision parameter.
        f_expr: Counter-function expression.
        witness: Smallest witness found, null beyond the horizon.
        bound: Decimal bound, or ``budget-exceeded``.
        lower_bound: Decimal proven lower bound.
        exact: Whether the bound was computed within budget.
        verdict: Outcome.
    """

    __tablename__ = "certificate_record"

    run_id = db.Column(
        db.Integer,
        db.ForeignKey("scenario_run.id", ondelete="CASCADE"),
        nullable=False,
    )
    statement = db.Column(Enum(StatementKind), nullable=False)
    k = db.Column(db.Integer, nullable=False)
    f_expr = db.Column(db.Text, nullable=False)
    witness = db.Column(db.Integer, nullable=True)
    bound = db.Column(db.Text, nullable=False)
    lower_bound = db.Column(db.Text, nullable=False)
    exact = db.Column(db.Boolean, nullable=False)
    verdict = db.Column(Enum(Verdict), nullable=False)

    run = db.relationship("ScenarioRun", back_populates="certificates")
