"""
Scenario command routing module.

Maps CLI commands to the corresponding scenario and ledger controller
functions. The blueprint registers its commands at the top level of the
application's command group (``cli_group=None``).
"""

import sys

import click
from flask import Blueprint

from controllers.ledger_controller import init_ledger, list_runs, soft_delete_run
from controllers.scenario_controller import execute
from utils.report_io import dumps

scenario_bp = Blueprint("scenario", __name__, cli_group=None)


def _respond(payload, status: int) -> None:
    """Print a controller payload as canonical JSON and exit with its status."""
    click.echo(dumps(payload), nl=False)
    sys.exit(status)


def scenario_options(command):
    """Flags shared by the scenario commands."""
    options = [
        click.option("--config", "config", required=True,
                     type=click.Path(dir_okay=False),
                     help="JSON file with one scenario or {\"scenarios\": [...]}."),
        click.option("--horizon", type=int, default=None,
                     help="Index of the last iterate (overrides the config)."),
        click.option("--seed", type=int, default=None,
                     help="Seed of the probes and audit samples."),
        click.option("--budget", type=int, default=None,
                     help="Step budget of each bound evaluation."),
        click.option("--budget-bits", "budget_bits", type=int, default=None,
                     help="Bit-length budget of each bound evaluation."),
        click.option("--out", type=click.Path(file_okay=False), default=None,
                     help="Output directory."),
        click.option("--jobs", type=click.IntRange(min=1), default=None,
                     help="Scenarios processed concurrently."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@scenario_bp.cli.command("run")
@scenario_options
def run(**options):
    """
    Run the exact and inexact iterations, certify every statement and audit.

    Exit status 0 when nothing was violated, 1 on a violated statement or
    failed audit, 2 on an invalid config or I/O error.
    """
    _respond(*execute("run", options))


@scenario_bp.cli.command("bounds")
@scenario_options
def bounds(**options):
    """
    Evaluate the bounds of every statement with their derivation traces.

    No trajectories are computed.
    """
    _respond(*execute("bounds", options))


@scenario_bp.cli.command("audit")
@scenario_options
def audit(**options):
    """
    Run the property audit of every scenario and the synthetic suites.
    """
    _respond(*execute("audit", options))


@scenario_bp.cli.command("validate")
@scenario_options
def validate(**options):
    """
    Check the schedule conditions of every scenario on its horizon.
    """
    _respond(*execute("validate", options))


@scenario_bp.cli.command("init-ledger")
def init_ledger_command():
    """
    Create the run ledger tables (no-op when they exist).
    """
    _respond(*init_ledger())


@scenario_bp.cli.command("history")
@click.option("--scenario", default=None, help="Only runs of this scenario.")
@click.option("--forget", type=int, default=None, help="Soft-delete the run with this id.")
def history(scenario, forget):
    """
    List recorded runs, newest first, or forget one of them.
    """
    if forget is not None:
        _respond(*soft_delete_run(forget))
    _respond(*list_runs(scenario))
