"""Application entry-point for ledger initialization.

This script ensures that the run ledger tables defined in the ORM models
exist (no-op when they already do). Requires ``LEDGER_DATABASE_URI``.
"""

import sys

from app import create_app
from controllers.ledger_controller import init_ledger

app = create_app()

# Ensure the database operations run within the Flask application context.
with app.app_context():
    payload, status = init_ledger()
    app.logger.info(payload["message"])

sys.exit(status)
