"""Main Flask application setup.

This script loads environment variables based on the current environment,
configures logging, the optional run ledger and the verifier defaults, and
registers the command blueprint.

Run this file directly (or through ``flask --app app``) to use the CLI:
``python app.py run --config scenarios.json``.
"""

import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from flask import Flask
from flask.cli import FlaskGroup

from orm_models import db
from routes.scenario_routes import scenario_bp


# ----------------------------------------------------------------------------
# Environment configuration
# ----------------------------------------------------------------------------

env_name = os.getenv("ENVIRONMENT", "dev")
if env_name == "production":
    load_dotenv(".env.production")
elif env_name == "testing":
    load_dotenv(".env.testing")
else:
    load_dotenv(".env.dev")


def _int_env(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def load_settings() -> Dict[str, Any]:
    """Verifier defaults and ledger settings from the environment."""
    return {
        "PPA_HORIZON": _int_env("PPA_HORIZON", 100_000),
        "PPA_SEED": _int_env("PPA_SEED", 0),
        "PPA_BUDGET_STEPS": _int_env("PPA_BUDGET_STEPS", 1_000_000),
        "PPA_BUDGET_BITS": _int_env("PPA_BUDGET_BITS", 1 << 20),
        "PPA_PROBES": _int_env("PPA_PROBES", 50),
        "PPA_JOBS": _int_env("PPA_JOBS", 1),
        "PPA_OUTPUT_DIR": os.getenv("PPA_OUTPUT_DIR", "reports"),
        "LOG_LEVEL": os.getenv("LOG_LEVEL", "INFO").upper(),
        "LEDGER_DATABASE_URI": os.getenv("LEDGER_DATABASE_URI", "sqlite:///ppa_ledger.db"),
    }


# ----------------------------------------------------------------------------
# Flask app setup
# ----------------------------------------------------------------------------

def create_app(overrides: Optional[Dict[str, Any]] = None) -> Flask:
    """Application factory.

    Args:
        overrides: config values replacing the environment ones (tests).
    """
    app = Flask(__name__)
    app.config.update(load_settings())
    app.config.update(overrides or {})

    # logs go to stderr; stdout carries the JSON payloads
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    app.logger.setLevel(app.config["LOG_LEVEL"])
    logging.getLogger("ppa").setLevel(app.config["LOG_LEVEL"])

    # the ledger is optional; an empty URI disables it
    uri = app.config["LEDGER_DATABASE_URI"]
    app.config["LEDGER_ENABLED"] = bool(uri)
    if uri:
        app.config["SQLALCHEMY_DATABASE_URI"] = uri
        app.config["SQLALCHEMY_TRACK_MODIFICATIONS"] = False
        db.init_app(app)

    # ------------------------------------------------------------------------
    # Register blueprints
    # ------------------------------------------------------------------------
    app.register_blueprint(scenario_bp)
    return app


cli = FlaskGroup(create_app=create_app, add_default_commands=False,
                 help="Multi-parameter proximal point verifier.")

if __name__ == "__main__":
    cli()
