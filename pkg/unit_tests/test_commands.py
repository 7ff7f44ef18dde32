"""Unit tests for the command-line surface.

This module drives the commands through Flask's CLI test runner with an
in-memory SQLite ledger and a temporary output directory.

Each test validates the exit status, the JSON payload printed on stdout
and the files written for:
- run / bounds / audit / validate
- init-ledger / history
"""

import json
import os
import shutil
import tempfile
import unittest

from app import create_app

BUDGET = ["--budget", "20000", "--budget-bits", "4096"]

SCENARIO = {
    "name": "s1-identity",
    "operator": {"kind": "scaled_identity", "a": 1.0},
    "u": [0.0],
    "z0": [4.0],
    "schedule": "S1",
    "horizon": 200,
    "probes": 6,
    "statements": [
        {"kind": "cauchy_y", "k": 1, "f": "(affine 2 2)"},
        {"kind": "smallness", "k": 0, "f": "id"},
        {"kind": "theta_rate", "k": 0},
    ],
}


def payload_of(result):
    """The JSON payload of a command, skipping any log lines before it."""
    text = result.output
    return json.loads(text[text.index("{\n"):])


class CommandTestCase(unittest.TestCase):
    """Fresh app, ledger and output directory per test."""

    ledger_uri = "sqlite:///:memory:"

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.out = os.path.join(self.tmp, "out")
        self.app = create_app({
            "LEDGER_DATABASE_URI": self.ledger_uri,
            "LOG_LEVEL": "CRITICAL",
            "PPA_OUTPUT_DIR": self.out,
        })
        self.runner = self.app.test_cli_runner()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def write_config(self, data, name="scenarios.json"):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(data, handle)
        return path

    def invoke(self, *args):
        return self.runner.invoke(args=list(args))


class TestScenarioCommands(CommandTestCase):
    """Test suite for run, bounds, audit and validate."""

    def test_run_writes_reports(self):
        """Test a passing run and the files it leaves behind."""
        config = self.write_config(SCENARIO)
        result = self.invoke("run", "--config", config, *BUDGET)
        self.assertEqual(result.exit_code, 0, result.output)
        payload = payload_of(result)
        self.assertEqual(payload["status"], 0)
        (scenario,) = payload["scenarios"]
        self.assertTrue(scenario["audit_passed"])
        verdicts = {c["statement"]: c["verdict"] for c in scenario["certificates"]}
        self.assertEqual(verdicts["theta_rate"], "Certified")
        self.assertNotIn("Violated", verdicts.values())

        directory = os.path.join(self.out, "s1-identity")
        for name in ("certificates.json", "audit.json", "summary.txt", "timings.json",
                     "trajectory_y.csv", "trajectory_z.csv", "aux_probe_0.csv"):
            self.assertTrue(os.path.isfile(os.path.join(directory, name)), name)
        with open(os.path.join(directory, "certificates.json"), encoding="utf-8") as handle:
            report = json.load(handle)
        self.assertEqual(report["constants"]["d"], "9")
        self.assertIn("smallness(k=0, f=id)", report["projection_search"])
        with open(os.path.join(directory, "summary.txt"), encoding="utf-8") as handle:
            self.assertIn("scenario: s1-identity", handle.read())

    def test_horizon_override(self):
        """Test that --horizon replaces the config value."""
        config = self.write_config(SCENARIO)
        result = self.invoke("run", "--config", config, "--horizon", "60", *BUDGET)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(payload_of(result)["scenarios"][0]["scenario"]["horizon"], 60)
        path = os.path.join(self.out, "s1-identity", "trajectory_y.csv")
        with open(path, encoding="utf-8") as handle:
            self.assertEqual(len(handle.read().splitlines()), 62)

    def test_bounds(self):
        """Test bounds without runs, including the coupling rate table."""
        config = self.write_config(SCENARIO)
        result = self.invoke("bounds", "--config", config, *BUDGET)
        self.assertEqual(result.exit_code, 0, result.output)
        payload = payload_of(result)
        rates = payload["scenarios"][0]["Theta"]
        self.assertEqual(sorted(rates), [str(k) for k in range(7)])
        # L(0 + ceil(ln 27)) + 1 = ceil(3e^4) + 1
        self.assertEqual(rates["0"]["bound"], "165")
        self.assertTrue(os.path.isfile(os.path.join(self.out, "s1-identity", "bounds.json")))
        bounds = payload["scenarios"][0]["bounds"]
        self.assertIn("trace", bounds["cauchy_y(k=1, f=(affine 2 2))"])

    def test_audit(self):
        """Test the scenario audit together with the synthetic suites."""
        config = self.write_config(SCENARIO)
        result = self.invoke("audit", "--config", config, *BUDGET)
        self.assertEqual(result.exit_code, 0, result.output)
        payload = payload_of(result)
        self.assertTrue(payload["synthetic_audit_passed"])
        self.assertTrue(os.path.isfile(os.path.join(self.out, "synthetic_audit.json")))
        self.assertTrue(os.path.isfile(os.path.join(self.out, "s1-identity", "audit.json")))

    def test_validate(self):
        """Test a passing schedule and one whose step constant is too small."""
        bad = dict(SCENARIO, name="small-c", moduli={"c": 2})
        config = self.write_config({"scenarios": [SCENARIO, bad]})
        result = self.invoke("validate", "--config", config, "--jobs", "2")
        self.assertEqual(result.exit_code, 1, result.output)
        statuses = {s["scenario"]["name"]: s["status"] for s in payload_of(result)["scenarios"]}
        self.assertEqual(statuses, {"s1-identity": 0, "small-c": 1})

    def test_run_refuses_failing_conditions(self):
        """Test that run treats failed conditions as a config error."""
        config = self.write_config(dict(SCENARIO, moduli={"c": 2}))
        result = self.invoke("run", "--config", config, *BUDGET)
        self.assertEqual(result.exit_code, 2, result.output)
        (scenario,) = payload_of(result)["scenarios"]
        self.assertEqual(scenario["diagnostics"][0]["path"], "s1-identity.schedule")

    def test_invalid_config(self):
        """Test diagnostics for a broken config and a missing file."""
        config = self.write_config(dict(SCENARIO, horizon=-1))
        result = self.invoke("run", "--config", config)
        self.assertEqual(result.exit_code, 2, result.output)
        self.assertEqual(payload_of(result)["diagnostics"][0]["path"], "horizon")
        result = self.invoke("bounds", "--config", os.path.join(self.tmp, "missing.json"))
        self.assertEqual(result.exit_code, 2, result.output)

    def test_bad_override(self):
        """Test that an out-of-range override is a config error."""
        config = self.write_config(SCENARIO)
        result = self.invoke("bounds", "--config", config, "--budget-bits", "3")
        self.assertEqual(result.exit_code, 2, result.output)
        self.assertEqual(payload_of(result)["diagnostics"][0]["path"], "--budget-bits")


class TestLedgerCommands(CommandTestCase):
    """Test suite for init-ledger and history."""

    def test_history_lifecycle(self):
        """Test recording, listing and forgetting a run."""
        self.assertEqual(self.invoke("init-ledger").exit_code, 0)
        config = self.write_config(SCENARIO)
        self.assertEqual(self.invoke("run", "--config", config, *BUDGET).exit_code, 0)

        result = self.invoke("history")
        self.assertEqual(result.exit_code, 0, result.output)
        (run,) = payload_of(result)["runs"]
        self.assertEqual((run["scenario"], run["command"], run["exit_status"]),
                         ("s1-identity", "run", 0))
        self.assertEqual(len(run["certificates"]), 3)
        self.assertEqual(payload_of(self.invoke("history", "--scenario", "other"))["runs"], [])

        self.assertEqual(self.invoke("history", "--forget", str(run["id"])).exit_code, 0)
        self.assertEqual(payload_of(self.invoke("history"))["runs"], [])
        self.assertEqual(self.invoke("history", "--forget", str(run["id"])).exit_code, 2)

    def test_validate_is_not_recorded(self):
        """Test that only run and audit reach the ledger."""
        self.invoke("init-ledger")
        config = self.write_config(SCENARIO)
        self.invoke("validate", "--config", config)
        self.assertEqual(payload_of(self.invoke("history"))["runs"], [])


class TestLedgerDisabled(CommandTestCase):
    """Test suite for commands without a ledger database."""

    ledger_uri = ""

    def test_ledger_commands_report_disabled(self):
        """Test that ledger commands exit 2 and scenario commands still work."""
        result = self.invoke("history")
        self.assertEqual(result.exit_code, 2)
        self.assertIn("Ledger disabled", payload_of(result)["message"])
        self.assertEqual(self.invoke("init-ledger").exit_code, 2)
        config = self.write_config(SCENARIO)
        self.assertEqual(self.invoke("validate", "--config", config).exit_code, 0)


if __name__ == "__main__":
    unittest.main()
