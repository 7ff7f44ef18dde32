"""Unit tests for scenario config parsing.

This module checks that valid configs become :class:`ScenarioConfig`
objects, that every offending field is reported with its path, and that
command-line overrides and serialization behave.
"""

import json
import os
import tempfile
import unittest

from controllers.config_controller import (
    apply_overrides,
    config_to_dict,
    load_config,
    parse_config,
)
from ppa.counterfn import ID, AffinePoly
from ppa.errors import ConfigError
from utils.types_enum import ErrorMode, StatementKind

SCENARIO = {
    "name": "s1-identity",
    "operator": {"kind": "scaled_identity", "a": 1.0},
    "u": [0.0],
    "z0": [4.0],
    "schedule": "S1",
    "horizon": 300,
    "statements": [
        {"kind": "cauchy_y", "k": 2, "f": "(affine 2 1)"},
        {"kind": "theta_rate", "k": 0},
    ],
}


def paths_of(error):
    """The diagnostic paths of a ConfigError."""
    return [item["path"] for item in error.diagnostics]


class TestParseConfig(unittest.TestCase):
    """Test suite for parse_config."""

    def test_single_scenario(self):
        """Test a minimal valid scenario with defaults filled in."""
        (config,) = parse_config(json.dumps(SCENARIO), {"seed": 7})
        self.assertEqual(config.name, "s1-identity")
        self.assertEqual(config.dim, 1)
        self.assertEqual(config.horizon, 300)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.statements[0].kind, StatementKind.CAUCHY_Y)
        self.assertEqual(config.statements[0].f, AffinePoly((2, 1)))
        self.assertEqual(config.statements[1].f, ID)

    def test_scenario_list(self):
        """Test the list form and generated names."""
        second = {key: value for key, value in SCENARIO.items() if key != "name"}
        configs = parse_config(json.dumps({"scenarios": [SCENARIO, second]}))
        self.assertEqual([c.name for c in configs], ["s1-identity", "scenario1"])

    def test_moduli_and_direction(self):
        """Test moduli replacements and the error direction."""
        data = dict(SCENARIO, u=[0.0, 0.0], z0=[1.0, 2.0], schedule="S2",
                    operator={"kind": "zero"}, direction=[3.0, 4.0],
                    moduli={"h": "(affine 1 3)", "c": 20, "err_mode": "Q5a"})
        (config,) = parse_config(json.dumps(data))
        self.assertEqual(config.moduli["h"], AffinePoly((1, 3)))
        self.assertEqual(config.moduli["c"], 20)
        self.assertIs(config.moduli["err_mode"], ErrorMode.SUMMABLE_Q5A)
        self.assertEqual(config.direction, (3.0, 4.0))

    def test_invalid_json(self):
        """Test that malformed text is one diagnostic at the root."""
        with self.assertRaises(ConfigError) as ctx:
            parse_config("{not json")
        self.assertEqual(paths_of(ctx.exception), ["$"])

    def test_all_field_errors_are_collected(self):
        """Test that several bad fields are reported together."""
        data = dict(SCENARIO, horizon=0, colour="red", u="zero",
                    statements=[{"kind": "nope", "k": 1}, {"kind": "cauchy_z"}])
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(data))
        paths = paths_of(ctx.exception)
        for expected in ("colour", "horizon", "u", "statements[0].kind", "statements[1].k"):
            self.assertIn(expected, paths)

    def test_bad_counter_function(self):
        """Test that a malformed expression names its field."""
        data = dict(SCENARIO, statements=[{"kind": "cauchy_y", "k": 0, "f": "(add id)"}])
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(data))
        self.assertEqual(paths_of(ctx.exception), ["statements[0].f"])

    def test_unknown_catalog_names(self):
        """Test unknown schedules and operators."""
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(dict(SCENARIO, schedule="S9")))
        self.assertEqual(paths_of(ctx.exception), ["schedule"])
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(dict(SCENARIO, operator={"kind": "nope"})))
        self.assertEqual(paths_of(ctx.exception), ["operator.kind"])
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(dict(SCENARIO, operator={"a": 1.0})))
        self.assertEqual(paths_of(ctx.exception), ["operator"])

    def test_dimension_mismatch(self):
        """Test that u and z0 must agree."""
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps(dict(SCENARIO, z0=[1.0, 2.0])))
        self.assertIn("z0", paths_of(ctx.exception))

    def test_duplicate_names(self):
        """Test that scenario names must be unique."""
        with self.assertRaises(ConfigError) as ctx:
            parse_config(json.dumps({"scenarios": [SCENARIO, SCENARIO]}))
        self.assertEqual(paths_of(ctx.exception), ["scenarios"])
        with self.assertRaises(ConfigError):
            parse_config(json.dumps({"scenarios": []}))

    def test_round_trip(self):
        """Test that a serialized config parses back to the same scenario."""
        data = dict(SCENARIO, moduli={"c": 20, "E": "(const 3)"}, budget={"steps": 5000},
                    constants={"D": 10})
        (config,) = parse_config(json.dumps(data))
        (again,) = parse_config(json.dumps(config_to_dict(config)))
        self.assertEqual(again, config)


class TestOverridesAndFiles(unittest.TestCase):
    """Test suite for overrides and config files."""

    def test_overrides(self):
        """Test that None is ignored and out-of-range values are refused."""
        (config,) = parse_config(json.dumps(SCENARIO))
        changed = apply_overrides(config, horizon=50, seed=None, budget_steps=10)
        self.assertEqual((changed.horizon, changed.seed, changed.budget_steps),
                         (50, config.seed, 10))
        with self.assertRaises(ConfigError) as ctx:
            apply_overrides(config, horizon=0, budget_bits=8)
        self.assertEqual(paths_of(ctx.exception), ["--budget-bits", "--horizon"])

    def test_load_config(self):
        """Test reading a file and a missing file."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "scenario.json")
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(SCENARIO, handle)
            self.assertEqual(load_config(path)[0].name, "s1-identity")
            with self.assertRaises(ConfigError) as ctx:
                load_config(os.path.join(tmp, "missing.json"))
            self.assertIn("cannot read config", ctx.exception.diagnostics[0]["message"])


if __name__ == "__main__":
    unittest.main()
