"""Tests for the experiment module"""

import math
import os
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np

from aind_network_regression.experiment import (
    ConfigError,
    DataError,
    DataSource,
    Experiment,
    ExperimentConfig,
    ReferenceNotConvergedError,
    load_config,
    parse_config_text,
)

TEST_DIRECTORY = Path(os.path.dirname(os.path.realpath(__file__)))
RESOURCES_DIR = TEST_DIRECTORY / "resources"
IDENTITY_CONFIG = RESOURCES_DIR / "identity.cfg"
REPLICATION_CONFIG = RESOURCES_DIR / "replication.cfg"


class TestParseConfig(unittest.TestCase):
    """Tests for parse_config_text and load_config"""

    def test_parse(self):
        """Comments and blank lines are skipped, line numbers kept."""
        values, lines = parse_config_text("# c\n\nm = 6  # agents\nf=l1\n")
        self.assertEqual({"m": "6", "f": "l1"}, values)
        self.assertEqual({"m": 3, "f": 4}, lines)

    def test_parse_errors(self):
        """Lines without '=' and repeated keys are rejected."""
        with self.assertRaises(ConfigError):
            parse_config_text("m 6\n")
        with self.assertRaises(ConfigError) as e:
            parse_config_text("m = 6\nm = 7\n")
        self.assertIn("line 2", str(e.exception))

    def test_load_replication(self):
        """Typed values with defaults; paths resolved next to the file."""
        config = load_config(REPLICATION_CONFIG)
        self.assertEqual(DataSource.GENERATE, config.data)
        self.assertEqual((20, 40, 6), (config.n, config.p, config.m))
        self.assertEqual(0.02, config.lam)
        self.assertEqual(1.9, config.rho)
        self.assertEqual(0.1, config.overlap_fraction)
        self.assertEqual(1, config.probe)
        self.assertEqual(RESOURCES_DIR / "output", config.output_dir)

    def test_bad_rho(self):
        """rho = 2 is rejected naming the key and its line."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.cfg"
            text = REPLICATION_CONFIG.read_text().replace(
                "rho = 1.9", "rho = 2.0"
            )
            path.write_text(text)
            with self.assertRaises(ConfigError) as e:
                load_config(path)
        self.assertIn("rho (line 14)", str(e.exception))

    def test_empty_file(self):
        """Every missing required key is listed at once."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "empty.cfg"
            path.write_text("")
            with self.assertRaises(ConfigError) as e:
                load_config(path)
        message = str(e.exception)
        for key in ("data", "split", "network", "m", "eps", "lambda"):
            self.assertIn(key, message)
        self.assertIn("missing required keys", message)

    def test_unknown_key(self):
        """Typos are not silently ignored."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "typo.cfg"
            path.write_text(REPLICATION_CONFIG.read_text() + "lamda = 1\n")
            with self.assertRaises(ConfigError) as e:
                load_config(path)
        self.assertIn("lamda", str(e.exception))

    def test_missing_conditional_keys(self):
        """Files mode needs both data paths."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "files.cfg"
            text = REPLICATION_CONFIG.read_text().replace(
                "data = generate", "data = files"
            )
            path.write_text(text)
            with self.assertRaises(ConfigError) as e:
                load_config(path)
        self.assertIn("x_path", str(e.exception))

    def test_probe_beyond_m(self):
        """The probe must be one of the agents."""
        with self.assertRaises(ValueError):
            ExperimentConfig.model_validate(
                {
                    "data": "generate",
                    "n": "2",
                    "p": "2",
                    "split": "rows",
                    "network": "random_walk",
                    "m": "2",
                    "f": "l1",
                    "eps": "1",
                    "lambda": "1",
                    "rho": "1",
                    "max_iter": "1",
                    "probe": "3",
                    "output_dir": "out",
                }
            )

    def test_unreadable(self):
        """A missing config file is a configuration error."""
        with self.assertRaises(ConfigError):
            load_config(RESOURCES_DIR / "no_such.cfg")


class TestExperiment(unittest.TestCase):
    """Tests for the Experiment job"""

    def setUp(self):
        """Copy the resources to a scratch directory."""
        self._tmp = tempfile.TemporaryDirectory()
        self.work_dir = Path(self._tmp.name) / "resources"
        shutil.copytree(RESOURCES_DIR, self.work_dir)
        self.config = load_config(self.work_dir / "identity.cfg")

    def tearDown(self):
        """Remove the scratch directory."""
        self._tmp.cleanup()

    def test_run_identity(self):
        """Both agents reach [1.5, 0] and all outputs are written."""
        summary = Experiment(self.config).run_experiment()
        out = self.work_dir / "output"
        self.assertTrue(summary.ledger_ok)
        self.assertEqual(2 * summary.rounds, summary.messages)
        self.assertLess(summary.final_rel_error, 1e-5)
        for name in (
            "trace.csv",
            "agent_estimates.csv",
            "central_beta.csv",
            "ledger.txt",
            "summary.txt",
        ):
            self.assertTrue((out / name).is_file(), name)
        estimates = np.loadtxt(out / "agent_estimates.csv", delimiter=",")
        np.testing.assert_array_equal([1.0, 2.0], estimates[:, 0])
        np.testing.assert_allclose(
            [[1.5, 0.0], [1.5, 0.0]], estimates[:, 1:], atol=1e-5
        )
        central = np.loadtxt(out / "central_beta.csv")
        np.testing.assert_allclose([1.5, 0.0], central, atol=1e-8)
        self.assertEqual(
            summary.line(), (out / "summary.txt").read_text().strip()
        )

    def test_run_central(self):
        """Only the centralized estimate is written."""
        reference = Experiment(self.config).run_central()
        np.testing.assert_allclose([1.5, 0.0], reference.beta, atol=1e-8)
        out = self.work_dir / "output"
        self.assertTrue((out / "central_beta.csv").is_file())
        self.assertFalse((out / "trace.csv").exists())

    def test_missing_data_file(self):
        """Nonexistent data paths are data errors."""
        config = self.config.model_copy(
            update={"x_path": self.work_dir / "missing.csv"}
        )
        with self.assertRaises(DataError):
            Experiment(config).run_experiment()

    def test_network_size_mismatch(self):
        """The network file must have m agents."""
        config = self.config.model_copy(update={"m": 3})
        with self.assertRaises(DataError):
            Experiment(config).build_network()

    def test_uncovered_mask(self):
        """Coverage gaps in the mask file are data errors."""
        masks = self.work_dir / "identity_masks.txt"
        masks.write_text("agent 1 cell 0 0\nagent 1 label 0\n")
        with self.assertRaises(DataError):
            Experiment(self.config).run_experiment()

    def test_reference_not_converged(self):
        """A capped reference solve is reported."""
        config = self.config.model_copy(update={"central_max_iter": 1})
        with self.assertRaises(ReferenceNotConvergedError):
            Experiment(config).run_experiment()

    def test_repeatable_outputs(self):
        """Two runs of one config write byte-identical files."""
        names = (
            Experiment.TRACE_FILE,
            Experiment.ESTIMATES_FILE,
            Experiment.CENTRAL_FILE,
            Experiment.LEDGER_FILE,
            Experiment.SUMMARY_FILE,
        )
        outputs = []
        for run in ("first", "second"):
            config = self.config.model_copy(
                update={
                    "stride": 7,
                    "max_iter": 200,
                    "stop_tol": 0.0,
                    "output_dir": self.work_dir / run,
                }
            )
            summary = Experiment(config).run_experiment()
            out = config.output_dir
            outputs.append({name: (out / name).read_bytes() for name in names})
        self.assertEqual(outputs[0], outputs[1])
        trace_lines = outputs[0][Experiment.TRACE_FILE].decode().splitlines()
        self.assertEqual(1 + math.ceil(summary.rounds / 7), len(trace_lines))
        self.assertTrue(trace_lines[1].startswith("1,"))
        self.assertTrue(trace_lines[2].startswith("8,"))

    def test_generated_pipeline(self):
        """Generated data and random-walk networks feed the simulation."""
        config = load_config(REPLICATION_CONFIG).model_copy(
            update={
                "n": 4,
                "p": 6,
                "m": 3,
                "eps": 0.5,
                "output_dir": self.work_dir / "gen",
            }
        )
        experiment = Experiment(config)
        data = experiment.load_data()
        summands = experiment.split_data(data)
        net = experiment.build_network()
        self.assertEqual((4, 6), data.X.shape)
        self.assertEqual([1, 2, 3], [s.agent for s in summands])
        self.assertEqual(3, net.m)


if __name__ == "__main__":
    unittest.main()
