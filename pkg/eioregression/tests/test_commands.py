import csv
import io
import json
import tempfile
from pathlib import Path
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from eioregression.config import parse_config
from eioregression.exceptions import InvalidHyperparams, SingularSystem
from eioregression.management.commands.eio import Command as EioCommand
from eioregression.services import Command, ExperimentService, run_command

SMALL_CONFIG = {
    "design": {"kind": "gaussian", "d": 3, "spectrum": [1.0, 0.5, 0.25], "theta_circ": [1.0, 0.5, 0.25], "noise_std": 0.1},
    "hyper": {"mu": 10.0, "lambda": 0.01},
    "plan": {
        "n_grid": [30],
        "lambda_grid": [0.01, 0.1],
        "mu_grid": [1.0, 10.0, "inf"],
        "tau_grid": [0.1, 1.0],
        "replicates": 2,
    },
    "n": 30,
    "seed": 4,
    "workers": 1,
}


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@override_settings(EIO_OUT_DIR="", EIO_WORKERS=1)
class EioCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.config = self.tmp / "run.json"
        self.config.write_text(json.dumps(SMALL_CONFIG), encoding="utf-8")

    def tearDown(self):
        self._tmp.cleanup()

    def run_eio(self, *args):
        out = io.StringIO()
        call_command("eio", *args, stdout=out)
        return out.getvalue()

    def test_fit_writes_csv_and_manifest(self):
        out_dir = self.tmp / "fit"
        output = self.run_eio("fit", "--config", str(self.config), "--out", str(out_dir))
        rows = read_rows(out_dir / "fit.csv")
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["experiment"], "fit")
        self.assertEqual(rows[0]["n"], "30")
        self.assertIn(rows[0]["converged"], ("true", "false"))
        self.assertGreaterEqual(float(rows[0]["excess_risk"]), 0.0)
        manifest = json.loads((out_dir / "fit.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["command"], "fit")
        self.assertEqual(manifest["seed"], 4)
        self.assertEqual(manifest["outputs"], ["fit.csv"])
        self.assertIn("wrote", output)

    def test_manifest_rerun_reproduces_bytes(self):
        first = self.tmp / "first"
        second = self.tmp / "second"
        self.run_eio("ratio-bias", "--config", str(self.config), "--out", str(first))
        manifest = first / "ratio-bias.manifest.json"
        self.run_eio("ratio-bias", "--config", str(manifest), "--out", str(second))
        self.assertEqual((first / "ratio-bias.csv").read_bytes(), (second / "ratio-bias.csv").read_bytes())

    def test_ratio_bias_covers_the_grid(self):
        out_dir = self.tmp / "bias"
        self.run_eio("ratio-bias", "--config", str(self.config), "--out", str(out_dir))
        rows = read_rows(out_dir / "ratio-bias.csv")
        self.assertEqual(len(rows), 3 * 2)
        self.assertEqual({row["mu"] for row in rows}, {"1", "10", "inf"})
        for row in rows:
            if row["mu"] == "inf":
                self.assertAlmostEqual(float(row["ratio_mean"]), 1.0, delta=1e-12)

    def test_flags_override_config(self):
        out_dir = self.tmp / "flags"
        self.run_eio("fit", "--config", str(self.config), "--out", str(out_dir), "--mu", "inf", "--n", "40", "--seed", "9")
        row = read_rows(out_dir / "fit.csv")[0]
        self.assertEqual(row["mu"], "inf")
        self.assertEqual(row["n"], "40")
        self.assertEqual(row["iterations"], "1")
        manifest = json.loads((out_dir / "fit.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["config"]["seed"], 9)
        self.assertEqual(manifest["config"]["hyper"]["mu"], "inf")

    def test_grid_search_writes_best_row(self):
        out_dir = self.tmp / "grid"
        self.run_eio("grid-search", "--config", str(self.config), "--out", str(out_dir), "--estimator", "plugin")
        table = read_rows(out_dir / "grid-search.csv")
        best = read_rows(out_dir / "grid-search.best.csv")
        self.assertEqual(len(table), 2)
        self.assertEqual(len(best), 1)
        self.assertEqual(min(float(row["risk_mean"]) for row in table), float(best[0]["risk_mean"]))

    def test_invalid_config_exits_one(self):
        self.config.write_text('{"design": {"d": 0}}', encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self.run_eio("fit", "--config", str(self.config), "--out", str(self.tmp / "x"))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("dim must be ≥ 1", str(ctx.exception))

    def test_malformed_config_exits_one(self):
        self.config.write_text('{"seed": }', encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self.run_eio("fit", "--config", str(self.config))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("line 1", str(ctx.exception))

    def test_missing_config_exits_one(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_eio("fit", "--config", str(self.tmp / "absent.json"))
        self.assertEqual(ctx.exception.returncode, 1)

    @patch("eioregression.services.ExperimentService.run")
    def test_domain_failure_exits_one(self, mock_run):
        mock_run.side_effect = SingularSystem("Gram matrix is singular")
        with self.assertLogs("eioregression.services", level="ERROR") as logs:
            with self.assertRaises(CommandError) as ctx:
                self.run_eio("fit", "--config", str(self.config), "--out", str(self.tmp / "x"))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("fit failed: Gram matrix is singular", logs.output[0])
        mock_run.assert_called_once()

    @patch("eioregression.management.commands.eio.run_command", wraps=run_command)
    def test_command_runs_through_run_command(self, mock_run_command):
        output = self.run_eio("fit", "--config", str(self.config), "--out", str(self.tmp / "routed"))
        mock_run_command.assert_called_once()
        self.assertEqual(mock_run_command.call_args.args[0], Command.FIT)
        self.assertIn("fit: 1 rows", output)

    def test_unknown_subcommand_is_usage_error(self):
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit) as ctx:
                EioCommand().run_from_argv(["manage.py", "eio", "no-such-experiment"])
        self.assertEqual(ctx.exception.code, 2)

    def test_unknown_option_is_usage_error(self):
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit) as ctx:
                EioCommand().run_from_argv(["manage.py", "eio", "fit", "--no-such-flag"])
        self.assertEqual(ctx.exception.code, 2)


@override_settings(EIO_OUT_DIR="", EIO_WORKERS=1)
class RunCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def config(self, out_dir):
        return parse_config(text=json.dumps(SMALL_CONFIG), flags={"out": str(out_dir)})

    def test_success_returns_zero(self):
        self.assertEqual(run_command(Command.FIT, self.config(self.tmp / "ok")), 0)
        self.assertTrue((self.tmp / "ok" / "fit.csv").exists())

    @patch("eioregression.services.experiments.single_fit")
    def test_domain_error_returns_one(self, mock_fit):
        mock_fit.side_effect = InvalidHyperparams("mu must be positive")
        with self.assertLogs("eioregression.services", level="ERROR"):
            self.assertEqual(run_command(Command.FIT, self.config(self.tmp / "bad")), 1)

    def test_unwritable_output_returns_one(self):
        blocker = self.tmp / "blocker"
        blocker.write_text("", encoding="utf-8")
        with self.assertLogs("eioregression.services", level="ERROR"):
            self.assertEqual(run_command(Command.FIT, self.config(blocker)), 1)

    def test_service_result_lists_outputs(self):
        result = ExperimentService.run(Command.RIDGE_COMPARE, self.config(self.tmp / "ridge"))
        self.assertEqual([path.name for path in result.outputs], ["ridge-compare.csv"])
        self.assertEqual(result.manifest.name, "ridge-compare.manifest.json")
        rows = read_rows(result.outputs[0])
        self.assertEqual(result.rows, len(rows))
        self.assertEqual(
            [row["experiment"] for row in rows[:3]],
            ["ridge-compare/eio", "ridge-compare/ridge", "ridge-compare/difference"],
        )
