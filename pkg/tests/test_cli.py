"""
Tests for run configs, the run orchestrator and the command-line front-end.
"""

import asyncio
import json
import os
import shutil
import sys
import tempfile

import pytest
from pydantic import ValidationError

# Add repo root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.cli import main
from src.errors import ConfigError
from src.run_config import RunConfig, Verdict, load_config, parse_config
from src.runner import exit_status, run_config
from src.utils import OUTPUT_DIR_ENV

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'config')

LIOUVILLE_CONFIG = {
    "schema_version": 1,
    "name": "liouville_identities",
    "model": {"key": "liouville"},
    "verification": {"seed": 5, "checks": ["identities", "completeness"], "sample_points": 6},
    "output": {"write_trajectories": False},
}


def _config_path(name):
    return os.path.join(CONFIG_DIR, name)


class TestConfigParsing:
    """JSON parsing and schema validation"""

    def test_invalid_json_reports_line(self):
        """Test malformed JSON carries the offending line"""
        text = '{\n  "schema_version": 1,\n  "model": {"key": "flat_torus"}\n  "name": "x"\n}'
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.line == 4

    def test_schema_error_reports_field(self):
        """Test schema violations carry the dotted field path"""
        raw = {"schema_version": 1, "model": {"key": "flat_torus"}, "integration": {"dt": -1.0, "t_end": 1.0}}
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps(raw))
        assert info.value.field == "integration.dt"

    def test_unknown_model_key(self):
        """Test model keys are checked against the catalog"""
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps({"schema_version": 1, "model": {"key": "klein_bottle"}}))
        assert info.value.field == "model.key"

    def test_unknown_check(self):
        """Test check names are validated"""
        raw = {"schema_version": 1, "model": {"key": "flat_torus"}, "verification": {"checks": ["vibes"]}}
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps(raw))
        assert info.value.field == "verification.checks"

    def test_unsupported_schema_version(self):
        """Test future schema versions are refused"""
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps({"schema_version": 2, "model": {"key": "flat_torus"}}))
        assert info.value.field == "schema_version"

    def test_unknown_fields_forbidden(self):
        """Test stray keys are rejected"""
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps({"schema_version": 1, "model": {"key": "flat_torus"}, "colour": "red"}))
        assert info.value.field == "colour"

    def test_trajectory_checks_need_integration(self):
        """Test conservation without an integration block is a config error"""
        raw = {"schema_version": 1, "model": {"key": "flat_torus"}, "verification": {"checks": ["conservation"]}}
        with pytest.raises(ConfigError):
            parse_config(json.dumps(raw))

    def test_missing_file(self):
        """Test unreadable paths raise ConfigError"""
        with pytest.raises(ConfigError):
            load_config(_config_path("does_not_exist.json"))

    def test_defaults_and_resolved_checks(self):
        """Test default tolerances and catalog checks without integration"""
        config = parse_config(json.dumps({"schema_version": 1, "model": {"key": "ellipsoid"}}))
        assert config.verification.tolerance("conservation") == 1e-6
        assert config.verification.tolerance("constraint") == 1e-10
        assert config.resolved_checks() == ["commutation", "identities"]

    def test_shipped_configs_parse(self):
        """Test every shipped config validates"""
        for name in sorted(os.listdir(CONFIG_DIR)):
            if name.endswith(".json"):
                assert isinstance(load_config(_config_path(name)), RunConfig)


class TestVerdicts:
    """Verdict consistency and exit status"""

    def test_verdict_of(self):
        """Test pass is measured <= threshold"""
        assert Verdict.of("conservation", "conservation:H", 1e-7, 1e-6).passed
        assert not Verdict.of("conservation", "conservation:H", 1e-5, 1e-6).passed

    def test_inconsistent_verdict_rejected(self):
        """Test a verdict cannot claim a pass above its threshold"""
        with pytest.raises(ValidationError):
            Verdict(check="c", label="c", measured=1.0, threshold=0.5, passed=True)


class TestRunner:
    """Orchestrated runs and their artifacts"""

    def setup_method(self):
        """Set up an output directory"""
        self.temp_dir = tempfile.mkdtemp()

    def teardown_method(self):
        """Clean up the output directory"""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    @pytest.mark.asyncio
    async def test_empty_verification(self):
        """Test an empty verification block passes with zero checks"""
        bundle = await run_config(load_config(_config_path("empty_verification.json")), self.temp_dir)
        assert bundle.verdicts == []
        assert bundle.errors == []
        assert exit_status(bundle) == 0
        assert os.path.exists(os.path.join(self.temp_dir, "empty_verification_report.json"))
        assert os.path.exists(os.path.join(self.temp_dir, "empty_verification_run_stamp.json"))

    @pytest.mark.asyncio
    async def test_broken_integral_fails_once(self):
        """Test the declared non-integral is the single failing verdict"""
        bundle = await run_config(load_config(_config_path("ellipsoid_broken_integral.json")), self.temp_dir)
        assert [v.label for v in bundle.failures] == ["conservation:x1"]
        assert exit_status(bundle) == 1
        assert set(bundle.artifacts) == {"trajectory_0", "trajectory_1"}
        with open(os.path.join(self.temp_dir, bundle.artifacts["trajectory_0"]), encoding="utf-8") as fh:
            header = fh.readline().strip()
        assert header.split(",")[-3:] == ["x1", "constraint_residual", "tangency_residual"]

    @pytest.mark.slow
    @pytest.mark.asyncio
    async def test_default_ellipsoid_config_passes(self):
        """Test the shipped ellipsoid run passes every default check"""
        bundle = await run_config(load_config(_config_path("ellipsoid_default.json")), self.temp_dir)
        labels = {v.label for v in bundle.verdicts}
        assert {"conservation:H", "conservation:F1", "constraint", "chasles:tangency_spread"} <= labels
        assert bundle.passed
        assert exit_status(bundle) == 0

    @pytest.mark.asyncio
    async def test_model_errors_are_reported(self):
        """Test builder errors land in the bundle with exit status 2"""
        raw = dict(LIOUVILLE_CONFIG, model={"key": "liouville", "parameters": {"f_kind": "sawtooth"}})
        bundle = await run_config(RunConfig.model_validate(raw), self.temp_dir)
        assert bundle.errors[0]["kind"] == "ParameterError"
        assert exit_status(bundle) == 2

    def test_report_is_deterministic(self):
        """Test two runs with the same seed write byte-identical reports"""
        texts = []
        for sub in ("first", "second"):
            out = os.path.join(self.temp_dir, sub)
            asyncio.run(run_config(RunConfig.model_validate(LIOUVILLE_CONFIG), out))
            with open(os.path.join(out, "liouville_identities_report.json"), encoding="utf-8") as fh:
                texts.append(fh.read())
        assert texts[0] == texts[1]
        report = json.loads(texts[0])
        assert report["seed"] == 5
        assert "timestamp" not in report


class TestCommandLine:
    """Subcommands and exit codes"""

    def setup_method(self):
        """Set up an output directory"""
        self.temp_dir = tempfile.mkdtemp()

    def teardown_method(self):
        """Clean up the output directory"""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_catalog_json_round_trips(self, capsys):
        """Test every listed model becomes a valid run config"""
        assert main(["catalog", "--json"]) == 0
        listing = json.loads(capsys.readouterr().out)
        assert len(listing) == 12
        for entry in listing:
            config = RunConfig.model_validate(
                {"schema_version": 1, "model": {"key": entry["key"], "parameters": entry["parameters"]}})
            assert config.model.key == entry["key"]

    def test_catalog_table(self, capsys):
        """Test the plain listing names every key"""
        assert main(["catalog"]) == 0
        out = capsys.readouterr().out
        assert "ellipsoid" in out and "sol" in out

    def test_verify_sphere(self, monkeypatch, capsys):
        """Test verify runs the non-trajectory default checks"""
        monkeypatch.setenv(OUTPUT_DIR_ENV, self.temp_dir)
        assert main(["verify", "sphere", "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "identity:H_equals_half_F_squared" in out
        assert "completeness:ddim=3,dind=1" in out

    def test_verify_unknown_model(self, monkeypatch):
        """Test an unknown key is a config error"""
        monkeypatch.setenv(OUTPUT_DIR_ENV, self.temp_dir)
        assert main(["verify", "klein_bottle"]) == 2

    def test_verify_bad_tolerance(self):
        """Test --tol needs CHECK=VALUE"""
        assert main(["verify", "sphere", "--tol", "commutation"]) == 2
        assert main(["verify", "sphere", "--tol", "commutation=tight"]) == 2

    def test_run_empty_config(self, monkeypatch):
        """Test run honours the output directory override"""
        monkeypatch.setenv(OUTPUT_DIR_ENV, self.temp_dir)
        assert main(["run", _config_path("empty_verification.json")]) == 0
        assert os.path.exists(os.path.join(self.temp_dir, "empty_verification_report.json"))

    def test_run_broken_config(self, monkeypatch, capsys):
        """Test the negative-control config exits 1 with one failing line"""
        monkeypatch.setenv(OUTPUT_DIR_ENV, self.temp_dir)
        assert main(["run", _config_path("ellipsoid_broken_integral.json")]) == 1
        failing = [line for line in capsys.readouterr().out.splitlines() if line.startswith("❌")]
        assert len(failing) == 1
        assert "conservation:x1" in failing[0]

    def test_entropy_exact(self, capsys):
        """Test the entropy command prints ln of the spectral radius"""
        assert main(["entropy", "2", "1", "1", "1"]) == 0
        assert "0.962424" in capsys.readouterr().out

    def test_entropy_estimate_writes_artifacts(self, monkeypatch):
        """Test --estimate writes JSON and CSV"""
        monkeypatch.setenv(OUTPUT_DIR_ENV, self.temp_dir)
        assert main(["entropy", "1", "1", "0", "1", "--estimate", "--resolution", "128", "--horizon", "3"]) == 0
        assert os.path.exists(os.path.join(self.temp_dir, "entropy.json"))
        assert os.path.exists(os.path.join(self.temp_dir, "entropy.csv"))

    def test_entropy_rejects_bad_matrices(self):
        """Test non-square entry lists and non-unimodular matrices exit 2"""
        assert main(["entropy", "1", "2", "3"]) == 2
        assert main(["entropy", "2", "0", "0", "1"]) == 2

    def test_no_command_prints_help(self, capsys):
        """Test a bare invocation shows usage"""
        assert main([]) == 0
        assert "usage" in capsys.readouterr().out.lower()
