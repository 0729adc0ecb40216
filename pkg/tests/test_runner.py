import json
import math

import numpy as np
import pytest

from hermiteflow.runner import (
    DEFAULTS,
    ConfigError,
    emit_config,
    main,
    parse_config,
    run,
)
from hermiteflow.serialization import load_expansion


class TestParseConfig:
    def test_empty_document_lists_required_key(self):
        with pytest.raises(ConfigError, match="command"):
            parse_config("{}")

    def test_syntax_error_reports_position(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config('{\n"command": }')

    def test_unknown_command(self):
        with pytest.raises(ConfigError, match="unknown command"):
            parse_config('{"command": "frobnicate"}')

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys.*bogus"):
            parse_config('{"command": "decay", "bogus": 1}')

    def test_type_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="beta"):
            parse_config('{"command": "decay", "beta": "fast"}')

    def test_defaults_filled_from_table(self):
        cfg = parse_config('{"command": "decay"}')
        for key, default in DEFAULTS["decay"].items():
            assert cfg.params[key] == default
        assert cfg.seed == DEFAULTS["common"]["seed"]

    def test_inf_strings_accepted(self):
        cfg = parse_config('{"command": "smoothing", "q1": "inf"}')
        assert math.isinf(cfg.params["q1"])

    def test_round_trip_is_canonical(self):
        text = '{"command": "decay", "seed": 3, "beta": 2.0, "count": 2}'
        cfg = parse_config(text)
        again = parse_config(emit_config(cfg))
        assert again == cfg
        assert emit_config(again) == emit_config(cfg)

    def test_semantic_guards(self):
        with pytest.raises(ConfigError, match="positive"):
            parse_config('{"command": "decay", "beta": -1.0}')
        with pytest.raises(ConfigError, match="5 time samples"):
            parse_config('{"command": "decay", "samples": 3}')
        with pytest.raises(ConfigError, match="q="):
            parse_config('{"command": "solve", "q": 2.0}')
        with pytest.raises(ConfigError, match="admissibility"):
            parse_config('{"command": "solve", "q": 1.25, "beta": 0.4, "k": 2, "dim": 3}')

    def test_out_of_theory_flag_bypasses_guard(self):
        cfg = parse_config(
            '{"command": "solve", "q": 2.0, "allow_out_of_theory": true}'
        )
        assert cfg.params["q"] == 2.0


class TestRunCommands:
    def run_cfg(self, tmp_path, doc):
        doc = dict(doc)
        doc["output_dir"] = str(tmp_path / "out")
        cfg = parse_config(json.dumps(doc))
        status = run(cfg)
        return status, tmp_path / "out"

    def test_transform_artifacts_round_trip(self, tmp_path):
        status, out = self.run_cfg(
            tmp_path, {"command": "transform", "function": "ground_state"}
        )
        assert status == 0
        e = load_expansion(out / "expansion.hexp")
        j = load_expansion(out / "expansion.json")
        assert np.array_equal(e.coeffs, j.coeffs)
        header = (out / "coefficients.csv").read_text().splitlines()[0]
        assert header == "alpha1,re,im"
        assert (out / "manifest.json").exists()

    def test_semigroup_csv_matches_ground_factor(self, tmp_path):
        status, out = self.run_cfg(
            tmp_path,
            {"command": "semigroup", "function": "ground_state", "times": [0.5, 1.0]},
        )
        assert status == 0
        rows = (out / "semigroup.csv").read_text().splitlines()
        assert rows[0] == "t,l2_norm,ground_factor"
        t, norm, factor = map(float, rows[1].split(","))
        assert norm == pytest.approx(factor, rel=1e-12)

    def test_norm_records_have_contract_keys(self, tmp_path):
        status, out = self.run_cfg(tmp_path, {"command": "norm", "p": "inf"})
        assert status == 0
        records = json.loads((out / "norms.json").read_text())
        assert set(records[0]) == {"p", "q", "s", "order", "value", "grid_hash"}
        assert records[0]["p"] == "inf"

    def test_decay_ground_state_rate_column(self, tmp_path):
        status, out = self.run_cfg(
            tmp_path,
            {"command": "decay", "function": "ground_state", "samples": 21},
        )
        assert status == 0
        rows = (out / "decay.csv").read_text().splitlines()
        assert rows[0].split(",")[-1] == "fitted_rate"
        assert float(rows[1].split(",")[-1]) == pytest.approx(1.0, abs=1e-8)
        summary = json.loads((out / "decay_summary.json").read_text())
        assert summary["passes"]["rate_within_tolerance"]

    def test_solve_artifacts(self, tmp_path):
        status, out = self.run_cfg(
            tmp_path,
            {
                "command": "solve",
                "allow_out_of_theory": True,
                "q": 2.0,
                "snapshot_stride": 20,
            },
        )
        assert status == 0
        rows = (out / "trajectory.csv").read_text().splitlines()
        assert rows[0] == "t,norm,weighted_norm"
        summary = json.loads((out / "solve_summary.json").read_text())
        assert summary["residual"] < 1e-8
        assert (out / "state_00000.hexp").exists()

    def test_blowup_verdict_contains_oracle_time(self, tmp_path):
        status, out = self.run_cfg(
            tmp_path, {"command": "blowup", "a": 1.0, "k": 1, "horizon": 0.5}
        )
        assert status == 0
        verdict = json.loads((out / "blowup_verdict.json").read_text())
        assert verdict["free"]["t_star_ode"] == pytest.approx(0.5)
        assert verdict["free"]["blew_up"] is True

    def test_determinism_byte_identical_csv(self, tmp_path):
        doc = {"command": "decay", "seed": 5, "count": 2, "samples": 11}
        doc["output_dir"] = str(tmp_path / "a")
        assert run(parse_config(json.dumps(doc))) == 0
        doc["output_dir"] = str(tmp_path / "b")
        assert run(parse_config(json.dumps(doc))) == 0
        a = (tmp_path / "a" / "decay.csv").read_bytes()
        b = (tmp_path / "b" / "decay.csv").read_bytes()
        assert a == b

    def test_numerical_failure_status(self, tmp_path):
        # amplitude far beyond the smallness radius: Picard cannot contract
        status, _ = self.run_cfg(
            tmp_path,
            {
                "command": "solve",
                "allow_out_of_theory": True,
                "q": 2.0,
                "amplitude": 50.0,
                "horizon": 0.5,
                "dt": 0.1,
                "picard_max_iters": 5,
            },
        )
        assert status == 3


class TestMain:
    def test_run_via_cli(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "command": "semigroup",
                    "output_dir": str(tmp_path / "out"),
                    "times": [0.5],
                }
            )
        )
        assert main(["run", str(cfg_path)]) == 0

    def test_missing_file_is_io_failure(self):
        assert main(["run", "/nonexistent/config.json"]) == 4

    def test_invalid_config_is_validation_failure(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text('{"command": "decay", "beta": -1}')
        assert main(["run", str(cfg_path)]) == 2

    def test_defaults_table_printed(self, capsys):
        assert main(["defaults"]) == 0
        table = json.loads(capsys.readouterr().out)
        assert set(table) == set(DEFAULTS)
