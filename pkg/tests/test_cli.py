import json
import math
import os

import numpy as np
import pytest

from hyperadams.cli import main
from hyperadams.config import (
    ExperimentConfig,
    load_config,
    parse_config_text,
    validate_config,
)
from hyperadams.errors import ConfigError
from hyperadams.reporting import ExperimentReport, csv_body, format_cell


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_basic_parse(self):
        raw = parse_config_text("experiment = constants\nk_max = 3 # inline\n")
        assert raw == {"experiment": "constants", "k_max": "3"}

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("a = 1\na = 2\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_text("experiment constants\n")

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            validate_config({"experiment": "frobnicate"})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            validate_config({"experiment": "constants", "k_maximum": "8"})

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="missing required"):
            validate_config({"experiment": "blowup", "beta_list": "1.0"})

    def test_range_checks(self):
        with pytest.raises(ConfigError):
            validate_config(
                {"experiment": "blowup", "k": "1", "beta_list": "-2.0", "m_list": "100"}
            )

    def test_lists_parsed(self):
        cfg = validate_config(
            {
                "experiment": "blowup",
                "k": "1",
                "beta_list": "1.0, 2.0",
                "m_list": "100, 1000",
            }
        )
        assert cfg.params["beta_list"] == (1.0, 2.0)
        assert cfg.params["m_list"] == (100, 1000)

    def test_canonical_round_trip(self):
        cfg = validate_config(
            {
                "experiment": "sobolev-asymptotics",
                "k": "1",
                "m_list": "100, 1000",
                "seed": "5",
            }
        )
        echo = cfg.canonical()
        raw = {
            k: ", ".join(str(x) for x in v) if isinstance(v, tuple) else str(v)
            for k, v in echo.items()
        }
        again = validate_config(raw)
        assert again == cfg


class TestReporting:
    def test_format_cell(self):
        assert format_cell(True) == "true"
        assert format_cell(3) == "3"
        assert format_cell(0.5) == "5.0000000000000000e-01"
        assert format_cell("abc") == "abc"

    def test_csv_shape(self):
        rep = ExperimentReport(
            experiment="demo",
            config_echo={"experiment": "demo"},
            columns=["a", "b"],
            rows=[(1, 2.0), (3, 4.0)],
        )
        text = rep.csv_text()
        lines = text.splitlines()
        assert lines[0].startswith("# generated ")
        assert lines[1] == "a,b"
        assert len(lines) == 4
        assert text.endswith("\n")

    def test_atomic_write_and_body(self, tmp_path):
        rep = ExperimentReport(
            experiment="demo",
            config_echo={},
            columns=["x"],
            rows=[(1.0,)],
        )
        csv_path, json_path = rep.write(str(tmp_path))
        assert os.path.exists(csv_path) and os.path.exists(json_path)
        body = csv_body(csv_path)
        assert body.startswith(b"x\n")
        payload = json.loads(open(json_path).read())
        assert payload["experiment"] == "demo"
        assert not [p for p in os.listdir(tmp_path) if p.startswith(".tmp_report_")]


class TestCLI:
    def test_malformed_config_exit_2_no_output(self, tmp_path, capsys):
        cfg = write(tmp_path, "bad.cfg", "experiment = blowup\nbeta_list = 1.0\n")
        out = tmp_path / "out"
        code = main(["run", cfg, "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_constants_contains_first_order_row(self, tmp_path):
        cfg = write(tmp_path, "c.cfg", "experiment = constants\nk_max = 6\n")
        code = main(["run", cfg, "--out", str(tmp_path)])
        assert code == 0
        body = csv_body(str(tmp_path / "constants.csv")).decode()
        target = f"{4 * math.pi:.16e}"
        assert any(
            line.startswith("beta0_critical,1,2,") and target in line
            for line in body.splitlines()
        )

    def test_determinism_byte_identical_bodies(self, tmp_path):
        cfg = write(
            tmp_path,
            "ineq.cfg",
            "experiment = inequalities\nn_profiles = 10\nk_max = 2\nseed = 9\n"
            "n_elements = 10\npoly_degree = 5\n",
        )
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", cfg, "--out", str(out1)]) == 0
        assert main(["run", cfg, "--out", str(out2)]) == 0
        assert csv_body(str(out1 / "inequalities.csv")) == csv_body(
            str(out2 / "inequalities.csv")
        )

    def test_config_echo_reparses_equal(self, tmp_path):
        cfg_path = write(
            tmp_path,
            "s.cfg",
            "experiment = sobolev-asymptotics\nk = 1\nm_list = 100, 1000\n",
        )
        assert main(["run", cfg_path, "--out", str(tmp_path)]) == 0
        payload = json.loads(open(tmp_path / "sobolev-asymptotics.json").read())
        echo = payload["config"]
        raw = {
            k: ", ".join(str(x) for x in v) if isinstance(v, list) else str(v)
            for k, v in echo.items()
        }
        again = validate_config(raw)
        assert again.experiment == "sobolev-asymptotics"
        assert again.params["m_list"] == (100, 1000)

    def test_output_dir_from_config(self, tmp_path):
        target = tmp_path / "cfg_out"
        cfg = write(
            tmp_path,
            "c.cfg",
            f"experiment = constants\nk_max = 2\noutput = {target}\n",
        )
        assert main(["run", cfg]) == 0
        assert (target / "constants.csv").exists()

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        cfg = write(tmp_path, "c.cfg", "experiment = constants\nk_max = 2\n")
        monkeypatch.setenv("HYPERADAMS_THREADS", "2")
        assert main(["run", cfg, "--out", str(tmp_path)]) == 0
        monkeypatch.setenv("HYPERADAMS_THREADS", "zebra")
        assert main(["run", cfg, "--out", str(tmp_path)]) == 2

    def test_threads_preserve_determinism(self, tmp_path):
        cfg = write(
            tmp_path,
            "b.cfg",
            "experiment = blowup\nk = 1\nbeta_list = 13.823, 11.31\n"
            "m_list = 100, 1000, 10000\nseed = 3\n",
        )
        out1, out2 = tmp_path / "t1", tmp_path / "t3"
        assert main(["run", cfg, "--out", str(out1), "--threads", "1"]) == 0
        assert main(["run", cfg, "--out", str(out2), "--threads", "3"]) == 0
        assert csv_body(str(out1 / "blowup.csv")) == csv_body(str(out2 / "blowup.csv"))

    def test_converge_inequalities_sign_stable(self, tmp_path):
        cfg = write(
            tmp_path,
            "i.cfg",
            "experiment = inequalities\nn_profiles = 10\nk_max = 2\nseed = 4\n"
            "n_elements = 8\npoly_degree = 5\n",
        )
        assert main(["converge", cfg, "--out", str(tmp_path)]) == 0
        payload = json.loads(
            open(tmp_path / "inequalities-convergence.json").read()
        )
        assert payload["diagnostics"]["sign_stable"]

    def test_converge_requires_capable_experiment(self, tmp_path):
        cfg = write(tmp_path, "c.cfg", "experiment = constants\n")
        assert main(["converge", cfg, "--out", str(tmp_path)]) == 2

    def test_converge_conformal_passes(self, tmp_path):
        cfg = write(
            tmp_path,
            "conv.cfg",
            "experiment = conformal-identity\nk_list = 2\nn_elements = 6\n"
            "poly_degree = 6\nr_max = 9.0\ngrading = 2.5\n",
        )
        assert main(["converge", cfg, "--out", str(tmp_path)]) == 0
        payload = json.loads(
            open(tmp_path / "conformal-identity-convergence.json").read()
        )
        assert payload["diagnostics"]["passed"]
        assert payload["diagnostics"]["observed_min_order"] >= 3.5

    def test_nonconvergence_exit_code(self, tmp_path):
        cfg = write(
            tmp_path,
            "p.cfg",
            "experiment = solve-pde\nk = 2\nmode = convex\nr_max = 12.0\n"
            "n_elements = 12\npoly_degree = 4\ngrading = 1.5\n"
            "q1_family = gaussian\nq1_amplitude = 1.0\n"
            "q2_family = gaussian\nq2_amplitude = -1.0\n"
            "tol = 1e-15\nmax_iter = 3\n",
        )
        assert main(["run", cfg, "--out", str(tmp_path)]) == 4
