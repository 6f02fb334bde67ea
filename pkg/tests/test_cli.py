import json
import math

import numpy as np
import pytest

from zzforge import cli
from zzforge.cli import (
    ParseError,
    ValidationError,
    config_from_dict,
    emit_config,
    load_default_config,
    parse_config,
    parse_quantity,
)
from zzforge.device_model import zz_branch_values

TWO_PI = 2 * math.pi


def write_config(tmp_path, raw, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def small_raw_config(**overrides):
    raw = {
        "device": {
            "topology": "capacitive",
            "levels": 3,
            "bare": {
                "omega1": "5.075 GHz",
                "omega2": "5.310 GHz",
                "alpha1": "-260 MHz",
                "alpha2": "-340 MHz",
                "g1": "20 MHz",
            },
            "sw_guard_factor": 3.0,
        },
        "coherence": {
            "t1": ["76.98 us", "79.71 us"],
            "t2_star": ["50.65 us", "17.09 us"],
        },
        "simulation": {"tag_sample_divisor": 100},
        "experiment": {
            "shots": 100,
            "seed": 42,
            "rb": {"max_pairs": 4, "truncation_stride": 1},
        },
        "output_dir": "out",
    }
    raw.update(overrides)
    return raw


class TestQuantityParsing:
    def test_frequency(self):
        assert parse_quantity("5.075 GHz", "frequency") == pytest.approx(TWO_PI * 5.075e9)
        assert parse_quantity("9.29 MHz", "frequency") == pytest.approx(TWO_PI * 9.29e6)

    def test_time(self):
        assert parse_quantity("53.8 ns", "time") == pytest.approx(53.8e-9)
        assert parse_quantity("76.98 us", "time") == pytest.approx(76.98e-6)

    def test_rejects_garbage(self):
        for bad in ("5.075GHz", "5.075 Gz", "fast GHz", "5.075"):
            with pytest.raises(ParseError):
                parse_quantity(bad, "frequency")


class TestParseConfig:
    def test_default_config(self):
        config = load_default_config()
        assert config.device.transitions is not None
        b1, b2 = zz_branch_values(config.device.transitions)
        assert b1 / (TWO_PI * 1e6) == pytest.approx(9.28248, abs=1e-5)
        assert b2 / (TWO_PI * 1e6) == pytest.approx(9.29954, abs=1e-5)
        assert config.experiment.seed is not None

    def test_unknown_keys_are_hard_errors(self, tmp_path):
        raw = small_raw_config()
        raw["device"]["frobnicate"] = 1
        raw["extra_section"] = {}
        with pytest.raises(ValidationError) as err:
            parse_config(write_config(tmp_path, raw))
        msg = str(err.value)
        assert "frobnicate" in msg and "extra_section" in msg

    def test_unphysical_coherence_rejected(self, tmp_path):
        raw = small_raw_config()
        raw["coherence"]["t2_star"] = ["200 us", "17.09 us"]  # > 2 T1
        with pytest.raises(ValidationError):
            parse_config(write_config(tmp_path, raw))

    def test_exactly_one_parameter_source(self, tmp_path):
        raw = small_raw_config()
        raw["device"]["transitions"] = dict(
            json.load(open(cli.default_config_path()))["device"]["transitions"]
        )
        with pytest.raises(ValidationError):
            parse_config(write_config(tmp_path, raw))
        del raw["device"]["transitions"]
        del raw["device"]["bare"]
        with pytest.raises(ValidationError):
            parse_config(write_config(tmp_path, raw))

    def test_invalid_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"device": }')
        with pytest.raises(ParseError) as err:
            parse_config(str(path))
        assert "line" in str(err.value)

    def test_collects_all_violations(self, tmp_path):
        raw = small_raw_config()
        raw["device"]["levels"] = 9
        raw["experiment"]["shots"] = -3
        with pytest.raises(ValidationError) as err:
            parse_config(write_config(tmp_path, raw))
        assert len(err.value.errors) >= 2

    def test_round_trip(self, tmp_path):
        path = write_config(tmp_path, small_raw_config())
        config = parse_config(path)
        again = config_from_dict(emit_config(config))
        assert again == config


class TestDispatchExitCodes:
    def test_derive_ok(self, tmp_path):
        code = cli.main(["derive", "--out", str(tmp_path / "o")])
        assert code == 0
        assert (tmp_path / "o" / "derive.json").exists()

    def test_malformed_config_matrix(self, tmp_path):
        bad_configs = []
        raw = small_raw_config()
        raw["coherence"]["t2_star"] = ["200 us", "17.09 us"]
        bad_configs.append(write_config(tmp_path, raw, "a.json"))
        raw = small_raw_config()
        raw["device"]["bare"]["omega1"] = "5.075 parsec"
        bad_configs.append(write_config(tmp_path, raw, "b.json"))
        raw = small_raw_config()
        raw["nope"] = True
        bad_configs.append(write_config(tmp_path, raw, "c.json"))
        path = tmp_path / "d.json"
        path.write_text("{broken")
        bad_configs.append(str(path))
        for cfg in bad_configs:
            assert cli.main(["derive", "--config", cfg, "--out", str(tmp_path / "x")]) == 1

    def test_sampled_workflow_requires_seed(self, tmp_path):
        raw = small_raw_config()
        del raw["experiment"]["seed"]
        cfg = write_config(tmp_path, raw)
        code = cli.main(["rb", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 1

    def test_derive_emits_branch_values(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["derive", "--out", str(out)]) == 0
        payload = json.loads((out / "derive.json").read_text())
        assert payload["zz_branch_mhz"][0] == pytest.approx(9.28248, abs=1e-4)
        assert payload["zz_branch_mhz"][1] == pytest.approx(9.29954, abs=1e-4)
        assert payload["g_z_mhz"] == pytest.approx(9.291, abs=0.001)


class TestArtifacts:
    def test_sim_cz_noiseless_fidelity_one(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["sim-cz", "--out", str(out)]) == 0
        report = json.loads((out / "cz_report.json").read_text())
        assert report["fidelity"] == pytest.approx(1.0, abs=1e-9)
        assert report["gate_time_ns"] == pytest.approx(53.8, abs=0.1)
        assert "config_sha256" in report

    def test_pulse_swipht_duration(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["pulse-swipht", "--out", str(out)]) == 0
        params = json.loads((out / "swipht_params.json").read_text())
        assert params["gate_time_ns"] == pytest.approx(100.6, abs=0.1)
        csv_lines = (out / "swipht_pulse.csv").read_bytes().decode().split("\r\n")
        assert csv_lines[0] == "time_s,envelope_re_rad_per_s,envelope_im_rad_per_s"
        assert len(csv_lines) == params["samples"] + 2  # header + trailing newline

    def test_pulse_tag_artifacts(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["pulse-tag", "--angle", "pi", "--out", str(out)]) == 0
        params = json.loads((out / "tag_params.json").read_text())
        assert params["theta_rad"] == pytest.approx(math.pi)
        assert max(abs(r) for r in params["condition_residuals_rad"]) < 1e-9

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert cli.main(["derive", "--out", str(out)]) == 0
            assert cli.main(["pulse-tag", "--out", str(out)]) == 0
        for name in ("derive.json", "tag_params.json", "tag_pulse.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_rb_workflow(self, tmp_path):
        cfg = write_config(tmp_path, small_raw_config())
        out = tmp_path / "o"
        code = cli.main(
            ["rb", "--config", cfg, "--transition", "00-10",
             "--decoherence", "off", "--out", str(out)]
        )
        assert code == 0
        lines = (out / "rb_decay.csv").read_bytes().decode().split("\r\n")
        assert lines[0] == "m,mean_fidelity,stderr"
        fit = json.loads((out / "rb_fit.json").read_text())
        assert fit["master_seed"] == 42
        assert 0 < fit["base"] <= 1

    def test_qst_workflow_fast(self, tmp_path):
        out = tmp_path / "o"
        code = cli.main(["qst", "--decoherence", "off", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "qst_report.json").read_text())
        assert report["fidelity_to_ideal"] > 0.98
        dataset = json.loads((out / "qst_dataset.json").read_text())
        assert np.array(dataset["counts"]).shape == (1, 9, 4)

    def test_qpt_workflow_fast(self, tmp_path):
        out = tmp_path / "o"
        code = cli.main(
            ["qpt", "--gate", "cz", "--decoherence", "off", "--perfect-prep",
             "--out", str(out)]
        )
        assert code == 0
        report = json.loads((out / "qpt_report.json").read_text())
        assert report["average_gate_fidelity"] > 0.99
        assert report["ptm_purity"] <= 1 + 1e-9
        ptm = json.loads((out / "qpt_ptm.json").read_text())
        assert len(ptm["ptm"]) == 16
