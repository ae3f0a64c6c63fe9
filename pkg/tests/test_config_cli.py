import io
import json
import subprocess
import sys

import pytest

from collapse_interferometer.cli import EXIT_CONFIG, EXIT_OK, fmt, main
from collapse_interferometer.collapse import Delta, Histogram, PositionalFiniteDuration, Uniform
from collapse_interferometer.config import parse_config, parse_distribution
from collapse_interferometer.errors import ConfigError
from collapse_interferometer.experiment import SweepCurve


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


class TestConfig:
    def test_minimal_file(self, tmp_path):
        cfg = parse_config(write(tmp_path, {"geometry": {"L": 1, "l": 1, "c": 1}, "tau": 0.5}), command="exact")
        assert (cfg.L, cfg.l, cfg.c, cfg.tau) == (1.0, 1.0, 1.0, 0.5)
        assert cfg.provenance["tau"] == "file"
        assert cfg.provenance["seed"] == "default"

    def test_negative_tau(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            parse_config(write(tmp_path, {"tau": -1}))
        assert exc.value.key == "tau"

    def test_tau_and_grid_conflict(self, tmp_path):
        doc = {"tau": 0.5, "tau_grid": {"start": 0, "stop": 1, "points": 3}}
        with pytest.raises(ConfigError):
            parse_config(write(tmp_path, doc))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            parse_config(write(tmp_path, {"geometry": {"L": 1, "q": 2}}))
        assert exc.value.key == "geometry.q"

    def test_type_mismatch(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            parse_config(write(tmp_path, {"trials": "many"}))
        assert exc.value.key == "trials"

    def test_flags_override_file(self, tmp_path):
        path = write(tmp_path, {"tau": 0.5, "seed": 3, "geometry": {"L": 2, "l": 1, "c": 1}})
        cfg = parse_config(path, {"seed": 9, "geometry.L": 5.0}, command="simulate")
        assert cfg.seed == 9 and cfg.L == 5.0 and cfg.tau == 0.5
        assert cfg.provenance["seed"] == "flag" and cfg.provenance["tau"] == "file"

    def test_flag_grid_replaces_file_tau(self, tmp_path):
        path = write(tmp_path, {"tau": 0.5})
        cfg = parse_config(path, {"tau_grid.start": 0.0, "tau_grid.stop": 1.0, "tau_grid.points": 5}, "sweep")
        assert cfg.tau is None and cfg.tau_grid.points == 5

    def test_flag_tau_replaces_file_grid(self, tmp_path):
        path = write(tmp_path, {"tau_grid": {"start": 0, "stop": 1, "points": 3}})
        assert parse_config(path, {"tau": 0.2}, "exact").tau == 0.2

    def test_sweep_needs_grid(self):
        with pytest.raises(ConfigError):
            parse_config(None, {}, "sweep")

    def test_finite_duration_needs_delta(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(None, {"semantics": "finite_duration"}, "exact")
        assert exc.value.key == "delta"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "absent.json")

    @pytest.mark.parametrize("text,expected", [
        ("uniform", Uniform()),
        ("delta", Delta(0.0)),
        ("delta:0.25", Delta(0.25)),
        ("histogram:0.5,0.5", Histogram((0.5, 0.5))),
    ])
    def test_distributions(self, text, expected):
        assert parse_distribution(text) == expected

    def test_bad_distribution(self):
        with pytest.raises(ConfigError):
            parse_distribution("gaussian")

    def test_model_built(self):
        cfg = parse_config(None, {"semantics": "finite_duration", "delta": 0.4, "anchoring": "post_arrival"}, "exact")
        assert isinstance(cfg.model(), PositionalFiniteDuration) and cfg.model().window == 0.4


class TestFormatting:
    @pytest.mark.parametrize("x,text", [(1 / 3, "0.333333333333"), (0.125, "0.125"), (2, "2"),
                                        (None, ""), (float("nan"), ""), (1e-20, "1e-20")])
    def test_fmt(self, x, text):
        assert fmt(x) == text


class TestCommands:
    def test_exact_csv(self):
        code, out, _ = run(["exact", "--tau", "0"])
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "c1,c2,d1,d2,probability"
        assert "1,0,0,1,0.25" in lines
        assert "2,0,0,0,0.125" in lines
        assert "c1_d2,conditional,1" in lines

    def test_exact_json(self):
        code, out, _ = run(["exact", "--tau", "2", "--format", "json"])
        doc = json.loads(out)
        assert code == EXIT_OK and doc["command"] == "exact"
        assert sum(o["probability"] for o in doc["outcomes"]) == pytest.approx(1.0)
        assert len(doc["outcomes"]) == 10

    def test_defaults_echoed(self):
        _, _, err = run(["exact"])
        assert "# defaulted:" in err and "seed=0" in err

    def test_simulate_reproducible_files(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert run(["simulate", "--trials", "500", "--seed", "4", "--semantics", "finite_duration",
                        "--delta", "0.5", "--out", str(p)])[0] == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        rows = a.read_text().split("\n\n")[0].splitlines()
        assert rows[0].startswith("trial,c1,c2,d1,d2,t_c1")
        assert len(rows) == 501

    def test_simulate_zero_postselection_rows(self):
        for seed in range(20):
            code, out, err = run(["simulate", "--trials", "1", "--seed", str(seed)])
            if "warning" in err:
                assert code == EXIT_OK
                assert "c1_d2,conditional,,,1,0" in out
                break
        else:
            pytest.fail("no seed produced an empty post-selection")

    def test_sweep_csv_footer(self):
        code, out, _ = run(["sweep", "--tau-start", "0.5", "--tau-stop", "1.5", "--tau-points", "11",
                            "--trials", "5000", "--seed", "2"])
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0].startswith("tau,corr_c1_d2")
        assert len(lines) == 13
        assert lines[-1].startswith("# jump detected:")

    def test_sweep_no_jump_footer(self):
        _, out, _ = run(["sweep", "--tau-start", "0.5", "--tau-stop", "1.5", "--tau-points", "5",
                         "--trials", "2000", "--semantics", "coherent"])
        assert out.splitlines()[-1] == "# no jump detected (threshold 0.3)"

    def test_sweep_json_round_trip(self):
        _, out, _ = run(["sweep", "--tau-start", "0.5", "--tau-stop", "1.5", "--tau-points", "5",
                         "--trials", "2000", "--format", "json"])
        doc = json.loads(out)
        curve = SweepCurve.from_dict(doc["curve"])
        assert SweepCurve.from_dict(json.loads(json.dumps(curve.to_dict()))) == curve
        assert curve.jump is not None

    def test_config_error_exit(self, tmp_path):
        code, _, err = run(["exact", "--config", str(write(tmp_path, {"tau": -1}))])
        assert code == EXIT_CONFIG and "tau" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "collapse_interferometer", "exact", "--tau", "0"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("c1,c2,d1,d2")
