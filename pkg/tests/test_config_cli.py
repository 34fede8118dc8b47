"""Configuration parsing and the experiment command line."""

import json
import os

import pytest

from gridhalo.cli import main
from gridhalo.config import ConfigError, ExperimentConfig, read_config_file


class TestConfigFile:
    def test_key_value_comments_and_override(self, tmp_path):
        p = tmp_path / "a.cfg"
        p.write_text("# comment\ngrid_bits = 6\nmode=double # trailing\ngrid_bits=7\n")
        assert read_config_file(str(p)) == {"grid_bits": "7", "mode": "double"}

    def test_include_is_relative_to_including_file(self, tmp_path):
        sub = tmp_path / "sub"
        sub.mkdir()
        (sub / "base.cfg").write_text("depth = 2\n")
        top = tmp_path / "top.cfg"
        top.write_text("include sub/base.cfg\nmode = rational\n")
        assert read_config_file(str(top)) == {"depth": "2", "mode": "rational"}

    def test_include_cycle_rejected(self, tmp_path):
        a = tmp_path / "a.cfg"
        b = tmp_path / "b.cfg"
        a.write_text("include b.cfg\n")
        b.write_text("include a.cfg\n")
        with pytest.raises(ConfigError, match="cycle"):
            read_config_file(str(a))

    def test_malformed_line_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("just words\n")
        with pytest.raises(ConfigError):
            read_config_file(str(p))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config_file(str(tmp_path / "nope.cfg"))


class TestExperimentConfig:
    def test_defaults_and_round_trip(self):
        c = ExperimentConfig.from_mapping("halo", {"grid_bits": "6"})
        assert c.grid_bits == 6 and c.mode == "rational"
        assert "grid_bits=6" in c.canonical_text()

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping("mystery", {})

    def test_h_must_exceed_one(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping("halo", {"h_list": "1, 4"})

    def test_depth_needs_room_in_the_cap(self):
        with pytest.raises(ConfigError, match="resolution cap"):
            ExperimentConfig.from_mapping(
                "resonance", {"depth": "4", "resolution_cap": "8"}
            )

    def test_bad_number_list(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping("halo", {"h_list": "4, eight"})

    def test_extras_survive_and_hash(self):
        c = ExperimentConfig.from_mapping("halo", {"color": "blue"})
        assert c.extras == {"color": "blue"}
        assert "x.color" in c.canonical_text()

    def test_out_excluded_from_cache_identity(self):
        a = ExperimentConfig.from_mapping("halo", {"out": "x"})
        b = ExperimentConfig.from_mapping("halo", {"out": "y"})
        assert a.canonical_text() == b.canonical_text()


def _run(argv):
    return main(argv)


class TestCli:
    def test_invalid_config_exits_2(self, tmp_path, capsys):
        rc = _run(["halo", "--out", str(tmp_path), "--set", "mode=fuzzy"])
        assert rc == 2
        assert "invalid config" in capsys.readouterr().err

    def test_malformed_set_exits_2(self, tmp_path, capsys):
        rc = _run(["halo", "--out", str(tmp_path), "--set", "oops"])
        assert rc == 2
        assert "KEY=VALUE" in capsys.readouterr().err

    def test_infeasible_exits_3(self, tmp_path, capsys):
        # depth 5 passes validation with a large cap but no shipped input
        # reaches it
        rc = _run(
            [
                "resonance",
                "--depth",
                "5",
                "--resolution-cap",
                "14",
                "--out",
                str(tmp_path),
            ]
        )
        assert rc == 3
        assert "infeasible" in capsys.readouterr().err

    def test_maxfield_run_writes_report(self, tmp_path):
        out = str(tmp_path / "o")
        rc = _run(["maxfield", "--grid", "4", "--out", out])
        assert rc == 0
        doc = json.loads(open(os.path.join(out, "report.json")).read())
        assert doc["meta"]["kind"] == "maxfield"
        assert all(item["ok"] for item in doc["verified"])
        assert os.path.exists(os.path.join(out, "rows.csv"))

    def test_reports_are_deterministic(self, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = str(tmp_path / name)
            assert _run(["maxfield", "--grid", "4", "--out", out, "--seed", "7"]) == 0
            outs.append(out)
        for fname in ("report.json", "rows.csv"):
            a = open(os.path.join(outs[0], fname), "rb").read()
            b = open(os.path.join(outs[1], fname), "rb").read()
            assert a == b, fname

    def test_cache_hit_short_circuits(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        assert _run(["maxfield", "--grid", "4", "--out", out]) == 0
        capsys.readouterr()
        assert _run(["maxfield", "--grid", "4", "--out", out, "--use-cache"]) == 0
        assert "cache hit" in capsys.readouterr().out

    def test_rearrange_demo_runs_square_default(self, tmp_path):
        out = str(tmp_path / "o")
        rc = _run(["rearrange", "--out", out])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "permutation.npy"))
        doc = json.loads(open(os.path.join(out, "report.json")).read())
        assert doc["meta"]["kind"] == "rearrange"
        assert all(item["ok"] for item in doc["verified"])
