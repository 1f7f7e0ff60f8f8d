import hashlib
import json
import os

import pytest

from geodlab import cli
from geodlab import fuchsian as fu


@pytest.fixture()
def workdir(tmp_path):
    out = tmp_path / "out"
    cache = tmp_path / "cache"
    out.mkdir()
    cache.mkdir()
    return out, cache


def run(args):
    return cli.main([str(a) for a in args])


def spectrum_args(out, cache, radius="6.5"):
    return ["spectrum", "--radius", radius, "--out", out,
            "--cache-dir", cache]


class TestConfig:
    def test_config_file_values(self, tmp_path, workdir):
        out, cache = workdir
        cfgf = tmp_path / "run.cfg"
        cfgf.write_text("radius = 6.5   # spectrum cutoff\n"
                        "t = 5.0, 6.0\n"
                        "seed = 3\n")
        rc = run(["count", "--config", cfgf, "--epsilon", "0.5",
                  "--out", out, "--cache-dir", cache])
        assert rc == 0
        rep = json.loads((out / "count_report.json").read_text())
        assert [row[0] for row in rep["cumulative"]] == [5.0, 6.0]

    def test_flags_override_file(self, tmp_path, workdir):
        out, cache = workdir
        cfgf = tmp_path / "run.cfg"
        cfgf.write_text("radius = 10.0\n")
        rc = run(spectrum_args(out, cache) + ["--config", cfgf])
        assert rc == 0
        rep = json.loads((out / "spectrum_report.json").read_text())
        assert rep["cutoff"] == 6.5

    def test_malformed_line_is_config_error(self, tmp_path, workdir):
        out, cache = workdir
        cfgf = tmp_path / "run.cfg"
        cfgf.write_text("radius 6.5\n")
        assert run(["spectrum", "--config", cfgf, "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_CONFIG

    def test_unknown_key_is_config_error(self, tmp_path, workdir):
        out, cache = workdir
        cfgf = tmp_path / "run.cfg"
        cfgf.write_text("cutoff = 6.5\n")
        assert run(["spectrum", "--config", cfgf, "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_CONFIG

    def test_missing_config_file(self, workdir):
        out, cache = workdir
        assert run(["spectrum", "--config", out / "absent.cfg",
                    "--out", out, "--cache-dir", cache]) == cli.EXIT_CONFIG

    def test_invalid_values_rejected(self, workdir):
        out, cache = workdir
        assert run(["spectrum", "--radius", "-1", "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_CONFIG
        assert run(["count", "--radius", "6.5", "--t", "8.0",
                    "--epsilon", "0.5", "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_CONFIG
        assert run(["mme", "--box", "0.1,0.2,0.3", "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_CONFIG

    def test_cache_env_variable(self, workdir, monkeypatch):
        out, cache = workdir
        monkeypatch.setenv(cli.CACHE_ENV, str(cache))
        rc = run(["spectrum", "--radius", "6.5", "--out", out])
        assert rc == 0
        assert any(f.startswith("spectrum_") for f in os.listdir(cache))


class TestSpectrumCache:
    def test_miss_then_hit_same_hash(self, workdir):
        out, cache = workdir
        assert run(spectrum_args(out, cache)) == 0
        first = json.loads((out / "spectrum_report.json").read_text())
        assert first["cache_hit"] is False
        assert run(spectrum_args(out, cache)) == 0
        second = json.loads((out / "spectrum_report.json").read_text())
        assert second["cache_hit"] is True
        assert second["csv_sha256"] == first["csv_sha256"]
        assert second["classes"] == first["classes"]

    def test_corrupted_entry_is_rebuilt(self, workdir):
        out, cache = workdir
        assert run(spectrum_args(out, cache)) == 0
        rep = json.loads((out / "spectrum_report.json").read_text())
        with open(rep["csv"], "a") as f:
            f.write("tampered\n")
        assert run(spectrum_args(out, cache)) == 0
        rep2 = json.loads((out / "spectrum_report.json").read_text())
        assert rep2["cache_hit"] is False
        assert rep2["csv_sha256"] == rep["csv_sha256"]  # rebuilt identically
        # sidecar matches the rebuilt file again
        with open(rep2["csv"] + ".sha256") as f:
            assert f.read().strip() == rep2["csv_sha256"]

    def test_lockfile_blocks_writer(self, workdir):
        out, cache = workdir
        key = hashlib.sha256(b"spectrum|bolza|6.5").hexdigest()[:16]
        lock = cache / f"spectrum_{key}.csv.lock"
        lock.write_text("")
        assert run(spectrum_args(out, cache)) == cli.EXIT_CONFIG
        lock.unlink()
        assert run(spectrum_args(out, cache)) == 0

    def test_loaded_table_matches_built(self, workdir):
        out, cache = workdir
        assert run(spectrum_args(out, cache)) == 0
        rep = json.loads((out / "spectrum_report.json").read_text())
        table = fu.SpectrumTable.load(rep["csv"],
                                      rep["csv"].replace(".csv", ".json"))
        assert len(table.classes) == rep["classes"]
        assert abs(table.systole() - rep["systole"]) < 1e-12


class TestCount:
    def test_csv_outputs(self, workdir):
        import csv

        out, cache = workdir
        rc = run(["count", "--radius", "6.5", "--t", "5.0,6.0",
                  "--epsilon", "0.5", "--out", out, "--cache-dir", cache])
        assert rc == 0
        with open(out / "count_cumulative.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "P_t", "predicted", "ratio"]
        assert len(rows) == 3
        with open(out / "count_window.csv", newline="") as f:
            wrows = list(csv.reader(f))
        assert wrows[0] == ["t", "P_t_eps", "predicted", "ratio"]
        # the cumulative counts are integers observed from the table
        assert float(rows[1][1]).is_integer()

    def test_byte_identical_reruns(self, workdir):
        out, cache = workdir
        args = ["count", "--radius", "6.5", "--t", "5.0,6.0",
                "--epsilon", "0.5", "--seed", "4", "--out", out,
                "--cache-dir", cache]
        assert run(args) == 0
        blobs = {n: (out / n).read_bytes()
                 for n in ("count_report.json", "count_cumulative.csv",
                           "count_window.csv")}
        assert run(args) == 0
        for n, blob in blobs.items():
            assert (out / n).read_bytes() == blob


class TestExitCodes:
    def test_numerical_failure_is_exit_3(self, workdir):
        out, cache = workdir
        # equivariance ball at radius - 2 is empty: numerical degeneracy
        assert run(["density", "--radius", "5", "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_NUMERIC

    def test_domain_failure_is_exit_1(self, workdir):
        out, cache = workdir
        # no closed geodesics below t = 1: a domain (acceptance) error
        assert run(["cube", "--radius", "6.5", "--t", "1.0",
                    "--samples", "5000", "--out", out,
                    "--cache-dir", cache]) == cli.EXIT_ACCEPTANCE

    def test_passing_command_is_exit_0(self, workdir):
        out, cache = workdir
        assert run(["density", "--radius", "7", "--out", out,
                    "--cache-dir", cache]) == 0
        rep = json.loads((out / "density_report.json").read_text())
        assert rep["transformation"]["passed"] is True


class TestCube:
    def test_report_fields(self, workdir):
        out, cache = workdir
        rc = run(["cube", "--radius", "6.5", "--t", "6.0",
                  "--samples", "20000", "--seed", "2", "--out", out,
                  "--cache-dir", cache])
        assert rc == 0
        rep = json.loads((out / "cube_report.json").read_text())
        assert rep["t"] == 6.0
        assert 0.0 < rep["mu_t_box1"] < 1.0
        assert rep["mixing_target"] > 0.0
        assert set(rep["box1"]) == {"x", "y", "theta", "position_radius",
                                    "angle_halfwidth"}
