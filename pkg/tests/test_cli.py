import csv
import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from straw.cli import main
from straw.simulation import build_sparsity_layout, scenario, simulate_replication
from straw.tables import csv_text, fmt, read_lattice_csv


def write_field(path, coords, values, name="p", comment=False):
    header = [f"coord{i + 1}" for i in range(coords.shape[1])] + [name]
    text = csv_text(header, [[*map(int, c), v] for c, v in zip(coords, values)])
    path.write_text(("# generated\n" if comment else "") + text)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def s3_files(tmp_path):
    cfg = scenario("s3")
    _, p = simulate_replication(cfg, 4)
    coords = cfg.lattice.coords()
    pin = write_field(tmp_path / "p.csv", coords, p, comment=True)
    pi1 = write_field(tmp_path / "pi.csv", coords, build_sparsity_layout(cfg), name="pi1")
    return pin, pi1, p


class TestTables:
    def test_fmt_round_trip(self, rng):
        for x in rng.random(100):
            assert float(fmt(x)) == x
        assert fmt(None) == "" and fmt(np.int64(3)) == "3" and fmt(True) == "1"

    def test_origin_offset(self, tmp_path):
        coords = np.array([[x, y] for x in range(0, 3) for y in range(5, 7)])
        t = read_lattice_csv(write_field(tmp_path / "a.csv", coords, np.arange(6) / 10))
        assert t.lattice.extents == (3, 2)
        assert t.origin == (0, 5)
        np.testing.assert_array_equal(t.file_coords(), coords)

    def test_shuffled_rows(self, tmp_path, rng):
        coords = np.array([[x, y] for x in range(1, 4) for y in range(1, 5)])
        order = rng.permutation(12)
        t = read_lattice_csv(write_field(tmp_path / "a.csv", coords[order], order / 20))
        np.testing.assert_array_equal(t.columns["p"], np.arange(12) / 20)


class TestAnalyze:
    @pytest.mark.parametrize("method", ["bh", "lfdr", "laws-dd", "straw-dd"])
    def test_schema_data_methods(self, s3_files, tmp_path, method):
        pin, _, p = s3_files
        out = tmp_path / f"{method}.csv"
        assert main(["analyze", "--input", str(pin), "--method", method, "--out", str(out)]) == 0
        rows = read_csv(out)
        assert list(rows[0]) == ["coord1", "coord2", "p", "p_weighted", "pi1_used", "reject"]
        assert len(rows) == p.size
        meta = json.loads(out.with_suffix(".json").read_text())
        for key in ("method", "alpha", "k_selected", "threshold", "rejection_count", "kernel", "bandwidth",
                    "truncation", "clip", "grid"):
            assert key in meta
        assert meta["rejection_count"] == sum(int(r["reject"]) for r in rows)

    @pytest.mark.parametrize("method", ["laws-oracle", "straw-oracle", "procedure1", "straw-dd", "bh"])
    def test_round_trip_from_threshold(self, s3_files, tmp_path, method):
        pin, pi1, _ = s3_files
        out = tmp_path / "d.csv"
        args = ["analyze", "--input", str(pin), "--method", method, "--out", str(out)]
        if method in ("laws-oracle", "straw-oracle", "procedure1"):
            args += ["--pi1", str(pi1)]
        assert main(args) == 0
        meta = json.loads(out.with_suffix(".json").read_text())
        rows = read_csv(out)
        stat = np.array([float(r["p_weighted"]) for r in rows])
        reject = np.array([int(r["reject"]) for r in rows])
        expected = (stat <= meta["threshold"]) if meta["rejection_count"] else np.zeros_like(reject)
        np.testing.assert_array_equal(reject, expected.astype(int))

    def test_uniform_bh(self, tmp_path, rng):
        pin = write_field(tmp_path / "u.csv", np.arange(1, 101)[:, None], rng.random(100))
        out = tmp_path / "o.csv"
        assert main(["analyze", "--input", str(pin), "--method", "bh", "--out", str(out)]) == 0
        meta = json.loads((tmp_path / "o.json").read_text())
        assert meta["rejection_count"] == 0
        assert len(read_csv(out)) == 100

    def test_laws_half_equals_bh_double(self, tmp_path, rng):
        coords = np.arange(1, 401)[:, None]
        p = np.where(rng.random(400) < 0.2, rng.random(400) * 1e-3, rng.random(400))
        pin = write_field(tmp_path / "p.csv", coords, p)
        pi = write_field(tmp_path / "pi.csv", coords, np.full(400, 0.5), name="pi1")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["analyze", "--input", str(pin), "--method", "laws-oracle", "--pi1", str(pi),
                     "--alpha", "0.05", "--out", str(a)]) == 0
        assert main(["analyze", "--input", str(pin), "--method", "bh", "--alpha", "0.1", "--out", str(b)]) == 0
        ra, rb = read_csv(a), read_csv(b)
        assert [r["reject"] for r in ra] == [r["reject"] for r in rb]
        assert [r["p_weighted"] for r in ra] == [r["p_weighted"] for r in rb]
        assert sum(int(r["reject"]) for r in ra) > 0

    def test_straw_dd_beats_bh_on_scenario2_draws(self, tmp_path):
        cfg = scenario("s2")
        coords = cfg.lattice.coords()
        gain = []
        for seed in range(5):
            _, p = simulate_replication(cfg, 100 + seed)
            pin = write_field(tmp_path / "p.csv", coords, p)
            counts = []
            for method in ("straw-dd", "bh"):
                out = tmp_path / f"{method}.csv"
                assert main(["analyze", "--input", str(pin), "--method", method, "--out", str(out)]) == 0
                counts.append(json.loads(out.with_suffix(".json").read_text())["rejection_count"])
            gain.append(counts[0] - counts[1])
        assert np.mean(gain) >= 0

    def test_json_format(self, s3_files, tmp_path):
        pin, _, p = s3_files
        out = tmp_path / "d.json"
        assert main(["analyze", "--input", str(pin), "--method", "straw-dd", "--format", "json", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["method"] == "straw-dd"
        assert len(doc["rows"]) == p.size
        assert set(doc["rows"][0]) == {"coords", "p", "p_weighted", "pi1_used", "reject"}
        assert doc["rejection_count"] == sum(r["reject"] for r in doc["rows"])

    def test_defaults_recorded(self, s3_files, tmp_path):
        pin, _, _ = s3_files
        out = tmp_path / "d.csv"
        main(["analyze", "--input", str(pin), "--method", "straw-dd", "--out", str(out)])
        meta = json.loads(out.with_suffix(".json").read_text())
        assert meta["kernel"] == "gaussian" and meta["bandwidth"] == 3.0 and meta["truncation"] == 10.0
        assert meta["clip"] == 1e-3 and meta["alpha"] == 0.1
        assert meta["grid"] == {"b1": 0.5, "b2": 5.0, "n_steps": 18}


class TestAnalyzeErrors:
    def test_incomplete_lattice(self, tmp_path, capsys):
        coords = np.array([[x, y] for x in range(1, 4) for y in range(1, 4)])[:-1]
        pin = write_field(tmp_path / "p.csv", coords, np.full(8, 0.5))
        assert main(["analyze", "--input", str(pin), "--method", "bh", "--out", str(tmp_path / "o.csv")]) == 2
        assert "incomplete lattice" in capsys.readouterr().err

    def test_p_out_of_range(self, tmp_path):
        pin = write_field(tmp_path / "p.csv", np.arange(1, 4)[:, None], [0.1, 1.5, 0.2])
        assert main(["analyze", "--input", str(pin), "--method", "bh", "--out", str(tmp_path / "o.csv")]) == 2

    def test_oracle_needs_pi1(self, s3_files, tmp_path):
        pin, _, _ = s3_files
        assert main(["analyze", "--input", str(pin), "--method", "straw-oracle", "--out", str(tmp_path / "o.csv")]) == 2

    @pytest.mark.parametrize("method", ["straw-dd", "laws-dd", "bh"])
    def test_data_driven_forbids_pi1(self, s3_files, tmp_path, method):
        pin, pi1, _ = s3_files
        args = ["analyze", "--input", str(pin), "--method", method, "--pi1", str(pi1), "--out", str(tmp_path / "o.csv")]
        assert main(args) == 2

    def test_duplicate_and_bad_header(self, tmp_path):
        (tmp_path / "a.csv").write_text("coord1,p\n1,0.5\n1,0.4\n")
        (tmp_path / "b.csv").write_text("x,p\n1,0.5\n")
        (tmp_path / "c.csv").write_text("coord1,p\n1,abc\n")
        for name in "abc":
            assert main(["analyze", "--input", str(tmp_path / f"{name}.csv"), "--method", "bh",
                         "--out", str(tmp_path / "o.csv")]) == 2

    def test_missing_input(self, tmp_path):
        assert main(["analyze", "--input", str(tmp_path / "nope.csv"), "--method", "bh",
                     "--out", str(tmp_path / "o.csv")]) == 2

    def test_unwritable_output(self, s3_files, tmp_path):
        pin, _, _ = s3_files
        assert main(["analyze", "--input", str(pin), "--method", "bh", "--out", str(tmp_path / "no" / "o.csv")]) == 3

    def test_bad_grid_is_usage_error(self, s3_files, tmp_path):
        pin, _, _ = s3_files
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "--input", str(pin), "--method", "bh", "--grid", "1,2", "--out", str(tmp_path / "o")])
        assert exc.value.code == 2


class TestEstimatePi:
    def test_plateau_on_scenario1(self, tmp_path):
        cfg = scenario("s1")
        _, p = simulate_replication(cfg, 8)
        pin = write_field(tmp_path / "p.csv", cfg.lattice.coords(), p)
        out = tmp_path / "e.csv"
        assert main(["estimate-pi", "--input", str(pin), "--out", str(out)]) == 0
        rows = read_csv(out)
        assert list(rows[0]) == ["coord1", "lfdr_hat", "pi1_hat"]
        assert len(rows) == 5000
        pi_hat = np.array([float(r["pi1_hat"]) for r in rows])
        inside = build_sparsity_layout(cfg) > 0.5
        assert np.median(pi_hat[inside]) > np.median(pi_hat[~inside])

    def test_constant_input(self, tmp_path):
        coords = np.array([[x, y] for x in range(1, 11) for y in range(1, 8)])
        pin = write_field(tmp_path / "p.csv", coords, np.full(70, 0.5))
        out = tmp_path / "e.csv"
        assert main(["estimate-pi", "--input", str(pin), "--out", str(out)]) == 0
        vals = {r["pi1_hat"] for r in read_csv(out)}
        assert len(vals) == 1

    def test_json(self, tmp_path, rng):
        pin = write_field(tmp_path / "p.csv", np.arange(1, 51)[:, None], rng.random(50))
        out = tmp_path / "e.json"
        assert main(["estimate-pi", "--input", str(pin), "--format", "json", "--out", str(out)]) == 0
        assert len(json.loads(out.read_text())["rows"]) == 50


class TestSimulate:
    def test_files_and_schema(self, tmp_path, capsys):
        args = ["simulate", "--scenario", "s1", "--mu", "2.0", "--pi", "0.6", "--reps", "3", "--alpha", "0.1",
                "--seed", "7", "--out", str(tmp_path)]
        assert main(args) == 0
        reps = read_csv(tmp_path / "s1_replications.csv")
        summary = read_csv(tmp_path / "s1_summary.csv")
        assert list(reps[0]) == ["scenario", "param", "rep", "method", "fdp", "tp", "rejections", "k_selected", "seed"]
        assert list(summary[0]) == ["scenario", "method", "param", "fdr", "fdr_se", "atp", "atp_se"]
        assert len(reps) == 15 and len(summary) == 5
        assert {r["seed"] for r in reps} == {"7", "8", "9"}
        meta = json.loads((tmp_path / "s1_meta.json").read_text())
        assert meta["reps"] == 3 and meta["grid"]["n_steps"] == 18
        assert "STRAW.dd" in capsys.readouterr().out

    def test_rerun_byte_identical(self, tmp_path):
        args = ["simulate", "--scenario", "s5", "--reps", "2", "--mu", "2", "--pi", "0.6"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b"), "--workers", "2"])
        for name in ("s5_replications.csv", "s5_summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_fast_default_sweep(self, tmp_path, monkeypatch):
        seen = []
        import straw.cli as cli

        real = cli.run_scenario
        monkeypatch.setattr(cli, "run_scenario", lambda cfg, workers=1: seen.append(cfg) or real(replace_reps(cfg)))
        assert main(["simulate", "--scenario", "s4", "--fast", "--out", str(tmp_path)]) == 0
        assert all(c.reps == 25 for c in seen)
        assert [c.signal_level for c in seen] == pytest.approx([0.4, 0.45, 0.5, 0.55, 0.6])

    def test_unknown_scenario(self, tmp_path, capsys):
        assert main(["simulate", "--scenario", "s9", "--out", str(tmp_path)]) == 2
        assert "unknown scenario" in capsys.readouterr().err

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["simulate", "--scenario", "s1", "--reps", "1", "--out", str(blocker / "sub")]) == 3


def replace_reps(cfg):
    return replace(cfg, reps=1)


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "straw", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "simulate" in res.stdout and "estimate-pi" in res.stdout

    def test_missing_command(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
