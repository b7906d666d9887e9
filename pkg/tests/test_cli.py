import os

import pytest

from lilis.cli import main


def run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


@pytest.fixture()
def snapshot(tmp_path, capsys):
    path = str(tmp_path / "d.lilis")
    code, _ = run(
        capsys, "build", "--gen", "uniform:20000", "--strategy", "kdtree", "--seed", "1", "-o", path
    )
    assert code == 0
    return path


class TestBuild:
    def test_summary_output(self, tmp_path, capsys):
        out_path = str(tmp_path / "d.lilis")
        code, out = run(
            capsys,
            "build",
            "--gen",
            "uniform:10000",
            "--epsilon",
            "32",
            "--radix-bits",
            "10",
            "-o",
            out_path,
        )
        assert code == 0
        assert "objects: 10000" in out
        assert "partitions:" in out
        assert "overflow count: 0" in out
        assert os.path.exists(out_path)

    def test_csv_input(self, tmp_path, capsys):
        csv_path = tmp_path / "pts.csv"
        csv_path.write_text("x,y\n0.1,0.2\n0.3,0.4\n0.5,0.6\n0.7,0.8\n")
        code, out = run(
            capsys,
            "build",
            "--csv",
            str(csv_path),
            "--x",
            "0",
            "--y",
            "1",
            "--header",
            "--sample-rate",
            "1.0",
            "-o",
            str(tmp_path / "c.lilis"),
        )
        assert code == 0
        assert "objects: 4" in out

    def test_rtree_strategy_may_overflow(self, tmp_path, capsys):
        code, out = run(
            capsys,
            "build",
            "--gen",
            "gaussian:5000",
            "--strategy",
            "rtree",
            "-o",
            str(tmp_path / "r.lilis"),
        )
        assert code == 0
        assert "overflow count:" in out

    def test_deterministic_rebuild_identical_bytes(self, tmp_path, capsys):
        a, b = str(tmp_path / "a.lilis"), str(tmp_path / "b.lilis")
        for path in (a, b):
            code, _ = run(capsys, "build", "--gen", "uniform:5000", "--seed", "3", "-o", path)
            assert code == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_compare_rtree_flag(self, tmp_path, capsys):
        code, out = run(
            capsys,
            "build",
            "--gen",
            "uniform:20000",
            "--compare-rtree",
            "-o",
            str(tmp_path / "d.lilis"),
        )
        assert code == 0
        assert "rtree baseline build ms" in out

    def test_bad_gen_spec_is_data_error(self, tmp_path, capsys):
        code, _ = run(capsys, "build", "--gen", "pareto:100", "-o", str(tmp_path / "x.lilis"))
        assert code == 1

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["build"])  # no input source
        assert exc.value.code == 2


class TestQuery:
    def test_point_true_false(self, snapshot, capsys, tmp_path):
        code, out = run(capsys, "query", snapshot, "--point", "99,99")
        assert code == 0 and out.startswith("false")

    def test_range_lines(self, snapshot, capsys):
        code, out = run(capsys, "query", snapshot, "--range", "0.4,0.4,0.42,0.42")
        assert code == 0
        lines = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert all(len(l.split("\t")) == 4 for l in lines)
        assert "elapsed_ms" in out

    def test_knn_output(self, snapshot, capsys):
        code, out = run(capsys, "query", snapshot, "--knn", "0.5,0.5", "--k", "7")
        assert code == 0
        lines = [l for l in out.splitlines() if l and not l.startswith("#")]
        assert len(lines) == 7
        dists = [float(l.split("\t")[4]) for l in lines]
        assert dists == sorted(dists)

    def test_circle_subset_of_its_mbr(self, snapshot, capsys):
        code, circle_out = run(capsys, "query", snapshot, "--circle", "0.5,0.5,0.05")
        assert code == 0
        code, rect_out = run(capsys, "query", snapshot, "--range", "0.45,0.45,0.55,0.55")
        assert code == 0
        n_circle = sum(1 for l in circle_out.splitlines() if l and not l.startswith("#"))
        n_rect = sum(1 for l in rect_out.splitlines() if l and not l.startswith("#"))
        assert 0 < n_circle <= n_rect

    def test_join_counts_match_small_oracle(self, tmp_path, capsys):
        csv_path = tmp_path / "pts.csv"
        csv_path.write_text("0.5,0.5\n2,2\n1,1\n")
        snap = str(tmp_path / "j.lilis")
        code, _ = run(
            capsys, "build", "--csv", str(csv_path), "--sample-rate", "1.0", "-o", snap
        )
        assert code == 0
        polys = tmp_path / "p.txt"
        polys.write_text("sq;0,0 1,0 1,1 0,1\n")
        code, out = run(capsys, "query", snap, "--join", str(polys))
        assert code == 0
        pair_lines = [l for l in out.splitlines() if l.startswith("sq")]
        assert len(pair_lines) == 2  # interior point and closed-boundary point

    def test_missing_snapshot_is_data_error(self, tmp_path, capsys):
        code, _ = run(capsys, "query", str(tmp_path / "nope.lilis"), "--point", "0,0")
        assert code == 1

    def test_picking_no_query_is_error(self, snapshot, capsys):
        code, _ = run(capsys, "query", snapshot)
        assert code == 1


class TestBench:
    def test_latency_table(self, snapshot, capsys, tmp_path):
        report = str(tmp_path / "r.csv")
        code, out = run(
            capsys,
            "bench",
            snapshot,
            "--type",
            "range",
            "--selectivity",
            "1e-7",
            "--skew",
            "uniform",
            "--count",
            "10",
            "--runs",
            "2",
            "--out",
            report,
        )
        assert code == 0
        assert "mean_ms" in out
        assert os.path.exists(report)

    def test_knn_bound_columns(self, snapshot, capsys):
        code, out = run(
            capsys, "bench", snapshot, "--type", "knn", "--k", "2,5", "--count", "10", "--runs", "1"
        )
        assert code == 0
        assert "round_bound" in out and "within_bound" in out

    def test_throughput_mode(self, snapshot, capsys):
        code, out = run(
            capsys, "bench", snapshot, "--throughput", "--workers", "8", "--count", "30"
        )
        assert code == 0
        assert "jobs_per_minute" in out

    def test_join_bench(self, snapshot, capsys):
        code, out = run(
            capsys,
            "bench",
            snapshot,
            "--type",
            "join",
            "--selectivity",
            "1e-4",
            "--count",
            "5",
            "--runs",
            "1",
        )
        assert code == 0
        assert "mean_ms" in out


class TestZOrderKey:
    def test_build_and_query_with_zorder(self, tmp_path, capsys):
        snap = str(tmp_path / "z.lilis")
        code, _ = run(
            capsys, "build", "--gen", "uniform:5000", "--key", "zorder", "--seed", "2", "-o", snap
        )
        assert code == 0
        code, out = run(capsys, "query", snap, "--range", "0.2,0.2,0.4,0.4")
        assert code == 0
        lines = [l for l in out.splitlines() if l and not l.startswith("#")]
        # uniform 5000 over the unit square: about 4% of points in this window
        assert 100 <= len(lines) <= 350


class TestGen:
    def test_points_csv(self, tmp_path, capsys):
        out_path = tmp_path / "pts.csv"
        code, _ = run(capsys, "gen", "points", "--dist", "uniform", "--n", "100", "-o", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "x,y" and len(lines) == 101

    def test_generated_csv_feeds_build(self, tmp_path, capsys):
        """gen output must parse back losslessly through ingest."""
        csv_path = str(tmp_path / "pts.csv")
        run(capsys, "gen", "points", "--dist", "gaussian", "--n", "500", "--seed", "4", "-o", csv_path)
        from lilis.storage import CsvSchema, ingest_csv

        parsed = ingest_csv(csv_path, CsvSchema(has_header=True))
        assert len(parsed.xs) == 500 and parsed.skipped == 0
        code, out = run(
            capsys, "build", "--csv", csv_path, "--header", "-o", str(tmp_path / "d.lilis")
        )
        assert code == 0 and "objects: 500" in out

    def test_polygons_file(self, tmp_path, capsys):
        out_path = tmp_path / "p.txt"
        code, _ = run(capsys, "gen", "polygons", "--n", "12", "-o", str(out_path))
        assert code == 0
        assert len(out_path.read_text().splitlines()) == 12

    def test_seed_env_override(self, tmp_path, capsys, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        monkeypatch.setenv("LILIS_SEED", "777")
        run(capsys, "gen", "points", "--n", "50", "--seed", "1", "-o", str(a))
        run(capsys, "gen", "points", "--n", "50", "--seed", "2", "-o", str(b))
        assert a.read_text() == b.read_text()
