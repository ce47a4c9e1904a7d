import itertools
import json
import math

import pytest

from stochgeo.cli import build_parser, parse_int_grid, run


@pytest.fixture
def cube_json(tmp_path):
    p = tmp_path / "cube.json"
    p.write_text(json.dumps({"dim": 3, "vertices": [list(v) for v in itertools.product([0.0, 1.0], repeat=3)]}))
    return p


def test_range_syntax():
    assert parse_int_grid("128..8192x2") == (128, 256, 512, 1024, 2048, 4096, 8192)
    assert parse_int_grid("10..1000x10") == (10, 100, 1000)
    assert parse_int_grid("5,7,9") == (5, 7, 9)


def test_capvol_half_disk(capsys):
    assert run(["capvol", "--dim", "2", "--t", "1.0"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(math.pi / 2)


def test_wetpart_and_capcover(capsys):
    assert run(["wetpart", "--dim", "3", "--t", str(4 * math.pi / 6)]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    vals = dict(zip(header.split(","), map(float, row.split(","))))
    assert vals["floating_radius"] == pytest.approx(0.0, abs=1e-10)
    assert run(["capcover", "--dim", "2", "--t", "1e-3", "--seed", "1", "--samples", "2000"]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    vals = dict(zip(header.split(","), map(float, row.split(","))))
    assert vals["covered_fraction"] == 1.0 and vals["inner_disjoint"] == 1


def test_intrinsic_cube_methods(cube_json, capsys):
    assert run(["intrinsic", "--in", str(cube_json), "--s", "1", "--method", "external-angle"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(3.0)
    assert run(["intrinsic", "--in", str(cube_json), "--s", "2", "--method", "kubota", "--frames", "4000"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(3.0, rel=0.02)
    assert run(["intrinsic", "--in", str(cube_json), "--s", "9"]) == 2


def test_sample_hull_roundtrip(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    poly = tmp_path / "poly.json"
    assert run(["sample", "--dim", "3", "--n", "200", "--seed", "4", "--out", str(pts)]) == 0
    assert len(pts.read_text().splitlines()) == 200
    assert run(["hull", "--in", str(pts), "--out", str(poly)]) == 0
    obj = json.loads(poly.read_text())
    assert obj["dim"] == 3 and len(obj["vertices"]) < 200
    assert run(["hull", "--in", str(poly), "--method", "incremental"]) == 0


def test_variance_experiment_outputs(tmp_path):
    out = tmp_path / "var.csv"
    argv = ["experiment", "variance", "--dim", "2", "--s", "2", "--n", "128..8192x2", "--reps", "500", "--seed", "42", "--out", str(out)]
    assert run(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("n,") and len(lines) == 8
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["seed"] == 42 and math.isfinite(side["slope"]) and side["config_hash"]
    first = out.read_bytes()
    assert run(argv + ["--threads", "3"]) == 0
    assert out.read_bytes() == first


def test_config_file_and_seed_priority(tmp_path, monkeypatch):
    conf = tmp_path / "run.conf"
    conf.write_text("# small run\ndim = 2\nn = 32,64,128\nreps = 5\nseed = 11\n")
    a, b, c, e = (tmp_path / f"{k}.csv" for k in "abce")
    assert run(["experiment", "variance", "--config", str(conf), "--out", str(a)]) == 0
    assert json.loads(a.with_suffix(".json").read_text())["seed"] == 11
    assert run(["experiment", "variance", "--config", str(conf), "--seed", "12", "--out", str(b)]) == 0
    assert json.loads(b.with_suffix(".json").read_text())["seed"] == 12
    monkeypatch.setenv("STOCHGEO_SEED", "13")
    assert run(["experiment", "variance", "--config", str(conf), "--out", str(c)]) == 0
    assert json.loads(c.with_suffix(".json").read_text())["seed"] == 11
    assert run(["experiment", "variance", "--dim", "2", "--n", "32,64,128", "--reps", "5", "--out", str(e)]) == 0
    assert json.loads(e.with_suffix(".json").read_text())["seed"] == 13


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(["capvol", "--dim", "2", "--tt", "1"]) == 2
    assert "--tt" in capsys.readouterr().err
    bad = tmp_path / "bad.conf"
    bad.write_text("dimension = 2\n")
    assert run(["experiment", "variance", "--config", str(bad)]) == 2
    assert "dimension" in capsys.readouterr().err
    assert run(["experiment", "variance", "--dim", "2", "--n", "64,32"]) == 2
    assert run(["capvol", "--dim", "2"]) == 2
    assert "--t" in capsys.readouterr().err


def test_numeric_failure_exit_3(capsys):
    assert run(["capvol", "--dim", "2", "--t", "3"]) == 3
    assert run(["wetpart", "--dim", "2", "--t", "2"]) == 3


def _leaf_parsers(parser, prefix=()):
    import argparse

    subs = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    if not subs:
        yield prefix, parser
        return
    for name, p in subs[0].choices.items():
        yield from _leaf_parsers(p, prefix + (name,))


def test_help_lists_every_flag(capsys):
    for path, leaf in _leaf_parsers(build_parser()):
        assert run(list(path) + ["--help"]) == 0
        text = capsys.readouterr().out
        for act in leaf._actions:
            for opt in act.option_strings:
                assert opt in text, (path, opt)
            if act.option_strings and act.dest not in ("help",):
                assert act.help, (path, act.dest)
