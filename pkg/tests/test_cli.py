import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mrl.bands import a_of_q
from mrl.cli import main, read_dataset
from mrl.empirical import SortedSample


def _write(tmp_path, text, name="data.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def expo_file(tmp_path):
    values = np.random.default_rng(0).exponential(1.0, 500)
    return _write(tmp_path, "".join(f"{v!r}\n" for v in values.tolist()))


def test_estimate_basic(tmp_path, capsys):
    path = _write(tmp_path, "1\n2\n3\n")
    code, out, _ = _run(capsys, ["estimate", "--input", path])
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == ["x", "ehat", "sf", "k"]
    assert rows[0]["x"] == "0" and float(rows[0]["ehat"]) == 2.0 and rows[0]["k"] == "3"
    # both sides of each breakpoint
    at2 = [r for r in rows if r["x"] == "2"]
    assert [float(r["ehat"]) for r in at2] == [0.5, 1.0] and [r["k"] for r in at2] == ["2", "1"]


def test_estimate_grid(tmp_path, capsys):
    path = _write(tmp_path, "1\n2\n3\n")
    _, out, _ = _run(capsys, ["estimate", "--input", path, "--grid", "1.5,10"])
    rows = {r["x"]: r for r in _rows(out)}
    assert float(rows["1.5"]["ehat"]) == 1.0 and float(rows["10"]["ehat"]) == 0.0


def test_empty_file(tmp_path, capsys):
    code, _, err = _run(capsys, ["estimate", "--input", _write(tmp_path, "")])
    assert code == 2 and "no data" in err


def test_bad_line_reports_number(tmp_path, capsys):
    code, _, err = _run(capsys, ["estimate", "--input", _write(tmp_path, "1\n2\nabc\n4\n")])
    assert code == 2 and "line 3" in err and "abc" in err


@pytest.mark.parametrize("text, msg", [("1\n-2\n", "negative"), ("1\nnan\n", "not finite"), ("1,2\n", "single column")])
def test_bad_values(tmp_path, capsys, text, msg):
    code, _, err = _run(capsys, ["estimate", "--input", _write(tmp_path, text)])
    assert code == 2 and msg in err


def test_header_and_csv(tmp_path):
    data = read_dataset(_write(tmp_path, "﻿time\n1.5\n\n\"2.5\"\n3\n"))
    assert data.header == "time" and data.values == (1.5, 2.5, 3.0)
    assert len(data.digest) == 64


def test_missing_file(capsys):
    code, _, err = _run(capsys, ["estimate", "--input", "/nonexistent/file"])
    assert code == 2


def test_usage_errors(capsys, expo_file):
    assert _run(capsys, [])[0] == 1
    assert _run(capsys, ["band", "--input", expo_file, "--beta", "1.5"])[0] == 1
    assert _run(capsys, ["band", "--input", expo_file, "--m", "500"])[0] == 1
    assert _run(capsys, ["frobnicate"])[0] == 1


def test_band_columns_and_identities(tmp_path, capsys, expo_file):
    out = str(tmp_path / "band.csv")
    code, _, _ = _run(capsys, ["band", "--input", expo_file, "--beta", "0.9", "--out", out])
    assert code == 0
    text = open(out).read()
    rows = _rows(text)
    assert list(rows[0]) == ["x", "lower", "ehat", "upper", "reference", "halfwidth"]
    manifest = json.load(open(out + ".manifest.json"))
    res = manifest["results"]
    assert res["a"] == pytest.approx(a_of_q(0.9)) and res["m"] == 22
    assert "sd" in res and "b_hat" in res
    assert manifest["input_digest"] == read_dataset(expo_file).digest
    xs = np.array([float(r["x"]) for r in rows])
    assert xs[0] == 0 and xs[-1] == pytest.approx(res["b_hat"], rel=1e-9)
    # 10 significant digits
    for r in rows[:20]:
        for v in r.values():
            assert len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) <= 10


def test_band_json_exact(capsys, expo_file):
    code, out, _ = _run(capsys, ["band", "--input", expo_file, "--format", "json"])
    payload = json.loads(out)
    mean = SortedSample(read_dataset(expo_file).values).mean
    for r in payload["rows"]:
        assert r["lower"] == r["ehat"] - r["halfwidth"]
        assert r["upper"] == r["ehat"] + r["halfwidth"]
        assert r["reference"] == mean - r["x"]
    assert payload["metadata"]["sd_divisor"] == "n"


def test_band_small_and_degenerate(tmp_path, capsys):
    assert _run(capsys, ["band", "--input", _write(tmp_path, "1\n2\n3\n")])[0] == 2
    code, _, err = _run(capsys, ["band", "--input", _write(tmp_path, "2\n2\n2\n2\n2\n")])
    assert code == 2 and "degenerate" in err


def test_pointwise(capsys, expo_file):
    code, out, _ = _run(capsys, ["pointwise", "--input", expo_file, "--xs", "0,1,1000", "--beta", "0.9"])
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == ["x", "k", "ehat", "se", "lower", "upper", "small_k_warning", "error"]
    values = np.array(read_dataset(expo_file).values)
    # x = 0: z-interval for the mean of all exceedances
    se = values.std() / math.sqrt(values.size)
    assert float(rows[0]["se"]) == pytest.approx(se, rel=1e-9)
    assert float(rows[0]["upper"]) == pytest.approx(values.mean() + 1.6448536270 * se, rel=1e-9)
    assert rows[0]["small_k_warning"] == "false" and rows[0]["error"] == ""
    assert rows[2]["error"] and rows[2]["ehat"] == "" and rows[2]["k"] == "0"


def test_pointwise_inside_band(capsys, expo_file):
    _, out, _ = _run(capsys, ["band", "--input", expo_file, "--format", "json"])
    band = [r for r in json.loads(out)["rows"]]
    xs = sorted({r["x"] for r in band})[1:200:20]
    _, out, _ = _run(capsys, ["pointwise", "--input", expo_file, "--format", "json", "--xs", ",".join(map(repr, xs))])
    for pw in json.loads(out)["rows"]:
        b = [r for r in band if r["x"] == pw["x"]][-1]  # value row follows the left limit
        assert b["lower"] <= pw["lower"] <= pw["upper"] <= b["upper"]


def test_pointwise_all_fail(tmp_path, capsys):
    code, out, _ = _run(capsys, ["pointwise", "--input", _write(tmp_path, "1\n2\n3\n"), "--xs", "5,6"])
    assert code == 2 and len(_rows(out)) == 2


COVERAGE = ["coverage", "--model", "exp:1", "--n", "200", "--reps", "40", "--beta", "0.9", "--seed", "42"]


def _strip_runtime(text):
    d = json.loads(text)
    d["report"].pop("runtime")
    return json.dumps(d, sort_keys=True)


def test_coverage_deterministic(capsys):
    code, a, _ = _run(capsys, COVERAGE)
    _, b, _ = _run(capsys, COVERAGE + ["--workers", "2"])
    assert code == 0
    da, db = json.loads(a), json.loads(b)
    assert da["manifest"]["seed"] == 42
    assert da["report"]["contained"] == db["report"]["contained"]
    assert da["report"]["sup_stats"] == db["report"]["sup_stats"]
    _, c, _ = _run(capsys, COVERAGE)
    assert _strip_runtime(a) == _strip_runtime(c)


def test_coverage_infinite_variance(capsys):
    code, _, err = _run(capsys, ["coverage", "--model", "pareto:0.6", "--n", "100", "--reps", "5"])
    assert code == 1 and "infinite variance" in err


@pytest.mark.parametrize("spec", ["foo:1", "exp:1,2", "exp:-1", "weibull:x"])
def test_bad_model(capsys, spec):
    assert _run(capsys, ["coverage", "--model", spec, "--n", "100", "--reps", "5"])[0] == 1


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("MRL_SEED", "7")
    _, a, _ = _run(capsys, ["sample", "--model", "exp:1", "--n", "5"])
    _, b, _ = _run(capsys, ["sample", "--model", "exp:1", "--n", "5", "--seed", "7"])
    assert a == b
    monkeypatch.setenv("MRL_SEED", "x")
    assert _run(capsys, ["sample", "--model", "exp:1", "--n", "5"])[0] == 1


def test_simulate_report(capsys):
    code, out, _ = _run(capsys, ["simulate", "--model", "exp:1", "--n", "300", "--reps", "50", "--seed", "1", "--xs", "0"])
    assert code == 0
    rep = json.loads(out)["report"]
    assert rep["a"] == [0.871, 1.149, 1.534, 1.96, 2.241, 2.807]
    assert rep["q_theory"][3] == pytest.approx(0.9, abs=5e-4)
    assert all(0 <= q <= 1 for q in rep["q_empirical"])
    assert "0.0" in rep["pointwise_ks"]


def test_replay_reproduces(tmp_path, capsys, expo_file):
    out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert _run(capsys, ["band", "--input", expo_file, "--beta", "0.8", "--grid", "0.5", "--out", out1])[0] == 0
    assert _run(capsys, ["replay", out1 + ".manifest.json", "--out", out2])[0] == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()
    # input changed since the manifest was written
    with open(expo_file, "a") as f:
        f.write("1.0\n")
    assert _run(capsys, ["replay", out1 + ".manifest.json", "--out", out2])[0] == 2


def test_replay_monte_carlo(tmp_path, capsys):
    out1, out2 = str(tmp_path / "c1.json"), str(tmp_path / "c2.json")
    _run(capsys, COVERAGE + ["--out", out1])
    _run(capsys, ["replay", out1 + ".manifest.json", "--out", out2])
    assert _strip_runtime(open(out1).read()) == _strip_runtime(open(out2).read())


def test_manifest_to_stderr(capsys, expo_file):
    _, out, err = _run(capsys, ["estimate", "--input", expo_file])
    assert json.loads(err)["command"] == "estimate"


def test_entry_point(tmp_path):
    path = _write(tmp_path, "1\n2\n3\n")
    proc = subprocess.run(
        [sys.executable, "-m", "mrl", "estimate", "--input", path], capture_output=True, text=True
    )
    assert proc.returncode == 0 and proc.stdout.startswith("x,ehat,sf,k\n0,2,1,3\n")
