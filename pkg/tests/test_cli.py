import csv
import io
import json

import numpy as np
import pytest

from cauchy_im.cli import main, parse_grid, read_data
from cauchy_im.estimators import pitman_posterior_marginals
from cauchy_im.reports import REPORT_SCHEMA


def _data(tmp_path, values, name="x.txt"):
    p = tmp_path / name
    p.write_text("# data\n" + "\n".join(str(v) for v in values) + "\n\n", encoding="utf-8")
    return str(p)


def _csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array(rows[1:], dtype=float)


def _split(out):
    # CSV first, then one JSON summary line
    lines = out.strip().splitlines()
    return "\n".join(lines[:-1]), json.loads(lines[-1])


def test_read_data_and_errors(tmp_path):
    assert np.array_equal(read_data(_data(tmp_path, [1.5, -2])), [1.5, -2.0])
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\n# ok\nabc\n")
    with pytest.raises(Exception, match=":3:"):
        read_data(str(bad))


def test_parse_grid():
    assert np.array_equal(parse_grid("-1:1:3"), [-1.0, 0.0, 1.0])
    for bad in ("1:0:5", "0:1", "0:1:1", "a:b:c"):
        with pytest.raises(Exception):
            parse_grid(bad)
    with pytest.raises(Exception):
        parse_grid("0:1:5", positive=True)


def test_plaus_single_datum(tmp_path, capsys):
    assert main(["plaus", _data(tmp_path, [0.0]), "--mu-grid", "-10:10:401", "--sigma", "1"]) == 0
    header, rows = _csv(capsys.readouterr().out)
    assert header == ["mu", "plausibility"] and rows.shape == (401, 2)
    at = dict(zip(np.round(rows[:, 0], 6), rows[:, 1]))
    assert at[1.0] == 0.5 and at[0.0] == 1.0 and at[-1.0] == 0.5


def test_plaus_six_decimals_and_digits_flag(tmp_path, capsys):
    path = _data(tmp_path, [0.0])
    main(["plaus", path, "--mu-grid", "0:1:2"])
    assert capsys.readouterr().out.splitlines()[2] == "1.000000,0.500000"
    main(["plaus", path, "--mu-grid", "0:1:2", "--digits", "3"])
    assert capsys.readouterr().out.splitlines()[2] == "1.000,0.500"


def test_plaus_out_file(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    assert main(["plaus", _data(tmp_path, [0.0]), "--mu-grid", "-1:1:5", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert out.read_text().startswith("mu,plausibility\n")


def test_usage_errors_exit_2(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    assert main(["plaus", str(empty), "--mu-grid", "-1:1:5"]) == 2
    assert "no data values" in capsys.readouterr().err
    assert main(["plaus", _data(tmp_path, [0.0]), "--mu-grid", "1:-1:5"]) == 2
    assert main(["plaus", str(tmp_path / "missing.txt"), "--mu-grid", "-1:1:5"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["estimate", _data(tmp_path, [1.0])])
    assert exc.value.code == 2
    assert main(["estimate", _data(tmp_path, [1.0, 2.0]), "--method", "pitman"]) == 2
    assert main(["estimate", _data(tmp_path, [1.0, 2.0]), "--method", "trimmed"]) == 2


def test_marginal_symmetric_interval(tmp_path, capsys):
    assert main(["marginal", _data(tmp_path, [-1, 1]), "--param", "mu", "--level", "0.5"]) == 0
    text, summary = _split(capsys.readouterr().out)
    assert list(summary) == ["param", "level", "lower", "upper"]
    assert abs(summary["lower"] + summary["upper"]) <= 1e-6
    header, rows = _csv(text)
    assert header == ["mu", "plausibility"] and np.all((rows[:, 1] >= 0) & (rows[:, 1] <= 1))


def test_marginal_matches_pitman_posterior_quantiles(tmp_path, capsys):
    x = [0.3, -1.0, 2.2, 0.8]
    path = _data(tmp_path, x)
    mu_post, sigma_post = pitman_posterior_marginals(np.array(x))
    for param, post in (("mu", mu_post), ("sigma", sigma_post)):
        assert main(["marginal", path, "--param", param, "--level", "0.9", "--digits", "10"]) == 0
        _, s = _split(capsys.readouterr().out)
        assert s["lower"] == pytest.approx(float(post.quantile(0.05)), abs=1e-4)
        assert s["upper"] == pytest.approx(float(post.quantile(0.95)), abs=1e-4)
        if param == "sigma":
            assert s["lower"] > 0


def test_tie_at_minimum_exits_3(tmp_path, capsys):
    path = _data(tmp_path, [1.0, 1.0, 4.0])
    assert main(["marginal", path]) == 3
    assert "degenerate" in capsys.readouterr().err
    assert main(["joint", path]) == 3


def test_joint_small_surface(tmp_path, capsys):
    path = _data(tmp_path, [-1.0, 0.2, 1.5])
    assert main(["joint", path, "--mu-grid", "-2:2:5", "--sigma-grid", "0.5:3:4", "--level", "0.9"]) == 0
    text, summary = _split(capsys.readouterr().out)
    header, rows = _csv(text)
    assert header == ["mu", "sigma", "plausibility"] and rows.shape == (20, 3)
    assert summary["param"] == "mu" and summary["lower"] <= summary["upper"]


def test_estimates(tmp_path, capsys):
    assert main(["estimate", _data(tmp_path, [1, 2, 3]), "--method", "mean"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert list(out) == ["method", "estimate", "diagnostics"] and out["estimate"] == 2.0
    assert main(["estimate", _data(tmp_path, [-1, 1]), "--method", "pitman", "--sigma", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["estimate"] == 0.0
    assert main(["estimate", _data(tmp_path, [-1, 1]), "--method", "mle"]) == 3
    capsys.readouterr()
    assert main(["estimate", _data(tmp_path, [-3, -1, 1, 3]), "--method", "mle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["estimate"]["mu"] == 0.0 and out["diagnostics"]["spread"] <= 1e-5


def _scenario(tmp_path, d, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def test_validate_deterministic_bytes_and_key_order(tmp_path, capsys):
    sc = _scenario(tmp_path, {"n": 1, "mu": 0.0, "sigma": 1.0, "method": "basic", "level": 0.95,
                              "n_sim": 2000})
    assert main(["validate", "--scenario", sc, "--seed", "7", "--no-timing"]) == 0
    first = capsys.readouterr().out
    assert main(["validate", "--scenario", sc, "--seed", "7", "--no-timing", "--workers", "2"]) == 0
    assert capsys.readouterr().out == first
    rep = json.loads(first)
    assert list(rep) == ["scenario", "metrics", "provenance"]
    assert list(rep["metrics"]) == REPORT_SCHEMA["metrics"]
    assert list(rep["provenance"]) == REPORT_SCHEMA["provenance"]
    assert rep["metrics"]["ks_pvalue"] > 0.01 and rep["provenance"]["seed"] == 7


def test_validate_seed_from_environment(tmp_path, capsys, monkeypatch):
    sc = _scenario(tmp_path, {"n": 1, "n_sim": 1000})
    monkeypatch.setenv("CAUCHY_IM_SEED", "7")
    main(["validate", "--scenario", sc, "--no-timing"])
    env = capsys.readouterr().out
    main(["validate", "--scenario", sc, "--no-timing", "--seed", "7"])
    assert capsys.readouterr().out == env
    monkeypatch.setenv("CAUCHY_IM_SEED", "x")
    assert main(["validate", "--scenario", sc]) == 2


def test_validate_timing_section(tmp_path, capsys):
    sc = _scenario(tmp_path, {"n": 1, "n_sim": 1000})
    main(["validate", "--scenario", sc, "--seed", "1"])
    assert list(json.loads(capsys.readouterr().out)) == ["scenario", "metrics", "provenance", "timing"]


def test_validate_negative_control_exits_1(tmp_path, capsys):
    sc = _scenario(tmp_path, {"n": 1, "method": "basic", "n_sim": 2000, "set_kind": "cdf-centered",
                              "shrink": 0.5})
    assert main(["validate", "--scenario", sc, "--seed", "0"]) == 1
    assert json.loads(capsys.readouterr().out)["metrics"]["dominance_ok"] is False


def test_validate_malformed_scenarios_exit_2(tmp_path):
    bad_key = _scenario(tmp_path, {"n": 1, "flavour": 3}, "a.json")
    bad_json = tmp_path / "b.json"
    bad_json.write_text("{n: 1")
    not_obj = _scenario(tmp_path, [1, 2], "c.json")
    for path in (bad_key, str(bad_json), not_obj, str(tmp_path / "none.json")):
        assert main(["validate", "--scenario", path]) == 2
    assert main(["validate", "--scenario", _scenario(tmp_path, {"n": 1}, "d.json"), "--workers", "0"]) == 2
