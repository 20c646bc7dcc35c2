import json
import os
import re

import numpy as np
import pytest

from consistent_sgd.bounds import BoundConstants, bound_curve
from consistent_sgd.harness.cli import main
from consistent_sgd.harness.config import (PRESETS, ExperimentConfig, format_config, load_preset,
                                           parse_config_text)
from consistent_sgd.harness.experiment import run_experiment
from consistent_sgd.harness.io import read_bound_csv, read_trace_csv, write_bound_csv
from consistent_sgd.harness.plot import emit_plot, reference_points
from consistent_sgd.harness.rates import check_rate
from consistent_sgd.harness.verify import verify_suite
from consistent_sgd.problems import gradient

K = np.arange(1, 3001, dtype=float)


def test_rate_exact_power_law():
    r = check_rate((K, 1.0 / K), "dist_sq", -0.8, (100, 3000))
    assert r.slope == pytest.approx(-1.0, abs=1e-10) and r.r2 == pytest.approx(1.0, abs=1e-12)
    assert r.passed and r.floor_cutoff is None and r.n_used == 2901


@pytest.mark.parametrize("a", [-0.37, -1.5, 0.2])
def test_rate_recovers_exponent(a):
    assert check_rate((K, 3.7 * K**a), "f_gap", 0.0, (10, 2000)).slope == pytest.approx(a, abs=1e-9)


def test_rate_constant_fails():
    r = check_rate((K, np.full_like(K, 2.0)), "dist_sq", -0.8, (100, 3000))
    assert r.slope == pytest.approx(0.0, abs=1e-12) and not r.passed


def test_rate_floor_and_zeros():
    v = 1.0 / K**2
    v[999:] = 1e-30
    v[500] = 0.0
    r = check_rate((K, v), "min_grad_norm_sq", -0.5, (100, 3000))
    assert r.floor_cutoff == 501
    r = check_rate((K, np.where(K == 300, -1.0, 1.0 / K)), "dist_sq", -0.8, (100, 3000), floor=-np.inf)
    assert r.n_excluded == 1 and r.slope == pytest.approx(-1.0, abs=1e-10)


def test_rate_errors():
    with pytest.raises(ValueError):
        check_rate((K, 1e-30 * np.ones_like(K)), "dist_sq", -1, (100, 3000))
    with pytest.raises(ValueError):
        check_rate((K, 1 / K), "dist_sq", -1, (100, 4000))
    with pytest.raises(ValueError):
        check_rate((K, 1 / K), "dist_sq", -1, (300, 100))


def _trace(tmp_path):
    cfg = ExperimentConfig(T=120, seeds=[0], rate_window=[10, 120], output_dir=str(tmp_path / "r"), plot=False)
    return run_experiment(cfg).traces[0]


def test_plot_counts(tmp_path):
    tr = _trace(tmp_path)
    curve = bound_curve("T2_iterate", BoundConstants(G=1.0, l=0.1, T=120))
    path = emit_plot([tr], [curve], tmp_path / "f.svg", metrics=("dist_sq",))
    svg = path.read_text()
    assert svg.count("<polyline") == 2 and 'id="axes"' in svg
    svg = emit_plot([tr], [curve], tmp_path / "g.svg", metrics=("dist_sq",), reference=(5.0, -1.0)).read_text()
    assert svg.count("<polyline") == 3 and 'id="reference"' in svg
    all4 = emit_plot([tr], [], tmp_path / "h.svg").read_text()
    for colour in ("red", "cyan", "blue", "magenta"):
        assert f'stroke="{colour}"' in all4
    with pytest.raises(ValueError):
        emit_plot([], [], tmp_path / "e.svg")


def test_reference_line_construction():
    (k0, v0), (k1, v1) = reference_points(7.0, -1.0, 1.0, 1000.0)
    assert (k0, v0) == (1.0, 7.0)
    assert np.log10(v1 / v0) / np.log10(k1 / k0) == pytest.approx(-1.0, abs=1e-12)


def test_config_parsing():
    cfg = parse_config_text("kind = nonconvex  # comment\nseeds = 1, 2,3\nn1 =\nbounds = T2_iterate\nplot = no\n")
    assert cfg.kind == "nonconvex" and cfg.seeds == [1, 2, 3] and cfg.n1 is None
    assert cfg.bounds == ["T2_iterate"] and cfg.plot is False
    assert parse_config_text(format_config(cfg)) == cfg
    with pytest.raises(ValueError, match="'T'"):
        parse_config_text("T = many")
    with pytest.raises(ValueError, match="unknown config field"):
        parse_config_text("colour = red")
    with pytest.raises(ValueError, match="line 1"):
        parse_config_text("just words")
    with pytest.raises(ValueError, match="'n1'"):
        ExperimentConfig(n1=301).validate()
    with pytest.raises(ValueError, match="'bounds'"):
        ExperimentConfig(bounds=["T7"]).validate()


def test_defaults_reproduce_figure_setup():
    cfg = ExperimentConfig().validate()
    assert (cfg.n, cfg.p, cfg.d, cfg.n1, cfg.n2, cfg.rule, cfg.c) == (300, 0.3, 10, 30, 1, "inverse_lk", 0.05)
    d = load_preset("fig1d")
    assert (d.kind, d.n1, d.n2, d.n3, d.rule, d.c) == ("nonconvex", 30, 30, 1, "constant", 0.01)
    for name in PRESETS:
        assert len(load_preset(name).validate().seeds) == 16
    with pytest.raises(ValueError):
        load_preset("fig9")


def test_experiment_artifacts_and_determinism(tmp_path):
    cfg = ExperimentConfig(T=200, seeds=[0, 1], rate_window=[20, 200], bounds=["T2_iterate", "T4_convex"],
                           output_dir=str(tmp_path / "a"))
    res = run_experiment(cfg)
    files = sorted(os.listdir(tmp_path / "a"))
    assert files == sorted(res.summary["files"])
    assert {"trace_seed0.csv", "trace_seed1.csv", "mean_trace.csv", "bound_T2_iterate.csv",
            "bound_T4_convex.csv", "figure.svg", "summary.json"} == set(files)
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    for name in ("G", "l", "D", "c"):
        assert name in summary["bound_constants"]
    assert summary["constants"]["D"] == 2 * summary["constants"]["radius"]
    back = read_trace_csv(tmp_path / "a" / "trace_seed0.csv")
    np.testing.assert_array_equal(back.dist_sq, res.traces[0].dist_sq)
    run_experiment(cfg.updated(output_dir=str(tmp_path / "b")))
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_parallel_matches_serial(tmp_path):
    cfg = ExperimentConfig(T=100, seeds=[3, 4], rate_window=[10, 100], plot=False, output_dir=str(tmp_path / "s"))
    run_experiment(cfg)
    run_experiment(cfg.updated(workers=2, output_dir=str(tmp_path / "p")))
    for f in ("trace_seed3.csv", "trace_seed4.csv", "summary.json"):
        a, b = (tmp_path / "s" / f).read_bytes(), (tmp_path / "p" / f).read_bytes()
        if f == "summary.json":
            a, b = (re.sub(rb'"workers": \d', b"", x) for x in (a, b))
        assert a == b


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        run_experiment(ExperimentConfig(T=50, rate_window=[10, 50], output_dir=str(blocker / "sub")))


def test_bound_csv_round_trip(tmp_path):
    curve = bound_curve("T2_average", BoundConstants(G=1.3, l=0.2, T=20))
    back = read_bound_csv(write_bound_csv(tmp_path / "b.csv", curve))
    np.testing.assert_array_equal(back.values, curve.values)
    np.testing.assert_array_equal(back.k, curve.k)


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["generate", "--n", "20", "--out", str(tmp_path / "inst")]) == 0
    assert sorted(os.listdir(tmp_path / "inst")) == ["A.csv", "X.csv", "w_star.csv", "y.csv"]
    code = main(["run", "--T", "200", "--seeds", "0", "--rate-window", "20,200", "--bounds", "T4_convex",
                 "--output-dir", str(out)])
    assert code in (0, 1)
    assert main(["check-rate", str(out / "mean_trace.csv"), "--window", "20", "200", "--target", "10"]) == 0
    assert main(["bounds", "T2_iterate", "--G", "1", "--l", "1", "--k", "4"]) == 0
    assert capsys.readouterr().out.strip().endswith("0.25")
    assert main(["bounds", "T4_convex", "--summary", str(out / "summary.json"), "--out", str(tmp_path / "b.csv")]) == 0
    assert main(["plot", str(out / "mean_trace.csv"), "--bound", str(tmp_path / "b.csv"),
                 "--reference", "1", "-1", "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").exists()
    assert main(["run", "--preset", "fig1c", "--print-config"]) == 0
    assert "kind = nonconvex" in capsys.readouterr().out
    assert main(["run", "--n1", "0"]) == 2
    assert "'n1'" in capsys.readouterr().err


def test_verify_suite_passes():
    results = verify_suite(0, quick=True)
    assert results and all(r.passed for r in results), [r.line() for r in results if not r.passed]


def test_verify_detects_corrupted_gradient():
    results = verify_suite(0, quick=True, gradient_fn=lambda prob, w: gradient(prob, w) + 1e-3)
    fd = [r for r in results if r.name.startswith("finite_differences")]
    assert fd and not any(r.passed for r in fd)
