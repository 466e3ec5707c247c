import json
import math

import numpy as np
import pytest

import nllvm_lab as nl


def integral(values, step):
    v = np.asarray(values)
    return step * (v.sum() - 0.5 * (v[0] + v[-1]))


def test_normal_density_and_divergences():
    g = nl.Grid(-8.0, 8.0, 4001)
    p = nl.normal_density(g, 0.0, 1.0)
    q = nl.normal_density(g, 0.5, 1.0)
    assert integral(p.values, g.step()) == pytest.approx(1.0, abs=1e-9)
    assert nl.divergence("kl", p, q) == pytest.approx(0.125, abs=1e-6)
    assert nl.divergence("hellinger_sq", p, q) == pytest.approx(1 - math.exp(-0.25 / 8), abs=1e-6)
    assert nl.divergence("kl", p, p) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(nl.ParameterError):
        nl.divergence("renyi", p, q, alpha=1.5)
    with pytest.raises(nl.Error):
        nl.mixture_density([0.0, 1.0], [0.0, 0.0], 1.0, nl.Grid(-1.0, 1.0, 64))


def test_quantile_mixture_matches_convolution():
    g = nl.Grid(-1.5, 2.5, 2048)
    x = g.points()
    f0 = nl.GridDensity(g, np.exp(-0.5 * ((x - 0.5) / 0.15) ** 2))
    knots, values = nl.quantile_of(f0, 1024)
    mix = nl.mixture_density(knots, values, 0.1, g)
    conv = nl.convolve_gaussian(f0, 0.1)
    assert np.max(np.abs(mix.values - conv.values)) < 2e-3


def test_fbeta_forms_agree():
    g = nl.Grid(-1.5, 2.5, 2048)
    f0 = nl.normal_density(g, 0.5, 0.15)
    _, a = nl.fbeta(f0, 0.03, 2)
    _, b = nl.fbeta(f0, 0.03, 2, closed_form=True)
    assert np.max(np.abs(a - b)) < 1e-8


def test_checks_return_reports():
    r = nl.check_hellinger_bound(100, 1)
    assert r["violations"] == 0 and r["pass"]
    chi = nl.chi2_limit_experiment(1000, 500, seed=3)
    assert chi["metrics"]["mean"] == pytest.approx(0.5, abs=0.1)
    assert chi["metrics"]["mean_scaled"] == pytest.approx(1.0, abs=0.2)
    assert nl.mixture_identity_check(2)["pass"]


def test_vi_matches_exact_posterior():
    rng = np.random.default_rng(0)
    data = list(rng.normal(0.3, 1.0, 100))
    fit = nl.vi_normal_normal(data, alpha=0.99, seed=1, theta_star=0.3)
    assert fit["kl_to_exact"] < 0.05


def test_estimate_small_run():
    rng = np.random.default_rng(1)
    data = list(np.clip(rng.normal(0.5, 0.15, 60), 0.0, 1.0))
    out = nl.estimate(data, nl.Grid(-4.0, 5.0, 1024), iters=80, burn=20, thin=6, seed=2)
    assert len(out["sigma"]) == 10
    pred = out["predictive"]
    assert integral(pred.values, pred.grid.step()) == pytest.approx(1.0, abs=1e-6)


def test_load_csv_and_cli(tmp_path):
    good = tmp_path / "d.csv"
    good.write_text("y\n0.1\n0.2\n")
    assert nl.load_csv(str(good)) == [0.1, 0.2]
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1\nnan\n")
    with pytest.raises(nl.ParseError, match="line 2"):
        nl.load_csv(str(bad))

    out = tmp_path / "r.json"
    assert nl.run_cli(["verify", "fbeta-closed-form", "--densities", "2", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["schema_version"] == "1"
    assert report["pass"] is True
    assert nl.run_cli(["bogus", "--out", str(out)]) == 2
