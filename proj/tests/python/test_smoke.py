import math
import pathlib

import numpy as np
import pytest

import distreg

ROOT = pathlib.Path(__file__).resolve().parents[2]
CONFIGS = ROOT / "configs"


def test_family_scores_match_finite_differences():
    fam = distreg.family("gaussian")
    y = np.array([1.3])
    mu, log_sigma = 0.4, math.log(0.7)

    def ll(e0, e1):
        return fam.loglik(y, [np.array([e0]), np.array([math.exp(e1)])])

    h = 1e-5
    par = [np.array([mu]), np.array([math.exp(log_sigma)])]
    fd_mu = (ll(mu + h, log_sigma) - ll(mu - h, log_sigma)) / (2 * h)
    fd_sigma = (ll(mu, log_sigma + h) - ll(mu, log_sigma - h)) / (2 * h)
    assert fam.score(0, y, par)[0] == pytest.approx(fd_mu, rel=1e-6)
    assert fam.score(1, y, par)[0] == pytest.approx(fd_sigma, rel=1e-6)


def test_pspline_partition_of_unity():
    X, K = distreg.pspline_basis(np.linspace(0, 1, 50), k=12)
    assert X.shape == (50, 12)
    assert np.abs(X.sum(axis=1) - 1).max() < 1e-10
    assert np.linalg.matrix_rank(K) == 10


def test_crps_matches_closed_form():
    y = np.array([0.0, 1.5])
    got = distreg.crps("gaussian", y, [np.zeros(2), np.ones(2)])
    want = [distreg.crps_gaussian(0.0, 1.0, v) for v in y]
    assert np.allclose(got, want, atol=1e-6)


def test_gibbs_matches_ols():
    data = distreg.simulate("linear", n=300, seed=3, p=3)
    X = np.column_stack([np.ones(300), data["x1"], data["x2"]])
    y = data["y"]
    s = distreg.gibbs_lm(X, y, M=1e10, seed=3)
    assert s["info"]["a_prime"] == 1 + 150 + 1.5
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    assert np.abs(s["draws"][:, :3].mean(axis=0) - ols).max() < 0.01


def test_fit_model_swisslabor():
    m = distreg.fit_model(str(CONFIGS / "swisslabor.json"))
    assert m.nobs == 872
    assert m.parameters["pi.p.income"] == pytest.approx(-1.104, abs=0.02)
    assert m.dic == pytest.approx(1033.3, rel=0.02)
    draws = m.samples["draws"]
    assert draws.shape[0] == 1001
    data = {"income": [10.5], "age": [3.0], "education": [10.0], "youngkids": [0.0], "oldkids": [1.0],
            "foreign": ["no"]}
    p = m.predict(data)["pi"]
    assert 0.0 < p[0, 0] < 1.0
    assert "Sampler summary" in distreg.summarize(m, str(CONFIGS / "swisslabor.json"))


def test_run_directory_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("DISTREG_OUTPUT_ROOT", str(tmp_path))
    assert distreg.default_output_root() == str(tmp_path)
    run_dir = distreg.fit(str(CONFIGS / "swisslabor.json"))
    assert pathlib.Path(run_dir, "samples.csv").exists()
    assert "DIC" in distreg.summary(run_dir)
    out = distreg.predict(str(CONFIGS / "swisslabor.json"), str(ROOT / "data" / "SwissLabor.csv"),
                          str(tmp_path / "pred.csv"))
    assert pathlib.Path(out).read_text().startswith("pi\n")


def test_errors_are_typed():
    with pytest.raises(distreg.ConfigError):
        distreg.fit_model("/nonexistent/config.json")
    with pytest.raises(distreg.Error):
        distreg.family("weibull")
