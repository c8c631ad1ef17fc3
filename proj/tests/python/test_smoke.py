import json

import numpy as np
import pytest

import covgraph as cg


def test_band_precision_is_tridiagonal():
    theta = cg.band_precision(4, 1.0, 0.3)
    assert theta.shape == (4, 4)
    assert theta[0, 1] == 0.3 and theta[0, 2] == 0.0
    np.testing.assert_array_equal(theta, theta.T)


def test_parametric_round_trip_recovers_edges():
    p, d, n = 10, 60, 400
    sigma = cg.covariance_from_precision(cg.band_precision(p), normalize=True)
    a = cg.sensing_matrix(d, p, seed=1)
    x = cg.latent_samples(sigma, n, seed=2)
    y = cg.sense(x, a, 0.1, seed=3)
    assert y.shape == (n, d)
    s = cg.estimate_param(y, a, 0.1)
    np.testing.assert_allclose(np.diag(s), 1.0)
    g = cg.glasso(s, 0.1)
    assert g["converged"]
    found = {(i, j) for i, j, _ in g["edges"]}
    assert len(found & {(i, i + 1) for i in range(p - 1)}) >= p // 2


def test_glasso_two_by_two():
    g = cg.glasso(np.array([[1.0, 0.5], [0.5, 1.0]]), 0.1, tol=1e-10)
    assert g["theta"][0, 1] == pytest.approx(-0.4 / 0.84, rel=1e-8)
    assert g["edges"] == [(0, 1, -1)]


def test_diagnose_identity():
    r = cg.diagnose(np.eye(3))
    assert r["theta_irr"] == 1.0 and r["kappa_gamma"] == 1.0 and r["deg"] == 1
    assert cg.diagnose(np.eye(3), augmented=False)["kappa_gamma"] == 0.0


def test_nonparametric_estimate_is_symmetric():
    p, d, n = 4, 40, 200
    sigma = cg.covariance_from_precision(cg.band_precision(p), normalize=True)
    a = cg.sensing_matrix(d, p, seed=4)
    y = cg.sense(cg.latent_samples(sigma, n, seed=5, marginal="uniform"), a, 0.5, seed=6)
    s = cg.estimate_nonparam(y, a, 0.5)
    np.testing.assert_allclose(s, s.T)
    assert np.linalg.eigvalsh(s).min() >= -1e-10


def test_deconv_cdf_near_noiseless_matches_ecdf():
    samples = [0.1, 0.4, 0.7]
    values = cg.deconv_cdf(samples, [0.25, 0.55], sigma2=1e-10, d=20, p=10, gamma=1e-8, quad_tol=1e-5)
    np.testing.assert_allclose(values, [1 / 3, 2 / 3], atol=1e-3)


def test_errors_raise_covgraph_error():
    with pytest.raises(cg.CovgraphError):
        cg.band_precision(4, 1.0, 0.7)
    with pytest.raises(ValueError):
        cg.glasso(np.eye(2), -1.0)
    with pytest.raises(cg.CovgraphError):
        cg.estimate_param(np.zeros((3, 5)), np.zeros((4, 2)), 0.1)


def test_run_experiment_is_deterministic():
    cfg = {
        "pipeline": "parametric",
        "graph": {"p": 6},
        "grid": {"n": [50], "d": [30], "sigma2": [0.1]},
        "trials": 2,
        "seed": 11,
        "lambda": {"policy": "path", "points": 5},
    }
    a = cg.run_experiment(cfg)
    b = cg.run_experiment(json.dumps(cfg))
    assert a == b
    assert a["truth"]["true_edges"] == 5
    assert "runtime" in cg.run_experiment(cfg, include_runtime=True)


def test_run_sample_experiment_uses_the_data():
    sigma = cg.covariance_from_precision(cg.band_precision(6), normalize=True)
    x = cg.latent_samples(sigma, 200, seed=9)
    cfg = {
        "pipeline": "baseline-ls",
        "graph": {"p": 6},
        "grid": {"n": [50], "d": [30], "sigma2": [0.1]},
        "trials": 2,
        "seed": 1,
        "lambda": {"policy": "path", "criterion": "fixed-target", "target_edges": 5},
    }
    r = cg.run_sample_experiment(cfg, x)
    assert r["truth"]["source"] == "samples"
    assert r["cells"][0]["n"] == 200
    assert r == cg.run_sample_experiment(json.dumps(cfg), x)
