import numpy as np
import pytest

import cvcov


def ar1(J, rho):
    idx = np.arange(J)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def test_sample_covariance_matches_numpy():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5))
    np.testing.assert_allclose(cvcov.sample_covariance(X), X.T @ X / 30, rtol=1e-12, atol=1e-14)


def test_select_returns_minimum_risk_candidate():
    X = cvcov.sample_gaussian(ar1(8, 0.6), 60, 3)
    report = cvcov.select(X, folds=5, seed=1)
    risks = {c["id"]: c["cv_risk"] for c in report["candidates"] if not c["failed"]}
    assert len(report["candidates"]) == 73
    assert report["selected_id"] == min(risks, key=risks.get)
    est = np.asarray(report["estimate"])
    assert est.shape == (8, 8)
    np.testing.assert_array_equal(est, est.T)


def test_custom_library_and_fit():
    X = cvcov.sample_gaussian(ar1(6, 0.5), 40, 4)
    lib = [cvcov.Estimator.banding(1), cvcov.Estimator.hard(0.2), cvcov.Estimator.linear_shrinkage()]
    report = cvcov.select(X, library=lib, pn=0.2, splits=5, seed=2)
    assert report["selected_id"] in {e.id for e in lib}
    band = cvcov.Estimator.banding(0).fit(X)
    np.testing.assert_array_equal(band, np.diag(np.diag(cvcov.sample_covariance(X))))


def test_routes_agree():
    X = cvcov.sample_gaussian(cvcov.model_covariance(4, 12), 40, 9)
    a = cvcov.select(X, route="observation", seed=5)
    b = cvcov.select(X, route="matrix", seed=5)
    assert a["selected_id"] == b["selected_id"]
    assert a["tie_ids"] == b["tie_ids"]


def test_losses():
    assert cvcov.observation_loss(np.array([2.0]), np.array([[1.0]])) == 9.0
    assert cvcov.true_risk_difference(np.array([[2.0]]), np.array([[1.0]])) == 1.0


def test_simulate_rows_and_determinism():
    rows, log = cvcov.simulate([2], [30], [0.3], replications=2, metrics=["frobenius"])
    assert log == []
    assert len(rows) == 2 * (73 + 1)
    again, _ = cvcov.simulate([2], [30], [0.3], replications=2, metrics=["frobenius"])
    assert rows == again


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        cvcov.sample_covariance(np.array([[1.0, np.nan]]))
    with pytest.raises(cvcov.ConfigError):
        cvcov.select(np.ones((10, 3)), folds=1)
    with pytest.raises(cvcov.ConfigError):
        cvcov.Estimator.hard(-1.0)
