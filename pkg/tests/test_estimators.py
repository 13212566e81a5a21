"""scikit-learn contract of the two BER estimators."""
import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mmwave_interference import AnalyticBerModel, MonteCarloBerModel
from mmwave_interference.analytic import active_density, ber_average
from mmwave_interference.params import NetworkParams, ParameterError

BER_NO_INTERFERENCE_M3_10DB = 0.0021138832706028681


def test_params_round_trip_and_clone():
    model = AnalyticBerModel(lambda_ap=0.1, rho_blk=1e-2)
    params = model.get_params()
    assert params["lambda_ap"] == 0.1 and params["infinite_tail_transform"] == "exp_substitution"
    twin = clone(model)
    assert twin.get_params() == params and twin is not model
    twin.set_params(lambda_ap=1e-3)
    assert model.lambda_ap == 0.1


def test_defaults_match_network_params():
    assert AnalyticBerModel().fit().params_ == NetworkParams()
    mc = MonteCarloBerModel()
    assert mc._network_params() == NetworkParams()
    assert (mc.n_realizations, mc.engine, mc.blockage_mode) == (20000, "palm", "bernoulli")


def test_not_fitted():
    with pytest.raises(NotFittedError):
        AnalyticBerModel().predict([10.0])
    with pytest.raises(NotFittedError):
        AnalyticBerModel().laplace([1.0])
    with pytest.raises(NotFittedError):
        MonteCarloBerModel().predict([10.0])


def test_fit_validates_parameters():
    with pytest.raises(ParameterError):
        AnalyticBerModel(alpha=1.5).fit()
    with pytest.raises(ParameterError):
        MonteCarloBerModel(n_realizations=0).fit()


def test_analytic_fit_and_predict():
    model = AnalyticBerModel()
    assert model.fit() is model
    assert model.lambda_active_ == pytest.approx(active_density(NetworkParams()).lambda_active, rel=1e-12)
    snr = np.array([0.0, 10.0, 20.0])
    ber = model.predict(snr)
    assert ber.shape == (3,)
    np.testing.assert_allclose(model.predict(snr.reshape(-1, 1)), ber, rtol=0, atol=0)
    want = [ber_average(NetworkParams(), v, model.lambda_active_) for v in snr]
    np.testing.assert_allclose(ber, want, rtol=1e-12)
    assert model.predict([-np.inf])[0] == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("bad", [[[0.0, 1.0]], [np.nan], [np.inf], [["a"]]])
def test_predict_rejects_bad_input(bad):
    model = AnalyticBerModel(lambda_ap=0.0).fit()
    with pytest.raises(ValueError):
        model.predict(np.array(bad, dtype=object) if bad == [["a"]] else bad)


def test_analytic_laplace_shape():
    model = AnalyticBerModel().fit()
    vals = model.laplace([0.0, 1.0, 1e3])
    assert vals.shape == (3,)
    assert vals[0] == 1.0
    assert np.all(np.diff(vals) < 0)


def test_monte_carlo_without_interferers():
    model = MonteCarloBerModel(lambda_ap=0.0, n_realizations=1000).fit()
    ber, hw = model.predict_interval([10.0])
    assert ber[0] == pytest.approx(BER_NO_INTERFERENCE_M3_10DB, rel=1e-4)
    assert hw[0] == pytest.approx(0.0, abs=1e-15)
    assert model.predict(np.array([[10.0]])).shape == (1,)


def test_monte_carlo_disc_radius_and_determinism():
    kw = dict(n_realizations=1000, seed=4, max_snr_db=10.0)
    a = MonteCarloBerModel(**kw).fit()
    b = clone(a).set_params(n_jobs=2).fit()
    assert a.disc_radius_ == b.disc_radius_ > a.params_.dist_srv
    np.testing.assert_array_equal(a.predict([0.0, 10.0]), b.predict([0.0, 10.0]))
    c = MonteCarloBerModel(disc_radius=200.0, **kw).fit()
    assert c.disc_radius_ == 200.0


def test_monte_carlo_tracks_analytic_at_low_snr():
    mc = MonteCarloBerModel(n_realizations=2000, seed=1, max_snr_db=10.0).fit()
    an = AnalyticBerModel().fit()
    ber, hw = mc.predict_interval([0.0, 10.0])
    ref = an.predict([0.0, 10.0])
    assert np.all(np.abs(ber - ref) <= np.maximum(0.15 * ref, 2 * hw))


def test_set_params_refit_changes_prediction():
    model = AnalyticBerModel().fit()
    before = model.predict([20.0])[0]
    model.set_params(sigma_sense=10 ** -5).fit()
    assert model.predict([20.0])[0] > before
    assert not math.isnan(before)
