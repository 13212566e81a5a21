"""scikit-learn style wrappers around the two BER engines.

Both estimators are "physics" models: ``fit`` takes no training data, it
freezes the parameters and precomputes what every prediction shares
(the active density, or the interference realizations). ``predict``
maps an array of SNR values in dB to BER, so the models drop into
``GridSearchCV``-free sweeps via ``set_params``/``clone``.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .analytic import active_density, ber_average, laplace_interference
from .params import NetworkParams
from .simulator import SimParams, default_disc_radius, estimate_ber, simulate_interference
from .specfun import QuadratureSpec

__all__ = ["AnalyticBerModel", "MonteCarloBerModel"]


def _snr_column(X):
    X = check_array(X, ensure_2d=False, dtype=float, ensure_all_finite=False)
    X = X.reshape(-1) if X.ndim == 1 or X.shape[1] == 1 else None
    if X is None:
        raise ValueError("X must hold a single column of SNR values in dB")
    if np.any(np.isnan(X)) or np.any(X == np.inf):
        raise ValueError("SNR values must be finite or -inf")
    return X


class _NetworkMixin:
    def _network_params(self) -> NetworkParams:
        return NetworkParams(
            lambda_ap=self.lambda_ap,
            rho_blk=self.rho_blk,
            sigma_sense=self.sigma_sense,
            q_int=self.q_int,
            q_srv=self.q_srv,
            alpha=self.alpha,
            m_shape=self.m_shape,
            phi=self.phi,
            len_rx=self.len_rx,
            dist_srv=self.dist_srv,
            mod_c=self.mod_c,
            eps_cont=self.eps_cont,
            beam_geom_mode=self.beam_geom_mode,
            contention_mode=self.contention_mode,
            allow_zero_blockage=self.allow_zero_blockage,
        )


class AnalyticBerModel(_NetworkMixin, BaseEstimator):
    """Closed-form average BER as a function of SNR.

    Parameters mirror :class:`~mmwave_interference.params.NetworkParams`
    (linear SI units) plus the quadrature tolerances.

    Attributes
    ----------
    params_ : NetworkParams
    mac_ : MacDerived
        Contention radius, contention area, neighborhood success
        probability and active density.
    lambda_active_ : float
    """

    def __init__(
        self,
        lambda_ap=1e-2,
        rho_blk=1e-3,
        sigma_sense=1e-6,
        q_int=1.0,
        q_srv=1.0,
        alpha=2.5,
        m_shape=3.0,
        phi=math.radians(15.0),
        len_rx=0.15,
        dist_srv=5.0,
        mod_c=1.0,
        eps_cont=1e-3,
        beam_geom_mode="half_angle",
        contention_mode="tail_bound",
        allow_zero_blockage=False,
        abs_tol=1e-10,
        rel_tol=1e-8,
        max_subdivisions=2000,
        infinite_tail_transform="exp_substitution",
    ):
        self.lambda_ap = lambda_ap
        self.rho_blk = rho_blk
        self.sigma_sense = sigma_sense
        self.q_int = q_int
        self.q_srv = q_srv
        self.alpha = alpha
        self.m_shape = m_shape
        self.phi = phi
        self.len_rx = len_rx
        self.dist_srv = dist_srv
        self.mod_c = mod_c
        self.eps_cont = eps_cont
        self.beam_geom_mode = beam_geom_mode
        self.contention_mode = contention_mode
        self.allow_zero_blockage = allow_zero_blockage
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.max_subdivisions = max_subdivisions
        self.infinite_tail_transform = infinite_tail_transform

    def fit(self, X=None, y=None):
        """Validate parameters and compute the MAC-layer quantities. ``X`` and ``y`` are ignored."""
        self.params_ = self._network_params()
        self.quad_ = QuadratureSpec(
            abs_tol=self.abs_tol,
            rel_tol=self.rel_tol,
            max_subdivisions=self.max_subdivisions,
            infinite_tail_transform=self.infinite_tail_transform,
        )
        self.mac_ = active_density(self.params_, self.quad_)
        self.lambda_active_ = self.mac_.lambda_active
        return self

    def predict(self, X):
        """Average BER at each SNR (dB) in ``X``."""
        check_is_fitted(self, "params_")
        snr = _snr_column(X)
        return np.array(
            [ber_average(self.params_, float(v), self.lambda_active_, quad=self.quad_) for v in snr]
        )

    def laplace(self, s):
        """Laplace transform of the aggregate interference at each ``s``."""
        check_is_fitted(self, "params_")
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.array([laplace_interference(self.params_, self.lambda_active_, float(v), self.quad_).value for v in s])


class MonteCarloBerModel(_NetworkMixin, BaseEstimator):
    """Simulated average BER as a function of SNR.

    Parameters mirror :class:`~mmwave_interference.params.NetworkParams`
    and :class:`~mmwave_interference.simulator.SimParams`; ``n_jobs`` is
    the number of worker processes. ``fit`` draws ``n_realizations``
    interference realizations once, on a window sized for ``max_snr_db``;
    ``predict`` averages the conditional BER over them for any SNR.

    Attributes
    ----------
    params_ : NetworkParams
    sim_ : SimParams
    samples_ : list of InterferenceSample
    """

    def __init__(
        self,
        lambda_ap=1e-2,
        rho_blk=1e-3,
        sigma_sense=1e-6,
        q_int=1.0,
        q_srv=1.0,
        alpha=2.5,
        m_shape=3.0,
        phi=math.radians(15.0),
        len_rx=0.15,
        dist_srv=5.0,
        mod_c=1.0,
        eps_cont=1e-3,
        beam_geom_mode="half_angle",
        contention_mode="tail_bound",
        allow_zero_blockage=False,
        n_realizations=20000,
        seed=0,
        disc_radius=None,
        blockage_mode="bernoulli",
        serving_suppression=False,
        engine="palm",
        sense_tail=1e-7,
        max_snr_db=30.0,
        n_jobs=1,
    ):
        self.lambda_ap = lambda_ap
        self.rho_blk = rho_blk
        self.sigma_sense = sigma_sense
        self.q_int = q_int
        self.q_srv = q_srv
        self.alpha = alpha
        self.m_shape = m_shape
        self.phi = phi
        self.len_rx = len_rx
        self.dist_srv = dist_srv
        self.mod_c = mod_c
        self.eps_cont = eps_cont
        self.beam_geom_mode = beam_geom_mode
        self.contention_mode = contention_mode
        self.allow_zero_blockage = allow_zero_blockage
        self.n_realizations = n_realizations
        self.seed = seed
        self.disc_radius = disc_radius
        self.blockage_mode = blockage_mode
        self.serving_suppression = serving_suppression
        self.engine = engine
        self.sense_tail = sense_tail
        self.max_snr_db = max_snr_db
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        """Draw the interference realizations. ``X`` and ``y`` are ignored."""
        self.params_ = self._network_params()
        self.sim_ = SimParams(
            net=self.params_,
            disc_radius=self.disc_radius,
            n_realizations=self.n_realizations,
            seed=self.seed,
            blockage_mode=self.blockage_mode,
            serving_suppression=self.serving_suppression,
            engine=self.engine,
            sense_tail=self.sense_tail,
        )
        radius = self.disc_radius
        if radius is None:
            radius = default_disc_radius(self.params_, self.params_.noise_for_snr(self.max_snr_db))
        self.disc_radius_ = radius
        self.samples_ = simulate_interference(self.sim_, radius, self.n_jobs)
        return self

    def _estimates(self, X):
        check_is_fitted(self, "samples_")
        return estimate_ber(self.sim_, _snr_column(X), samples=self.samples_)

    def predict(self, X):
        """Monte-Carlo BER at each SNR (dB) in ``X``."""
        return np.array([e.ber for e in self._estimates(X)])

    def predict_interval(self, X):
        """(BER, 95% half-width) arrays at each SNR (dB) in ``X``."""
        est = self._estimates(X)
        return np.array([e.ber for e in est]), np.array([e.half_width for e in est])
