"""Closed-form model chain.

blockage probability -> contention radius -> neighborhood success
probability -> active (MAC-thinned) AP density -> Laplace transform of
the aggregate interference -> average BPSK-type bit error rate.

Every function takes a :class:`~mmwave_interference.params.NetworkParams`
and is pure; nothing here holds state.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .params import NetworkParams, ParameterError
from .specfun import (
    DEFAULT_QUAD,
    DomainError,
    QuadratureSpec,
    gamma_reg_upper_inv,
    hyp1f1,
    integrate_finite,
    integrate_semi_infinite,
    log_gamma,
)

__all__ = [
    "AntennaPattern",
    "MacDerived",
    "LaplaceEval",
    "NumericalWarning",
    "not_blocked_prob",
    "contention_radius",
    "neighborhood_success_prob",
    "active_density",
    "blockage_bracket",
    "kappa_m",
    "interference_exponent",
    "laplace_interference",
    "ber_average",
]


class NumericalWarning(RuntimeWarning):
    """Result needed clipping because quadrature noise left its range."""


@dataclass(frozen=True)
class AntennaPattern:
    """Sectored ("triangular") pattern: gain 1/phi inside |angle| <= phi/2."""

    phi: float

    @property
    def gain_in_beam(self) -> float:
        return 1.0 / self.phi

    @property
    def support(self) -> tuple[float, float]:
        return (-self.phi / 2.0, self.phi / 2.0)

    def gain(self, angle):
        """Gain toward ``angle`` (radians, measured from boresight)."""
        wrapped = np.angle(np.exp(1j * np.asarray(angle, dtype=float)))
        out = np.where(np.abs(wrapped) <= self.phi / 2.0, 1.0 / self.phi, 0.0)
        return float(out) if out.ndim == 0 else out

    def integrated_gain(self) -> float:
        return self.gain_in_beam * self.phi


@dataclass(frozen=True)
class MacDerived:
    r_cont: float
    area_cont: float
    eta: float
    lambda_active: float


@dataclass(frozen=True)
class LaplaceEval:
    s: float
    kappa: float
    value: float


# ---------------------------------------------------------------------------
# blockage


def not_blocked_prob(params: NetworkParams, ell):
    """Probability that a link of length ``ell`` is not blocked.

    Near the transmitter the blocking region is the beam triangle of area
    ell^2 tan(phi/2); once the triangle is wider than the receiver (past
    L / (2 tan(phi/2))) it is the triangle spanned by the receiver, of
    area ell L / 2.
    """
    arr = np.asarray(ell, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("link length must be non-negative")
    t = params.blockage_tan
    rho = params.rho_blk
    near = np.exp(-rho * arr**2 * t)
    far = np.exp(-rho * arr * params.len_rx / 2.0)
    out = np.where(arr < params.blockage_switch, near, far)
    return float(out) if out.ndim == 0 else out


def _p_scalar(params, ell):
    if ell < params.blockage_switch:
        return math.exp(-params.rho_blk * ell * ell * params.blockage_tan)
    return math.exp(-params.rho_blk * ell * params.len_rx / 2.0)


# ---------------------------------------------------------------------------
# MAC layer


def contention_radius(params: NetworkParams) -> float:
    """Radius beyond which an aligned AP is a sensing neighbor w.p. < eps.

    ``tail_bound`` (default) solves the defining condition exactly: with
    both beams aligned the sensed power is q l^-alpha h / phi^2, so the
    radius is (q Fbar^-1(eps) / (sigma phi^2))^(1/alpha). ``as_printed``
    evaluates (1/(4 pi^2)) (q Fbar^-1(eps) phi^(2 alpha - 2) / sigma)^(1/alpha)
    literally; it is kept for comparison only and does not satisfy the
    tail condition at realistic parameters.
    """
    x = gamma_reg_upper_inv(params.m_shape, params.eps_cont)
    a = params.alpha
    if params.contention_mode == "tail_bound":
        return (params.q_int * x / (params.sigma_sense * params.phi**2)) ** (1.0 / a)
    return (1.0 / (4.0 * math.pi**2)) * (
        params.q_int * x * params.phi ** (2.0 * a - 2.0) / params.sigma_sense
    ) ** (1.0 / a)


def neighborhood_success_prob(
    params: NetworkParams, r_cont: float, quad: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """Probability that an AP uniformly placed in the contention disc is a neighbor.

    Averages beam alignment (phi/2pi)^2, the fading tail at the sensing
    threshold and the no-blockage probability over the in-disc distance
    density 2 l / r_cont^2.
    """
    if not r_cont > 0:
        raise DomainError("r_cont must be positive")
    m = params.m_shape
    c = params.sigma_sense * params.phi**2 / params.q_int
    a = params.alpha

    def f(ell):
        return special.gammaincc(m, m * c * ell**a) * _p_scalar(params, ell) * 2.0 * ell

    val = integrate_finite(f, 0.0, r_cont, quad, points=[params.blockage_switch]).value
    return params.phi**2 / (4.0 * math.pi**2) * val / r_cont**2


def active_density(params: NetworkParams, quad: QuadratureSpec = DEFAULT_QUAD) -> MacDerived:
    """Density of APs allowed to transmit concurrently.

    Retention probability of a Poisson point with Poisson(lambda A eta)
    competitors and i.i.d. uniform marks: (1 - e^{-lambda A eta}) / (lambda A eta).
    """
    r = contention_radius(params)
    area = math.pi * r * r
    eta = neighborhood_success_prob(params, r, quad)
    lam = params.lambda_ap
    mu = lam * area * eta
    if lam == 0:
        active = 0.0
    elif mu < 1e-8:
        active = lam * (1.0 - mu / 2.0)
    else:
        active = -math.expm1(-mu) / (eta * area)
    return MacDerived(r_cont=r, area_cont=area, eta=eta, lambda_active=active)


# ---------------------------------------------------------------------------
# interference


def blockage_bracket(params: NetworkParams) -> float:
    """Closed form of the integral of l p(l) over [0, inf).

    1/(2 rho t) + (4/(rho^2 L^2) + 1/(2 rho t)) exp(-rho L^2 / (4 t)).
    Infinite without blockage.
    """
    rho = params.rho_blk
    if rho == 0:
        return math.inf
    t = params.blockage_tan
    L = params.len_rx
    x = rho * L * L / (4.0 * t)
    return 1.0 / (2.0 * rho * t) + (4.0 / (rho * rho * L * L) + 1.0 / (2.0 * rho * t)) * math.exp(-x)


def _kernel_knee(params, s):
    # distance at which s q l^-alpha / (m phi^2) == 1
    if s <= 0:
        return 0.0
    return (s * params.q_int / (params.m_shape * params.phi**2)) ** (1.0 / params.alpha)


def _radial_integral(params, g, s, quad):
    """Integral over l in [0, inf) of l p(l) g(l), split at the blockage switch."""
    T = params.blockage_switch
    knee = _kernel_knee(params, s)
    rho = params.rho_blk
    t = params.blockage_tan
    half_L = params.len_rx / 2.0

    def near(ell):
        return ell * math.exp(-rho * ell * ell * t) * g(ell)

    def far(ell):
        return ell * math.exp(-rho * ell * half_L) * g(ell)

    total = integrate_finite(near, 0.0, T, quad, points=[knee]).value
    # The far panel has two length scales, the kernel knee and the blockage
    # decay length; either can sit decades away from T, so break the range
    # at both and log-spaced points in between or QUADPACK can step over
    # the bulk of the integrand.
    decay = 1.0 / (rho * half_L) if rho > 0 else math.inf
    marks = [v for v in (knee, 20.0 * knee, decay, 10.0 * decay, 100.0 * decay) if T < v < math.inf]
    split = max(marks, default=T)
    if split > T:
        n_geo = 2 * int(math.ceil(math.log10(split / T))) + 1
        points = sorted((set(marks) - {split}) | set(np.geomspace(T, split, n_geo)[1:-1]))
        total += integrate_finite(far, T, split, quad, points=points).value
    if rho > 0:
        scale = decay
        tail_quad = quad
    else:
        scale = max(split, 1.0)
        tail_quad = QuadratureSpec(
            quad.abs_tol, quad.rel_tol, quad.max_subdivisions, "rational_substitution"
        )
    total += integrate_semi_infinite(far, split, tail_quad, scale=scale).value
    return total


def _kernel_terms(params, s):
    m = params.m_shape
    coef = s * params.q_int / (m * params.phi**2)
    a = params.alpha

    def kernel(ell):
        if ell == 0.0:
            return 0.0
        return math.exp(-m * math.log1p(coef * ell ** (-a)))

    def complement(ell):
        if ell == 0.0:
            return 1.0
        return -math.expm1(-m * math.log1p(coef * ell ** (-a)))

    return kernel, complement


def kappa_m(params: NetworkParams, s: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Sum of the near and far blockage-weighted Nakagami kernel integrals.

    kappa_m(0) equals :func:`blockage_bracket`, so the exponent of the
    Laplace transform vanishes at s = 0 as it must.
    """
    if not s >= 0:
        raise DomainError("s must be non-negative")
    if params.rho_blk == 0:
        return math.inf
    if s == 0:
        kernel = lambda ell: 1.0  # noqa: E731
    else:
        kernel, _ = _kernel_terms(params, s)
    return _radial_integral(params, kernel, s, quad)


def interference_exponent(
    params: NetworkParams, lambda_active: float, s: float, quad: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """-log of the Laplace transform: lambda_M phi^2/(2 pi) * (bracket - kappa_m(s)).

    The bracket minus kappa_m is integrated as one piece,
    int l p(l) (1 - kernel) dl, which is exact at s = 0 and avoids
    cancelling two large numbers.
    """
    if not s >= 0:
        raise DomainError("s must be non-negative")
    if s == 0 or lambda_active == 0:
        return 0.0
    _, complement = _kernel_terms(params, s)
    diff = _radial_integral(params, complement, s, quad)
    return lambda_active * params.phi**2 / (2.0 * math.pi) * diff


def laplace_interference(
    params: NetworkParams, lambda_active: float, s: float, quad: QuadratureSpec = DEFAULT_QUAD
) -> LaplaceEval:
    """Laplace transform E[exp(-s I)] of the aggregate interference at the typical receiver."""
    if not s >= 0:
        raise DomainError("s must be non-negative")
    if not lambda_active >= 0:
        raise DomainError("lambda_active must be non-negative")
    expo = interference_exponent(params, lambda_active, s, quad)
    if params.rho_blk > 0:
        if lambda_active > 0:
            kappa = blockage_bracket(params) - expo / (lambda_active * params.phi**2 / (2.0 * math.pi))
        else:
            kappa = kappa_m(params, s, quad)
    else:
        kappa = math.inf
    return LaplaceEval(s=float(s), kappa=kappa, value=math.exp(-expo))


# ---------------------------------------------------------------------------
# bit error rate


def ber_average(
    params: NetworkParams,
    snr_db: float,
    lambda_active: float | None = None,
    laplace: Callable[[float], float] | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """Average bit error rate over Nakagami fading and the interference field.

    BER = 1/2 - (sqrt(c)/pi) Gamma(m+1/2)/Gamma(m)
          * int_0^inf 1F1(m+1/2; 3/2; -c s) / sqrt(s)
            * L_I(m s / Omega) * exp(-m sigma_n^2 s / Omega) ds,

    with Omega = q0 l0^-alpha and sigma_n^2 = Omega / 10^(snr_db/10).

    Parameters
    ----------
    params : NetworkParams
        Model parameters; ``noise_pow`` is ignored in favour of ``snr_db``.
    snr_db : float
        Mean received SNR of the serving link, in dB. ``-inf`` gives 1/2.
    lambda_active : float, optional
        Density of concurrent interferers; computed from ``params`` if omitted.
    laplace : callable, optional
        Override for s -> L_I(s), e.g. ``lambda s: 1.0`` for an
        interference-free link.
    quad : QuadratureSpec
        Tolerances for every integral involved.

    Returns
    -------
    float
        BER in [0, 1/2]. If quadrature noise pushes the value outside that
        range it is clipped and a :class:`NumericalWarning` is issued.
    """
    if snr_db == -math.inf:
        return 0.5
    if math.isnan(snr_db) or snr_db == math.inf:
        raise ParameterError(f"snr_db must be finite or -inf, got {snr_db}")
    m = params.m_shape
    c = params.mod_c
    omega = params.serving_gain
    noise = params.noise_for_snr(snr_db)
    if laplace is None:
        if lambda_active is None:
            lambda_active = active_density(params, quad).lambda_active

        def laplace(s):
            return math.exp(-interference_exponent(params, lambda_active, s, quad))

    a = m + 0.5
    noise_rate = m * noise / omega

    def integrand(s):
        arg = m * s / omega
        return (
            hyp1f1(a, 1.5, -c * s)
            / math.sqrt(s)
            * laplace(arg)
            * math.exp(-noise_rate * s)
        )

    scale = min(1.0 / c, 1.0 / noise_rate)
    integral = integrate_semi_infinite(integrand, 0.0, quad, scale=scale, sqrt_singular=True).value
    pref = math.sqrt(c) / math.pi * math.exp(log_gamma(a) - log_gamma(m))
    ber = 0.5 - pref * integral
    slack = 10.0 * quad.abs_tol
    if ber < 0.0 or ber > 0.5:
        if ber < -slack or ber > 0.5 + slack:
            warnings.warn(
                f"BER {ber:.3e} outside [0, 0.5] at snr_db={snr_db}; clipped",
                NumericalWarning,
                stacklevel=2,
            )
        ber = min(max(ber, 0.0), 0.5)
    return ber
