"""Interference and bit-error-rate models for directional mmWave networks.

Access points form a Poisson field, blockages a second Poisson field,
and a carrier-sensing MAC lets an AP transmit only when no neighbor with
a smaller back-off mark can be heard. The package pairs a closed-form
engine (:mod:`.analytic`) with a Monte-Carlo engine (:mod:`.simulator`)
so either can check the other.
"""
from .analytic import (
    AntennaPattern,
    LaplaceEval,
    MacDerived,
    active_density,
    ber_average,
    blockage_bracket,
    contention_radius,
    kappa_m,
    laplace_interference,
    neighborhood_success_prob,
    not_blocked_prob,
)
from .estimators import AnalyticBerModel, MonteCarloBerModel
from .params import NetworkParams, ParameterError
from .simulator import (
    SimParams,
    empirical_laplace,
    estimate_active_density,
    estimate_ber,
    simulate_interference,
)

__all__ = [
    "AntennaPattern",
    "LaplaceEval",
    "MacDerived",
    "NetworkParams",
    "ParameterError",
    "SimParams",
    "AnalyticBerModel",
    "MonteCarloBerModel",
    "active_density",
    "ber_average",
    "blockage_bracket",
    "contention_radius",
    "kappa_m",
    "laplace_interference",
    "neighborhood_success_prob",
    "not_blocked_prob",
    "simulate_interference",
    "estimate_active_density",
    "estimate_ber",
    "empirical_laplace",
]
