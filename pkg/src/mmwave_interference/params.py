"""Model parameters shared by the analytic and Monte-Carlo engines.

All quantities are linear SI: densities per m^2, powers in watts, angles
in radians, lengths in metres. Unit conversion from dBm/dB/degrees is
done only at the configuration boundary (see :mod:`.cli`).
"""
from __future__ import annotations

import math
import numbers
from dataclasses import asdict, dataclass, replace

__all__ = [
    "ParameterError",
    "NetworkParams",
    "BEAM_GEOM_MODES",
    "CONTENTION_MODES",
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "linear_to_db",
]

BEAM_GEOM_MODES = ("half_angle", "as_printed")
CONTENTION_MODES = ("tail_bound", "as_printed")


class ParameterError(ValueError):
    """Invalid model or simulation parameter."""


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * math.log10(w) + 30.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class NetworkParams:
    """Scalar parameters of the network model.

    Defaults reproduce the numerical setup used for the BER curves:
    30 dBm transmitters, path-loss exponent 2.5, Nakagami shape 3,
    15 degree beams, 15 cm receivers, 5 m serving links, BPSK, and a
    -60 dBW sensing threshold with AP density 1e-2 and blockage density
    1e-3 per m^2.

    ``beam_geom_mode`` picks the blockage-triangle slope: ``half_angle``
    uses tan(phi/2) (a beam of full width phi), ``as_printed`` uses
    tan(phi). ``contention_mode`` picks how the contention radius is
    obtained, see :func:`mmwave_interference.analytic.contention_radius`.
    """

    lambda_ap: float = 1e-2
    rho_blk: float = 1e-3
    sigma_sense: float = 1e-6
    q_int: float = 1.0
    q_srv: float = 1.0
    alpha: float = 2.5
    m_shape: float = 3.0
    phi: float = math.radians(15.0)
    len_rx: float = 0.15
    dist_srv: float = 5.0
    noise_pow: float | None = None
    mod_c: float = 1.0
    eps_cont: float = 1e-3
    beam_geom_mode: str = "half_angle"
    contention_mode: str = "tail_bound"
    allow_zero_blockage: bool = False

    def __post_init__(self):
        def positive(name):
            v = getattr(self, name)
            if not (isinstance(v, numbers.Real) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be a finite positive number, got {v!r}")

        for name in ("sigma_sense", "q_int", "q_srv", "phi", "len_rx", "dist_srv", "mod_c", "eps_cont"):
            positive(name)
        if not (math.isfinite(self.lambda_ap) and self.lambda_ap >= 0):
            raise ParameterError(f"lambda_ap must be >= 0, got {self.lambda_ap!r}")
        if not math.isfinite(self.rho_blk) or self.rho_blk < 0:
            raise ParameterError(f"rho_blk must be >= 0, got {self.rho_blk!r}")
        if self.rho_blk == 0 and not self.allow_zero_blockage:
            raise ParameterError(
                "rho_blk = 0 needs allow_zero_blockage=True (the closed-form "
                "bracket has 1/rho terms; the limit is taken numerically)"
            )
        if not self.alpha > 2:
            raise ParameterError(f"alpha must exceed 2, got {self.alpha!r}")
        if not self.phi < math.pi:
            raise ParameterError(f"phi must be below pi radians, got {self.phi!r}")
        if not self.eps_cont < 1:
            raise ParameterError(f"eps_cont must be below 1, got {self.eps_cont!r}")
        if not self.m_shape >= 0.5:
            raise ParameterError(f"m_shape must be >= 0.5, got {self.m_shape!r}")
        if self.noise_pow is not None and not self.noise_pow > 0:
            raise ParameterError(f"noise_pow must be positive, got {self.noise_pow!r}")
        if self.beam_geom_mode not in BEAM_GEOM_MODES:
            raise ParameterError(f"beam_geom_mode must be one of {BEAM_GEOM_MODES}")
        if self.contention_mode not in CONTENTION_MODES:
            raise ParameterError(f"contention_mode must be one of {CONTENTION_MODES}")

    # -- derived quantities ------------------------------------------------

    @property
    def serving_gain(self) -> float:
        """Mean received power from the serving AP, q0 * l0^-alpha."""
        return self.q_srv * self.dist_srv ** (-self.alpha)

    @property
    def blockage_tan(self) -> float:
        half = self.phi / 2.0 if self.beam_geom_mode == "half_angle" else self.phi
        return math.tan(half)

    @property
    def blockage_switch(self) -> float:
        """Distance at which the blocking triangle reaches receiver width L."""
        return self.len_rx / (2.0 * self.blockage_tan)

    def noise_for_snr(self, snr_db: float) -> float:
        if snr_db == -math.inf:
            return math.inf
        return self.serving_gain / db_to_linear(snr_db)

    def snr_db(self) -> float:
        if self.noise_pow is None:
            raise ParameterError("noise_pow is not set")
        return linear_to_db(self.serving_gain / self.noise_pow)

    def with_snr(self, snr_db: float) -> "NetworkParams":
        return replace(self, noise_pow=self.noise_for_snr(snr_db))

    def replace(self, **changes) -> "NetworkParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)
