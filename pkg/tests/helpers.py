"""Shared fixtures-as-functions for the unit and acceptance suites."""
import math

import numpy as np

from mmwave_interference.analytic import active_density
from mmwave_interference.params import NetworkParams
from mmwave_interference.simulator import in_blockage_region


def compact_network() -> NetworkParams:
    """Wide beams and a high threshold: contention radius ~7.5 m.

    The AP density is set so that lambda A eta = 1, which puts about 400
    APs on a disc of three contention radii; small enough for the exact
    O(n^2) window engine.
    """
    base = NetworkParams(phi=math.radians(90.0), sigma_sense=1e-2)
    mac = active_density(base)
    return base.replace(lambda_ap=1.0 / (mac.area_cont * mac.eta))


def blocking_frequency(net: NetworkParams, ell: float, n_links: int, rng: np.random.Generator):
    """Fraction of links of length ``ell`` blocked by an independent PPP(rho) each.

    Every link has the AP at the origin and the receiver at (ell, 0); the
    blockage points of link i are sampled on a box that contains its
    blocking triangle. Returns (frequency, standard error).
    """
    pad = 0.01
    half = ell * min(net.blockage_tan, net.len_rx / (2.0 * ell)) + pad
    x0, x1 = -pad, ell + pad
    area = (x1 - x0) * 2.0 * half
    counts = rng.poisson(net.rho_blk * area, n_links)
    owner = np.repeat(np.arange(n_links), counts)
    pts = np.column_stack((rng.uniform(x0, x1, owner.size), rng.uniform(-half, half, owner.size)))
    hit = in_blockage_region(pts, (0.0, 0.0), (ell, 0.0), net)
    blocked = np.bincount(owner[hit], minlength=n_links) > 0
    freq = blocked.mean()
    return float(freq), float(math.sqrt(max(freq * (1.0 - freq), 1e-300) / n_links))
