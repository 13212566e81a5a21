"""Special functions and quadrature used by the analytic engine.

Nothing in here knows about networks: these are plain numerical
building blocks (gamma-family functions, Kummer's confluent
hypergeometric function, Gaussian tail probability, adaptive
quadrature on finite and semi-infinite ranges).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "DomainError",
    "ConvergenceError",
    "ToleranceError",
    "DivergenceError",
    "QuadratureSpec",
    "QuadResult",
    "log_gamma",
    "gamma_reg_upper",
    "gamma_reg_upper_inv",
    "hyp1f1",
    "q_function",
    "integrate_finite",
    "integrate_semi_infinite",
]


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(ArithmeticError):
    """A series or iteration hit its cap before converging."""


class ToleranceError(ArithmeticError):
    """Quadrature could not meet the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, best=float("nan"), error=float("inf")):
        super().__init__(message)
        self.best = best
        self.error = error


class DivergenceError(ArithmeticError):
    """Semi-infinite integrand does not appear to decay."""


TAIL_TRANSFORMS = ("exp_substitution", "rational_substitution")


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    infinite_tail_transform: str = "exp_substitution"

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.infinite_tail_transform not in TAIL_TRANSFORMS:
            raise ValueError(
                f"infinite_tail_transform must be one of {TAIL_TRANSFORMS}, "
                f"got {self.infinite_tail_transform!r}"
            )


DEFAULT_QUAD = QuadratureSpec()


class QuadResult(NamedTuple):
    value: float
    error: float


# ---------------------------------------------------------------------------
# gamma family


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for positive real ``x``."""
    x = float(x)
    if not x > 0 or math.isinf(x):
        raise DomainError(f"log_gamma requires finite x > 0, got {x}")
    return math.lgamma(x)


def gamma_reg_upper(m, x):
    """CCDF of a unit-mean Gamma(shape=m) variable at ``x``.

    Equals the regularized upper incomplete gamma function Q(m, m*x).
    Accepts scalars or arrays for ``x``; returns the same shape.
    """
    m = float(m)
    if not m > 0:
        raise DomainError(f"shape m must be positive, got {m}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise DomainError("x must be non-negative")
    out = special.gammaincc(m, m * xa)
    return float(out) if out.ndim == 0 else out


def gamma_reg_upper_inv(m: float, p: float, rtol: float = 1e-12) -> float:
    """Inverse of :func:`gamma_reg_upper` in ``x``.

    Bracketed root finding on the CCDF; ``p`` must lie in (0, 1].
    """
    m = float(m)
    p = float(p)
    if not m > 0:
        raise DomainError(f"shape m must be positive, got {m}")
    if not (0.0 < p <= 1.0):
        raise DomainError(f"p must lie in (0, 1], got {p}")
    if p == 1.0:
        return 0.0

    def resid(x):
        return gamma_reg_upper(m, x) - p

    guess = float(special.gammainccinv(m, p)) / m
    lo, hi = 0.5 * guess, 2.0 * guess if guess > 0 else 1e-300
    while resid(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("could not bracket inverse CCDF")
    while lo > 0 and resid(lo) < 0:
        lo *= 0.5
        if lo < 1e-300:
            lo = 0.0
    return optimize.brentq(resid, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps))


# ---------------------------------------------------------------------------
# confluent hypergeometric function

_SERIES_CAP = 5000
_ASYMPTOTIC_FROM = 600.0


def _kummer_series(a, b, x, cap=_SERIES_CAP):
    """Plain power series of M(a, b, x)."""
    term = 1.0
    total = 1.0
    n = 0
    while True:
        term *= (a + n) / (b + n) * x / (n + 1)
        total += term
        n += 1
        if term == 0.0:
            return total
        # the series may only be truncated once the ratio has turned over
        if n > abs(a) + 1 and abs(term) <= 1e-17 * abs(total):
            return total
        if n >= cap:
            raise ConvergenceError(
                f"1F1 series did not converge in {cap} terms (a={a}, b={b}, x={x})"
            )


def _is_nonpos_int(v):
    return v <= 0 and float(v).is_integer()


def _asymptotic_negative(a, b, x, cap=200):
    """M(a, b, -x) for large positive x.

    Algebraic part Gamma(b)/Gamma(b-a) x^-a sum_s (a)_s (1+a-b)_s / s! x^-s
    plus the exponentially small part (real branch).
    """
    def series(p, q, sign):
        term = 1.0
        total = 1.0
        prev = float("inf")
        for s in range(cap):
            term *= (p + s) * (q + s) / ((s + 1) * x) * sign
            if abs(term) > prev:
                # asymptotic series has started to diverge; stop at the
                # smallest term
                return total
            total += term
            prev = abs(term)
            if abs(term) <= 1e-17 * abs(total):
                return total
        raise ConvergenceError("1F1 asymptotic series did not settle")

    lgb = math.lgamma(b)
    out = 0.0
    if not _is_nonpos_int(b - a):
        sg = special.gammasgn(b - a)
        out += sg * math.exp(lgb - math.lgamma(b - a) - a * math.log(x)) * series(a, 1 + a - b, 1.0)
    if not _is_nonpos_int(a) and x < 745.0:
        sg = special.gammasgn(a)
        out += (
            sg
            * math.cos(math.pi * (b - a))
            * math.exp(lgb - math.lgamma(a) - x + (a - b) * math.log(x))
            * series(b - a, 1 - a, -1.0)
        )
    return out


def hyp1f1(a: float, b: float, z: float) -> float:
    """Kummer's confluent hypergeometric function M(a, b, z) for real args.

    Negative arguments go through Kummer's transformation
    M(a, b, z) = e^z M(b-a, b, -z), which removes the alternating
    cancellation of the direct series; very large negative arguments use
    the asymptotic expansion.
    """
    a = float(a)
    b = float(b)
    z = float(z)
    if _is_nonpos_int(b):
        raise DomainError(f"b must not be a non-positive integer, got {b}")
    if z == 0.0 or a == 0.0:
        return 1.0
    if a == b:
        return math.exp(z)
    if z > 0:
        if z > 700:
            raise ConvergenceError("hyp1f1 for z > 700 would overflow")
        return _kummer_series(a, b, z)
    x = -z
    ap = b - a
    if _is_nonpos_int(a):
        # terminating series: polynomial in z, direct sum is exact
        return _kummer_series(a, b, z)
    if _is_nonpos_int(ap):
        if x > 745.0:
            return 0.0
        return math.exp(-x) * _kummer_series(ap, b, x)
    if x <= _ASYMPTOTIC_FROM:
        return math.exp(-x) * _kummer_series(ap, b, x)
    return _asymptotic_negative(a, b, x)


# ---------------------------------------------------------------------------
# Gaussian tail


def q_function(x):
    """Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# quadrature


def _run_quad(f, lo, hi, spec, points=None):
    kwargs = dict(
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=int(spec.max_subdivisions),
        full_output=1,
    )
    if points is not None:
        pts = [p for p in points if lo < p < hi]
        if pts:
            kwargs["points"] = pts
            # the breakpoints already cut len(pts) + 1 panels
            kwargs["limit"] = max(kwargs["limit"], len(pts) + 1)
    res = integrate.quad(f, lo, hi, **kwargs)
    value, err = float(res[0]), float(res[1])
    if not math.isfinite(value):
        raise ToleranceError("quadrature produced a non-finite value", value, err)
    if len(res) > 3:
        # QUADPACK flagged a problem; accept only if the bound is still met
        if err > max(spec.abs_tol, spec.rel_tol * abs(value)):
            raise ToleranceError(
                f"tolerance not met on [{lo}, {hi}]: {res[3].splitlines()[0]}",
                value,
                err,
            )
    return QuadResult(value, err)


def integrate_finite(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    points=None,
) -> QuadResult:
    """Adaptive integral of ``f`` over the finite range [lo, hi].

    Returns ``(value, error_bound)``. Raises :class:`ToleranceError` (with
    the best estimate attached) when neither tolerance can be met.
    """
    if not hi >= lo:
        raise DomainError(f"need lo <= hi, got [{lo}, {hi}]")
    if hi == lo:
        return QuadResult(0.0, 0.0)
    return _run_quad(f, float(lo), float(hi), spec, points)


def _tail_map(kind, lo, scale):
    if kind == "exp_substitution":
        def x_of(v):
            return lo - scale * math.log1p(-v)

        def jac(v):
            return scale / (1.0 - v)
    else:
        def x_of(v):
            return lo + scale * v / (1.0 - v)

        def jac(v):
            return scale / (1.0 - v) ** 2
    return x_of, jac


def _check_decay(g, lo, scale, abs_tol):
    probes = []
    for k in (1, 2, 3, 4, 5, 6):
        x = lo + scale * 10.0**k
        try:
            probes.append(abs(x * g(x)))
        except (OverflowError, ZeroDivisionError):
            probes.append(float("inf"))
    if not all(math.isfinite(p) for p in probes):
        raise DivergenceError("integrand is not finite far out in the tail")
    last, first = probes[-1], probes[0]
    if last > abs_tol and last >= 0.5 * first:
        raise DivergenceError(
            "integrand does not decay faster than 1/x; integral appears divergent"
        )


def integrate_semi_infinite(
    f: Callable[[float], float],
    lo: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    scale: float = 1.0,
    sqrt_singular: bool = False,
) -> QuadResult:
    """Integral of ``f`` over [lo, inf).

    The tail is mapped onto [0, 1) with the substitution named by
    ``spec.infinite_tail_transform``; ``scale`` is the length over which
    the integrand varies and should be set by the caller when it is far
    from 1. With ``sqrt_singular=True`` an integrable (s - lo)^(-1/2)
    endpoint singularity is removed first via s = lo + u^2.
    """
    if not scale > 0:
        raise DomainError("scale must be positive")
    lo = float(lo)
    if sqrt_singular:
        base = lo

        def g(u):
            if u == 0.0:
                # endpoint is never sampled by the Gauss-Kronrod rules
                return 0.0
            return 2.0 * u * f(base + u * u)

        start = 0.0
        length = math.sqrt(scale)
    else:
        g = f
        start = lo
        length = scale

    _check_decay(g, start, length, spec.abs_tol)
    x_of, jac = _tail_map(spec.infinite_tail_transform, start, length)

    def h(v):
        if v >= 1.0:
            return 0.0
        x = x_of(v)
        if math.isinf(x):
            return 0.0
        val = g(x)
        if val == 0.0:
            return 0.0
        return val * jac(v)

    return _run_quad(h, 0.0, 1.0, spec)

