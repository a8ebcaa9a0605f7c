"""Special functions: Beta, incomplete Beta, Mittag-Leffler and the
log-singular integral I_kappa that controls continuity of the mild
solution map."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, DomainError

__all__ = ["log_gamma", "beta", "incomplete_beta", "mittag_leffler", "i_kappa"]

ML_Z_MAX = 50.0
ML_TOL = 1e-10


def log_gamma(x: float) -> float:
    if x <= 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def beta(x: float, y: float) -> float:
    """Complete Beta function B(x, y) for positive arguments."""
    if not (x > 0 and y > 0):
        raise DomainError(f"beta requires x > 0 and y > 0, got ({x}, {y})")
    return math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))


def incomplete_beta(a: float, x: float, y: float) -> float:
    """Lower incomplete Beta function, the integral of s^(x-1) (1-s)^(y-1)
    over [0, a].  Not regularized: ``incomplete_beta(1, x, y) == beta(x, y)``."""
    if not (0 < a <= 1):
        raise DomainError(f"incomplete_beta requires 0 < a <= 1, got a={a}")
    if not (x > 0 and y > 0):
        raise DomainError(f"incomplete_beta requires x, y > 0, got ({x}, {y})")
    full = beta(x, y)
    if a == 1:
        return full
    return float(special.betainc(x, y, a)) * full


def mittag_leffler(beta: float, z: float, *, z_max: float = ML_Z_MAX, tol: float = ML_TOL) -> float:
    """Mittag-Leffler function E_beta(z) for real z by direct power series.

    Terms are summed with ``math.fsum``.  The rounding error of the sum is
    bounded by a multiple of the largest term, so large negative arguments
    raise :class:`AccuracyError` instead of returning garbage.
    """
    if not beta > 0:
        raise DomainError(f"mittag_leffler requires beta > 0, got {beta}")
    if abs(z) > z_max:
        raise DomainError(f"|z|={abs(z)} exceeds the series guard {z_max}")
    if z == 0:
        return 1.0
    logz = math.log(abs(z))
    negative = z < 0
    terms = [1.0]
    biggest = 1.0
    k = 1
    # past the peak, terms decay monotonically; stop once they are negligible
    while True:
        logt = k * logz - math.lgamma(beta * k + 1)
        mag = math.exp(logt) if logt > -745 else 0.0
        terms.append(-mag if (negative and k % 2) else mag)
        biggest = max(biggest, mag)
        past_peak = beta * k + 1 > abs(z) ** (1.0 / beta) + 2
        if past_peak and mag < 1e-17 * max(1.0, biggest):
            break
        k += 1
        if k > 10_000:
            raise AccuracyError("Mittag-Leffler series did not terminate")
    rounding = 8 * np.finfo(float).eps * biggest * math.sqrt(len(terms))
    if rounding > tol:
        raise AccuracyError(
            f"cancellation in E_{beta}({z}): rounding bound {rounding:.2e} exceeds {tol:.1e}"
        )
    return math.fsum(terms)


def _quad(func, lo, hi, wvar, tol):
    kwargs = dict(epsabs=0.0, epsrel=tol, limit=400)
    if wvar is not None:
        kwargs.update(weight="alg", wvar=wvar)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, lo, hi, **kwargs)
        except integrate.IntegrationWarning as exc:
            raise AccuracyError(f"I_kappa quadrature did not converge: {exc}") from exc
    return val, err


def i_kappa(a: float, b: float, c: float, kappa: float, *, tol: float = 1e-11) -> float:
    r"""The integral of ln((kappa-s)/(1-s))^a (1-s)^(-b) s^(-c) over (0, 1).

    Written in v = 1 - s, the log factor is ln(1 + (kappa-1)/v); it is
    singular at v = 0 and varies on the scale kappa - 1.  The range is split
    at v* = min(kappa-1, 1/2).  On the inner piece v = v* e^(-y) turns the
    combined log and algebraic singularity into exponential decay.  The outer
    piece is cut into decades (the log factor changes character on each)
    and its last cell [1/2, 1] absorbs (1-v)^(-c) the same way.
    """
    if not a > 0:
        raise DomainError(f"i_kappa requires a > 0, got {a}")
    if not (b < 1 and c < 1):
        raise DomainError(f"i_kappa requires b < 1 and c < 1, got b={b}, c={c}")
    if not kappa > 1:
        raise DomainError(f"i_kappa requires kappa > 1, got {kappa}")
    d = kappa - 1.0
    vs = min(d, 0.5)

    def inner(y):
        # v = vs e^(-y) maps (0, vs] onto [0, inf) and turns v^(-b) dv into decay
        v = vs * math.exp(-y)
        log_term = math.log(d / vs) + y + math.log1p(v / d)
        return log_term**a * math.exp((1.0 - b) * (math.log(vs) - y)) * (1.0 - v) ** (-c)

    def outer(v):
        return math.log1p(d / v) ** a * v ** (-b) * (1.0 - v) ** (-c)

    def last(v):
        # weight (1 - v)^(-c) handled by quad
        return math.log1p(d / v) ** a * v ** (-b)

    val, err = _quad(inner, 0.0, math.inf, None, tol)
    edges = [vs]
    while edges[-1] * 10 < 0.5:
        edges.append(edges[-1] * 10)
    if edges[-1] < 0.5:
        edges.append(0.5)
    pieces = [(val, err)]
    for lo, hi in zip(edges[:-1], edges[1:]):
        pieces.append(_quad(outer, lo, hi, None, tol))
    pieces.append(_quad(last, edges[-1], 1.0, (0.0, -c), tol))
    total = math.fsum(p[0] for p in pieces)
    abserr = sum(p[1] for p in pieces)
    if abserr > max(1e-8 * abs(total), 1e-15):
        raise AccuracyError("I_kappa quadrature error estimate above tolerance")
    return total
