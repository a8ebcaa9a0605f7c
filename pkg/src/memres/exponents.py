"""Admissibility and epsilon-window arithmetic for the three model problems.

Each application yields an interval of regularity gains eps and an affine
map gamma(eps) = slope * eps + 1 - 1/zeta_g giving the target index of the
nonlinearity.  Nothing here touches function spaces; it is exponent
bookkeeping with explicit open/closed endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "EpsRegularParams",
    "subcritical_gap",
    "rd_wellposed_params",
    "ns_wellposed_params",
    "hj_wellposed_params",
    "hj_remark_threshold",
]


@dataclass(frozen=True)
class EpsRegularParams:
    application: str
    inputs: dict
    eps_lo: float
    eps_hi: float
    lo_closed: bool
    hi_closed: bool
    gamma_slope: float
    gamma_intercept: float
    zeta_bound: float
    admissible: bool

    @property
    def openness(self) -> str:
        return f"{'closed' if self.lo_closed else 'open'}/{'closed' if self.hi_closed else 'open'}"

    @property
    def nonempty(self) -> bool:
        if self.lo_closed and self.hi_closed:
            return self.eps_lo <= self.eps_hi
        return self.eps_lo < self.eps_hi

    def contains(self, eps: float) -> bool:
        above = eps >= self.eps_lo if self.lo_closed else eps > self.eps_lo
        below = eps <= self.eps_hi if self.hi_closed else eps < self.eps_hi
        return above and below

    def gamma(self, eps: float) -> float:
        return self.gamma_slope * eps + self.gamma_intercept

    def to_dict(self) -> dict:
        return {
            "application": self.application,
            "inputs": dict(self.inputs),
            "admissible": self.admissible,
            "eps_window": [self.eps_lo, self.eps_hi, self.openness],
            "gamma_slope": self.gamma_slope,
            "zeta_bound": self.zeta_bound,
        }


def subcritical_gap(zeta_g: float) -> float:
    """The critical index 1 - 1/zeta_g; gamma strictly above it is subcritical."""
    if not zeta_g > 1:
        raise DomainError(f"zeta_g must exceed 1, got {zeta_g}")
    return 1.0 - 1.0 / zeta_g


def _check_zeta(zeta_g: float) -> None:
    if not zeta_g > 1:
        raise DomainError(f"zeta_g must exceed 1, got {zeta_g}")


def rd_wellposed_params(N: int, q: float, rho: float, zeta_g: float) -> EpsRegularParams:
    """Reaction-diffusion with c0 |u|^(rho-1) u in L^q(Omega), Omega in R^N.

    Admissible iff 1 < N zeta_g (rho-1)/2 <= q and the open window
    max{0, (1/rho)(1/zeta_g - N/(2q'))} < eps < min{1/(rho zeta_g), N/(2q)}
    is nonempty.  For q <= 1 the conjugate exponent is infinite, the term
    N/(2q') is taken as 0 and the configuration is never admissible.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    _check_zeta(zeta_g)
    if not (1.0 < rho < 1.0 + 2.0 * q / N):
        raise DomainError(f"rho = {rho} must lie in (1, 1 + 2q/N) = (1, {1 + 2 * q / N})")
    proper_q = q > 1
    n_over_2qp = N * (q - 1.0) / (2.0 * q) if proper_q else 0.0
    lo = max(0.0, (1.0 / rho) * (1.0 / zeta_g - n_over_2qp))
    hi = min(1.0 / (rho * zeta_g), N / (2.0 * q))
    crit = N * zeta_g * (rho - 1.0) / 2.0
    admissible = proper_q and 1.0 < crit <= q and lo < hi
    return EpsRegularParams(
        "rd",
        {"N": N, "q": q, "rho": rho, "zeta_g": zeta_g},
        lo,
        hi,
        False,
        False,
        float(rho),
        1.0 - 1.0 / zeta_g,
        2.0 * q / (N * (rho - 1.0)),
        admissible,
    )


def ns_wellposed_params(N: int, q: float, zeta_g: float) -> EpsRegularParams:
    """Navier-Stokes type quadratic nonlinearity in L^q, N >= 3, N/3 < q < N.

    Admissible iff 1 < zeta_g < 4q/(N+q).  The window
    1/zeta_g - N/(2q) <= eps <= 1/zeta_g - (N+q)/(4q) is closed; where it is
    clipped at eps = 0 that end becomes open.
    """
    if int(N) != N or N < 3:
        raise DomainError(f"N must be an integer >= 3, got {N}")
    if not (N / 3.0 < q < N):
        raise DomainError(f"q = {q} must lie in (N/3, N) = ({N / 3}, {N})")
    _check_zeta(zeta_g)
    raw_lo = 1.0 / zeta_g - N / (2.0 * q)
    hi = 1.0 / zeta_g - (N + q) / (4.0 * q)
    lo_closed = raw_lo > 0
    lo = max(raw_lo, 0.0)
    bound = 4.0 * q / (N + q)
    params = EpsRegularParams(
        "ns", {"N": N, "q": q, "zeta_g": zeta_g}, lo, hi, lo_closed, True, 2.0, 1.0 - 1.0 / zeta_g, bound, False
    )
    admissible = zeta_g < bound and params.nonempty
    return EpsRegularParams(**{**params.__dict__, "admissible": admissible})


def hj_wellposed_params(N: int, p: float, s: float, rho: float, zeta_g: float) -> EpsRegularParams:
    """Hamilton-Jacobi type c0 |grad u|^rho with data in the Besov scale B^s_{p,q}.

    chi = 1 + (1 - s + N/p)(rho - 1); admissible iff 1 < zeta_g < 2/chi, with
    open window (1-s)/2 < eps < (1-s)/2 + (1/rho)(1/zeta_g - chi/2).
    """
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if not (1.0 < p < math.inf):
        raise DomainError(f"p must lie in (1, inf), got {p}")
    if not (1.0 < rho < min(p, 1.0 + p / N)):
        raise DomainError(f"rho = {rho} must lie in (1, min(p, 1 + p/N))")
    s_lo = 1.0 - (1.0 / (rho - 1.0) - N / p)
    if not (s_lo < s <= 1.0):
        raise DomainError(f"s = {s} must lie in ({s_lo}, 1]")
    _check_zeta(zeta_g)
    chi = 1.0 + (1.0 - s + N / p) * (rho - 1.0)
    lo = (1.0 - s) / 2.0
    hi = lo + (1.0 / rho) * (1.0 / zeta_g - chi / 2.0)
    bound = 2.0 / chi
    admissible = zeta_g < bound and lo < hi
    return EpsRegularParams(
        "hj",
        {"N": N, "p": p, "s": s, "rho": rho, "zeta_g": zeta_g, "chi": chi},
        lo,
        hi,
        False,
        False,
        float(rho),
        1.0 - 1.0 / zeta_g,
        bound,
        admissible,
    )


def hj_remark_threshold(N: int, rho: float, zeta_g: float) -> float:
    """For s = 0 the condition zeta_g < 2/chi reads p > N zeta_g (rho-1)/(2 - rho zeta_g)."""
    if not rho * zeta_g < 2:
        return math.inf
    return N * zeta_g * (rho - 1.0) / (2.0 - rho * zeta_g)
