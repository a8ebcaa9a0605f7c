"""Material kernels g(t) = sum_i k_i t^(alpha_i - 1) e^(c_i t).

The kernel enters the resolvent equation through a = 1*g and through its
Laplace transform.  This module evaluates both, provides the iterated
antiderivatives needed by product-integration weights, and checks the
sector hypotheses that give the regularity index zeta_g.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DomainError

__all__ = [
    "KernelTerm",
    "MaterialKernel",
    "SectorReport",
    "eval_a",
    "laplace_g",
    "check_hypotheses",
    "parse_kernel",
]

ARG_MARGIN = 0.05
SAMPLE_RADII = np.logspace(2, 6, 13)
SAMPLE_FRACTIONS = np.linspace(-0.95, 0.95, 9)
_SERIES_TOL = 1e-17
_SERIES_MAX_TERMS = 5000


@dataclass(frozen=True)
class KernelTerm:
    k: float
    alpha: float
    c: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise DomainError(f"kernel weight k must be positive, got {self.k}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"kernel exponent alpha must be positive, got {self.alpha}")
        if not math.isfinite(self.c):
            raise DomainError(f"kernel rate c must be finite, got {self.c}")


def _exp_moment(alpha: float, m: int, z: np.ndarray) -> np.ndarray:
    """int_0^1 u^(alpha-1) (1-u)^(m-1) exp(z u) du for real z (vectorised).

    Expanding exp(z u) gives sum_k z^k/k! B(alpha+k, m).  For z < 0 the
    reflection u -> 1-u turns this into e^z sum_k |z|^k/k! B(m+k, alpha), so
    every series summed has positive terms and no cancellation.
    """
    z = np.asarray(z, dtype=float)
    neg = z < 0
    a = np.where(neg, float(m), alpha)
    b = np.where(neg, alpha, float(m))
    x = np.abs(z)
    term = np.exp(gammaln(a) + gammaln(b) - gammaln(a + b))
    total = term.copy()
    k = 0
    while True:
        term = term * x / (k + 1) * (a + k) / (a + b + k)
        total += term
        k += 1
        if k > x.max(initial=0.0) and np.all(term <= _SERIES_TOL * total):
            break
        if k > _SERIES_MAX_TERMS:
            raise DomainError(f"exponential moment unresolved for |c t| = {x.max():g}")
    return np.where(neg, np.exp(z) * total, total)


@dataclass(frozen=True)
class MaterialKernel:
    """Immutable sum of terms k t^(alpha-1) e^(c t)."""

    terms: tuple[KernelTerm, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        terms = tuple(t if isinstance(t, KernelTerm) else KernelTerm(*t) for t in self.terms)
        if not terms:
            raise DomainError("a material kernel needs at least one term")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_tuples(cls, items: Iterable[tuple[float, float, float]], label: str = "") -> "MaterialKernel":
        return cls(tuple(KernelTerm(*it) for it in items), label)

    @classmethod
    def hookean(cls, k: float = 1.0) -> "MaterialKernel":
        return cls((KernelTerm(k, 1.0, 0.0),), "hookean")

    @classmethod
    def power(cls, alpha: float) -> "MaterialKernel":
        """g = t^(alpha-1)/Gamma(alpha), so that 1*g = t^alpha/Gamma(alpha+1)."""
        return cls((KernelTerm(1.0 / math.gamma(alpha), alpha, 0.0),), f"power:alpha={alpha:g}")

    @classmethod
    def maxwell(cls, c: float = -1.0, k: float = 1.0) -> "MaterialKernel":
        return cls((KernelTerm(k, 1.0, c),), f"maxwell:c={c:g}")

    @property
    def alpha_min(self) -> float:
        return min(t.alpha for t in self.terms)

    @property
    def alpha_max(self) -> float:
        return max(t.alpha for t in self.terms)

    @property
    def zeta_g(self) -> float:
        return 1.0 + self.alpha_min

    @property
    def omega0(self) -> float:
        return max([0.0] + [t.c for t in self.terms])

    @property
    def leading_constant(self) -> float:
        """Sum of k Gamma(alpha) over the terms of smallest alpha."""
        amin = self.alpha_min
        return sum(t.k * math.gamma(t.alpha) for t in self.terms if t.alpha == amin)

    @property
    def kernel_id(self) -> str:
        if self.label:
            return self.label
        body = ",".join(f"{{k={t.k:.17g},alpha={t.alpha:.17g},c={t.c:.17g}}}" for t in self.terms)
        return f"sum:[{body}]"

    def scaled(self, factor: float) -> "MaterialKernel":
        return MaterialKernel(tuple(KernelTerm(t.k * factor, t.alpha, t.c) for t in self.terms))

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return sum(term.k * t ** (term.alpha - 1) * np.exp(term.c * t) for term in self.terms)

    def antiderivative(self, t, order: int = 1):
        """Iterated integral 1^{*order} * g evaluated at t >= 0.

        order=1 gives a = 1*g.  For c = 0 the closed form
        k t^(alpha+m-1) / (alpha (alpha+1) ... (alpha+m-1)) is used, otherwise
        the moment k t^(alpha+m-1)/(m-1)! int_0^1 u^(alpha-1)(1-u)^(m-1)e^(c t u)du.
        """
        if order < 1:
            raise DomainError("antiderivative order must be >= 1")
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("kernel antiderivatives are defined for t >= 0")
        out = np.zeros_like(t)
        for term in self.terms:
            p = term.alpha + order - 1
            if term.c == 0.0:
                denom = math.prod(term.alpha + j for j in range(order))
                out = out + term.k * t**p / denom
            else:
                flat = t.ravel()
                mom = _exp_moment(term.alpha, order, term.c * flat).reshape(t.shape)
                out = out + term.k * t**p / math.factorial(order - 1) * mom
        return out

    def laplace(self, lam):
        """Principal-branch g-hat, vectorised and without domain checks."""
        lam = np.asarray(lam, dtype=complex)
        return sum(term.k * math.gamma(term.alpha) * (lam - term.c) ** (-term.alpha) for term in self.terms)

    def laplace_derivative(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return sum(
            -term.alpha * term.k * math.gamma(term.alpha) * (lam - term.c) ** (-term.alpha - 1)
            for term in self.terms
        )

    def on_branch_cut(self, lam: complex) -> bool:
        for term in self.terms:
            z = lam - term.c
            if z == 0:
                return True
            if float(term.alpha).is_integer():
                continue
            if z.imag == 0 and z.real < 0:
                return True
        return False

    def to_dict(self) -> dict:
        return {"kernel_id": self.kernel_id, "terms": [[t.k, t.alpha, t.c] for t in self.terms]}


def eval_a(kernel: MaterialKernel, t):
    """a(t) = (1*g)(t); scalar in, float out."""
    val = kernel.antiderivative(t, 1)
    return float(val) if np.ndim(val) == 0 else val


def laplace_g(kernel: MaterialKernel, lam: complex) -> complex:
    """g-hat(lambda) = sum k Gamma(alpha) (lambda - c)^(-alpha), principal branch."""
    lam = complex(lam)
    for term in kernel.terms:
        if lam == term.c:
            raise DomainError(f"lambda = {lam} coincides with the singular point c = {term.c}")
    if kernel.on_branch_cut(lam):
        raise DomainError(f"lambda = {lam} lies on a branch cut c + R_-")
    return complex(kernel.laplace(lam))


@dataclass(frozen=True)
class SectorReport:
    zeta_g: float
    omega0: float
    eta0: float
    psi0: float
    alpha_max: float
    verdicts: dict
    evidence: dict

    @property
    def verdict(self) -> str:
        return self.verdicts["sector"]

    @property
    def passed(self) -> bool:
        return all(v in ("PASS", "DEGENERATE") for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "zeta_g": self.zeta_g,
            "omega0": self.omega0,
            "eta0": self.eta0,
            "psi0": self.psi0,
            "alpha_max": self.alpha_max,
            "verdicts": dict(self.verdicts),
            "evidence": dict(self.evidence),
        }


def check_hypotheses(kernel: MaterialKernel, psi0: float = 0.0) -> SectorReport:
    """Sector data (zeta_g, omega0, eta0) and hypothesis verdicts.

    The sector condition alpha_max <= 1 - psi0/(pi/2) is decided in closed
    form.  The two asymptotic hypotheses are then sampled: on rays of the
    open sector Sigma(omega0 + 1, eta0/2 + pi/2) with |lambda| in [1e2, 1e6]
    we require |arg(lambda/g-hat)| < pi - 0.05 and
    |g-hat| |lambda|^(zeta_g - 1) >= half the leading constant.
    """
    if not (0.0 <= psi0 < math.pi / 2):
        raise DomainError(f"psi0 must lie in [0, pi/2), got {psi0}")
    amax = kernel.alpha_max
    bound = 1.0 - psi0 / (math.pi / 2)
    gap = bound - amax
    if abs(gap) <= 1e-14:
        sector = "DEGENERATE"
    elif gap > 0:
        sector = "PASS"
    else:
        sector = "FAIL"
    eta0_formula = ((1.0 - amax) * math.pi / 2 - psi0) / (1.0 + amax)
    # the formula only defines a sector opening when the condition holds
    eta0 = eta0_formula if sector == "PASS" else 0.0
    zeta = kernel.zeta_g
    omega0 = kernel.omega0

    omega1 = omega0 + 1.0
    eta1 = eta0 / 2.0
    half = eta1 + math.pi / 2
    phis = SAMPLE_FRACTIONS * half
    lam = omega1 + np.multiply.outer(SAMPLE_RADII, np.exp(1j * phis))
    gh = kernel.laplace(lam)
    args = np.abs(np.angle(lam / gh))
    max_arg = float(np.max(args))
    lower = np.abs(gh) * np.abs(lam) ** (zeta - 1.0)
    min_lower = float(np.min(lower))
    threshold = 0.5 * kernel.leading_constant

    b3 = "PASS" if max_arg < math.pi - ARG_MARGIN else "FAIL"
    b4 = "PASS" if min_lower >= threshold else "FAIL"
    verdicts = {"sector": sector, "B3_sampling": b3, "B4_sampling": b4}
    evidence = {
        "eta0_formula": eta0_formula,
        "omega1": omega1,
        "eta1": eta1,
        "max_abs_arg": max_arg,
        "arg_limit": math.pi - ARG_MARGIN,
        "min_scaled_modulus": min_lower,
        "modulus_threshold": threshold,
        "radii": [float(SAMPLE_RADII[0]), float(SAMPLE_RADII[-1])],
        "n_samples": int(lam.size),
    }
    return SectorReport(zeta, omega0, eta0, psi0, amax, verdicts, evidence)


def _parse_params(text: str) -> dict:
    out = {}
    if not text:
        return out
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"expected key=value in kernel literal, got {part!r}")
        key, val = part.split("=", 1)
        try:
            out[key.strip()] = float(val)
        except ValueError as exc:
            raise ConfigError(f"non-numeric kernel parameter {part!r}") from exc
    return out


def parse_kernel(literal: str) -> MaterialKernel:
    """Parse a kernel literal.

    Grammar::

        hookean[:k=K]
        power:alpha=A
        maxwell:c=C[,k=K]
        sum:[{"k":K,"alpha":A,"c":C}, ...]      (JSON list; c defaults to 0)
    """
    literal = literal.strip()
    name, _, rest = literal.partition(":")
    name = name.strip().lower()
    try:
        if name == "hookean":
            params = _parse_params(rest)
            _reject_unknown(params, {"k"})
            return MaterialKernel.hookean(params.get("k", 1.0)) if params else MaterialKernel.hookean()
        if name == "power":
            params = _parse_params(rest)
            _reject_unknown(params, {"alpha"})
            if "alpha" not in params:
                raise ConfigError("power kernel needs alpha=")
            return MaterialKernel.power(params["alpha"])
        if name == "maxwell":
            params = _parse_params(rest)
            _reject_unknown(params, {"c", "k"})
            return MaterialKernel.maxwell(params.get("c", -1.0), params.get("k", 1.0))
        if name == "sum":
            items = json.loads(rest)
            if not isinstance(items, list):
                raise ConfigError("sum kernel expects a JSON list")
            terms = []
            for item in items:
                if isinstance(item, dict):
                    _reject_unknown(item, {"k", "alpha", "c"})
                    terms.append(KernelTerm(float(item["k"]), float(item["alpha"]), float(item.get("c", 0.0))))
                else:
                    terms.append(KernelTerm(*map(float, item)))
            return MaterialKernel(tuple(terms))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"malformed kernel literal {literal!r}: {exc}") from exc
    raise ConfigError(f"unknown kernel family {name!r}")


def _reject_unknown(params: dict, allowed: set) -> None:
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown kernel parameters {sorted(extra)}")
