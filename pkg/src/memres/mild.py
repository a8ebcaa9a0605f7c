"""Mild solutions of u' = int_0^t g(t-s) A u(s) ds + f(t, u).

Mode by mode the mild formulation reads

    u_m(t) = s_m(t) u0_m + int_0^t s_m(t - r) f_m(r) dr,

with s_m the scalar resolvent of eigenvalue mu_m.  f is interpolated
piecewise linearly in time and the convolution is integrated exactly
against s_m (product integration), using P = 1*s and Q = 1*1*s tabulated
by Talbot inversion.  The endpoint value f(t_j, u_j) is resolved by a
fixed-point iteration.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError, RegimeError, SamplingError
from .kernel import MaterialKernel
from .resolvent import SCHEMA_HEADER, mode_tables
from .spectral import ScaleVector, SpectralOperator, scale_norm
from .specfun import beta

__all__ = [
    "NonlinearitySpec",
    "MildProblem",
    "MildSolution",
    "WellPosednessBudget",
    "solve_mild",
    "continue_mild",
    "certified_existence_time",
    "probe_time",
    "eps_regular_profile",
    "lipschitz_dependence",
]

POINTS_PER_DECADE = 12
MONOTONE_STEPS = 5


@dataclass(frozen=True)
class NonlinearitySpec:
    """f(t, u) for the supported families.

    power:         c0 |u|^(rho-1) u
    gradient:      c0 |grad u|^rho
    forced-linear: a prescribed forcing independent of u; ``forcing`` is a
                   ScaleVector (constant in time) or a callable t -> coefficients
    zero:          f = 0
    """

    kind: str = "zero"
    c0: float = 1.0
    rho: float = 2.0
    forcing: ScaleVector | Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("power", "gradient", "forced-linear", "zero"):
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind in ("power", "gradient") and not self.rho > 1:
            raise DomainError(f"rho must exceed 1, got {self.rho}")
        if self.kind == "forced-linear" and self.forcing is None:
            raise DomainError("forced-linear nonlinearity needs a forcing")

    def evaluate(self, op: SpectralOperator, t: float, coeffs: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(op.shape)
        if self.kind == "forced-linear":
            if isinstance(self.forcing, ScaleVector):
                return self.forcing.coefficients
            return np.asarray(self.forcing(t), dtype=float).reshape(op.shape)
        if self.kind == "power":
            u = op.to_fine(coeffs)
            vals = self.c0 * np.abs(u) ** (self.rho - 1.0) * u
        else:
            grads = op.gradient_fine(coeffs)
            mag = np.sqrt(sum(g * g for g in grads))
            vals = self.c0 * mag**self.rho
        return op.from_fine(vals)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c0": self.c0, "rho": self.rho}


@dataclass(frozen=True)
class MildProblem:
    operator: SpectralOperator
    kernel: MaterialKernel
    u0: ScaleVector
    nonlinearity: NonlinearitySpec
    T: float
    h: float
    inner_tol: float = 1e-10
    max_inner: int = 50
    blowup_threshold: float = 1e8
    eps: float = 0.2
    small_t: bool = False
    small_t_depth: float = 1e-8
    gamma: float | None = None

    def __post_init__(self):
        if self.u0.operator != self.operator:
            raise DomainError("u0 lives on a different operator")
        if not math.isfinite(scale_norm(self.u0, 1.0)):
            raise DomainError("u0 must have finite X_1 norm")
        if not (self.h > 0 and self.T > 0):
            raise DomainError("T and h must be positive")
        if abs(self.T / self.h - round(self.T / self.h)) > 1e-9 * self.T / self.h:
            raise DomainError("T must be an integer multiple of h")
        if not self.blowup_threshold > 0:
            raise DomainError("blow-up threshold must be positive")
        if self.eps < 0:
            raise DomainError("eps must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))

    @property
    def critical(self) -> bool:
        return self.gamma is not None and self.gamma <= 1.0 - 1.0 / self.kernel.zeta_g

    def with_(self, **changes) -> "MildProblem":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "operator": self.operator.to_dict(),
            "kernel": self.kernel.to_dict(),
            "nonlinearity": self.nonlinearity.to_dict(),
            "T": self.T,
            "h": self.h,
            "inner_tol": self.inner_tol,
            "max_inner": self.max_inner,
            "blowup_threshold": self.blowup_threshold,
            "eps": self.eps,
            "small_t": self.small_t,
            "small_t_depth": self.small_t_depth,
            "gamma": self.gamma,
        }


@dataclass
class MildSolution:
    times: np.ndarray
    states: np.ndarray  # shape (len(times),) + op.shape
    status: str
    eps: float
    zeta_g: float
    tau_estimate: float | None = None
    failed_step: int | None = None
    flags: list = field(default_factory=list)
    forcing_history: np.ndarray | None = field(default=None, repr=False)
    small_times: np.ndarray | None = None
    small_states: np.ndarray | None = field(default=None, repr=False)
    operator: SpectralOperator | None = field(default=None, repr=False)

    def state(self, j: int) -> ScaleVector:
        return ScaleVector(self.states[j], self.operator)

    def norms(self, alpha: float) -> np.ndarray:
        w = self.operator.weights(alpha)
        axes = tuple(range(1, self.states.ndim))
        return np.sqrt(np.sum((w * self.states) ** 2, axis=axes))

    def weighted_profile(self, eps: float | None = None) -> np.ndarray:
        eps = self.eps if eps is None else eps
        return self.times ** (self.zeta_g * eps) * self.norms(1.0 + eps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "norm_X1", "norm_X1pe", "weighted_profile", "status"])
        n1 = self.norms(1.0)
        ne = self.norms(1.0 + self.eps)
        prof = self.weighted_profile()
        for j, t in enumerate(self.times):
            w.writerow([repr(float(t)), repr(float(n1[j])), repr(float(ne[j])), repr(float(prof[j])), self.status])
        return buf.getvalue()

    def coefficient_dump(self) -> np.ndarray:
        """Little-endian float64, modes-major and time-minor."""
        return np.ascontiguousarray(np.moveaxis(self.states, 0, -1), dtype="<f8")


# ---------------------------------------------------------------------------
# the solver


class _Tables:
    """s, P = 1*s and Q = 1*1*s on the uniform grid, flattened over modes."""

    def __init__(self, problem: MildProblem, J: int):
        op, kernel, h = problem.operator, problem.kernel, problem.h
        times = np.arange(J + 2) * h
        self.s = mode_tables(op, kernel, times, power=0).values.reshape(op.size, -1)
        self.P = mode_tables(op, kernel, times, power=1).values.reshape(op.size, -1)
        self.Q = mode_tables(op, kernel, times, power=2).values.reshape(op.size, -1)
        Q, P = self.Q, self.P
        self.W = np.empty((op.size, J + 1))
        self.W[:, 0] = Q[:, 1] / h
        self.W[:, 1:] = (Q[:, 2:J + 2] - 2 * Q[:, 1:J + 1] + Q[:, 0:J]) / h
        self.E = np.zeros((op.size, J + 1))
        self.E[:, 1:] = (h * P[:, 1:J + 1] - Q[:, 1:J + 1] + Q[:, 0:J]) / h


def _x1_norm(op: SpectralOperator, flat: np.ndarray) -> float:
    return float(np.sqrt(np.sum((op.weights(1.0).ravel() * flat) ** 2)))


def _march(problem: MildProblem, tables: _Tables, states, forcing, start: int, J: int):
    """Advance steps start..J in place.  Returns (status, failed_step, reason)."""
    op = problem.operator
    nl = problem.nonlinearity
    h = problem.h
    w_eps = op.weights(1.0 + problem.eps).ravel()
    w_one = op.weights(1.0).ravel()
    u0 = states[0]
    W, E, s = tables.W, tables.E, tables.s
    track = [float(np.sqrt(np.sum((w_eps * states[j]) ** 2))) for j in range(start)]
    for j in range(start, J + 1):
        t = j * h
        base = s[:, j] * u0 + E[:, j] * forcing[0]
        if j > 1:
            base += np.einsum("mi,im->m", W[:, j - 1:0:-1], forcing[1:j])
        w0 = W[:, 0]
        u = states[j - 1].copy()
        converged = escaped = False
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(problem.max_inner):
                f = nl.evaluate(op, t, u.reshape(op.shape)).ravel()
                new = base + w0 * f
                size = float(np.sqrt(np.sum((w_eps * new) ** 2)))
                if not size <= problem.blowup_threshold:
                    escaped = True
                    break
                diff = float(np.sqrt(np.sum((w_one * (new - u)) ** 2)))
                u = new
                if diff <= problem.inner_tol * max(1.0, float(np.sqrt(np.sum((w_one * u) ** 2)))):
                    converged = True
                    break
        if not converged:
            # an iterate leaving every bound counts as blow-up only after monotone growth
            if _monotone(track):
                return "blowup", j, "escape" if escaped else "no-contraction"
            return "inner-divergence", j, "overflow" if escaped else "no-contraction"
        states[j] = u
        forcing[j] = nl.evaluate(op, t, u.reshape(op.shape)).ravel()
        track.append(float(np.sqrt(np.sum((w_eps * u) ** 2))))
    return "completed", None, None


def _monotone(track: list) -> bool:
    if len(track) < MONOTONE_STEPS + 1:
        return False
    tail = np.asarray(track[-(MONOTONE_STEPS + 1):])
    return bool(np.all(np.diff(tail) > 0))


def _tau_estimate(times: np.ndarray, norms: np.ndarray, rho: float) -> float:
    """Zero of the secant through the last two values of ||u||^(1-rho).

    For u' ~ u^rho the quantity ||u||^(1-rho) decays linearly to 0 at the
    blow-up time, so the secant extrapolates it from the last two steps.
    """
    y = norms[-2:] ** (1.0 - rho)
    t = times[-2:]
    slope = (y[1] - y[0]) / (t[1] - t[0])
    if not slope < 0:
        return float(t[1])
    return float(t[1] - y[1] / slope)


def _small_t(problem: MildProblem, forcing0: np.ndarray, forcing1: np.ndarray):
    op, kernel, h = problem.operator, problem.kernel, problem.h
    lo = problem.small_t_depth * problem.T
    if lo >= h:
        return None, None
    n = int(math.ceil(POINTS_PER_DECADE * math.log10(h / lo)))
    times = np.geomspace(lo, h, n + 1)[:-1]
    s = mode_tables(op, kernel, times, power=0).values.reshape(op.size, -1)
    P = mode_tables(op, kernel, times, power=1).values.reshape(op.size, -1)
    Q = mode_tables(op, kernel, times, power=2).values.reshape(op.size, -1)
    u0 = problem.u0.coefficients.ravel()
    slope = (forcing1 - forcing0) / h
    states = (s * u0[:, None] + P * forcing0[:, None] + Q * slope[:, None]).T
    return times, states.reshape((times.size,) + op.shape)


def _finish(problem, tables, states, forcing, status, failed, reason, J) -> MildSolution:
    op = problem.operator
    last = J if status == "completed" else failed - 1
    times = np.arange(last + 1) * problem.h
    sol = MildSolution(
        times=times,
        states=states[: last + 1].reshape((last + 1,) + op.shape),
        status=status,
        eps=problem.eps,
        zeta_g=problem.kernel.zeta_g,
        failed_step=None if status == "completed" else failed,
        forcing_history=forcing[: last + 1].copy(),
        operator=op,
    )
    if status == "blowup":
        norms = sol.norms(1.0 + problem.eps)
        rho = problem.nonlinearity.rho if problem.nonlinearity.kind in ("power", "gradient") else 2.0
        sol.tau_estimate = _tau_estimate(times, norms, rho) if times.size >= 2 else float(times[-1])
    if reason == "overflow":
        sol.flags.append("OVERFLOW")
    if problem.critical:
        sol.flags.append("CRITICAL")
    if problem.kernel.alpha_max >= 1.0:
        sol.flags.append("DEGENERATE_SECTOR")
    if problem.small_t and last >= 1:
        sol.small_times, sol.small_states = _small_t(problem, forcing[0], forcing[1])
    return sol


def solve_mild(problem: MildProblem) -> MildSolution:
    """Time-step the mild formulation on t_j = j h."""
    op = problem.operator
    J = problem.n_steps
    tables = _Tables(problem, J)
    states = np.zeros((J + 1, op.size))
    forcing = np.zeros((J + 1, op.size))
    states[0] = problem.u0.coefficients.ravel()
    forcing[0] = problem.nonlinearity.evaluate(op, 0.0, problem.u0.coefficients).ravel()
    status, failed, reason = _march(problem, tables, states, forcing, 1, J)
    return _finish(problem, tables, states, forcing, status, failed, reason, J)


def continue_mild(sol: MildSolution, problem: MildProblem, T2: float) -> MildSolution:
    """Extend a completed solution to T2, keeping the whole convolution history."""
    if sol.status != "completed":
        raise PreconditionError(f"cannot continue a solution with status {sol.status!r}")
    if not T2 > problem.T:
        raise DomainError("T2 must exceed the current horizon")
    extended = problem.with_(T=T2)
    J0 = problem.n_steps
    J = extended.n_steps
    op = problem.operator
    tables = _Tables(extended, J)
    states = np.zeros((J + 1, op.size))
    forcing = np.zeros((J + 1, op.size))
    states[: J0 + 1] = sol.states.reshape(J0 + 1, -1)
    forcing[: J0 + 1] = sol.forcing_history
    status, failed, reason = _march(extended, tables, states, forcing, J0 + 1, J)
    out = _finish(extended, tables, states, forcing, status, failed, reason, J)
    if sol.small_times is not None:
        out.small_times, out.small_states = sol.small_times, sol.small_states
    return out


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class EpsProfile:
    times: np.ndarray
    values: np.ndarray
    reference_time: float
    reference_value: float
    ratio: float
    passed: bool


def eps_regular_profile(sol: MildSolution, eps: float, zeta_g: float, *, threshold: float = 0.05) -> EpsProfile:
    """t^(zeta_g eps) ||u(t)||_{X_{1+eps}} on the small-t sub-grid plus the
    uniform grid.  PASS when the value at the smallest sampled time is at
    most ``threshold`` times the value at t = T/10."""
    if sol.small_times is None:
        raise SamplingError("solution has no small-t refinement; solve with small_t=True")
    op = sol.operator
    w = op.weights(1.0 + eps)
    axes = tuple(range(1, sol.states.ndim))
    times = np.concatenate([sol.small_times, sol.times[1:]])
    states = np.concatenate([sol.small_states, sol.states[1:]])
    norms = np.sqrt(np.sum((w * states) ** 2, axis=axes))
    values = times ** (zeta_g * eps) * norms
    T = sol.times[-1]
    ref_idx = int(np.argmin(np.abs(times - 0.1 * T)))
    ratio = float(values[0] / values[ref_idx]) if values[ref_idx] > 0 else 0.0
    return EpsProfile(times, values, float(times[ref_idx]), float(values[ref_idx]), ratio, ratio <= threshold)


def lipschitz_dependence(
    problem: MildProblem,
    u0: ScaleVector,
    u1: ScaleVector,
    theta: float,
    zeta_g: float,
    *,
    gamma_eps: float | None = None,
) -> dict:
    """max_t t^(zeta theta) ||u(t;u0) - u(t;u1)||_{X_{1+theta}} / ||u0 - u1||_{X_1}."""
    d0 = scale_norm(u0 - u1, 1.0)
    if d0 == 0:
        raise DomainError("u0 and u1 must differ")
    warning = gamma_eps is not None and theta >= gamma_eps - 1.0 + 1.0 / zeta_g
    if warning:
        warnings.warn("theta lies outside the window where the Lipschitz bound is asserted", stacklevel=2)
    a = solve_mild(problem.with_(u0=u0))
    b = solve_mild(problem.with_(u0=u1))
    for s in (a, b):
        if s.status != "completed":
            raise PreconditionError(f"run ended with status {s.status!r}")
    w = problem.operator.weights(1.0 + theta)
    axes = tuple(range(1, a.states.ndim))
    diff = np.sqrt(np.sum((w * (a.states - b.states)) ** 2, axis=axes))
    ratio = a.times ** (zeta_g * theta) * diff / d0
    return {"ratio_max": float(np.max(ratio)), "warning": bool(warning)}


# ---------------------------------------------------------------------------
# certified existence time


@dataclass(frozen=True)
class WellPosednessBudget:
    M: float
    c: float
    rho: float
    gamma0: float
    zeta_g: float
    x0_norm: float
    mu: float = 1.0

    def __post_init__(self):
        if not self.M >= 1:
            raise DomainError("M must be >= 1")
        if not self.c > 0:
            raise DomainError("Lipschitz constant c must be positive")
        if not self.rho > 1:
            raise DomainError("rho must exceed 1")
        if not self.zeta_g > 1:
            raise DomainError("zeta_g must exceed 1")
        if not (0 < self.mu <= 1):
            raise DomainError("mu must lie in (0, 1]")
        if not self.x0_norm >= 0:
            raise DomainError("||x0|| must be >= 0")

    @property
    def R(self) -> float:
        return max(2.0 * (self.x0_norm + self.mu) ** (self.rho - 1.0) + 1.0, (self.x0_norm + 1.0) ** self.rho + 1.0)


def certified_existence_time(budget: WellPosednessBudget, tau_probe: float = math.inf) -> dict:
    """tau = min(tau_probe, (mu/(4 M R c B(1, 1-zeta(1-gamma0))))^(1/(1-zeta(1-gamma0)))),
    r = mu/(2M)."""
    threshold = 1.0 - 1.0 / budget.zeta_g
    if budget.gamma0 <= threshold:
        raise RegimeError(f"gamma0 = {budget.gamma0} <= 1 - 1/zeta_g = {threshold}: critical regime")
    if not budget.gamma0 < 1:
        raise DomainError("gamma0 must be < 1")
    expo = 1.0 - budget.zeta_g * (1.0 - budget.gamma0)
    base = budget.mu / (4.0 * budget.M * budget.R * budget.c * beta(1.0, expo))
    tau = min(tau_probe, base ** (1.0 / expo))
    return {"tau": tau, "r": budget.mu / (2.0 * budget.M), "R": budget.R}


def probe_time(
    op: SpectralOperator, kernel: MaterialKernel, x0: ScaleVector, mu: float, t_max: float = 1.0, n: int = 200
) -> float:
    """Largest sampled t with ||S(r) x0 - x0||_{X_1} <= mu/4 for all sampled r <= t."""
    times = np.geomspace(t_max * 1e-8, t_max, n)
    tabs = mode_tables(op, kernel, times)
    w = op.weights(1.0)
    diff = (tabs.values - 1.0) * x0.coefficients[..., None]
    norms = np.sqrt(np.sum((w[..., None] * diff) ** 2, axis=tuple(range(op.dimension))))
    bad = np.nonzero(norms > mu / 4.0)[0]
    if bad.size == 0:
        return float(t_max)
    if bad[0] == 0:
        return 0.0
    return float(times[bad[0] - 1])
