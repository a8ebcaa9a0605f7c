"""Scalar resolvents s_mu and the diagonal resolvent family S(t).

On an eigenvector with -A e = mu e the resolvent equation reduces to the
scalar Volterra equation

    s(t) = 1 - mu * int_0^t a(t - r) s(r) dr,      a = 1*g,

whose Laplace transform is s-hat(lambda) = 1/(lambda + mu g-hat(lambda)).
Two independent solvers are provided: product-trapezoid time stepping and
Talbot-contour inversion.  S(t) itself is never formed; it acts by
multiplying mode m by s_{mu_m}(t).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import AccuracyError, ContourError, DomainError, GridError, OverflowGuardError, ResolutionError
from .kernel import MaterialKernel
from .spectral import SpectralOperator

__all__ = [
    "ScalarResolventTable",
    "ModeTables",
    "ResolventConstants",
    "SmoothingFit",
    "product_weights",
    "scalar_resolvent_volterra",
    "scalar_resolvent_talbot",
    "talbot_inverse",
    "find_poles",
    "mode_tables",
    "operator_smoothing_norm",
    "fit_smoothing_rate",
    "log_continuity_ratios",
    "estimate_constants",
    "resolvent_residual",
]

OVERFLOW_GUARD = 1e15
TALBOT_TOL = 1e-8
TALBOT_N0 = 32
TALBOT_NMAX = 512
PROXIMITY = 1e-10
SCHEMA_HEADER = "# schema=1"

# modified Talbot contour z(th) = sigma + (N/t)(-A + B th cot(C th) + i D th)
_TA, _TB, _TC, _TD = 0.6122, 0.5017, 0.6407, 0.2645


# ---------------------------------------------------------------------------
# product-trapezoid weights


def _power_second_difference(beta: float, n: np.ndarray) -> np.ndarray:
    """(n+1)^beta - 2 n^beta + (n-1)^beta for integers n >= 1, with the
    large-n cancellation moved into expm1/log1p."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n < 4
    ns = n[small]
    out[small] = (ns + 1) ** beta - 2 * ns**beta + (ns - 1) ** beta
    nl = n[~small]
    inv = 1.0 / nl
    out[~small] = nl**beta * (np.expm1(beta * np.log1p(inv)) + np.expm1(beta * np.log1p(-inv)))
    return out


def _power_end_difference(beta: float, j: np.ndarray) -> np.ndarray:
    """beta j^(beta-1) - j^beta + (j-1)^beta for integers j >= 1."""
    j = np.asarray(j, dtype=float)
    out = np.empty_like(j)
    small = j < 4
    js = j[small]
    out[small] = beta * js ** (beta - 1) - js**beta + (js - 1) ** beta
    jl = j[~small]
    out[~small] = jl**beta * (beta / jl + np.expm1(beta * np.log1p(-1.0 / jl)))
    return out


def product_weights(kernel: MaterialKernel, h: float, J: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights of the product trapezoid rule for int_0^{t_j} a(t_j - r) y(r) dr.

    With y interpolated piecewise linearly on the grid t_i = i h the rule is
    sum_{i=1}^{j} W[j-i] y_i + E[j] y_0, where, in terms of C = 1*1*a and
    B = 1*a,

        W[0] = C(h)/h,   W[n] = (C((n+1)h) - 2C(nh) + C((n-1)h))/h,
        E[j] = (h B(jh) - C(jh) + C((j-1)h))/h.

    Returns ``(W, E)`` with ``W`` of length J and ``E`` of length J+1
    (E[0] unused).
    """
    if not (h > 0 and J >= 1):
        raise DomainError("product weights need h > 0 and J >= 1")
    W = np.zeros(J)
    E = np.zeros(J + 1)
    n = np.arange(1, J)
    j = np.arange(1, J + 1)
    for term in kernel.terms:
        beta = term.alpha + 2.0
        if term.c == 0.0:
            K = term.k / (term.alpha * (term.alpha + 1) * (term.alpha + 2))
            scale = K * h ** (beta - 1)
            W[0] += scale
            W[1:] += scale * _power_second_difference(beta, n)
            E[1:] += scale * _power_end_difference(beta, j)
        else:
            single = MaterialKernel((term,))
            x = np.arange(J + 1) * h
            C = single.antiderivative(x, 3)
            B = single.antiderivative(x, 2)
            W[0] += C[1] / h
            W[1:] += (C[2:J + 1] - 2 * C[1:J] + C[0:J - 1]) / h
            E[1:] += (h * B[1:] - C[1:] + C[:-1]) / h
    return W, E


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class ScalarResolventTable:
    mu: float
    times: np.ndarray
    values: np.ndarray
    method: str
    error_estimate: float
    kernel_id: str

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def at(self, t: float) -> float:
        idx = _grid_index(self.times, t)
        return float(self.values[idx])

    def growth_cap(self, omega: float = 0.0) -> float:
        """Smallest M with |s(t_j)| <= M e^(omega t_j) on the grid (at least 1)."""
        return max(1.0, float(np.max(np.abs(self.values) * np.exp(-omega * self.times))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "s_mu", "method", "mu", "kernel_id"])
        for t, s in zip(self.times, self.values):
            w.writerow([repr(float(t)), repr(float(s)), self.method, repr(float(self.mu)), self.kernel_id])
        return buf.getvalue()


def _grid_index(times: np.ndarray, t: float) -> int:
    idx = int(np.argmin(np.abs(times - t)))
    if not math.isclose(times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
        raise GridError(f"t = {t} is not a grid point")
    return idx


def _volterra_march(W: np.ndarray, E: np.ndarray, mu: float, J: int) -> np.ndarray:
    s = np.empty(J + 1)
    s[0] = 1.0
    diag = 1.0 + mu * W[0]
    for j in range(1, J + 1):
        acc = E[j] * s[0]
        if j > 1:
            acc += np.dot(W[j - 1:0:-1], s[1:j])
        s[j] = (1.0 - mu * acc) / diag
        if not abs(s[j]) <= OVERFLOW_GUARD:
            raise OverflowGuardError(f"|s_mu| exceeded {OVERFLOW_GUARD:g} at t = {j}")
    return s


def scalar_resolvent_volterra(
    kernel: MaterialKernel, mu: float, h: float, T: float, *, extrapolate: bool = False
) -> ScalarResolventTable:
    """Product-trapezoid solution on t_j = j h, j = 0..T/h.

    Linear interpolation of s makes the diagonal weight C(h)/h nonzero, so
    each step divides by 1 + mu W[0]; for a scalar this costs nothing.  The
    error estimate is (s_h - s_{h/2})/3 from a step-halved run, and with
    ``extrapolate=True`` the Richardson value (4 s_{h/2} - s_h)/3 is returned.
    """
    if mu < 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    if not h > 0:
        raise DomainError(f"step must be positive, got {h}")
    ratio = T / h
    J = int(round(ratio))
    if J < 1 or abs(ratio - J) > 1e-9 * max(1.0, ratio) or J > 10**6:
        raise GridError(f"T/h = {ratio} must be a positive integer <= 1e6")
    times = np.arange(J + 1) * h
    W, E = product_weights(kernel, h, J)
    coarse = _volterra_march(W, E, mu, J)
    W2, E2 = product_weights(kernel, h / 2, 2 * J)
    fine = _volterra_march(W2, E2, mu, 2 * J)[::2]
    diff = (fine - coarse) / 3.0
    values = fine + diff if extrapolate else coarse
    method = "volterra-richardson" if extrapolate else "volterra"
    return ScalarResolventTable(float(mu), times, values, method, float(np.max(np.abs(diff))), kernel.kernel_id)


# ---------------------------------------------------------------------------
# Talbot inversion with pole subtraction


def _talbot_nodes(N: int, t: np.ndarray, sigma: np.ndarray):
    th = -math.pi + (np.arange(N) + 0.5) * 2 * math.pi / N
    S = (N / t)[:, None]
    cot = 1.0 / np.tan(_TC * th)
    z = sigma[:, None] + S * (-_TA + _TB * th * cot + 1j * _TD * th)
    dz = S * (_TB * cot - _TB * _TC * th / np.sin(_TC * th) ** 2 + 1j * _TD)
    return z, dz


def _on_cut(kernel: MaterialKernel, lam: np.ndarray) -> np.ndarray:
    bad = np.zeros(lam.shape, dtype=bool)
    for term in kernel.terms:
        z = lam - term.c
        if float(term.alpha).is_integer():
            bad |= np.abs(z) < 1e-12
        else:
            bad |= (np.abs(z.imag) <= 1e-12 * np.maximum(1.0, np.abs(z))) & (z.real <= 0)
    return bad


def find_poles(kernel: MaterialKernel, mus: np.ndarray, max_poles: int = 8):
    """Zeros of lambda + mu g-hat(lambda) off the branch cuts, per mu.

    Newton's method is started from the asymptotic roots
    R e^{i pi (2j+1)/zeta} of lambda^zeta = -mu K, from points around each
    c_i and from a coarse polar grid; converged roots are deduplicated.
    Returns ``(poles, residues)`` of shape (len(mus), max_poles), padded
    with NaN and 0.
    """
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    zeta = kernel.zeta_g
    K = kernel.leading_constant
    R = (mus * K) ** (1.0 / zeta)
    seeds = []
    for j in range(-4, 4):
        ang = math.pi * (2 * j + 1) / zeta
        if abs(ang) < math.pi:
            seeds.append(np.exp(1j * ang) * R)
    for rad in (0.25, 0.5, 2.0):
        for ang in (0.55, 0.7, 0.85, 0.97):
            seeds.append(rad * R * np.exp(1j * math.pi * ang))
            seeds.append(rad * R * np.exp(-1j * math.pi * ang))
    for term in kernel.terms:
        for off in (0.5 + 0.5j, 0.5 - 0.5j, -0.5 + 0.1j, -0.5 - 0.1j, 0.1j, -0.1j):
            seeds.append(np.full(mus.shape, term.c + off, dtype=complex))
    lam = np.stack(seeds, axis=1).astype(complex)
    mu_col = mus[:, None]
    with np.errstate(all="ignore"):
        for _ in range(100):
            F = lam + mu_col * kernel.laplace(lam)
            dF = 1.0 + mu_col * kernel.laplace_derivative(lam)
            step = F / dF
            step = np.where(np.isfinite(step), step, 0.0)
            lam = lam - step
            if np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(lam))):
                break
        F = lam + mu_col * kernel.laplace(lam)
        ok = np.isfinite(lam) & (np.abs(F) <= 1e-9 * (1.0 + np.abs(lam))) & ~_on_cut(kernel, lam)
    ok &= mu_col > 0
    poles = np.full((mus.size, max_poles), np.nan + 0j)
    for row in range(mus.size):
        found: list[complex] = []
        for p in lam[row, ok[row]]:
            if not any(abs(p - q) <= 1e-8 * (1.0 + abs(q)) for q in found):
                found.append(complex(p))
        if len(found) > max_poles:
            raise AccuracyError(f"more than {max_poles} poles found for mu = {mus[row]}")
        found.sort(key=lambda p: (p.real, p.imag))
        poles[row, : len(found)] = found
    with np.errstate(all="ignore"):
        res = 1.0 / (1.0 + mu_col * kernel.laplace_derivative(poles))
    res = np.where(np.isnan(poles), 0.0, res)
    return poles, res


def _talbot_eval(kernel, mus, times, N, sigma, power, poles, res):
    z, dz = _talbot_nodes(N, times, sigma)
    gh = kernel.laplace(z)
    mu = mus[:, None, None]
    base = z + mu * gh
    if np.any(np.abs(base) < PROXIMITY) or np.any(np.abs(z) < PROXIMITY):
        raise ContourError("a contour node lies on a zero of lambda + mu g-hat")
    F = 1.0 / (base * z**power)
    active = ~np.isnan(poles)
    p = np.where(active, poles, 0.0)
    r = np.where(active, res / np.where(active, poles, 1.0) ** power, 0.0)
    for k in range(poles.shape[1]):
        if not np.any(active[:, k]):
            continue
        on = active[:, k][:, None, None]
        pk = p[:, k][:, None, None]
        if np.any(on & (np.abs(z - pk) < PROXIMITY * np.maximum(1.0, np.abs(z)))):
            raise ContourError("a contour node lies on a pole of the resolvent transform")
        F = F - np.where(on, r[:, k][:, None, None] / np.where(on, z - pk, 1.0), 0.0)
    integral = np.sum(np.exp(z * times[:, None]) * F * dz, axis=-1) / (N * 1j)
    resid = np.sum(r[:, None, :] * np.exp(p[:, None, :] * times[None, :, None]), axis=-1)
    return integral + resid


def talbot_inverse(
    kernel: MaterialKernel,
    mus,
    times,
    *,
    power: int = 0,
    n_nodes: int = TALBOT_N0,
    shift: float | None = None,
    tol: float = TALBOT_TOL,
    chunk: int = 256,
) -> tuple[np.ndarray, int, float]:
    """Inverse Laplace transform of s-hat/lambda^power for many mu and t > 0.

    power = 0, 1, 2 gives s, 1*s and 1*1*s.  Poles of s-hat are subtracted
    analytically and added back as residue exponentials, so the contour only
    has to resolve the branch cut.  For each time the node count doubles
    until two successive values agree to ``tol`` across the mode chunk; the
    smaller-N value of the agreeing pair is kept since rounding grows with
    N.  A value therefore depends only on its own (t, chunk), which keeps
    tables reproducible when the time list is extended.

    Returns ``(values, n_max_used, max_imag)`` with values of shape
    (len(mus), len(times)).
    """
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(mus < 0):
        raise DomainError("mu must be >= 0")
    if np.any(times <= 0):
        raise DomainError("Talbot inversion needs t > 0")
    if n_nodes < 16:
        raise DomainError("Talbot inversion needs at least 16 nodes")
    omega0 = kernel.omega0
    if shift is not None and shift <= omega0:
        raise DomainError(f"contour shift {shift} must exceed omega0 = {omega0}")
    sigma = (omega0 + 1.0 + 1.0 / times) if shift is None else np.full(times.shape, float(shift))
    out = np.empty((mus.size, times.size))
    n_used = n_nodes
    max_imag = 0.0
    for start in range(0, mus.size, chunk):
        block = mus[start:start + chunk]
        poles, res = find_poles(kernel, block)
        todo = np.arange(times.size)
        N = n_nodes
        prev = _talbot_eval(kernel, block, times, N, sigma, power, poles, res)
        while todo.size:
            cur = _talbot_eval(kernel, block, times[todo], 2 * N, sigma[todo], power, poles, res)
            done = np.max(np.abs(cur - prev), axis=0) <= tol
            cols = todo[done]
            out[start:start + chunk, cols] = prev[:, done].real
            if cols.size:
                max_imag = max(max_imag, float(np.max(np.abs(prev[:, done].imag))))
                n_used = max(n_used, N)
            todo, prev = todo[~done], cur[:, ~done]
            N *= 2
            if todo.size and 2 * N > TALBOT_NMAX:
                raise AccuracyError(f"Talbot values unresolved at N = {2 * N} for t = {times[todo][:3]}")
    return out, n_used, max_imag


def scalar_resolvent_talbot(
    kernel: MaterialKernel,
    mu: float,
    t: float,
    contour: dict | None = None,
    *,
    tol: float = TALBOT_TOL,
) -> float:
    """s_mu(t) by Talbot inversion of 1/(lambda + mu g-hat(lambda))."""
    contour = dict(contour or {})
    vals, _, imag = talbot_inverse(
        kernel,
        [mu],
        [t],
        n_nodes=int(contour.get("n_nodes", TALBOT_N0)),
        shift=contour.get("shift"),
        tol=tol,
    )
    if imag > 1e-8:
        raise AccuracyError(f"imaginary residue {imag:.2e} of the inversion exceeds 1e-8")
    return float(vals[0, 0])


# ---------------------------------------------------------------------------
# operator level


@dataclass(frozen=True)
class ModeTables:
    """s_{mu_m}(t) (or its iterated integrals) for every mode on a time list."""

    op: SpectralOperator
    kernel_id: str
    times: np.ndarray
    values: np.ndarray  # shape op.shape + (len(times),)
    power: int = 0
    method: str = "talbot"

    def column(self, t: float) -> np.ndarray:
        return self.values[..., _grid_index(self.times, t)]


def mode_tables(
    op: SpectralOperator,
    kernel: MaterialKernel,
    times,
    *,
    power: int = 0,
    method: str = "talbot",
    h: float | None = None,
) -> ModeTables:
    """Tables for all modes.  Zero times get their exact values."""
    times = np.asarray(times, dtype=float)
    mus = op.eigenvalues.ravel()
    vals = np.empty((mus.size, times.size))
    pos = times > 0
    vals[:, ~pos] = 1.0 if power == 0 else 0.0
    if method == "talbot":
        if np.any(pos):
            vals[:, pos] = talbot_inverse(kernel, mus, times[pos], power=power)[0]
    elif method == "volterra":
        if power != 0:
            raise DomainError("Volterra tables are only built for power 0")
        if h is None:
            raise DomainError("Volterra tables need the step h")
        T = float(np.max(times))
        for i, mu in enumerate(mus):
            tab = scalar_resolvent_volterra(kernel, float(mu), h, T)
            vals[i] = [tab.at(t) for t in times]
    else:
        raise DomainError(f"unknown method {method!r}")
    return ModeTables(op, kernel.kernel_id, times, vals.reshape(op.shape + (times.size,)), power, method)


def operator_smoothing_norm(op: SpectralOperator, tables: ModeTables, t: float, gamma: float, theta: float) -> float:
    """Norm of S(t) from X_gamma to X_{1+theta}: sup_m (1+mu_m)^(1+theta-gamma) |s_{mu_m}(t)|."""
    if not (0 <= theta <= gamma <= 1):
        raise DomainError(f"need 0 <= theta <= gamma <= 1, got gamma={gamma}, theta={theta}")
    col = tables.column(t)
    return float(np.max((1.0 + op.eigenvalues) ** (1.0 + theta - gamma) * np.abs(col)))


@dataclass(frozen=True)
class SmoothingFit:
    slope: float
    intercept: float
    residual: float
    target: float
    times: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    log_lipschitz_max: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "target": self.target,
            "log_lipschitz_max": self.log_lipschitz_max,
        }


def fit_smoothing_rate(
    op: SpectralOperator,
    kernel: MaterialKernel,
    gamma: float,
    theta: float,
    t_min: float,
    t_max: float,
    n_samples: int = 16,
) -> SmoothingFit:
    """Least-squares slope of log ||S(t)||_{gamma -> 1+theta} against log t."""
    if not (0 < t_min < t_max):
        raise DomainError("need 0 < t_min < t_max")
    if not (0 <= theta <= gamma <= 1):
        raise DomainError(f"need 0 <= theta <= gamma <= 1, got gamma={gamma}, theta={theta}")
    e = 1.0 + theta - gamma
    zeta = kernel.zeta_g
    # with e = 0 the norms are O(1) and there is no rate to resolve
    if e > 0 and (1.0 + op.mu_max) ** e < 10.0 * t_min ** (-zeta * e):
        raise ResolutionError(
            f"(1 + mu_max)^{e:g} = {(1 + op.mu_max) ** e:.3g} is below 10 t_min^(-zeta e); add modes"
        )
    times = np.geomspace(t_min, t_max, n_samples)
    tabs = mode_tables(op, kernel, times)
    weight = (1.0 + op.eigenvalues) ** e
    norms = np.max((weight[..., None] * np.abs(tabs.values)).reshape(-1, times.size), axis=0)
    x, y = np.log(times), np.log(norms)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(math.sqrt(res[0] / times.size)) if res.size else 0.0
    diffs = np.max(
        (weight[..., None] * np.abs(np.diff(tabs.values, axis=-1))).reshape(-1, times.size - 1), axis=0
    )
    t0, t1 = times[:-1], times[1:]
    lip = diffs / (np.log(t1 / t0) ** (gamma - theta) * t0 ** (-zeta * e))
    return SmoothingFit(float(slope), float(intercept), residual, -zeta * e, times, norms, float(np.max(lip)))


def log_continuity_ratios(
    op: SpectralOperator,
    kernel: MaterialKernel,
    gamma: float,
    theta: float,
    pairs,
) -> np.ndarray:
    """||S(t1) - S(t0)||_{gamma -> 1+theta} / (ln(t1/t0)^(gamma-theta) t0^(-zeta(1+theta-gamma)))."""
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or np.any(pairs[:, 0] >= pairs[:, 1]) or np.any(pairs <= 0):
        raise DomainError("pairs must be rows (t0, t1) with 0 < t0 < t1")
    e = 1.0 + theta - gamma
    times = np.unique(pairs.ravel())
    tabs = mode_tables(op, kernel, times)
    flat = tabs.values.reshape(-1, times.size)
    weight = ((1.0 + op.eigenvalues) ** e).ravel()
    i0 = np.searchsorted(times, pairs[:, 0])
    i1 = np.searchsorted(times, pairs[:, 1])
    num = np.max(weight[:, None] * np.abs(flat[:, i1] - flat[:, i0]), axis=0)
    t0, t1 = pairs[:, 0], pairs[:, 1]
    return num / (np.log(t1 / t0) ** (gamma - theta) * t0 ** (-kernel.zeta_g * e))


@dataclass(frozen=True)
class ResolventConstants:
    M: float
    omega: float
    zeta_g: float
    t_range: tuple[float, float]

    def __post_init__(self):
        if self.M < 1:
            raise DomainError("M must be >= 1")


def estimate_constants(
    op: SpectralOperator,
    kernel: MaterialKernel,
    T: float = 1.0,
    *,
    n_samples: int = 64,
    omega: float | None = None,
) -> ResolventConstants:
    """Empirical M with sup_m |s_{mu_m}(t)| <= M e^(omega t) on (0, T]."""
    omega = kernel.omega0 if omega is None else omega
    times = np.geomspace(T * 1e-4, T, n_samples)
    tabs = mode_tables(op, kernel, times)
    sup = np.max(np.abs(tabs.values).reshape(-1, times.size), axis=0)
    M = max(1.0, float(np.max(sup * np.exp(-omega * times))))
    return ResolventConstants(M, float(omega), kernel.zeta_g, (float(times[0]), float(T)))


def resolvent_residual(table: ScalarResolventTable, kernel: MaterialKernel, refine: int = 4) -> float:
    """max_j |s(t_j) - 1 + mu int_0^{t_j} a(t_j - r) s(r) dr| with the
    integral done by composite Simpson on a grid ``refine`` times finer,
    s being interpolated by cubic splines."""
    spline = CubicSpline(table.times, table.values)
    out = 0.0
    for j in range(1, table.times.size):
        tj = table.times[j]
        m = 2 * refine * j
        r = np.linspace(0.0, tj, m + 1)
        integrand = kernel.antiderivative(tj - r, 1) * spline(r)
        val = simpson(integrand, x=r)
        out = max(out, abs(table.values[j] - 1.0 + table.mu * val))
    return out
