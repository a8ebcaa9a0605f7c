"""Diagonal realisation of the Dirichlet Laplacian on a box and its
fractional-power scale.

Coefficients are taken in the orthonormal basis prod_d sqrt(2/L_d)
sin(m_d pi x_d / L_d), in which -A is diag(mu_m) with
mu_m = sum_d (m_d pi / L_d)^2.  The X_alpha norm is the weighted l2 norm
with weights (1 + mu_m)^(alpha - delta), delta being the index of the base
space.  Nodal values live on the sine-collocation grid x_j = j L/(n+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft

from .errors import ConfigError, DomainError

__all__ = ["SpectralOperator", "ScaleVector", "build_operator", "transform", "scale_norm"]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpectralOperator:
    dimension: int
    lengths: tuple[float, ...]
    n_modes: tuple[int, ...]
    delta: float = 1.0
    psi0: float = field(default=0.0, init=False)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.lengths) != self.dimension or len(self.n_modes) != self.dimension:
            raise ConfigError("lengths and n_modes need one entry per axis")
        for L in self.lengths:
            if not (math.isfinite(L) and L > 0):
                raise ConfigError(f"axis length must be positive, got {L}")
        for n in self.n_modes:
            if not (isinstance(n, (int, np.integer)) and _is_power_of_two(int(n)) and n >= 4):
                raise ConfigError(f"n_modes must be a power of two >= 4, got {n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.n_modes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def wavenumbers(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return np.arange(1, n + 1) * math.pi / self.lengths[axis]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """mu_m in mode order (array of shape ``self.shape``)."""
        k2 = [self.wavenumbers(d) ** 2 for d in range(self.dimension)]
        if self.dimension == 1:
            mu = k2[0]
        else:
            mu = np.add.outer(k2[0], k2[1])
        mu.setflags(write=False)
        return mu

    @property
    def sorted_eigenvalues(self) -> np.ndarray:
        return np.sort(self.eigenvalues, axis=None)

    @property
    def mu_max(self) -> float:
        return float(np.max(self.eigenvalues))

    def weights(self, alpha: float) -> np.ndarray:
        return (1.0 + self.eigenvalues) ** (alpha - self.delta)

    def nodes(self, axis: int = 0, refine: bool = False) -> np.ndarray:
        n = self.shape[axis]
        m = 2 * n + 1 if refine else n
        return np.arange(1, m + 1) * self.lengths[axis] / (m + 1)

    def unit(self, *index: int) -> "ScaleVector":
        """Basis vector for 1-based mode index (m_1[, m_2])."""
        c = np.zeros(self.shape)
        c[tuple(i - 1 for i in index)] = 1.0
        return ScaleVector(c, self)

    def zeros(self) -> "ScaleVector":
        return ScaleVector(np.zeros(self.shape), self)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "lengths": list(self.lengths),
            "n_modes": list(self.shape),
            "delta": self.delta,
        }

    # -- transforms -------------------------------------------------------

    def _forward(self, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=float)
        for d in range(self.dimension):
            n = out.shape[d]
            out = fft.dst(out, type=1, axis=d, norm="ortho") * math.sqrt(self.lengths[d] / (n + 1))
        return out

    def _inverse(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.asarray(coeffs, dtype=float)
        for d in range(self.dimension):
            n = out.shape[d]
            out = fft.idst(out, type=1, axis=d, norm="ortho") * math.sqrt((n + 1) / self.lengths[d])
        return out

    def to_fine(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values on the refined (2n+1 per axis) grid."""
        pad = [(0, n + 1) for n in self.shape]
        return self._inverse(np.pad(coeffs, pad))

    def from_fine(self, values: np.ndarray) -> np.ndarray:
        """Sine coefficients of fine-grid values, truncated to the native modes."""
        c = self._forward(values)
        return c[tuple(slice(0, n) for n in self.shape)]

    @cached_property
    def _gradient_matrices(self) -> list[np.ndarray]:
        # cosine synthesis of the derivative series on the refined grid
        mats = []
        for d in range(self.dimension):
            x = self.nodes(d, refine=True)
            k = self.wavenumbers(d)
            L = self.lengths[d]
            mats.append(math.sqrt(2.0 / L) * np.cos(np.outer(x, k)) * k)
        return mats

    def _sine_fine(self, coeffs: np.ndarray, axis: int) -> np.ndarray:
        n = self.shape[axis]
        pad = [(0, 0)] * coeffs.ndim
        pad[axis] = (0, n + 1)
        vals = fft.idst(np.pad(coeffs, pad), type=1, axis=axis, norm="ortho")
        return vals * math.sqrt((2 * n + 2) / self.lengths[axis])

    def gradient_fine(self, coeffs: np.ndarray) -> list[np.ndarray]:
        """Partial derivatives on the refined grid, one array per axis."""
        coeffs = np.asarray(coeffs, dtype=float)
        out = []
        for d in range(self.dimension):
            part = coeffs
            for other in range(self.dimension):
                if other != d:
                    part = self._sine_fine(part, other)
            mat = self._gradient_matrices[d]
            out.append(np.moveaxis(np.tensordot(mat, part, axes=([1], [d])), 0, d))
        return out

    def lq_norm(self, coeffs: np.ndarray, q: float) -> float:
        """Diagnostic L^q norm by quadrature on the refined grid."""
        if not q >= 1:
            raise DomainError(f"q must be >= 1, got {q}")
        vals = np.abs(self.to_fine(coeffs))
        cell = math.prod(L / (2 * n + 2) for L, n in zip(self.lengths, self.shape))
        if math.isinf(q):
            return float(np.max(vals))
        return float((np.sum(vals**q) * cell) ** (1.0 / q))


@dataclass
class ScaleVector:
    coefficients: np.ndarray
    operator: SpectralOperator

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != self.operator.shape:
            raise DomainError(
                f"coefficient shape {self.coefficients.shape} does not match modes {self.operator.shape}"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise DomainError("scale vector has non-finite entries")

    def norm(self, alpha: float) -> float:
        return scale_norm(self, alpha)

    def __add__(self, other: "ScaleVector") -> "ScaleVector":
        return ScaleVector(self.coefficients + other.coefficients, self.operator)

    def __sub__(self, other: "ScaleVector") -> "ScaleVector":
        return ScaleVector(self.coefficients - other.coefficients, self.operator)

    def __mul__(self, factor: float) -> "ScaleVector":
        return ScaleVector(self.coefficients * factor, self.operator)

    __rmul__ = __mul__


def build_operator(config: dict | None = None, **kwargs) -> SpectralOperator:
    """Build the operator from ``{dimension, lengths, n_modes, delta}``.

    Scalars are broadcast over axes, so ``n_modes=64`` with ``dimension=2``
    means 64 x 64 modes.
    """
    cfg = dict(config or {})
    cfg.update(kwargs)
    unknown = set(cfg) - {"dimension", "lengths", "n_modes", "delta"}
    if unknown:
        raise ConfigError(f"unknown operator keys {sorted(unknown)}")
    dim = int(cfg.get("dimension", 1))

    def per_axis(val, cast):
        if np.ndim(val) == 0:
            return tuple(cast(val) for _ in range(dim))
        return tuple(cast(v) for v in val)

    try:
        lengths = per_axis(cfg.get("lengths", 1.0), float)
        n_modes = per_axis(cfg.get("n_modes", 64), int)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed operator config: {exc}") from exc
    return SpectralOperator(dim, lengths, n_modes, float(cfg.get("delta", 1.0)))


def transform(op: SpectralOperator, values, direction: str = "forward"):
    """Forward: nodal samples -> ScaleVector.  Inverse: ScaleVector -> samples."""
    if direction == "forward":
        values = np.asarray(values, dtype=float)
        if values.shape != op.shape:
            raise DomainError(f"grid shape {values.shape} does not match modes {op.shape}")
        return ScaleVector(op._forward(values), op)
    if direction == "inverse":
        coeffs = values.coefficients if isinstance(values, ScaleVector) else np.asarray(values, dtype=float)
        if coeffs.shape != op.shape:
            raise DomainError(f"coefficient shape {coeffs.shape} does not match modes {op.shape}")
        return op._inverse(coeffs)
    raise DomainError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def scale_norm(vec: ScaleVector, alpha: float) -> float:
    """(sum_m (1 + mu_m)^(2(alpha - delta)) |x_m|^2)^(1/2)."""
    w = vec.operator.weights(alpha)
    return float(np.sqrt(np.sum((w * vec.coefficients) ** 2)))
