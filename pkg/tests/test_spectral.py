import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from memres.errors import ConfigError, DomainError
from memres.spectral import ScaleVector, build_operator, scale_norm, transform

OP8 = build_operator(dimension=1, lengths=1.0, n_modes=8)
coeffs8 = arrays(np.float64, 8, elements=st.floats(-1e3, 1e3))


def test_build_operator_examples():
    op = build_operator({"dimension": 1, "lengths": 1.0, "n_modes": 4, "delta": 1})
    np.testing.assert_allclose(op.eigenvalues, [math.pi**2 * m * m for m in (1, 2, 3, 4)], rtol=1e-15)
    assert build_operator(dimension=1, lengths=2.0, n_modes=4).eigenvalues[0] == pytest.approx(math.pi**2 / 4)
    op2 = build_operator(dimension=2, lengths=(1, 1), n_modes=(4, 4))
    assert op2.sorted_eigenvalues[0] == pytest.approx(2 * math.pi**2)
    assert op2.psi0 == 0.0 and op2.shape == (4, 4)


def test_eigenvalues_positive_sorted():
    op = build_operator(dimension=2, lengths=(1.0, 3.0), n_modes=(8, 16))
    ev = op.sorted_eigenvalues
    assert np.all(ev > 0) and np.all(np.diff(ev) >= 0)
    assert np.all(np.diff(OP8.eigenvalues) > 0)


@pytest.mark.parametrize(
    "cfg",
    [
        {"n_modes": 6},
        {"n_modes": 2},
        {"lengths": 0.0},
        {"lengths": -1.0},
        {"dimension": 3},
        {"dimension": 2, "n_modes": [8]},
        {"colour": "red"},
    ],
)
def test_build_operator_rejects(cfg):
    with pytest.raises(ConfigError):
        build_operator(cfg)


def test_transform_basis_function():
    x = OP8.nodes()
    vec = transform(OP8, math.sqrt(2) * np.sin(math.pi * x), "forward")
    np.testing.assert_allclose(vec.coefficients, OP8.unit(1).coefficients, atol=1e-14)
    assert np.all(transform(OP8, np.zeros(8)).coefficients == 0)


def test_transform_roundtrip_seeded():
    rng = np.random.default_rng(7)
    for op in (OP8, build_operator(dimension=2, lengths=(1.0, 2.0), n_modes=(16, 8))):
        vals = rng.standard_normal(op.shape)
        back = transform(op, transform(op, vals, "forward"), "inverse")
        np.testing.assert_allclose(back, vals, atol=1e-12)


def test_transform_shape_mismatch():
    with pytest.raises(DomainError):
        transform(OP8, np.zeros(7))
    with pytest.raises(DomainError):
        transform(OP8, np.zeros(8), "sideways")


def test_parseval():
    rng = np.random.default_rng(3)
    op = build_operator(dimension=1, lengths=2.5, n_modes=32)
    c = rng.standard_normal(32)
    vals = transform(op, c, "inverse")
    quad = math.sqrt(np.sum(vals**2) * 2.5 / 33)
    assert quad == pytest.approx(np.linalg.norm(c), rel=1e-10)


def test_refined_grid_and_gradient():
    op = build_operator(dimension=2, lengths=(1.0, 2.0), n_modes=(8, 8))
    c = np.zeros(op.shape)
    c[1, 2] = 1.0  # sqrt(2) sin(2 pi x) * sin(3 pi y / 2)
    x = op.nodes(0, refine=True)[:, None]
    y = op.nodes(1, refine=True)[None, :]
    u = math.sqrt(2) * np.sin(2 * math.pi * x) * np.sin(1.5 * math.pi * y)
    np.testing.assert_allclose(op.to_fine(c), u, atol=1e-13)
    gx, gy = op.gradient_fine(c)
    np.testing.assert_allclose(gx, 2 * math.pi * math.sqrt(2) * np.cos(2 * math.pi * x) * np.sin(1.5 * math.pi * y), atol=1e-12)
    np.testing.assert_allclose(gy, 1.5 * math.pi * math.sqrt(2) * np.sin(2 * math.pi * x) * np.cos(1.5 * math.pi * y), atol=1e-12)
    np.testing.assert_allclose(op.from_fine(op.to_fine(c)), c, atol=1e-14)


def test_lq_norm_diagnostic():
    op = build_operator(dimension=1, lengths=1.0, n_modes=64)
    e1 = op.unit(1).coefficients
    assert op.lq_norm(e1, 2) == pytest.approx(1.0, rel=1e-12)
    assert op.lq_norm(e1, math.inf) == pytest.approx(math.sqrt(2), rel=1e-3)
    # ||sqrt(2) sin(pi x)||_1 = 2 sqrt(2)/pi
    assert op.lq_norm(e1, 1) == pytest.approx(2 * math.sqrt(2) / math.pi, rel=1e-4)


def test_scale_norm_examples():
    e1 = OP8.unit(1)
    assert scale_norm(e1, 1.0) == 1.0
    assert scale_norm(e1, 2.0) == pytest.approx(1 + math.pi**2, rel=1e-15)
    assert scale_norm(e1, 2.0) == pytest.approx(10.8696, abs=1e-4)
    mixed = OP8.unit(1) + OP8.unit(2)
    # (1+pi^2) + (1+4 pi^2) = 2 + 5 pi^2
    assert scale_norm(mixed, 1.5) == pytest.approx(math.sqrt(2 + 5 * math.pi**2), rel=1e-15)
    assert scale_norm(mixed, 1.5) == pytest.approx(7.1658, abs=1e-4)


def test_scale_vector_validation():
    with pytest.raises(DomainError):
        ScaleVector(np.zeros(4), OP8)
    with pytest.raises(DomainError):
        ScaleVector(np.full(8, np.nan), OP8)
    v = 2.0 * OP8.unit(3) - OP8.unit(3)
    assert np.array_equal(v.coefficients, OP8.unit(3).coefficients)


@given(coeffs8, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_scale_monotone(c, a, b):
    lo, hi = sorted((a, b))
    v = ScaleVector(c, OP8)
    assert scale_norm(v, lo) <= scale_norm(v, hi) * (1 + 1e-14)


@settings(max_examples=200)
@given(coeffs8, st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 1.0))
def test_interpolation_inequality(c, a0, a1, th):
    v = ScaleVector(c, OP8)
    a = (1 - th) * a0 + th * a1
    rhs = scale_norm(v, a0) ** (1 - th) * scale_norm(v, a1) ** th
    assert scale_norm(v, a) <= rhs * (1 + 1e-12) + 1e-300
