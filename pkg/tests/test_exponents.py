import json

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from memres.errors import DomainError
from memres.exponents import (
    hj_remark_threshold,
    hj_wellposed_params,
    ns_wellposed_params,
    rd_wellposed_params,
    subcritical_gap,
)

zetas = st.floats(1.0001, 3.0)


def test_subcritical_gap():
    assert subcritical_gap(1.5) == pytest.approx(1 / 3, rel=1e-15)
    assert subcritical_gap(2.0) == 0.5
    assert subcritical_gap(1 + 1e-12) == pytest.approx(0.0, abs=1e-11)
    for bad in (1.0, 0.5):
        with pytest.raises(DomainError):
            subcritical_gap(bad)


def test_rd_examples():
    p = rd_wellposed_params(3, 3.0, 2.0, 1.5)
    assert p.admissible
    assert (p.eps_lo, p.openness) == (0.0, "open/open")
    assert p.eps_hi == pytest.approx(1 / 3, rel=1e-15)
    assert p.gamma_slope == 2.0 and p.zeta_bound == pytest.approx(2.0)
    assert not rd_wellposed_params(1, 0.74, 2.0, 1.5).admissible
    # 1 < N zeta (rho-1)/2 = 0.75 fails
    assert not rd_wellposed_params(1, 2.0, 2.0, 1.5).admissible
    with pytest.raises(DomainError):
        rd_wellposed_params(3, 3.0, 1 + 2 * 3.0 / 3, 1.5)
    with pytest.raises(DomainError):
        rd_wellposed_params(3, 3.0, 1.0, 1.5)


def test_rd_json_shape():
    d = rd_wellposed_params(3, 3.0, 2.0, 1.5).to_dict()
    assert set(d) == {"application", "inputs", "admissible", "eps_window", "gamma_slope", "zeta_bound"}
    assert d["eps_window"][2] == "open/open"
    json.dumps(d)


def test_ns_examples():
    p = ns_wellposed_params(3, 2.0, 1.25)
    assert p.admissible and p.zeta_bound == pytest.approx(1.6)
    assert p.eps_lo == pytest.approx(0.05) and p.eps_hi == pytest.approx(0.175)
    assert p.openness == "closed/closed" and p.gamma_slope == 2.0
    assert not ns_wellposed_params(3, 2.0, 1.7).admissible
    for q in (3.0, 1.0):
        with pytest.raises(DomainError):
            ns_wellposed_params(3, q, 1.25)
    with pytest.raises(DomainError):
        ns_wellposed_params(2, 1.0, 1.25)


def test_ns_clipped_lower_end_is_open():
    p = ns_wellposed_params(3, 2.5, 1.5)
    # 1/1.5 - 3/5 > 0 stays closed; q = 1.2 makes it negative
    assert p.lo_closed
    c = ns_wellposed_params(3, 1.2, 1.1)
    assert c.eps_lo == 0.0 and not c.lo_closed and c.openness == "open/closed"


def test_hj_examples():
    p = hj_wellposed_params(1, 2.0, 1.0, 1.5, 1.3)
    assert p.inputs["chi"] == pytest.approx(1.25)
    assert p.zeta_bound == pytest.approx(1.6)
    q = hj_wellposed_params(1, 4.0, 0.0, 1.5, 1.2)
    assert hj_remark_threshold(1, 1.5, 1.2) == pytest.approx(3.0)
    assert q.admissible and q.openness == "open/open" and q.gamma_slope == 1.5
    chi = 1 + (1 - 0.0 + 1 / 4.0) * 0.5
    assert not hj_wellposed_params(1, 4.0, 0.0, 1.5, 2 / chi).admissible


def test_hj_domain():
    with pytest.raises(DomainError):
        hj_wellposed_params(1, 1.0, 1.0, 1.5, 1.2)
    with pytest.raises(DomainError):
        hj_wellposed_params(1, 2.0, 1.0, 2.5, 1.2)
    with pytest.raises(DomainError):
        hj_wellposed_params(1, 2.0, 1.5, 1.5, 1.2)
    with pytest.raises(DomainError):
        hj_wellposed_params(1, 2.0, -0.6, 1.5, 1.2)


@given(st.integers(1, 3), st.floats(1.1, 10.0), st.floats(0.01, 1.0), zetas)
def test_hj_remark_agrees_with_chi_form(N, p, frac, zeta):
    # at s = 0: zeta < 2/chi  <=>  p > N zeta (rho-1)/(2 - rho zeta)
    rho = 1 + frac * (min(p, 1 + p / N) - 1) * 0.999
    assume(rho > 1.0001)
    assume(1 - (1 / (rho - 1) - N / p) < 0)
    chi = 1 + (1 + N / p) * (rho - 1)
    assume(abs(zeta - 2 / chi) > 1e-9)
    assert (zeta < 2 / chi) == (p > hj_remark_threshold(N, rho, zeta))


def _rd_inputs():
    return st.tuples(st.integers(1, 4), st.floats(1.01, 8.0), st.floats(0.001, 0.999)).map(
        lambda t: (t[0], t[1], 1 + t[2] * 2 * t[1] / t[0])
    )


@given(_rd_inputs(), zetas)
def test_rd_gamma_in_subcritical_band(inp, zeta):
    N, q, rho = inp
    p = rd_wellposed_params(N, q, rho, zeta)
    assume(p.admissible)
    for t in (0.001, 0.5, 0.999):
        e = p.eps_lo + t * (p.eps_hi - p.eps_lo)
        assert 1 - 1 / zeta < p.gamma(e) < 1


@given(st.integers(3, 6), st.floats(0.01, 0.99), zetas)
def test_ns_gamma_in_subcritical_band(N, frac, zeta):
    q = N / 3 + frac * (N - N / 3)
    p = ns_wellposed_params(N, q, zeta)
    assume(p.admissible and p.eps_hi > 0)
    for t in (0.0, 0.5, 1.0):
        e = max(p.eps_lo + t * (p.eps_hi - p.eps_lo), 1e-12)
        if p.contains(e):
            assert 1 - 1 / zeta < p.gamma(e) < 1


@given(st.integers(1, 3), st.floats(1.1, 10.0), st.floats(0.01, 0.99), st.floats(0.0, 1.0), zetas)
def test_hj_gamma_in_subcritical_band(N, p, frac, s, zeta):
    rho = 1 + frac * (min(p, 1 + p / N) - 1)
    assume(rho > 1.0001 and 1 - (1 / (rho - 1) - N / p) < s)
    params = hj_wellposed_params(N, p, s, rho, zeta)
    assume(params.admissible)
    for t in (0.001, 0.5, 0.999):
        e = params.eps_lo + t * (params.eps_hi - params.eps_lo)
        assert 1 - 1 / zeta < params.gamma(e) < 1


@given(_rd_inputs(), zetas, zetas)
def test_rd_endpoints_monotone_in_zeta(inp, z1, z2):
    z1, z2 = sorted((z1, z2))
    a, b = rd_wellposed_params(*inp, z1), rd_wellposed_params(*inp, z2)
    assert b.eps_lo <= a.eps_lo and b.eps_hi <= a.eps_hi


@given(st.integers(3, 6), st.floats(0.01, 0.99), zetas, zetas)
def test_ns_window_shrinks_in_zeta(N, frac, z1, z2):
    q = N / 3 + frac * (N - N / 3)
    z1, z2 = sorted((z1, z2))
    a, b = ns_wellposed_params(N, q, z1), ns_wellposed_params(N, q, z2)
    assert b.eps_lo <= a.eps_lo and b.eps_hi <= a.eps_hi
    assert max(0.0, b.eps_hi - b.eps_lo) <= max(0.0, a.eps_hi - a.eps_lo) + 1e-15


@given(st.integers(1, 3), st.floats(1.1, 10.0), st.floats(0.01, 0.99), st.floats(0.0, 1.0), zetas, zetas)
def test_hj_window_shrinks_in_zeta(N, p, frac, s, z1, z2):
    rho = 1 + frac * (min(p, 1 + p / N) - 1)
    assume(rho > 1.0001 and 1 - (1 / (rho - 1) - N / p) < s)
    z1, z2 = sorted((z1, z2))
    a, b = hj_wellposed_params(N, p, s, rho, z1), hj_wellposed_params(N, p, s, rho, z2)
    assert b.eps_lo == a.eps_lo and b.eps_hi <= a.eps_hi


def test_windows_degenerate_at_zeta_bound():
    ns = ns_wellposed_params(3, 2.0, 1.6 - 1e-12)
    assert ns.eps_hi == pytest.approx(0.0, abs=1e-11)
    chi = 1.25
    hj = hj_wellposed_params(1, 2.0, 1.0, 1.5, 2 / chi)
    assert hj.eps_hi == pytest.approx(hj.eps_lo, abs=1e-15) and not hj.nonempty


@given(_rd_inputs())
def test_rd_semigroup_limit(inp):
    N, q, rho = inp
    p = rd_wellposed_params(N, q, rho, 1 + 1e-12)
    bc = N * (rho - 1) / 2
    assert p.zeta_bound == pytest.approx(2 * q / (N * (rho - 1)))
    # N zeta (rho-1)/2 -> N (rho-1)/2, which is < q inside the rho range
    assert bc < q
    if p.admissible:
        assert bc > 1 - 1e-9
    if bc > 1 + 1e-6 and p.nonempty:
        assert p.admissible


def test_semigroup_limit_threshold_value():
    # N = 3, rho = 3 gives N (rho-1)/2 = 3; with q just above it the zeta range closes at 1
    p = rd_wellposed_params(3, 3.0 + 1e-9, 3.0, 1 + 1e-12)
    assert p.zeta_bound == pytest.approx(1.0, abs=1e-8)
    assert p.admissible
    assert not rd_wellposed_params(3, 3.0 + 1e-9, 3.0, 1.01).admissible
