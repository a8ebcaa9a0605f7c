import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memres.errors import DomainError, PreconditionError, RegimeError, SamplingError
from memres.kernel import MaterialKernel
from memres.mild import (
    MildProblem,
    NonlinearitySpec,
    WellPosednessBudget,
    certified_existence_time,
    continue_mild,
    eps_regular_profile,
    lipschitz_dependence,
    probe_time,
    solve_mild,
)
from memres.resolvent import estimate_constants, mode_tables
from memres.spectral import ScaleVector, build_operator

OP = build_operator(dimension=1, lengths=1.0, n_modes=32)
HOOK = MaterialKernel.hookean()
POWER = MaterialKernel.power(0.5)
RD = NonlinearitySpec("power", 1.0, 2.0)


def smooth_datum(op=OP, seed=1):
    rng = np.random.default_rng(seed)
    return ScaleVector(rng.standard_normal(op.shape) / (1 + op.eigenvalues), op)


def test_problem_validation():
    with pytest.raises(DomainError):
        MildProblem(OP, POWER, OP.unit(1), RD, T=1.0, h=0.3)
    with pytest.raises(DomainError):
        MildProblem(OP, POWER, build_operator(n_modes=16).unit(1), RD, T=1.0, h=0.1)
    with pytest.raises(DomainError):
        MildProblem(OP, POWER, OP.unit(1), RD, T=1.0, h=0.1, blowup_threshold=0.0)
    with pytest.raises(DomainError):
        NonlinearitySpec("power", 1.0, 1.0)
    with pytest.raises(DomainError):
        NonlinearitySpec("forced-linear")
    with pytest.raises(DomainError):
        NonlinearitySpec("cubic")


def test_zero_nonlinearity_is_resolvent_action():
    u0 = smooth_datum()
    sol = solve_mild(MildProblem(OP, POWER, u0, NonlinearitySpec("zero"), T=0.5, h=1e-2))
    assert sol.status == "completed"
    assert np.array_equal(sol.states[0], u0.coefficients)
    tabs = mode_tables(OP, POWER, sol.times)
    expected = (tabs.values * u0.coefficients[:, None]).T
    assert np.max(np.abs(sol.states - expected)) <= 1e-12


def test_forced_linear_closed_form():
    for h in (2e-2, 1e-2):
        nl = NonlinearitySpec("forced-linear", forcing=OP.unit(1))
        sol = solve_mild(MildProblem(OP, HOOK, OP.unit(1) * 0.3, nl, T=1.0, h=h))
        exact = 0.3 * np.cos(math.pi * sol.times) + np.sin(math.pi * sol.times) / math.pi
        assert np.max(np.abs(sol.states[:, 0] - exact)) <= 5 * h * h
        assert np.max(np.abs(sol.states[:, 1:])) == 0.0


def test_forced_linear_time_dependent_forcing():
    # f(t) = t e_1 with Hookean kernel: u_1 = (1 - cos(pi t))/pi^2
    nl = NonlinearitySpec("forced-linear", forcing=lambda t: t * OP.unit(1).coefficients)
    h = 1e-2
    sol = solve_mild(MildProblem(OP, HOOK, OP.zeros(), nl, T=1.0, h=h))
    exact = (1 - np.cos(math.pi * sol.times)) / math.pi**2
    assert np.max(np.abs(sol.states[:, 0] - exact)) <= 5 * h * h


def test_power_nonlinearity_order_and_uniqueness_surrogate():
    runs = []
    for h in (2e-2, 1e-2, 5e-3):
        sol = solve_mild(MildProblem(OP, POWER, OP.unit(1), RD, T=0.5, h=h))
        assert sol.status == "completed"
        runs.append(sol.states[:: int(round(2e-2 / h))])
    d1, d2 = np.max(np.abs(runs[0] - runs[1])), np.max(np.abs(runs[1] - runs[2]))
    assert d2 < d1
    assert math.log2(d1 / d2) >= 1.8


def test_gradient_nonlinearity_runs():
    nl = NonlinearitySpec("gradient", 0.5, 1.5)
    sol = solve_mild(MildProblem(OP, POWER, OP.unit(1) * 0.5, nl, T=0.2, h=1e-2))
    assert sol.status == "completed"
    assert np.all(np.isfinite(sol.norms(1.2)))
    # |grad u|^rho >= 0 with c0 > 0 pushes the first mode above the linear run
    lin = solve_mild(MildProblem(OP, POWER, OP.unit(1) * 0.5, NonlinearitySpec("zero"), T=0.2, h=1e-2))
    assert sol.states[-1, 0] > lin.states[-1, 0]


def test_gradient_nonlinearity_2d():
    op = build_operator(dimension=2, lengths=(1.0, 1.0), n_modes=(8, 8))
    sol = solve_mild(MildProblem(op, POWER, op.unit(1, 1) * 0.5, NonlinearitySpec("gradient", 0.5, 1.5), T=0.05, h=1e-2))
    assert sol.status == "completed" and sol.states.shape == (6, 8, 8)


def test_blowup_and_small_amplitude():
    taus = []
    for h in (1e-3, 5e-4):
        sol = solve_mild(MildProblem(OP, POWER, OP.unit(1) * 50.0, RD, T=1.0, h=h))
        assert sol.status == "blowup"
        tracked = sol.norms(1.0 + sol.eps)
        assert np.all(np.diff(tracked[-6:]) > 0)
        assert sol.tau_estimate is not None and math.isfinite(sol.tau_estimate)
        taus.append(sol.tau_estimate)
    assert abs(taus[1] - taus[0]) / taus[0] < 0.05
    small = solve_mild(MildProblem(OP, POWER, OP.unit(1) * 0.01, RD, T=1.0, h=1e-2))
    assert small.status == "completed" and small.times[-1] == pytest.approx(1.0)


def test_continuation_bitwise():
    for nl in (NonlinearitySpec("zero"), RD):
        p = MildProblem(OP, POWER, OP.unit(1) + OP.unit(3) * 0.2, nl, T=0.5, h=1e-2)
        a = solve_mild(p)
        b = continue_mild(a, p, 1.0)
        direct = solve_mild(p.with_(T=1.0))
        assert np.array_equal(b.states[: a.times.size], a.states)
        assert np.max(np.abs(b.states - direct.states)) <= 1e-10


def test_continuation_requires_completed():
    p = MildProblem(OP, POWER, OP.unit(1) * 50.0, RD, T=0.1, h=1e-3)
    sol = solve_mild(p)
    assert sol.status == "blowup"
    with pytest.raises(PreconditionError):
        continue_mild(sol, p, 0.2)


def test_solution_exports():
    sol = solve_mild(MildProblem(OP, POWER, OP.unit(1), RD, T=0.1, h=2e-2))
    lines = sol.to_csv().splitlines()
    assert lines[0] == "# schema=1"
    assert lines[1] == "t,norm_X1,norm_X1pe,weighted_profile,status"
    assert len(lines) == 2 + 6
    dump = sol.coefficient_dump()
    assert dump.dtype == np.dtype("<f8") and dump.shape == (32, 6)
    assert np.array_equal(dump[:, 3], sol.states[3])
    assert dump.flags["C_CONTIGUOUS"]


def test_eps_profile_requires_subgrid():
    sol = solve_mild(MildProblem(OP, POWER, OP.unit(1), NonlinearitySpec("zero"), T=0.1, h=1e-2))
    with pytest.raises(SamplingError):
        eps_regular_profile(sol, 0.2, 1.5)


def test_eps_profile_single_mode():
    p = MildProblem(OP, POWER, OP.unit(1), NonlinearitySpec("zero"), T=1.0, h=1e-2, small_t=True)
    prof = eps_regular_profile(solve_mild(p), 0.2, 1.5)
    assert prof.passed
    assert prof.times[0] == pytest.approx(1e-8)
    # bounded norm times vanishing weight
    np.testing.assert_allclose(prof.values[:5] / prof.times[:5] ** 0.3, (1 + math.pi**2) ** 0.2, rtol=1e-3)


def test_eps_profile_zero_eps_is_x1_history():
    sol = solve_mild(MildProblem(OP, POWER, smooth_datum(), NonlinearitySpec("zero"), T=0.2, h=1e-2, small_t=True))
    prof = eps_regular_profile(sol, 0.0, 1.5)
    np.testing.assert_allclose(prof.values[-sol.times.size + 1 :], sol.norms(1.0)[1:], rtol=1e-14)


def rough_datum(op, eps):
    # coefficients (1+mu)^(-p) lie in X_{1+s} iff s < p - 1/4; put s0 = 0.9 eps
    return ScaleVector((1 + op.eigenvalues) ** (-0.25 - 0.9 * eps), op)


@pytest.mark.parametrize("nl", [NonlinearitySpec("zero"), RD], ids=["zero", "power"])
def test_eps_profile_rough_datum(nl):
    op = build_operator(n_modes=128)
    u0 = rough_datum(op, 0.2)
    p = MildProblem(op, POWER, u0, nl, T=1.0, h=1e-2, small_t=True, eps=0.2)
    sol = solve_mild(p)
    assert sol.status == "completed"
    prof = eps_regular_profile(sol, 0.2, 1.5)
    assert prof.passed, prof.ratio


@pytest.mark.xfail(strict=True, reason="at depth 1e-5 T the weight t^0.3 alone only falls to 0.063 of its t=0.1T value")
def test_eps_profile_at_depth_1e_5():
    op = build_operator(n_modes=128)
    p = MildProblem(op, POWER, rough_datum(op, 0.2), NonlinearitySpec("zero"), T=1.0, h=1e-2, small_t=True,
                    small_t_depth=1e-5)
    assert eps_regular_profile(solve_mild(p), 0.2, 1.5).passed


def test_lipschitz_linear_bounded_by_M():
    p = MildProblem(OP, POWER, OP.unit(1), NonlinearitySpec("zero"), T=1.0, h=1e-2)
    res = lipschitz_dependence(p, smooth_datum(seed=2), smooth_datum(seed=3), 0.0, 1.5)
    M = estimate_constants(OP, POWER).M
    assert res["ratio_max"] <= M * (1 + 1e-9)
    assert res["warning"] is False


def test_lipschitz_stabilises_in_delta():
    p = MildProblem(OP, POWER, OP.unit(1), RD, T=0.3, h=1e-2)
    u0 = OP.unit(1)
    ratios = [lipschitz_dependence(p, u0, u0 + OP.unit(1) * d, 0.1, 1.5)["ratio_max"] for d in (1e-2, 1e-3, 1e-4)]
    assert max(ratios) / min(ratios) < 1.1


def test_lipschitz_warning_outside_window():
    p = MildProblem(OP, POWER, OP.unit(1), NonlinearitySpec("zero"), T=0.1, h=1e-2)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        res = lipschitz_dependence(p, OP.unit(1), OP.unit(2), 0.5, 1.5, gamma_eps=0.6)
    assert res["warning"] is True and math.isfinite(res["ratio_max"])
    with pytest.raises(DomainError):
        lipschitz_dependence(p, OP.unit(1), OP.unit(1), 0.0, 1.5)


def test_certified_existence_example():
    b = WellPosednessBudget(M=1, c=1, rho=2, gamma0=0.8, zeta_g=1.5, x0_norm=1, mu=1)
    out = certified_existence_time(b)
    assert out["R"] == 5.0 and out["r"] == 0.5
    assert out["tau"] == pytest.approx(0.035 ** (1 / 0.7), rel=1e-12)
    assert out["tau"] == pytest.approx(8.3e-3, abs=5e-5)
    assert certified_existence_time(b, tau_probe=1e-3)["tau"] == 1e-3


def test_certified_critical_regime():
    with pytest.raises(RegimeError):
        certified_existence_time(WellPosednessBudget(1, 1, 2, 1 - 1 / 1.5, 1.5, 1, 1))


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_certified_monotone_in_mu(m1, m2):
    lo, hi = sorted((m1, m2))
    a = certified_existence_time(WellPosednessBudget(1, 1, 2, 0.8, 1.5, 1, lo))
    b = certified_existence_time(WellPosednessBudget(1, 1, 2, 0.8, 1.5, 1, hi))
    assert a["tau"] <= b["tau"] and a["r"] <= b["r"]


def test_probe_time():
    t = probe_time(OP, POWER, OP.unit(1), 1.0)
    assert 0 < t < 1
    times = np.geomspace(1e-8, t, 20)
    s = mode_tables(OP, POWER, times).values[0]
    assert np.all(np.abs(s - 1) <= 0.25)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 3.0))
def test_zero_forcing_linear_in_datum(seed, scale):
    u0 = smooth_datum(seed=seed)
    p = MildProblem(OP, POWER, u0, NonlinearitySpec("zero"), T=0.1, h=2e-2)
    a = solve_mild(p).states
    b = solve_mild(p.with_(u0=u0 * scale)).states
    np.testing.assert_allclose(b, scale * a, rtol=1e-12, atol=1e-15)
