import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from vlasov_spray.blowup import (
    HORIZON_TOL,
    BlowupReport,
    GronwallInput,
    blowup_certify,
    bounding_curves,
    constant_C0,
    constant_C3,
    constant_c_mu,
    constants_C1_C2,
    find_horizon,
    gronwall_bound,
    horizon_gap,
)
from vlasov_spray.diagnostics import FunctionalRecord
from vlasov_spray.errors import DomainError
from vlasov_spray.params import ModelParams

mp.mp.dps = 50


# 50-digit reference formulas -------------------------------------------------------------

def mp_C0(m, g):
    m, g = mp.mpf(m), mp.mpf(g)
    ball = mp.pi ** mp.mpf(1.5) / mp.gamma(mp.mpf(5) / 2)
    k = (5 * g - 3) / 2
    return ball ** (1 - g) * m**k / (2**k * (g - 1))


def mp_c_mu(m, E0, g, d):
    m, E0, g, d = map(mp.mpf, (m, E0, g, d))
    return m ** ((g - d) / (g - 1)) * (g - 1) ** ((d - 1) / (g - 1)) * E0 ** ((d - 1) / (g - 1))


def mp_C1_C2(W0, E0, m, g, d, alpha, beta):
    c_mu = mp_c_mu(m, E0, g, d)
    c1 = mp.mpf(W0) + (2 * mp.mpf(alpha) + 3 * mp.mpf(beta)) / (mp.mpf(d) - 1) * c_mu
    c2 = max(mp.mpf(2), 3 * (mp.mpf(g) - 1)) * mp.mpf(E0) / 2
    return c1, c2


def mp_C3(J0, m, g, d, alpha, beta):
    J0, m, g, d = map(mp.mpf, (J0, m, g, d))
    coeff = 2 * mp.mpf(alpha) + 9 * mp.mpf(beta)
    q = (g - d) / (g - 1)
    inner = J0**q + coeff * m**q * (g - 1) ** ((d - g) / (g - 1)) * (g - d) / (4 * (1 - 3 * (g - d)))
    return inner ** (1 / q)


def rel(a, b):
    b = mp.mpf(b)
    return float(abs(mp.mpf(a) - b) / abs(b)) if b != 0 else float(abs(mp.mpf(a)))


def random_window_params(rng):
    g = rng.uniform(1.05, 1.64)
    lo = max(g - 1.0 / 3.0, 1.0)
    d = rng.uniform(lo + 1e-3 * (g - lo), g - 1e-3 * (g - lo))
    alpha = rng.uniform(0.01, 2.0)
    beta = rng.uniform(-2.0 * alpha / 9.0, alpha)
    return ModelParams(g, d, 2.0, alpha, beta, 0.0, dim=3, strict_admissibility=False)


# constants --------------------------------------------------------------------------------

def test_C0_reference_value():
    # (4 pi / 3)^(-0.4) * 2^2 / (2^2 * 0.4)
    expected = (4.0 * math.pi / 3.0) ** -0.4 * 2.5
    assert constant_C0(2.0, 1.4) == pytest.approx(expected, rel=1e-14)
    assert constant_C0(2.0, 1.4) == pytest.approx(1.409628, abs=5e-7)
    assert rel(constant_C0(2.0, 1.4), mp_C0(2, 1.4)) < 1e-14


def test_C0_mass_scaling_at_gamma_7_5():
    assert constant_C0(2.0, 1.4) * 4.0 == pytest.approx(constant_C0(4.0, 1.4), rel=1e-14)


def test_C0_rejects_gamma_near_one():
    with pytest.raises(DomainError):
        constant_C0(1.0, 1.0 + 1e-10)
    with pytest.raises(DomainError):
        constant_C0(1.0, 0.9)


def test_c_mu_examples():
    assert constant_c_mu(1.0, 1.0, 1.4, 1.2) == pytest.approx(math.sqrt(0.4), rel=1e-15)
    assert constant_c_mu(3.0, 0.0, 1.4, 1.2) == 0.0
    # exponent limit delta -> gamma: c_mu -> (gamma - 1) E0
    assert constant_c_mu(2.5, 0.7, 1.4, 1.4 - 1e-9) == pytest.approx(0.4 * 0.7, rel=1e-7)
    with pytest.raises(DomainError):
        constant_c_mu(1.0, 1.0, 1.4, 1.4)


def test_C2_is_E0_inside_window():
    p = ModelParams(1.4, 1.2, 2.0, 0.1, 0.0, dim=3)
    assert constants_C1_C2(0.3, 1.0, 1.0, p)[1] == 1.0
    p = ModelParams(1.6, 1.3, 2.0, 0.1, 0.0, dim=3)
    assert constants_C1_C2(0.3, 1.0, 1.0, p)[1] == 1.0


def test_C1_equals_W0_without_viscous_coefficient():
    p = ModelParams(1.4, 1.2, 2.0, 0.75, -0.5, dim=3)
    assert constants_C1_C2(-0.37, 2.0, 1.5, p)[0] == -0.37


def test_C3_reference_value():
    p = ModelParams(1.4, 1.2, 2.0, 1.0, 0.0, dim=3)
    c3 = constant_C3(1.0, 1.0, p)
    assert c3 == pytest.approx(1.946819, abs=5e-7)
    assert rel(c3, mp_C3(1, 1, 1.4, 1.2, 1.0, 0.0)) < 1e-14


def test_C3_reduces_to_J0():
    p = ModelParams(1.4, 1.2, 2.0, 0.9, -0.2, dim=3)
    for j0 in (0.0, 1e-7, 0.37, 12.5):
        assert constant_C3(j0, 2.0, p) == j0


def test_C3_negative_inner_sum():
    p = ModelParams(1.4, 1.2, 2.0, 0.9, -0.3, dim=3)
    with pytest.raises(DomainError, match="C3 undefined"):
        constant_C3(0.0, 1.0, p)


def test_constants_match_50_digit_oracle_on_sweep():
    rng = np.random.default_rng(20240607)
    worst = 0.0
    for _ in range(50):
        p = random_window_params(rng)
        m = 10 ** rng.uniform(-2, 2)
        E0 = 10 ** rng.uniform(-2, 2)
        W0 = rng.uniform(-1, 1) * E0
        J0 = 10 ** rng.uniform(-2, 2)
        g, d = p.gamma, p.delta
        c1, c2 = constants_C1_C2(W0, E0, m, p)
        o1, o2 = mp_C1_C2(W0, E0, m, g, d, p.alpha, p.beta)
        errs = [rel(constant_C0(m, g), mp_C0(m, g)), rel(constant_c_mu(m, E0, g, d), mp_c_mu(m, E0, g, d)),
                rel(c2, o2), rel(constant_C3(J0, m, p), mp_C3(J0, m, g, d, p.alpha, p.beta))]
        # C1 is a sum that may cancel; compare against the size of its terms
        scale = abs(mp.mpf(W0)) + abs(o1 - mp.mpf(W0))
        errs.append(float(abs(mp.mpf(c1) - o1) / scale))
        worst = max(worst, *errs)
    assert worst < 1e-12


# Gronwall bound ---------------------------------------------------------------------------

def saturated_solution(inp, t_end=10.0):
    a, b, c = inp.a, inp.b, inp.c

    def rhs(t, y):
        return [a * y[0] / (t + 1.0) + b * max(y[0], 0.0) ** c / (t + 1.0) ** (2.0 * c)]

    ts = np.linspace(0.0, t_end, 201)
    sol = solve_ivp(rhs, (0.0, t_end), [inp.f0], method="DOP853", t_eval=ts, rtol=1e-12, atol=1e-14)
    assert sol.success
    return ts, sol.y[0]


def gronwall_cases(rng, case, n=20):
    out = []
    while len(out) < n:
        f0 = 10 ** rng.uniform(-1, 1)
        b = rng.uniform(0.05, 2.0)
        if case == 1:
            inp = GronwallInput(rng.uniform(0.05, 2.0), b, 1.0, f0)
        elif case == 2:
            c = rng.uniform(0.05, 0.45)
            inp = GronwallInput((1.0 - 2.0 * c) / (1.0 - c), b, c, f0)
        else:
            inp = GronwallInput(rng.uniform(0.05, 2.0), b, rng.uniform(0.05, 0.95), f0)
            if abs(2 * inp.c + inp.a * (1 - inp.c) - 1) < 1e-3:
                continue
        assert inp.case() == case
        out.append(inp)
    return out


@pytest.mark.parametrize("case", [1, 2, 3])
def test_gronwall_dominates_ode_solution(case):
    rng = np.random.default_rng(case)
    for inp in gronwall_cases(rng, case):
        ts, ys = saturated_solution(inp)
        bound = np.array([gronwall_bound(inp, t) for t in ts])
        assert np.all(ys <= bound * (1.0 + 1e-9) + 1e-300)


def test_gronwall_literal_c1_example():
    inp = GronwallInput(1.0, 0.5, 1.0, 1.0)
    assert gronwall_bound(inp, 1.0, sharp=False) == pytest.approx(2.0 * math.exp(0.5), rel=1e-15)
    assert gronwall_bound(inp, 1.0, sharp=False) == pytest.approx(3.297443, abs=5e-7)
    assert gronwall_bound(inp, 1.0) <= gronwall_bound(inp, 1.0, sharp=False)


@pytest.mark.parametrize("inp", [GronwallInput(1.3, 0.4, 1.0, 2.5), GronwallInput(0.5, 0.4, 1.0 / 3.0, 2.5),
                                 GronwallInput(0.7, 1.1, 0.6, 0.3)])
def test_gronwall_at_t0_is_f0(inp):
    assert gronwall_bound(inp, 0.0) == pytest.approx(inp.f0, rel=1e-15)


def test_gronwall_continuous_at_c_equal_one():
    a, b, f0 = 0.8, 0.6, 1.7
    for t in (0.5, 3.0, 10.0):
        near = gronwall_bound(GronwallInput(a, b, 1.0 - 1e-8, f0), t)
        at = gronwall_bound(GronwallInput(a, b, 1.0, f0), t)
        assert abs(near - at) <= 1e-6 * at


def test_gronwall_rejects_c_above_one():
    with pytest.raises(DomainError):
        GronwallInput(1.0, 1.0, 1.5, 1.0)


# certificate and horizon ------------------------------------------------------------------

def record(m=1.0, I=1.0, W=0.0, E_k=0.0, E_i=1.0):
    return FunctionalRecord(0.0, m, 0.0, np.zeros(3), np.zeros(3), W, 0.0, I, 0.0, E_k, E_i, 0.0, 0.0,
                            I - W + E_k + E_i)


def test_window_violation_gives_no_predicates():
    p = ModelParams(1.8, 1.3, 2.0, 0.1, 0.0, dim=3, strict_admissibility=False)
    rep = blowup_certify(record(), p)
    assert not rep.window_ok
    assert rep.predicate_paper is None and rep.predicate_asymptotic is None and rep.horizon is None


def test_reduced_condition_sets_predicate():
    p = ModelParams(1.4, 1.2, 2.0, 0.9, -0.2, dim=3)
    m = 1.0
    c0 = constant_C0(m, 1.4)
    # E0 and J0 chosen so that C2 * J0 = E0 * J0 is below C0
    rep = blowup_certify(record(m=m, I=0.05, E_i=0.05), p)
    assert rep.C3 == rep.J0
    assert rep.C2 * rep.J0 < c0
    assert rep.predicate_paper


def test_negative_J0_is_flagged():
    p = ModelParams(1.4, 1.2, 2.0, 0.1, 0.0, dim=3)
    rep = blowup_certify(record(I=1.0, W=5.0, E_i=1.0), p)
    assert not rep.j0_consistent
    assert rep.C3 is None


def synthetic_report(C0, C1, C2, C3, I0, gamma=1.4):
    rep = BlowupReport(gamma, 1.2, True, 1.0, I0, 0.0, C2, C3, C0=C0, C1=C1, C2=C2, C3=C3)
    rep.horizon = find_horizon(C0, C1, C2, C3, I0, gamma)
    return rep


@pytest.mark.parametrize("consts", [(0.9, -0.5, 0.2, 1.0, 1.0), (0.3, 0.1, 0.05, 1.0, 2.0),
                                    (2.5, -3.0, 1.5, 2.0, 2.0)])
def test_horizon_matches_independent_root_finder(consts):
    C0, C1, C2, C3, I0 = consts
    rep = synthetic_report(C0, C1, C2, C3, I0)
    assert rep.horizon is not None and rep.horizon > 0.0

    def g(t):
        return horizon_gap(t, C0, C1, C2, C3, I0, 1.4)

    # first sign change by a fine independent scan, then Brent's method
    ts = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, 20001)])
    k = int(np.argmax([g(t) > 0.0 for t in ts]))
    root = brentq(g, ts[k - 1], ts[k], xtol=1e-14, rtol=1e-15)
    assert abs(rep.horizon - root) <= 1e-8 * max(1.0, root)
    eps = HORIZON_TOL * max(1.0, rep.horizon)
    assert g(rep.horizon - eps) <= 0.0 <= g(rep.horizon + eps)
    lower, upper = bounding_curves(rep, 1.4, rep.horizon)
    assert abs(lower - upper) <= 1e-8 * upper


def test_bounding_curves_endpoints_and_monotone():
    rep = synthetic_report(0.4, 0.3, 0.2, 1.1, 0.9)
    lo0, up0 = bounding_curves(rep, 1.4, 0.0)
    assert lo0 == pytest.approx(0.4 / 0.9**0.6, rel=1e-15)
    assert up0 == 1.1
    lows = [bounding_curves(rep, 1.4, t)[0] for t in np.linspace(0, 20, 50)]
    assert all(b < a for a, b in zip(lows, lows[1:]))


def test_no_horizon_when_curves_never_cross():
    assert find_horizon(0.01, 1.0, 1.0, 1.0, 1.0, 1.4) is None


@settings(max_examples=15, deadline=None)
@given(nxi=st.integers(1, 3), xi_extent=st.floats(0.2, 5.0))
def test_predicate_invariant_under_velocity_grid_relabelling(nxi, xi_extent):
    # with f = 0 the velocity grid is pure metadata: functionals and verdict are unchanged
    from vlasov_spray.diagnostics import functionals
    from vlasov_spray.grid import PhaseGrid
    from vlasov_spray.presets import make_preset

    p = ModelParams(1.4, 1.2, 2.0, 0.09, -0.02, dim=3)
    reports = []
    for n, e in ((2, 1.0), (nxi, xi_extent)):
        grid = PhaseGrid(3, 12, n, 3.0, e)
        fluid, kin = make_preset("blowup_candidate", grid, p, {"mass": 0.02, "width": 0.4})
        reports.append(blowup_certify(functionals(fluid, kin, grid, p, 0.0, with_dissipation=False), p))
    a, b = reports
    assert a.predicate_paper == b.predicate_paper
    assert (a.C0, a.C1, a.C2, a.C3) == (b.C0, b.C1, b.C2, b.C3)
