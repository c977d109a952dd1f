import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import lattice_model, rd_model
from semiwave import gmap as gm
from semiwave import model as mdl
from semiwave import profile as pf
from semiwave import speeds as sp
from semiwave.errors import DichotomyViolation, GapSpeed, WindowTooShort

PROPS = settings(max_examples=8, deadline=None)


def solved(model, c, T=100.0, dx=0.1, tol=1e-6):
    system = mdl.reduce_lattice(model, c) if isinstance(model, mdl.LatticeModel) else mdl.reduce(model, c)
    G = gm.build_G(system)
    prof = pf.solve(system, pf.SolveOptions(T=T, dx=dx, tol=tol), G)
    return system, G, prof


def crossing(prof, level):
    """Interpolated first crossing of ``level`` from the vanishing side."""
    t, v = prof.t, prof.values
    i = int(np.flatnonzero(v >= level)[0])
    return t[i - 1] + (level - v[i - 1]) / (v[i] - v[i - 1]) * (t[i] - t[i - 1])


# -- sub- and super-solutions ------------------------------------------------

def linearized_by_quadrature(system, rule, t):
    """``sum_tau g'(0, tau) int K(s, tau) rule(t - s) ds`` from the atom densities."""
    total = 0.0
    for atom in system.atoms:
        dens = atom.kernel.density
        lo, hi = atom.kernel.extent(1e-14)
        f = lambda s: float(dens(s)) * rule(t - s)
        pts = [p for p in (0.0, t, -system.c * 2.0) if lo < p < hi]
        total += atom.weight * atom.slope0 * integrate.quad(f, lo, hi, points=pts or None,
                                                            epsabs=1e-15, epsrel=1e-11, limit=400)[0]
    return total


def test_linearization_reproduces_super_solution(monotone_solution):
    system, G, prof = monotone_solution
    ss = prof.sub_super
    for t in np.linspace(-10, 3, 10):
        Lp = linearized_by_quadrature(system, lambda x: float(ss.phi_plus(x)), t)
        assert Lp == pytest.approx(float(ss.phi_plus(t)), rel=1e-8)


def test_linearization_lifts_sub_solution(monotone_solution):
    system, G, prof = monotone_solution
    ss = prof.sub_super
    assert ss.nu is not None and ss.epsilon > 0
    assert float(system.chi(ss.nu)) > 0
    for t in np.linspace(-12, 2, 10):
        Lm = linearized_by_quadrature(system, lambda x: float(ss.phi_minus(x)), t)
        assert Lm > float(ss.phi_minus(t))


def test_grid_linearization_reproduces_super_solution(monotone_solution):
    system, G, prof = monotone_solution
    ss = prof.sub_super
    op = pf.Operator(system, prof.dx)
    lam = prof.diagnostics["lambda_grid"]
    assert lam == pytest.approx(ss.lam, rel=1e-3)
    t = prof.dx * np.arange(-400, 401)
    u = 1e-3 * np.exp(lam * t)
    Lu = op.L(u, lam, right_rate=lam)
    assert np.max(np.abs(Lu / u - 1)) <= 1e-10


def test_sub_super_gap_speed():
    with pytest.raises(GapSpeed):
        pf.sub_super(mdl.reduce(rd_model(), 0.2))


# -- operator A ----------------------------------------------------------------

def test_apply_A_constant_equilibrium(monotone_solution):
    system, G, prof = monotone_solution
    # lambda = 0 continues the constant flatly on both sides
    out = pf.apply_A(system, np.full(801, G.kappa), 0.0, 0.05)
    assert np.max(np.abs(out - G.kappa)) <= 1e-8


def test_apply_A_zero(monotone_solution):
    system, _, prof = monotone_solution
    out = pf.apply_A(system, np.zeros(501), prof.lam, 0.05)
    assert np.all(out == 0.0)


def test_apply_A_below_super_solution(monotone_solution):
    system, _, prof = monotone_solution
    dx = 0.05
    t = dx * np.arange(-600, 601)
    phi_plus = prof.sub_super.phi_plus(t)
    u = np.minimum(phi_plus, system.zeta2)
    out = pf.apply_A(system, u, prof.lam, dx)
    assert np.all(out <= phi_plus * (1 + 1e-6) + 1e-12)


# -- solver ----------------------------------------------------------------------

def test_monotone_wavefront(monotone_solution, monotone_model):
    system, G, prof = monotone_solution
    assert prof.residual <= 1e-6
    assert pf.classify(prof, G) == "wavefront"
    assert G.kappa == pytest.approx(1.0, abs=1e-12)
    _, right = pf.terminal_windows(prof)
    assert np.max(np.abs(prof.values[right] - 1.0)) <= 1e-3
    assert prof.values.max() <= system.zeta2
    assert prof.values.min() >= 0
    assert prof.values.max() <= pf.sup_bound(system, G) + 1e-8
    lam1 = sp.lambda_leftmost(monotone_model, system.c)
    assert pf.decay_rate(prof) == pytest.approx(lam1, rel=0.02)


def test_phase_normalization(monotone_solution):
    _, G, prof = monotone_solution
    assert abs(crossing(prof, 0.5 * G.zeta1)) <= prof.dx


def test_gap_speed_rejected():
    system = mdl.reduce(rd_model(p=math.e), 0.5)
    with pytest.raises(GapSpeed):
        pf.solve(system)


def test_negative_speed_reflects():
    model = rd_model(p=math.e)
    cs = sp.critical_speeds(model)
    system, G, prof = solved(model, cs.c_minus - 1.0)
    assert prof.reflected and prof.vanishing_side == 1
    assert pf.classify(prof, G) == "wavefront"
    assert pf.decay_rate(prof) == pytest.approx(sp.lambda_leftmost(model, cs.c_minus - 1.0), rel=0.02)


def test_reflection_symmetry():
    c = 3.0
    _, _, a = solved(rd_model(p=math.e, rho=1.0), c, T=200, tol=1e-10)
    _, _, b = solved(rd_model(p=math.e, rho=-1.0), -c, T=200, tol=1e-10)
    assert np.allclose(a.t, -b.t[::-1])
    assert np.max(np.abs(a.values - b.values[::-1])) <= 1e-6


def test_non_attracting_equilibrium_gives_semi_wavefront():
    # ln(p / delta) = 2.2: G has a 2-cycle and the right end oscillates
    model = rd_model(p=math.exp(2.2))
    system, G, prof = solved(model, 8.0, T=200, dx=0.05)
    assert G.attractivity == gm.NOT_ATTRACTING
    assert pf.classify(prof, G) == "semi_wavefront"
    m_, M_ = prof.diagnostics["persistent_range"]
    assert m_ > G.zeta1
    assert M_ - m_ > 1e-2
    ok, _ = pf.containment(prof, G)
    assert ok


def test_decay_at_critical_speed(sym_speeds):
    model = rd_model()
    system, G, prof = solved(model, sym_speeds.c_plus, T=200, dx=0.05, tol=1e-4)
    assert prof.sub_super.degenerate
    assert pf.decay_rate(prof) == pytest.approx(sym_speeds.tangent_lambda_plus, rel=0.10)


def test_constant_profile_has_no_decay_window(monotone_solution):
    _, G, prof = monotone_solution
    flat = pf.WaveProfile(prof.t, np.full_like(prof.values, G.kappa), prof.c, prof.lam, 0.0,
                          prof.zeta1, prof.zeta2, prof.window)
    with pytest.raises(WindowTooShort):
        pf.decay_rate(flat)


def test_truncated_grid_violates_dichotomy(monotone_solution):
    _, G, prof = monotone_solution
    # keep only the part left of t = 3, re-centred: the right end never reaches the plateau
    values = prof.values[prof.t <= 3.0]
    n = len(values) // 2
    values = values[-(2 * n + 1):]
    t = prof.dx * np.arange(-n, n + 1)
    cut = pf.WaveProfile(t, values, prof.c, prof.lam, prof.residual, prof.zeta1, prof.zeta2, 2.0)
    with pytest.raises(DichotomyViolation):
        pf.classify(cut, G)


def test_pulse_shape_is_rejected(monotone_solution):
    _, G, prof = monotone_solution
    v = np.exp(-prof.t ** 2)
    pulse = pf.WaveProfile(prof.t, v, prof.c, prof.lam, 0.0, prof.zeta1, prof.zeta2, prof.window)
    with pytest.raises(DichotomyViolation, match="pulse"):
        pf.classify(pulse, G)


def test_trivial_profile():
    _, G, prof = solved(rd_model(p=math.e), 3.0)
    zero = pf.WaveProfile(prof.t, np.zeros_like(prof.values), prof.c, prof.lam, 0.0,
                          prof.zeta1, prof.zeta2, prof.window)
    assert pf.classify(zero, G) == "trivial"


def test_grid_refinement_is_second_order():
    model = rd_model(p=math.e)
    profs = [solved(model, 2.5, T=200, dx=dx, tol=1e-11)[2] for dx in (0.2, 0.1, 0.05)]
    level = 0.5 * profs[0].zeta1
    s = np.linspace(-30, 30, 601)
    vals = [np.interp(s + crossing(p, level), p.t, p.values) for p in profs]
    e1 = np.max(np.abs(vals[0] - vals[1]))
    e2 = np.max(np.abs(vals[1] - vals[2]))
    assert e2 <= 0.1 ** 2 * 10
    assert e1 / e2 > 3.0


def test_lattice_profile():
    model = lattice_model()
    cs = sp.critical_speeds(model)
    system, G, prof = solved(model, cs.c_plus + 1.0)
    assert pf.classify(prof, G) == "wavefront"
    assert G.source == "g/d"
    assert pf.decay_rate(prof) == pytest.approx(sp.lambda_leftmost(model, cs.c_plus + 1.0), rel=0.02)


def test_meta_fields(monotone_solution):
    _, _, prof = monotone_solution
    meta = prof.meta()
    for key in ("residual", "decay_hat", "classification", "lambda", "nu", "epsilon", "delta"):
        assert key in meta


# -- properties ----------------------------------------------------------------

@PROPS
@given(st.floats(0.5, 2.2), st.floats(0.3, 4.0), st.sampled_from([0.0, 2.0]), st.booleans())
def test_dichotomy_and_containment(log_p, offset, rho, left):
    model = rd_model(p=math.exp(log_p), rho=rho)
    cs = sp.critical_speeds(model)
    c = cs.c_minus - offset if left else cs.c_plus + offset
    # the tail continuation is exact only once phi(-T) is negligible
    T = max(200.0, 30.0 / abs(sp.lambda_leftmost(model, c)))
    system, G, prof = solved(model, c, T=T)
    kind = pf.classify(prof, G)
    assert kind in ("wavefront", "semi_wavefront")
    lw, rw = pf.terminal_windows(prof)
    sides = [prof.values[lw], prof.values[rw]]
    vanishing = [w.max() <= G.zeta1 / 10 for w in sides]
    persistent = [w.min() > G.zeta1 for w in sides]
    assert sorted(vanishing) == [False, True]
    assert sorted(persistent) == [False, True]
    assert vanishing[0] == (not left)
    assert prof.values.max() <= min(system.zeta2, pf.sup_bound(system, G)) + 1e-8
    ok, slack = pf.containment(prof, G)
    assert ok, slack
