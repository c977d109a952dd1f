import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_weights, lattice_model, rd_model
from semiwave import characteristic as ch
from semiwave import kernels as kc
from semiwave import model as mdl
from semiwave.errors import OutOfStrip, StripTooNarrow

PROPS = settings(max_examples=25, deadline=None)
C_PLUS = 0.78838047650208443  # frozen after the brute-force scan in test_speeds


def rd_form(c, rho=0.0, p=2.0, q=1.0, h=2.0):
    return ch.characteristic(rd_model(p=p, rho=rho, h=h, q=q), c)


def test_rd_value_at_zero():
    for c in (-3.0, 0.0, 1.7):
        assert rd_form(c).value(0.0) == pytest.approx(1.0, abs=1e-15)
        assert rd_form(c, p=3.5, q=0.5).psi(0.0) == pytest.approx(3.0, abs=1e-15)


def test_abstract_value_at_zero_negative():
    model = rd_model()
    system = mdl.reduce(model, 1.2)
    cf = ch.characteristic(system)
    expect = 1 - sum(a.slope0 * a.kernel.total_mass for a in system.atoms)
    assert cf.value(0.0) == pytest.approx(expect, rel=1e-12)
    assert cf.value(0.0) < 0


@pytest.mark.parametrize("beta", [1.0, 5.0, 10.0, 50.0])
def test_abstract_matches_rd_form(beta):
    c = 1.3
    model = rd_model()
    system = mdl.reduce(model, c, beta)
    cf, rd = ch.characteristic(system), ch.characteristic(model, c)
    a, b = system.strip
    rng = np.random.default_rng(1)
    for z in rng.uniform(a + 1e-3, b - 1e-3, 20):
        expect = -rd.value(z) / (beta + c * z - z * z)
        assert cf.value(z) == pytest.approx(expect, rel=1e-8, abs=1e-12)


def test_rd_derivative_at_zero():
    rho, c, h, p = 1.5, 0.8, 2.0, 2.0
    cf = rd_form(c, rho=rho, p=p, h=h)
    # L_K'(0) = -mean(K) = rho for the kernel centred at -rho
    assert cf.value_dz(0.0) == pytest.approx(-c + p * (-c * h + rho), rel=1e-12)
    assert rd_form(0.0).value_dz(0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("form", ["rd", "lattice", "abstract"])
def test_finite_difference_matches_analytic(form):
    if form == "rd":
        cf = rd_form(1.1, rho=2.0)
    elif form == "lattice":
        cf = ch.characteristic(lattice_model(), 1.5)
    else:
        cf = ch.characteristic(mdl.reduce(rd_model(), 1.1))
    a, b = cf.strip
    lo, hi = max(a + 1e-2, -2.0), min(b - 1e-2, 2.0)
    for z in np.random.default_rng(2).uniform(lo, hi, 20):
        assert cf.fd_dz(z) == pytest.approx(cf.value_dz(z), rel=1e-6, abs=1e-6)


def test_out_of_strip():
    cf = ch.characteristic(mdl.reduce(rd_model(), 0.5))
    a, b = cf.strip
    with pytest.raises(OutOfStrip):
        cf.value(b + 0.1)


def test_two_positive_roots_above_critical_speed():
    roots = ch.real_roots(rd_form(2.0))
    assert roots.kind == "two"
    l1, l2 = roots.roots
    assert 0 < l1 < l2
    cf = rd_form(2.0)
    assert abs(cf.psi(l1)) <= 1e-10 and abs(cf.psi(l2)) <= 1e-10


def test_no_roots_in_gap():
    roots = ch.real_roots(rd_form(0.0))
    assert roots.kind == "none" and roots.roots == ()
    assert roots.min_value > 0


def test_tangent_root_at_critical_speed():
    roots = ch.real_roots(rd_form(C_PLUS))
    assert roots.kind == "tangent"
    cf = rd_form(C_PLUS)
    lam = roots.roots[0]
    assert abs(cf.psi(lam)) <= 1e-8
    assert abs(cf.psi_dz(lam)) <= 1e-6


def test_strip_too_narrow_reported():
    w = {k: 2.0 ** -abs(k) for k in range(-30, 31)}
    total = sum(w.values())
    beta = kc.DiscreteLattice.from_mapping({k: v / total for k, v in w.items()})
    model = mdl.LatticeModel(1.0, 1.0, 0.0, beta, mdl.nicholson(3.0))
    with pytest.raises(StripTooNarrow):
        ch.real_roots(ch.characteristic(model, 1e4))


def test_lattice_roots_restricted_to_admissible_half_line():
    model = lattice_model()
    cf = ch.characteristic(model, 3.0)
    roots = ch.real_roots(cf)
    for r in roots.roots:
        assert cf.admissible(r)
    for r in roots.discarded:
        assert not cf.admissible(r)


# -- properties -------------------------------------------------------------

@PROPS
@given(st.floats(-4, 4), st.sampled_from([0.0, 5.0]))
def test_strict_convexity(c, rho):
    assert np.all(ch.second_differences(rd_form(c, rho=rho)) > 0)


@PROPS
@given(st.floats(-4, 4))
def test_lattice_strict_convexity(c):
    assert np.all(ch.second_differences(ch.characteristic(lattice_model(), c)) > 0)


@PROPS
@given(st.floats(0.9, 5.0))
def test_symmetric_kernel_mirror_roots(c):
    plus = ch.real_roots(rd_form(c))
    minus = ch.real_roots(rd_form(-c))
    assert plus.kind == minus.kind
    mirrored = sorted(-r for r in minus.roots)
    assert np.allclose(mirrored, plus.roots, atol=1e-8)


@PROPS
@given(st.floats(-6, 6), st.sampled_from([0.0, 2.5, 5.0]))
def test_roots_share_sign(c, rho):
    roots = ch.real_roots(rd_form(c, rho=rho))
    if len(roots.roots) == 2:
        assert roots.roots[0] * roots.roots[1] > 0


@PROPS
@given(st.floats(0.9, 4.0), st.sampled_from([1.0, 5.0, 10.0, 50.0]))
def test_reduction_roots_independent_of_beta(c, beta):
    model = rd_model()
    direct = ch.real_roots(ch.characteristic(model, c)).roots
    reduced = ch.real_roots(ch.characteristic(mdl.reduce(model, c, beta))).roots
    assert len(direct) == len(reduced)
    assert np.allclose(direct, reduced, atol=1e-8)
