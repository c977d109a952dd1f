import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import lattice_model, rd_model
from oracles import bisect_inverse, laplace_quad
from semiwave import gmap as gm
from semiwave import kernels as kc
from semiwave import model as mdl
from semiwave.errors import NoZeta2, ValidationError, ZeroSpeed

PROPS = settings(max_examples=25, deadline=None)


def test_nicholson_model_passes_all_checks():
    report = mdl.validate(rd_model(p=2.0))
    assert report.ok, [c.name for c in report.failures]
    for name in ("F:slope", "N:theta_increasing", "C:linear_bound_near_zero", "sublinear"):
        assert report[name].passed
    assert report.s_max == pytest.approx(10 * derive_zeta2(rd_model(p=2.0)))
    assert report.samples == 10_000


def derive_zeta2(model):
    return mdl.derive_beta(model)[1]


def test_slope_condition_failure_is_reported():
    report = mdl.validate(rd_model(p=0.8))
    assert not report.ok
    assert not report["F:slope"].passed


def test_zero_slope_nonlinearity_fails():
    g = mdl.from_callable("square", lambda s: s * s * np.exp(-s))
    report = mdl.validate(rd_model(g=g))
    assert not report["g:slope0_positive"].passed


def test_non_sublinear_rule_reports_witness():
    # g(s)/s = (1 + 2s) e^{-s} exceeds g'(0) = 1 on (0, 1.25)
    g = mdl.from_callable("hump", lambda s: (s + 2 * s * s) * np.exp(-s), slope0=1.0)
    report = mdl.validate(rd_model(g=g, q=0.5))
    assert not report["sublinear"].passed
    assert report["sublinear"].witness is not None


def test_lattice_validation():
    assert mdl.validate(lattice_model()).ok
    bad = mdl.validate(lattice_model(p=0.5))
    assert not bad["L:slope"].passed
    unnormalized = mdl.LatticeModel(1, 1, 1, kc.DiscreteLattice.from_mapping({0: 0.5}), mdl.nicholson(3))
    assert not mdl.validate(unnormalized)["L:beta_normalized"].passed


def test_derive_beta_nicholson():
    model = rd_model(p=2.0)
    beta, zeta2 = mdl.derive_beta(model)
    root = bisect_inverse(lambda s: s, 2 / math.e, 0.0, 10.0)
    assert zeta2 == pytest.approx(1.05 * root, rel=1e-10)
    assert zeta2 == pytest.approx(0.7358 * 1.05, rel=1e-4)
    assert beta >= 1.1


def test_derive_beta_exponential_death():
    model = mdl.RDModel(mdl.exponential(1.0), mdl.linear_capped(2.0, 0.5), kc.ShiftedGaussian(2, 0), 0.0)
    beta, zeta2 = mdl.derive_beta(model)
    assert zeta2 == pytest.approx(math.log(2) * 1.05, rel=1e-10)
    assert beta == pytest.approx(1.1 * math.expm1(zeta2) + 1.1, rel=1e-3)
    s = np.linspace(0, zeta2, 1001)
    assert np.all(np.diff(beta * s - model.f(s)) >= 0)


def test_unbounded_birth_has_no_zeta2():
    with pytest.raises(NoZeta2):
        mdl.derive_beta(mdl.RDModel(mdl.linear(1.0), mdl.linear(2.0), kc.ShiftedGaussian(2, 0), 0.0))


def test_zero_birth_rejected_by_validate():
    g = mdl.from_callable("zero", lambda s: 0 * s, slope0=0.0, sup_value=0.0)
    report = mdl.validate(rd_model(g=g))
    assert not report["g:positive"].passed


def test_reduce_resolvent_roots():
    system = mdl.reduce(rd_model(), 0.0, beta=1.0)
    res = system.atoms[1].kernel
    assert (res.nu, res.mu, res.sigma) == pytest.approx((-1.0, 1.0, 2.0), abs=1e-15)
    assert res.density(1.3) == pytest.approx(res.density(-1.3), rel=1e-15)
    res2 = mdl.reduce(rd_model(), 2.0, beta=1.0).atoms[1].kernel
    assert res2.nu == pytest.approx((2 - math.sqrt(8)) / 2, rel=1e-14)
    assert res2.mu == pytest.approx((2 + math.sqrt(8)) / 2, rel=1e-14)
    assert res2.sigma == pytest.approx(math.sqrt(8), rel=1e-14)


@pytest.mark.parametrize("z", [-0.3, 0.0, 0.25, 0.5])
def test_birth_atom_transform(z):
    c, h, beta = 1.0, 2.0, 1.5
    model = rd_model(h=h)
    system = mdl.reduce(model, c, beta)
    expect = math.exp(-c * h * z) * model.K.laplace(z) / (beta + c * z - z * z)
    kernel = system.atoms[0].kernel
    assert kernel.laplace(z) == pytest.approx(expect, rel=1e-12)
    quad = laplace_quad(kernel.density, z, -120, 120, (-c * h,))
    assert quad == pytest.approx(expect, rel=1e-8)


def test_lattice_unit_exponential_transform():
    D, d = 1.0, 0.5
    for c in (1.5, -2.0):
        H0 = mdl.unit_exponential(D, d, c)
        for tau in (-1.0, 0.0, 2.0):
            H = H0.translate(tau)
            for z in (-0.3, 0.0, 0.4):
                if 2 * D + d + c * z <= 0:
                    continue
                assert H.laplace(z) == pytest.approx(math.exp(-z * tau) / (2 * D + d + c * z), rel=1e-12)
        assert H0.total_mass == pytest.approx(1 / (2 * D + d), rel=1e-14)


def test_lattice_reduction_masses():
    model = lattice_model(D=1.5, d=0.7)
    system = mdl.reduce_lattice(model, 1.3)
    assert system.atoms[0].kernel.total_mass * system.atoms[0].weight == pytest.approx(2 * 1.5 / (3 + 0.7), rel=1e-12)
    assert system.C == pytest.approx(1 / 3.7, rel=1e-12)
    with pytest.raises(ZeroSpeed):
        mdl.reduce_lattice(model, 0.0)


@pytest.mark.parametrize("model", [rd_model(), rd_model(p=math.exp(2.2)), lattice_model()])
def test_reduce_preserves_constant_solutions(model):
    system = mdl.reduce_lattice(model, 1.0) if isinstance(model, mdl.LatticeModel) else mdl.reduce(model, 0.7)
    G = gm.build_G(system)
    for kappa in G.fixed:
        assert system.constant_residual(kappa) <= 1e-8


def test_positive_equilibria():
    assert mdl.positive_equilibria(rd_model(p=math.e)) == pytest.approx([1.0], abs=1e-10)
    assert mdl.positive_equilibria(lattice_model(p=math.exp(2))) == pytest.approx([2.0], abs=1e-10)


def test_catalog_nonlinearities():
    m = mdl.mackey(2.0)
    assert m.sup_value == pytest.approx(1.0)
    assert m(1.0) == pytest.approx(1.0)
    n = mdl.nicholson(3.0)
    assert n.sup_value == pytest.approx(3 / math.e)
    assert n.is_sublinear(10.0)
    cap = mdl.linear_capped(2.0, 0.5)
    assert cap(3.0) == 1.0 and cap.slope0 == 2.0


def test_tabulated_nonlinearity(tmp_path):
    path = tmp_path / "g.csv"
    s = np.linspace(0, 5, 501)
    path.write_text("s,g\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(s, 2 * s * np.exp(-s))))
    g = mdl.tabulated(path)
    assert g(1.0) == pytest.approx(2 / math.e, rel=1e-12)
    assert g.slope0 == pytest.approx(2.0, rel=1e-2)
    bad = tmp_path / "bad.csv"
    bad.write_text("1,1\n2,2\n")
    with pytest.raises(ValidationError):
        mdl.tabulated(bad)


def test_non_unit_weights_flagged():
    system = mdl.reduce(rd_model(), 1.0)
    atoms = (system.atoms[0], mdl.Atom(system.atoms[1].kernel, system.atoms[1].g, system.atoms[1].slope0,
                                        math.inf, weight=0.9))
    odd = mdl.ConvolutionSystem(atoms, 1.0, system.zeta2, system.beta, 0, "rd", None)
    checks = {c.name: c for c in mdl.check_N(odd)}
    assert not checks["N:weights"].passed


@PROPS
@given(st.floats(-20, 20), st.floats(0.01, 100))
def test_resolvent_roots_identities(c, beta):
    nu, mu, sigma = mdl.resolvent_roots(c, beta)
    assert nu < 0 < mu
    assert nu * mu == pytest.approx(-beta, rel=1e-12)
    assert nu + mu == pytest.approx(c, rel=1e-12, abs=1e-12 * sigma)
    assert mu - nu == pytest.approx(sigma, rel=1e-12)
