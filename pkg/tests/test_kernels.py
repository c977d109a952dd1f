import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import laplace_quad
from semiwave import kernels as kc
from semiwave.errors import OutOfStrip, ValidationError

PROPS = settings(max_examples=30, deadline=None)


def test_gaussian_density_at_zero():
    assert kc.eval_density(kc.ShiftedGaussian(2.0, 0.0), 0.0) == pytest.approx(1 / math.sqrt(4 * math.pi), abs=1e-12)
    assert kc.eval_density(kc.ShiftedGaussian(2.0, 0.0), 0.0) == pytest.approx(0.28209, abs=1e-5)


def test_resolvent_density_at_zero():
    assert kc.eval_density(kc.TwoSidedResolvent(-1.0, 1.0, 2.0), 0.0) == 0.5


def test_lattice_point_mass():
    assert kc.eval_density(kc.DiscreteLattice.from_mapping({0: 1.0}), 0.0) == 1.0


def test_density_nonnegative_everywhere_sampled():
    s = np.linspace(-30, 30, 2001)
    for k in (kc.ShiftedGaussian(2, 3), kc.OneSidedExponential(2.0, -1), kc.TwoSidedResolvent(-0.5, 2, 3)):
        assert np.all(k.density(s) >= 0)


@pytest.mark.parametrize("rho", [0.0, 1.5, 5.0])
@pytest.mark.parametrize("z", [-1.3, -0.2, 0.0, 0.6, 1.7])
def test_gaussian_transform_closed_form_matches_quadrature(rho, z):
    k = kc.ShiftedGaussian(2.0, rho)
    exact = math.exp(z * z + rho * z)
    assert kc.laplace(k, z) == pytest.approx(exact, rel=1e-12)
    quad = laplace_quad(k.density, z, -rho - 60, -rho + 60, (-rho,))
    assert abs(quad - exact) <= 1e-10 * max(1.0, exact)


@pytest.mark.parametrize("z", [-0.9, -0.3, 0.0, 0.4, 0.95])
def test_resolvent_transform(z):
    nu, mu = -1.0, 1.2
    k = kc.TwoSidedResolvent(nu, mu, mu - nu)
    exact = 1 / ((z - nu) * (mu - z))
    assert kc.laplace(k, z) == pytest.approx(exact, rel=1e-12)
    quad = laplace_quad(k.density, z, -700.0, 700.0, (0.0,))
    assert quad == pytest.approx(exact, rel=1e-9)


def test_resolvent_mass_is_inverse_beta():
    nu, mu = -0.7, 2.0
    k = kc.TwoSidedResolvent(nu, mu, mu - nu)
    assert k.total_mass == pytest.approx(1 / (-nu * mu), rel=1e-14)


def test_out_of_strip():
    with pytest.raises(OutOfStrip):
        kc.laplace(kc.TwoSidedResolvent(-1.0, 2.0, 3.0), 2.5)
    with pytest.raises(OutOfStrip):
        kc.laplace(kc.OneSidedExponential(1.0, 1), -1.5)


def test_strip_bounds():
    assert kc.strip_bounds(kc.ShiftedGaussian(2.0, 1.0)) == (-math.inf, math.inf)
    assert kc.strip_bounds(kc.TwoSidedResolvent(-1.0, 2.0, 3.0)) == (-1.0, 2.0)
    assert kc.strip_bounds(kc.OneSidedExponential(0.5, 1)) == (-0.5, math.inf)
    w = {k: math.exp(-k * k) for k in range(-10, 11)}
    a, b = kc.strip_bounds(kc.DiscreteLattice.from_mapping(w))
    assert a == -math.inf and b == math.inf


def test_lattice_strip_geometric_tail():
    # beta(k) = 2^-|k| decays at rate ln 2 on both sides
    w = {k: 2.0 ** -abs(k) for k in range(-30, 31)}
    a, b = kc.DiscreteLattice.from_mapping(w).strip
    assert a == pytest.approx(-math.log(2), rel=1e-9)
    assert b == pytest.approx(math.log(2), rel=1e-9)


def test_convolution_strip_is_intersection():
    k = kc.convolve(kc.TwoSidedResolvent(-1.0, 2.0, 3.0), kc.OneSidedExponential(0.5, 1))
    assert k.strip == (-0.5, 2.0)


def test_convolve_with_narrow_gaussian_is_identity():
    res = kc.TwoSidedResolvent(-1.0, 1.5, 2.5)
    conv = kc.convolve(res, kc.ShiftedGaussian(1e-10, 0.0))
    for s in (-3.0, -0.8, 0.6, 2.0):
        assert abs(conv.density(s) - res.density(s)) <= 1e-6


def test_convolution_transform_against_quadrature():
    res = kc.TwoSidedResolvent(-1.0, 1.5, 2.5)
    g = kc.ShiftedGaussian(2.0, 1.0)
    conv = kc.convolve(res, g)
    for z in (-0.6, 0.0, 0.3, 1.1):
        quad = laplace_quad(conv.density, z, -80, 80, (-1.0,))
        assert quad == pytest.approx(res.laplace(z) * g.laplace(z), rel=1e-8)


def test_convolution_mass_resolvent_times_shifted_kernel():
    beta, c, h = 3.0, 1.2, 2.0
    sigma = math.sqrt(c * c + 4 * beta)
    res = kc.TwoSidedResolvent((c - sigma) / 2, (c + sigma) / 2, sigma)
    conv = kc.convolve(res, kc.ShiftedGaussian(2.0, 0.0).translate(c * h))
    assert conv.total_mass == pytest.approx(1 / beta, rel=1e-12)


def test_positivity_interval():
    assert kc.positivity_interval(kc.ShiftedGaussian(2.0, 0.0)) == pytest.approx((-10, 10), abs=1e-2)
    assert kc.positivity_interval(kc.OneSidedExponential(1.0, 1)) is None
    lo, hi = kc.positivity_interval(kc.TwoSidedResolvent(-1.0, 1.0, 2.0))
    assert lo <= -9.99 and hi >= 9.99


def test_grid_tabulated_interpolates_and_vanishes_outside(tmp_path):
    path = tmp_path / "k.csv"
    s = np.linspace(-10, 10, 2001)
    dens = np.exp(-s ** 2 / 4) / math.sqrt(4 * math.pi)
    path.write_text("s,K\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(s, dens)))
    k = kc.GridTabulated.from_csv(path)
    assert kc.eval_density(k, 0.005) == pytest.approx(0.5 * (dens[1000] + dens[1001]), rel=1e-12)
    assert kc.eval_density(k, 10.5) == 0.0
    assert k.total_mass == pytest.approx(1.0, abs=1e-8)
    assert kc.laplace(k, 0.5) == pytest.approx(math.exp(0.25), rel=1e-4)


def test_invalid_kernels_rejected():
    with pytest.raises(ValidationError):
        kc.TwoSidedResolvent(1.0, 2.0, 1.0)
    with pytest.raises(ValidationError):
        kc.DiscreteLattice.from_mapping({0: -1.0})
    with pytest.raises(ValidationError):
        kc.ShiftedGaussian(0.0, 0.0)


# -- properties -------------------------------------------------------------

kernels = st.one_of(
    st.builds(kc.ShiftedGaussian, st.floats(0.1, 5.0), st.floats(-5.0, 5.0)),
    st.builds(kc.OneSidedExponential, st.floats(0.2, 5.0), st.sampled_from([1, -1]),
              st.none(), st.floats(-3.0, 3.0)),
    st.builds(lambda nu, mu: kc.TwoSidedResolvent(nu, mu, mu - nu), st.floats(-4.0, -0.1), st.floats(0.1, 4.0)),
    st.builds(lambda w: kc.DiscreteLattice.from_mapping(dict(enumerate(w, -2))),
              st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5)),
)


@PROPS
@given(kernels)
def test_transform_at_zero_is_mass(k):
    assert kc.laplace(k, 0.0) == pytest.approx(k.total_mass, rel=1e-8)


@PROPS
@given(st.floats(0.1, 5.0), st.floats(-4.0, 4.0))
def test_even_gaussian_transform_symmetric(var, z):
    k = kc.ShiftedGaussian(var, 0.0)
    assert abs(k.laplace(z) - k.laplace(-z)) <= 1e-10 * k.laplace(z)


@PROPS
@given(st.floats(-4.0, -0.1), st.floats(0.1, 4.0), st.floats(0.01, 0.99))
def test_resolvent_inverts_quadratic(nu, mu, frac):
    k = kc.TwoSidedResolvent(nu, mu, mu - nu)
    beta, c = -nu * mu, nu + mu
    z = nu + frac * (mu - nu)
    assert k.laplace(z) * (beta + c * z - z * z) == pytest.approx(1.0, abs=1e-10)


@PROPS
@given(st.floats(-3.0, -0.2), st.floats(0.2, 3.0), st.floats(0.3, 3.0), st.floats(-3.0, 3.0),
       st.floats(0.05, 0.95))
def test_convolution_transform_multiplicative(nu, mu, var, shift, frac):
    a = kc.TwoSidedResolvent(nu, mu, mu - nu)
    b = kc.ShiftedGaussian(var, shift)
    conv = kc.convolve(a, b)
    z = nu + frac * (mu - nu)
    assert conv.laplace(z) == pytest.approx(a.laplace(z) * b.laplace(z), rel=1e-8)
    assert conv.total_mass == pytest.approx(a.total_mass * b.total_mass, rel=1e-12)


@PROPS
@given(kernels, st.floats(-0.15, 0.15))
def test_reflect_mirrors_transform(k, z):
    a, b = k.strip
    if not (a < z < b and a < -z < b):
        return
    assert k.reflect().laplace(z) == pytest.approx(k.laplace(-z), rel=1e-10)
