"""Characteristic functions and their real roots.

Every form is exposed through its convexified version ``psi``:

* RD: ``psi = chi_1(z, c) = z^2 - c z - q + p exp(-z c h) L_K(z)``;
* lattice: ``psi = -chi~(z, c) = -(d + 2D + c z) + D (e^z + e^-z) + p exp(-c r z) L_beta(z)``;
* abstract: ``psi = -chi(z) = sum_tau g'(0, tau) L_tau(z) - 1``.

In all three cases ``psi`` is strictly convex on its strip and positive at
``z = 0`` for a monostable model, so it has at most two real zeros and they
share a sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import kernels as kc
from .errors import OutOfStrip, StripTooNarrow

TOL_ROOT = 1e-10
TANGENT_VALUE = 1e-8
TANGENT_SLOPE = 1e-6
EDGE_FRACTION = 1e-9
MAX_EXPANSIONS = 200
FD_STEP = 1e-6


def _edges(strip: tuple[float, float]) -> tuple[float, float]:
    """Strip endpoints pulled inward by a relative margin; infinite ends become large finite ones."""
    a, b = strip
    width = (b - a) if math.isfinite(b - a) else max(1.0, abs(a) if math.isfinite(a) else abs(b))
    if not math.isfinite(width):
        width = 1.0
    lo = a + EDGE_FRACTION * width if math.isfinite(a) else -1e6
    hi = b - EDGE_FRACTION * width if math.isfinite(b) else 1e6
    return lo, hi


class CharacteristicFn:
    """Base class; subclasses are frozen dataclasses carrying a speed ``c``."""

    form = "generic"
    sign = 1.0
    c: float

    @property
    def strip(self) -> tuple[float, float]:
        raise NotImplementedError

    def _value(self, z):
        raise NotImplementedError

    def _value_dz(self, z):
        raise NotImplementedError

    def _check(self, z):
        a, b = self.strip
        z = np.asarray(z, dtype=float)
        if not np.all(((z > a) & (z < b)) | (z == 0.0)):
            raise OutOfStrip(f"z={z} outside strip ({a}, {b})")
        return z

    def value(self, z):
        """The characteristic function in its native sign convention."""
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._value(self._check(z))
        return float(out) if np.ndim(out) == 0 else out

    def value_dz(self, z):
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._value_dz(self._check(z))
        return float(out) if np.ndim(out) == 0 else out

    def psi(self, z):
        return self.sign * self.value(z)

    def psi_dz(self, z):
        return self.sign * self.value_dz(z)

    def psi_dzz(self, z, step: float = 1e-5):
        return (self.psi_dz(z + step) - self.psi_dz(z - step)) / (2 * step)

    def at(self, c: float) -> "CharacteristicFn":
        return replace(self, c=float(c))

    def psi_dc(self, z, step: float = FD_STEP):
        return (self.at(self.c + step).psi(z) - self.at(self.c - step).psi(z)) / (2 * step)

    def psi_dzc(self, z, step: float = FD_STEP):
        return (self.at(self.c + step).psi_dz(z) - self.at(self.c - step).psi_dz(z)) / (2 * step)

    def fd_dz(self, z, step: float = FD_STEP) -> float:
        """Central difference of ``value`` with one Richardson step."""
        d1 = (self.value(z + step) - self.value(z - step)) / (2 * step)
        d2 = (self.value(z + step / 2) - self.value(z - step / 2)) / step
        return (4 * d2 - d1) / 3

    def scan(self, z0: float, z1: float, n: int):
        z = np.linspace(z0, z1, n)
        with np.errstate(over="ignore", invalid="ignore"):
            return z, np.array([self.psi(x) for x in z])


@dataclass(frozen=True)
class RDForm(CharacteristicFn):
    """``chi_1(z, c)`` of the delayed nonlocal reaction-diffusion equation."""

    p: float
    q: float
    h: float
    K: kc.Kernel
    c: float = 0.0
    form = "rd"
    sign = 1.0

    @property
    def strip(self):
        return self.K.strip

    def _value(self, z):
        return z * z - self.c * z - self.q + self.p * np.exp(-z * self.c * self.h) * self.K._laplace(z)

    def _value_dz(self, z):
        e = np.exp(-z * self.c * self.h)
        return 2 * z - self.c + self.p * e * (self.K._laplace_dz(z) - self.c * self.h * self.K._laplace(z))


@dataclass(frozen=True)
class LatticeForm(CharacteristicFn):
    """``chi~(z, c)`` of the nonlocal delayed lattice equation."""

    D: float
    d: float
    r: float
    p: float
    beta: kc.DiscreteLattice
    c: float = 0.0
    form = "lattice"
    sign = -1.0

    @property
    def strip(self):
        return self.beta.strip

    def _value(self, z):
        return (self.d + 2 * self.D + self.c * z - self.D * (np.exp(z) + np.exp(-z))
                - self.p * np.exp(-self.c * self.r * z) * self.beta._laplace(z))

    def _value_dz(self, z):
        e = np.exp(-self.c * self.r * z)
        return (self.c - self.D * (np.exp(z) - np.exp(-z))
                - self.p * e * (self.beta._laplace_dz(z) - self.c * self.r * self.beta._laplace(z)))

    def admissible(self, z) -> bool:
        """Whether ``d + 2D + c z > 0``, the domain of the lattice ``chi``."""
        return bool(self.d + 2 * self.D + self.c * z > 0)


@dataclass(frozen=True)
class AbstractForm(CharacteristicFn):
    """``chi(z) = 1 - sum_tau g'(0, tau) L_tau(z)`` of a convolution system.

    ``c`` is carried for bookkeeping only; the system is already built at its speed.
    """

    system: object = field(repr=False)
    c: float = 0.0
    form = "abstract"
    sign = -1.0

    @property
    def strip(self):
        return self.system.strip

    def _value(self, z):
        return 1.0 - sum(a.weight * a.slope0 * a.kernel._laplace(z) for a in self.system.atoms)

    def _value_dz(self, z):
        return -sum(a.weight * a.slope0 * a.kernel._laplace_dz(z) for a in self.system.atoms)

    def at(self, c):
        from .model import LatticeModel, reduce, reduce_lattice

        m = self.system.model
        if m is None:
            raise ValueError("abstract form without a model cannot change speed")
        sys = reduce_lattice(m, c) if isinstance(m, LatticeModel) else reduce(m, c, self.system.beta)
        return AbstractForm(sys, float(c))


def characteristic(obj, c: float = 0.0) -> CharacteristicFn:
    """Characteristic function of an RD/lattice model or of a convolution system."""
    from .model import ConvolutionSystem, LatticeModel, RDModel

    if isinstance(obj, RDModel):
        return RDForm(obj.g.slope0, obj.f.slope0, obj.h, obj.K, float(c))
    if isinstance(obj, LatticeModel):
        return LatticeForm(obj.D, obj.d, obj.r, obj.g.slope0, obj.beta, float(c))
    if isinstance(obj, ConvolutionSystem):
        return AbstractForm(obj, obj.c)
    raise TypeError(f"no characteristic function for {type(obj).__name__}")


# -- minimization and roots -------------------------------------------------

@dataclass(frozen=True)
class Minimum:
    z: float
    value: float
    slope: float
    at_edge: bool


def minimize(cf: CharacteristicFn) -> Minimum:
    """Minimizer of the convex ``psi`` over the strip via the zero of the increasing ``psi_z``.

    ``at_edge`` is set when ``psi_z`` keeps its sign up to the (pulled-in) strip end.
    """
    lo_edge, hi_edge = _edges(cf.strip)
    d0 = cf.psi_dz(0.0)
    if d0 == 0.0:
        return Minimum(0.0, cf.psi(0.0), 0.0, False)
    direction = 1.0 if d0 < 0 else -1.0
    edge = hi_edge if direction > 0 else lo_edge
    inner, step = 0.0, 1.0
    for _ in range(MAX_EXPANSIONS):
        outer = inner + direction * step
        if direction * (outer - edge) >= 0:
            outer = edge
        d = cf.psi_dz(outer)
        if not (direction * d < 0):  # sign flipped (or overflowed to +-inf / nan)
            break
        if outer == edge:
            return Minimum(edge, cf.psi(edge), d, True)
        inner, step = outer, 2 * step
    else:
        return Minimum(outer, cf.psi(outer), cf.psi_dz(outer), True)

    def dz(x):
        v = cf.psi_dz(x)
        return v if math.isfinite(v) else math.copysign(1e300, direction)

    a, b = sorted((inner, outer))
    z = brentq(dz, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_EXPANSIONS)
    return Minimum(z, cf.psi(z), cf.psi_dz(z), False)


@dataclass
class RootSet:
    kind: str  # "none" | "one" | "two" | "tangent"
    roots: tuple[float, ...]
    minimizer: float
    min_value: float
    discarded: tuple[float, ...] = ()

    @property
    def lambda1(self) -> float | None:
        """Root nearest to zero."""
        return min(self.roots, key=abs) if self.roots else None


def _root_beyond(cf, z0: float, direction: float, edge: float) -> float | None:
    inner, step = z0, 1.0
    for _ in range(MAX_EXPANSIONS):
        outer = inner + direction * step
        if direction * (outer - edge) >= 0:
            outer = edge
        v = cf.psi(outer)
        if not (v < 0):
            break
        if outer == edge:
            return None
        inner, step = outer, 2 * step
    else:
        return None

    def f(x):
        v = cf.psi(x)
        return v if math.isfinite(v) else 1e300

    a, b = sorted((inner, outer))
    return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_EXPANSIONS)


def real_roots(cf: CharacteristicFn) -> RootSet:
    """Real zeros of ``psi`` using strict convexity (at most two, same sign)."""
    m = minimize(cf)
    if m.at_edge:
        raise StripTooNarrow(
            f"minimizer of psi reaches the strip end z={m.z:.6g} (psi={m.value:.6g}); "
            "psi is monotone on the strip")
    if m.value > TANGENT_VALUE:
        return RootSet("none", (), m.z, m.value)
    if abs(m.value) <= TANGENT_VALUE and abs(m.slope) <= TANGENT_SLOPE:
        return RootSet("tangent", (m.z,), m.z, m.value)
    lo_edge, hi_edge = _edges(cf.strip)
    roots = [r for r in (_root_beyond(cf, m.z, -1.0, lo_edge), _root_beyond(cf, m.z, 1.0, hi_edge))
             if r is not None]
    if len(roots) == 2 and roots[0] * roots[1] <= 0:
        raise RuntimeError(f"internal error: characteristic roots {roots} straddle zero")
    for r in roots:
        # near a pole of the abstract form psi is steep; a root exact to machine
        # precision can then carry a residual above TOL_ROOT
        floor = 8 * np.finfo(float).eps * max(abs(r), 1.0) * abs(cf.psi_dz(r))
        if abs(cf.psi(r)) > max(TOL_ROOT, floor):
            raise RuntimeError(f"internal error: root {r} has residual {cf.psi(r):.3g}")
    kept, discarded = roots, []
    if isinstance(cf, LatticeForm):
        kept = [r for r in roots if cf.admissible(r)]
        discarded = [r for r in roots if not cf.admissible(r)]
    kind = {0: "none", 1: "one", 2: "two"}[len(roots)]
    return RootSet(kind, tuple(kept), m.z, m.value, tuple(discarded))


def second_differences(cf: CharacteristicFn, n: int = 100, span: float = 4.0) -> np.ndarray:
    """Second differences of ``psi`` at ``n`` points spread over the usable strip."""
    lo, hi = _edges(cf.strip)
    lo, hi = max(lo, -span), min(hi, span)
    z = np.linspace(lo, hi, n + 2)[1:-1]
    h = 1e-3 * min(1.0, (hi - lo) / (n + 2))
    return np.array([cf.psi(x + h) - 2 * cf.psi(x) + cf.psi(x - h) for x in z])
