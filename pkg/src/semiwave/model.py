"""Application models, hypothesis checks, and reduction to the two-atom convolution system.

Two model families are supported:

* :class:`RDModel` -- ``u_t = u_xx - f(u) + int K(x-y) g(u(t-h, y)) dy``;
* :class:`LatticeModel` -- ``w_j' = D (w_{j+1} - 2 w_j + w_{j-1}) - d w_j
  + sum_k beta(j-k) g(w_k(t-r))``.

Both reduce, for a fixed speed ``c``, to a :class:`ConvolutionSystem`
``phi = sum_tau int K(s, tau) g(phi(t-s), tau) ds`` with finitely many atoms.
All hypothesis checks here are sampled certifications, never proofs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import kernels as kc
from ._numerics import lipschitz, sign_change_roots, slope_at_zero
from .errors import NoZeta2, ValidationError, ZeroSpeed

ZETA2_INFLATION = 1.05
BETA_SAFETY = 1.1


@dataclass(frozen=True)
class Nonlinearity:
    """A rule ``s -> g(s)`` on ``s >= 0`` with its slope at 0 and supremum."""

    name: str
    func: Callable = field(compare=False, repr=False)
    slope0: float
    sup_value: float
    params: tuple = ()

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))

    def is_sublinear(self, s_max: float, n: int = 10_000) -> bool:
        s = np.linspace(0.0, s_max, n + 1)
        return bool(np.all(self(s) <= self.slope0 * s * (1 + 1e-12) + 1e-15))

    def inverse(self, y, hi: float):
        """Inverse of an increasing rule on ``[0, hi]`` by bisection."""
        from ._numerics import bisect_increasing

        return bisect_increasing(self, y, 0.0, hi)

    def describe(self) -> dict:
        return {"name": self.name, **dict(self.params)}


def nicholson(p: float) -> Nonlinearity:
    return Nonlinearity("nicholson", lambda s: p * s * np.exp(-s), p, p / math.e, (("p", p),))


def mackey(p: float, n: float = 2.0) -> Nonlinearity:
    if n > 1:
        s_star = (1.0 / (n - 1.0)) ** (1.0 / n)
        sup = p * s_star / (1.0 + s_star**n)
    else:
        sup = p
    return Nonlinearity("mackey", lambda s: p * s / (1.0 + s**n), p, sup, (("p", p), ("n", n)))


def linear_capped(p: float, cap: float) -> Nonlinearity:
    return Nonlinearity("linear_capped", lambda s: p * np.minimum(s, cap), p, p * cap,
                        (("p", p), ("cap", cap)))


def linear(rate: float) -> Nonlinearity:
    return Nonlinearity("linear", lambda s: rate * s, rate, math.inf, (("rate", rate),))


def exponential(rate: float = 1.0) -> Nonlinearity:
    """``rate * (exp(s) - 1)``; a superlinear death rule."""
    return Nonlinearity("exponential", lambda s: rate * np.expm1(s), rate, math.inf, (("rate", rate),))


def from_callable(name: str, func: Callable, s_max: float = 100.0, n: int = 10_000,
                  slope0: float | None = None, sup_value: float | None = None) -> Nonlinearity:
    """Wrap an arbitrary rule; slope and supremum are estimated numerically when absent."""
    f = lambda s: np.asarray(func(np.asarray(s, dtype=float)), dtype=float)
    if slope0 is None:
        slope0 = slope_at_zero(f)
    if sup_value is None:
        sup_value = float(np.max(f(np.linspace(0.0, s_max, n + 1))))
    return Nonlinearity(name, f, float(slope0), float(sup_value))


def tabulated(path) -> Nonlinearity:
    s, v = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            try:
                s.append(float(row[0]))
                v.append(float(row[1]))
            except (ValueError, IndexError):
                continue
    if len(s) < 2 or s[0] != 0.0 or v[0] != 0.0:
        raise ValidationError(f"{path}: tabulated nonlinearity must start at (0, 0)")
    s_arr, v_arr = np.array(s), np.array(v)
    func = lambda x: np.interp(x, s_arr, v_arr, right=v_arr[-1])
    return Nonlinearity("tabulated", func, float(v_arr[1] / s_arr[1]), float(v_arr.max()),
                        (("path", str(path)),))


CATALOG = {
    "nicholson": nicholson,
    "mackey": mackey,
    "linear_capped": linear_capped,
    "linear": linear,
    "exponential": exponential,
}


@dataclass(frozen=True)
class RDModel:
    f: Nonlinearity
    g: Nonlinearity
    K: kc.Kernel
    h: float = 0.0
    kind = "rd"

    def __post_init__(self):
        if self.h < 0:
            raise ValidationError("delay h must be nonnegative")


@dataclass(frozen=True)
class LatticeModel:
    D: float
    d: float
    r: float
    beta: kc.DiscreteLattice
    g: Nonlinearity
    kind = "lattice"

    def __post_init__(self):
        if not (self.D > 0 and self.d > 0 and self.r >= 0):
            raise ValidationError("lattice model needs D > 0, d > 0, r >= 0")


# -- hypothesis checks ------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness: float | None = None


@dataclass
class ValidationReport:
    checks: list[Check]
    s_max: float
    samples: int

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "s_max": self.s_max,
            "samples": self.samples,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail, "witness": c.witness}
                for c in self.checks
            ],
        }


def _first_failure(mask, s):
    bad = np.flatnonzero(~mask)
    return float(s[bad[0]]) if len(bad) else None


def derive_beta(model: RDModel, n: int = 10_000) -> tuple[float, float]:
    """Auxiliary rate ``beta`` and bound ``zeta2`` for the RD reduction.

    ``zeta2`` is the root of ``f(s) = sup g`` inflated by 5%; ``beta`` is 1.1 times
    the sampled Lipschitz constant of ``f`` on ``[0, zeta2]``, at least 1.
    """
    sup_g = model.g.sup_value
    if not math.isfinite(sup_g):
        raise NoZeta2("sup g is not finite")
    f = lambda s: float(model.f(s)) - sup_g
    hi = 1.0
    while f(hi) <= 0:
        hi *= 2
        if hi > 1e8:
            raise NoZeta2("f(s) <= sup g on the whole search range")
    root = brentq(f, 0.0, hi, xtol=1e-14) if f(0.0) < 0 else 0.0
    zeta2 = ZETA2_INFLATION * root
    if zeta2 <= 0:
        raise NoZeta2("degenerate zeta2")
    beta = max(BETA_SAFETY * lipschitz(model.f, 0.0, zeta2, n), 1.0)
    return beta, zeta2


def lattice_zeta2(model: LatticeModel) -> float:
    sup_g = model.g.sup_value
    if not (math.isfinite(sup_g) and sup_g > 0):
        raise NoZeta2("sup g must be finite and positive")
    return ZETA2_INFLATION * sup_g / model.d


def validate(model, n: int = 10_000) -> ValidationReport:
    """Sampled certification of the standing hypotheses; failures are report entries."""
    checks: list[Check] = []
    g = model.g
    if isinstance(model, RDModel):
        try:
            _, zeta2 = derive_beta(model, n)
        except NoZeta2 as exc:
            zeta2 = None
            checks.append(Check("F:f_dominates_sup_g", False, str(exc)))
        else:
            checks.append(Check("F:f_dominates_sup_g", True, f"zeta2={zeta2:.6g}", zeta2))
    else:
        try:
            zeta2 = lattice_zeta2(model)
        except NoZeta2 as exc:
            zeta2 = None
            checks.append(Check("N:zeta2", False, str(exc)))
    s_max = 10.0 * zeta2 if zeta2 else 10.0
    s = np.linspace(0.0, s_max, n + 1)
    gs = g(s)

    checks.append(Check("g:zero_at_origin", abs(float(gs[0])) <= 1e-14, f"g(0)={gs[0]:.3g}"))
    pos = gs[1:] > 0
    checks.append(Check("g:positive", bool(pos.all()), "g(s) > 0 on sampled (0, s_max]",
                        _first_failure(pos, s[1:])))
    checks.append(Check("g:slope0_positive", g.slope0 > 1e-12, f"g'(0)={g.slope0:.6g}", g.slope0))
    checks.append(Check("g:bounded", math.isfinite(g.sup_value), f"sup g={g.sup_value:.6g}"))
    ratio = gs[1:] / s[1:]
    checks.append(Check("C:linear_bound_near_zero", bool(np.all(np.isfinite(ratio))),
                        f"max g(u)/u={np.max(ratio):.6g}"))
    sub = gs <= g.slope0 * s * (1 + 1e-12) + 1e-15
    checks.append(Check("sublinear", bool(sub.all()), "g(s) <= g'(0) s", _first_failure(sub, s)))

    if isinstance(model, RDModel):
        f = model.f
        fs = f(s)
        checks.append(Check("F:slope", f.slope0 < g.slope0,
                            f"f'(0)={f.slope0:.6g} < g'(0)={g.slope0:.6g}", f.slope0))
        inc = np.diff(fs) > 0
        checks.append(Check("F:f_increasing", bool(inc.all()) and abs(float(fs[0])) <= 1e-14,
                            "f strictly increasing, f(0)=0", _first_failure(inc, s[1:])))
        sup = fs >= f.slope0 * s * (1 - 1e-12) - 1e-15
        checks.append(Check("f_superlinear", bool(sup.all()), "f(s) >= f'(0) s",
                            _first_failure(sup, s)))
        mass = model.K.total_mass
        checks.append(Check("F:K_normalized", abs(mass - 1.0) <= 1e-8, f"int K={mass:.12g}", mass))
        probe_c = 0.0
    else:
        mass = model.beta.total_mass
        checks.append(Check("L:beta_normalized", abs(mass - 1.0) <= 1e-8,
                            f"sum beta={mass:.12g}", mass))
        checks.append(Check("L:slope", g.slope0 > model.d,
                            f"g'(0)={g.slope0:.6g} > d={model.d:.6g}", g.slope0))
        probe_c = 1.0

    if zeta2 is not None and all(c.passed for c in checks if c.name.startswith("g:")):
        system = reduce(model, probe_c) if isinstance(model, RDModel) else reduce_lattice(model, probe_c)
        checks.extend(check_N(system, n))
        checks.append(check_P(system))
    return ValidationReport(checks, s_max, n)


# -- convolution systems ----------------------------------------------------

@dataclass(frozen=True)
class Atom:
    """One point ``tau`` of the measure space: kernel, rule, ``g'(0, tau)``, weight."""

    kernel: kc.Kernel
    g: Callable = field(compare=False, repr=False)
    slope0: float
    sup: float = math.inf
    weight: float = 1.0
    label: str = ""

    @property
    def mass(self) -> float:
        return self.weight * self.kernel.total_mass


@dataclass(frozen=True)
class ConvolutionSystem:
    """``phi(t) = sum_tau weight * int K(s, tau) g(phi(t - s), tau) ds`` at speed ``c``.

    ``birth`` indexes the distinguished atom (the one whose rule may be
    non-monotone); the remaining atoms make up ``g_tilde``.
    """

    atoms: tuple[Atom, ...]
    c: float
    zeta2: float
    beta: float | None = None
    birth: int = 0
    kind: str = "generic"
    model: object = field(default=None, compare=False, repr=False)
    reflected: bool = False

    @property
    def strip(self) -> tuple[float, float]:
        a = max(at.kernel.strip[0] for at in self.atoms)
        b = min(at.kernel.strip[1] for at in self.atoms)
        return (a, b)

    @property
    def C(self) -> float:
        return self.atoms[self.birth].mass

    @property
    def birth_atom(self) -> Atom:
        return self.atoms[self.birth]

    def others(self):
        return [a for i, a in enumerate(self.atoms) if i != self.birth]

    def g_tilde(self, v):
        v = np.asarray(v, dtype=float)
        return sum(a.mass * a.g(v) for a in self.others()) if self.others() else np.zeros_like(v)

    @property
    def g_tilde_slope0(self) -> float:
        return float(sum(a.mass * a.slope0 for a in self.others()))

    def theta(self, v):
        return np.asarray(v, dtype=float) - self.g_tilde(v)

    def clamped_rule(self, i: int) -> Callable:
        """Rule of atom ``i``; non-birth rules are capped at their value at ``zeta2``."""
        atom = self.atoms[i]
        if i == self.birth:
            return atom.g
        z2 = self.zeta2
        return lambda v: atom.g(np.minimum(v, z2))

    def chi(self, z):
        z = np.asarray(z, dtype=float)
        return 1.0 - sum(a.weight * a.slope0 * a.kernel.laplace(z) for a in self.atoms)

    def chi_dz(self, z):
        z = np.asarray(z, dtype=float)
        return -sum(a.weight * a.slope0 * a.kernel.laplace_dz(z) for a in self.atoms)

    def reflect(self) -> "ConvolutionSystem":
        atoms = tuple(Atom(a.kernel.reflect(), a.g, a.slope0, a.sup, a.weight, a.label)
                      for a in self.atoms)
        return ConvolutionSystem(atoms, -self.c, self.zeta2, self.beta, self.birth, self.kind,
                                 self.model, not self.reflected)

    def constant_residual(self, kappa: float) -> float:
        """``|kappa - g_tilde(kappa) - C g(kappa, tau0)|`` for a constant solution."""
        total = sum(a.mass * float(a.g(np.array(kappa))) for a in self.atoms)
        return abs(kappa - total)


def check_N(system: ConvolutionSystem, n: int = 10_000) -> list[Check]:
    checks = []
    z2 = system.zeta2
    v = np.linspace(0.0, z2, n + 1)
    if any(abs(a.weight - 1.0) > 0 for a in system.atoms):
        checks.append(Check("N:weights", False, "atom weights other than 1 are not supported"))
    mono = all(bool(np.all(np.diff(a.g(v)) >= -1e-15)) for a in system.others())
    checks.append(Check("N:monotone_non_birth", mono, "g(., tau) nondecreasing for tau != tau0"))
    theta = system.theta(v)
    inc = np.diff(theta) > 0
    checks.append(Check("N:theta_increasing", bool(inc.all()), "Theta strictly increasing on [0, zeta2]",
                        _first_failure(inc, v[1:])))
    birth = system.birth_atom
    max_g = birth.sup if math.isfinite(birth.sup) else float(np.max(birth.g(np.linspace(0, 10 * z2, n))))
    lhs, rhs = float(theta[-1]), system.C * max_g
    checks.append(Check("N:theta_zeta2", lhs > rhs, f"Theta(zeta2)={lhs:.6g} > C max g={rhs:.6g}", lhs - rhs))
    return checks


def check_P(system: ConvolutionSystem) -> Check:
    for i, atom in enumerate(system.atoms):
        iv = kc.positivity_interval(atom.kernel)
        if iv is None:
            continue
        v = np.linspace(0.0, system.zeta2, 1001)[1:]
        if np.all(atom.g(v) > 0):
            return Check("P:kernel_positive_near_zero", True,
                         f"atom {i} kernel > 0 on ({iv[0]:.3g}, {iv[1]:.3g})")
    return Check("P:kernel_positive_near_zero", False, "no atom with positive kernel near 0 and positive rule")


def resolvent_roots(c: float, beta: float) -> tuple[float, float, float]:
    """``(nu, mu, sigma)``: roots of ``z^2 - c z - beta`` and ``sqrt(c^2 + 4 beta)``."""
    sigma = math.sqrt(c * c + 4.0 * beta)
    # nu computed without cancellation
    mu = 0.5 * (c + sigma) if c >= 0 else 2.0 * beta / (sigma - c)
    nu = -beta / mu
    return nu, mu, sigma


def reduce(model: RDModel, c: float, beta: float | None = None) -> ConvolutionSystem:
    """Two-atom system of the traveling-wave equation ``y'' - c y' - f(y) + K * g(y(. - ch)) = 0``."""
    b, zeta2 = derive_beta(model)
    if beta is None:
        beta = b
    nu, mu, sigma = resolvent_roots(c, beta)
    res = kc.TwoSidedResolvent(nu, mu, sigma)
    k_h = model.K.translate(c * model.h)
    q = model.f.slope0
    f = model.f
    f_beta = lambda s: beta * np.asarray(s, dtype=float) - f(s)
    atoms = (
        Atom(kc.convolve(res, k_h), model.g, model.g.slope0, model.g.sup_value, label="birth"),
        Atom(res, f_beta, beta - q, math.inf, label="f_beta"),
    )
    return ConvolutionSystem(atoms, float(c), zeta2, float(beta), 0, "rd", model)


def unit_exponential(D: float, d: float, c: float) -> kc.OneSidedExponential:
    """``H_0``: one-sided exponential with rate ``(2D+d)/|c|`` and mass ``1/(2D+d)``."""
    if c == 0:
        raise ZeroSpeed("lattice reduction is undefined at c = 0")
    return kc.OneSidedExponential((2 * D + d) / abs(c), 1 if c > 0 else -1, 1.0 / abs(c), 0.0)


def reduce_lattice(model: LatticeModel, c: float) -> ConvolutionSystem:
    """Two-atom system of the lattice profile equation at speed ``c != 0``."""
    if c == 0:
        raise ZeroSpeed("lattice reduction is undefined at c = 0")
    H0 = unit_exponential(model.D, model.d, c)
    coupling = kc.DiscreteLattice(((-1, model.D), (1, model.D)))
    births = model.beta.translate(c * model.r)
    identity = lambda s: np.asarray(s, dtype=float)
    atoms = (
        Atom(kc.convolve(coupling, H0), identity, 1.0, math.inf, label="coupling"),
        Atom(kc.convolve(births, H0), model.g, model.g.slope0, model.g.sup_value, label="birth"),
    )
    return ConvolutionSystem(atoms, float(c), lattice_zeta2(model), None, 1, "lattice", model)


def positive_equilibria(model, zeta2: float | None = None) -> list[float]:
    """Positive roots of ``f(s) = g(s)`` (RD) or ``d s = g(s)`` (lattice) on ``(0, zeta2]``."""
    if isinstance(model, RDModel):
        zeta2 = zeta2 or derive_beta(model)[1]
        h = lambda s: model.g(s) - model.f(s)
    else:
        zeta2 = zeta2 or lattice_zeta2(model)
        h = lambda s: model.g(s) - model.d * np.asarray(s, dtype=float)
    return [r for r in sign_change_roots(h, 1e-9 * zeta2, zeta2) if r > 1e-9]
