"""Semi-wavefront profiles of a convolution system.

The profile solves ``phi = A phi`` with
``A phi(t) = sum_tau int K(s, tau) g(phi(t - s), tau) ds`` on a truncated grid
``[-T, T]``.  Off the grid the profile is continued by the exponential ansatz
``phi(-T) exp(lambda (t + T))`` on the vanishing side and by the constant
``phi(T)`` on the other.  Non-birth rules are capped at ``zeta2`` so that
iterates stay bounded.

Profiles are computed in the orientation where they vanish at ``-inf``
(positive characteristic roots); speeds at or below ``c_*^-`` are handled by
reflecting the system and reflecting the answer back.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import characteristic as chmod
from . import kernels as kc
from .errors import DichotomyViolation, GapSpeed, NonConvergent, StripTooNarrow, WindowTooShort
from .gmap import GMap, build_G, interval_image

log = logging.getLogger(__name__)

TINY = 10 * np.finfo(float).tiny
WAVEFRONT_TOL = 1e-3
DECAY_RELATIVE_RESIDUAL = 1e-3
MIN_FIT_POINTS = 20
TAIL_FIT_POINTS = 40


@dataclass
class SolveOptions:
    T: float = 200.0
    dx: float = 0.05
    tol: float = 1e-6
    max_iter: int = 10_000
    damping: float = 1.0
    damping_floor: float = 0.05
    delta: float | None = None
    width_factor: float = 10.0
    plateau: int = 1000


@dataclass
class SubSuper:
    lam: float
    nu: float | None
    epsilon: float | None
    delta: float
    degenerate: bool

    def phi_plus(self, t):
        return self.delta * np.exp(self.lam * np.asarray(t, dtype=float))

    def phi_minus(self, t):
        t = np.asarray(t, dtype=float)
        if self.epsilon is None:
            return np.zeros_like(t)
        tm = np.minimum(t, 0.0)
        return np.where(t < 0, self.delta * np.exp(self.lam * tm) * (1 - np.exp(self.epsilon * tm)), 0.0)


@dataclass
class WaveProfile:
    t: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    c: float
    lam: float
    residual: float
    zeta1: float
    zeta2: float
    window: float
    iterations: int = 0
    a_values: np.ndarray | None = field(default=None, repr=False)
    sub_super: SubSuper | None = None
    reflected: bool = False
    decay_hat: float | None = None
    classification: str | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def interior(self) -> np.ndarray:
        return (self.t >= -self.T + self.window) & (self.t <= self.T - self.window)

    @property
    def vanishing_side(self) -> int:
        """-1 if the profile vanishes at ``-inf``, +1 if at ``+inf``."""
        return 1 if self.reflected else -1

    def max_slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.values))) / self.dx)

    def meta(self) -> dict:
        ss = self.sub_super
        return {
            "c": self.c,
            "lambda": self.lam,
            "nu": None if ss is None else ss.nu,
            "epsilon": None if ss is None else ss.epsilon,
            "delta": None if ss is None else ss.delta,
            "residual": self.residual,
            "iterations": self.iterations,
            "decay_hat": self.decay_hat,
            "classification": self.classification,
            "T": self.T,
            "dx": self.dx,
            "window": self.window,
            "zeta1": self.zeta1,
            "zeta2": self.zeta2,
            "sup_phi": float(self.values.max()),
            "reflected": self.reflected,
            "diagnostics": self.diagnostics,
        }


# -- discretized operator ---------------------------------------------------

def sampled_kernels(system, dx: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Each atom kernel on ``j * dx``, rescaled to its exact mass (times the atom weight)."""
    out = []
    for atom in system.atoms:
        kern = atom.kernel
        if kern.breaks():
            j, k = kern.cell_sample(dx)  # point samples lose an order at jumps
        else:
            j, k = kern.sample(dx)
        if isinstance(kern, kc.TwoSidedResolvent):
            # Euler-Maclaurin correction for the derivative jump at s = 0
            k = k.copy()
            k[j == 0] += dx / 12 * (kern.nu - kern.mu) / kern.sigma
        total = k.sum() * dx
        target = atom.mass
        if total > 0:
            k = k * (target / total)
        out.append((j, k))
    return out


def _extend(u: np.ndarray, dx: float, n_left: int, n_right: int, lam: float,
            right_rate: float | None = None, linear_prefactor: bool = False) -> np.ndarray:
    """Continue grid values: ``(a + b s) e^{lam s}`` on the left, constant (or exponential) on the right."""
    s = dx * np.arange(-n_left, 0)
    left = u[0] * np.exp(lam * s)
    if linear_prefactor and n_left:
        # double characteristic root: the tail is (a + b t) e^{lam t}
        m = min(TAIL_FIT_POINTS, len(u))
        x = dx * np.arange(m)
        b = np.polyfit(x, u[:m] * np.exp(-lam * x), 1)[0]
        left = np.maximum(u[0] + b * s, 0.0) * np.exp(lam * s)
    if right_rate is None:
        right = np.full(n_right, u[-1])
    else:
        right = u[-1] * np.exp(right_rate * dx * np.arange(1, n_right + 1))
    return np.concatenate([left, u, right])


def _convolve(rule, u, j, k, dx, lam, right_rate=None, linear_prefactor=False):
    """``sum_j k_j rule(u(t - j dx)) dx`` on the grid, continuing ``u`` by the tail ansatz."""
    j0, j1 = int(j[0]), int(j[-1])
    n_left, n_right = max(j1, 0), max(-j0, 0)
    U = _extend(u, dx, n_left, n_right, lam, right_rate, linear_prefactor)
    U = U[n_left - j1: n_left + len(u) - j0]  # grid indices -j1 .. N-1-j0
    return np.convolve(rule(U), k, mode="valid") * dx


class Operator:
    """``A`` (and its linearization ``L``) on a fixed grid."""

    def __init__(self, system, dx: float, linear_prefactor: bool = False):
        self.system = system
        self.dx = dx
        self.linear_prefactor = linear_prefactor
        self.kernels = sampled_kernels(system, dx)
        self.rules = [system.clamped_rule(i) for i in range(len(system.atoms))]

    def A(self, u, lam):
        total = np.zeros_like(u)
        for (j, k), rule in zip(self.kernels, self.rules):
            total += _convolve(rule, u, j, k, self.dx, lam, None, self.linear_prefactor)
        return total

    def psi(self, z: float) -> float:
        """Convexified characteristic function of the discretized kernels."""
        total = -1.0
        for (j, k), atom in zip(self.kernels, self.system.atoms):
            total += atom.slope0 * float(np.sum(k * np.exp(-z * self.dx * j))) * self.dx
        return total

    def discrete_lambda(self, lam: float, z_min: float) -> float:
        """Root of the discrete characteristic function between 0 and ``z_min``.

        Using it in the tail ansatz keeps the boundary consistent with the
        discrete operator; the continuous root would make the profile creep
        along the grid at a rate set by the quadrature error.
        """
        lo, hi = sorted((0.0, z_min))
        try:
            if self.psi(lo) * self.psi(hi) < 0:
                return float(brentq(self.psi, lo, hi, xtol=1e-15))
        except (ValueError, OverflowError):
            pass
        return lam

    def L(self, u, lam, right_rate=None):
        total = np.zeros_like(u)
        for (j, k), atom in zip(self.kernels, self.system.atoms):
            slope = atom.slope0
            total += _convolve(lambda v: slope * v, u, j, k, self.dx, lam, right_rate)
        return total


def apply_A(system, values, lam: float, dx: float):
    """One application of ``A`` to grid values (tails by ansatz)."""
    return Operator(system, dx).A(np.asarray(values, dtype=float), lam)


# -- characteristic data -----------------------------------------------------

def _roots(system):
    cf = chmod.characteristic(system)
    try:
        return chmod.real_roots(cf)
    except StripTooNarrow:
        m = chmod.minimize(cf)
        if m.value < 0:
            lo, hi = chmod._edges(cf.strip)
            edge = hi if m.z > 0 else lo
            r = chmod._root_beyond(cf, m.z, -np.sign(m.z), lo if m.z > 0 else hi)
            return chmod.RootSet("one", (r,) if r is not None else (), edge, m.value)
        return chmod.RootSet("none", (), m.z, m.value)


def sub_super(system, delta: float | None = None, zeta1: float | None = None) -> SubSuper:
    """Exponential super-solution ``delta e^{lambda t}`` and its companion sub-solution."""
    roots = _roots(system)
    if not roots.roots:
        raise GapSpeed(f"speed c={system.c:.6g} lies in the gap: no real characteristic root")
    lam = roots.lambda1
    if delta is None:
        delta = 0.5 * zeta1 if zeta1 is not None else 0.5
    degenerate = roots.kind == "tangent"
    nu = eps = None
    if not degenerate and roots.min_value < 0 and abs(roots.minimizer) > abs(lam):
        nu = float(roots.minimizer)  # chi is largest there
        eps = nu - lam
    else:
        log.info("degenerate characteristic root at c=%g: sub-solution omitted", system.c)
    return SubSuper(float(lam), nu, eps, float(delta), degenerate)


# -- solver -----------------------------------------------------------------

def _window(system, T: float, factor: float) -> float:
    width = max(a.kernel.width() for a in system.atoms)
    return min(factor * width, T / 4)


def _anchor(u, t, dx, level, lam):
    """Shift by whole grid steps so the first crossing of ``level`` lies within ``dx / 2`` of 0.

    Whole-step shifts commute with the discrete operator, so anchoring adds no
    interpolation error to the fixed point.
    """
    above = np.flatnonzero(u >= level)
    if not len(above) or above[0] == 0:
        return u
    i = above[0]
    ts = t[i - 1] + (level - u[i - 1]) / (u[i] - u[i - 1]) * dx
    k = int(round(ts / dx))
    if k == 0:
        return u
    out = np.empty_like(u)
    if k > 0:
        out[:-k] = u[k:]
        out[-k:] = u[-1]
    else:
        out[-k:] = u[:k]
        out[:-k] = u[0] * np.exp(lam * dx * np.arange(k, 0))
    return out


def solve(system, options: SolveOptions | None = None, G: GMap | None = None) -> WaveProfile:
    """Damped fixed-point iteration for ``phi = A phi`` at the speed of ``system``."""
    opts = options or SolveOptions()
    roots = _roots(system)
    if not roots.roots:
        raise GapSpeed(f"speed c={system.c:.6g} lies in the gap (c_*^-, c_*^+)")
    if roots.lambda1 < 0:
        prof = solve(system.reflect(), opts, G)
        return _reflect_profile(prof)

    G = G or build_G(system)
    zeta1, zeta2 = G.zeta1, G.zeta2
    if zeta1 is None:
        from .errors import NoZeta1

        raise NoZeta1("G has no valid zeta1")
    ss = sub_super(system, opts.delta, zeta1)
    lam = ss.lam
    dx = opts.dx
    n = int(round(opts.T / dx))
    t = dx * np.arange(-n, n + 1)
    W = _window(system, t[-1], opts.width_factor)
    win = (t >= -t[-1] + W) & (t <= t[-1] - W)
    op = Operator(system, dx, linear_prefactor=ss.degenerate)
    lam_grid = op.discrete_lambda(lam, roots.minimizer)

    phi = np.minimum(ss.phi_plus(t), zeta2)
    theta = opts.damping
    best = math.inf
    best_it = 0
    level = 0.5 * zeta1
    for it in range(1, opts.max_iter + 1):
        Aphi = op.A(phi, lam_grid)
        r = float(np.max(np.abs(phi - Aphi)[win]))
        if r <= opts.tol:
            break
        # small non-monotone wiggles are normal; only a real rise cuts the step
        if r > 2 * best and theta > opts.damping_floor:
            theta = max(0.5 * theta, opts.damping_floor)
            log.debug("sweep %d: residual rose to %.3g, damping now %.3g", it, r, theta)
        if r < 0.9 * best:
            best, best_it = r, it
        elif it - best_it > opts.plateau:
            hint = ""
            if phi[0] > opts.tol:
                # the exponential tail continuation ignores the nonlinearity at phi(-T)
                hint = f"; phi(-T)={phi[0]:.3g} is not small, increase T"
            raise NonConvergent(f"residual plateau at {best:.3g} (tol {opts.tol:g}) after {it} sweeps{hint}")
        phi = _anchor((1 - theta) * phi + theta * Aphi, t, dx, level, lam_grid)
        np.clip(phi, 0.0, None, out=phi)
    else:
        raise NonConvergent(f"residual {r:.3g} above tol {opts.tol:g} after {opts.max_iter} sweeps")

    prof = WaveProfile(t, phi, float(system.c), lam, r, zeta1, zeta2, W, it, Aphi, ss)
    prof.diagnostics["damping"] = theta
    prof.diagnostics["lambda_grid"] = lam_grid
    prof.diagnostics["sup_bound"] = sup_bound(system, G)
    return prof


def _reflect_profile(p: WaveProfile) -> WaveProfile:
    return WaveProfile(-p.t[::-1], p.values[::-1].copy(), -p.c, -p.lam, p.residual, p.zeta1,
                       p.zeta2, p.window, p.iterations,
                       None if p.a_values is None else p.a_values[::-1].copy(),
                       p.sub_super, not p.reflected, p.decay_hat, p.classification,
                       dict(p.diagnostics))


def sup_bound(system, G: GMap) -> float:
    """``min{zeta2, sup g(., tau0) G'(0) / g'(0, tau0)}``."""
    b = system.birth_atom
    sup = b.sup
    if not math.isfinite(sup):
        sup = float(np.max(b.g(np.linspace(0.0, 10 * system.zeta2, 10_001))))
    return min(system.zeta2, sup * G.slope0 / b.slope0)


# -- diagnostics ------------------------------------------------------------

def decay_rate(profile: WaveProfile) -> float:
    """Least-squares slope of ``ln phi`` on the vanishing side.

    Points qualify when ``10 * tiny <= phi <= zeta1 / 10``, they lie in the
    interior window, and ``phi`` is a fixed point to relative accuracy 1e-3 there.
    """
    phi, t = profile.values, profile.t
    sel = (phi >= TINY) & (phi <= profile.zeta1 / 10) & profile.interior
    if profile.a_values is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(phi - profile.a_values) / phi
        sel &= rel <= DECAY_RELATIVE_RESIDUAL
    # vanishing side only
    sel &= (t < 0) if profile.vanishing_side < 0 else (t > 0)
    if sel.sum() < MIN_FIT_POINTS:
        raise WindowTooShort(f"only {int(sel.sum())} points on the vanishing side qualify for the fit")
    slope = float(np.polyfit(t[sel], np.log(phi[sel]), 1)[0])
    profile.decay_hat = slope
    return slope


def terminal_windows(profile: WaveProfile) -> tuple[np.ndarray, np.ndarray]:
    """Masks of the outermost stretches of the interior window on each side."""
    t, T, W = profile.t, profile.T, profile.window
    length = max(W, 5 * profile.dx)
    left = (t >= -T + W) & (t <= -T + W + length)
    right = (t <= T - W) & (t >= T - W - length)
    return left, right


def classify(profile: WaveProfile, G: GMap) -> str:
    """Dichotomy classification: trivial, semi_wavefront or wavefront."""
    phi = profile.values
    if float(phi.max()) < TINY:
        profile.classification = "trivial"
        return "trivial"
    z1 = profile.zeta1
    left, right = terminal_windows(profile)
    diag = {}
    sides = {}
    for name, mask in (("left", left), ("right", right)):
        vals = phi[mask]
        lo, hi = float(vals.min()), float(vals.max())
        diag[name] = {"min": lo, "max": hi}
        if hi <= z1 / 10:
            sides[name] = "vanishing"
        elif lo > z1:
            sides[name] = "persistent"
        else:
            sides[name] = "undecided"
    profile.diagnostics["terminal"] = diag
    hint = "lengthen the grid (T) or tighten tol"
    if list(sides.values()).count("vanishing") == 2:
        raise DichotomyViolation(f"profile vanishes at both ends (pulse); {hint}")
    if sorted(sides.values()) != ["persistent", "vanishing"]:
        raise DichotomyViolation(f"terminal windows {sides} do not show the dichotomy; {hint}")
    van = "left" if sides["left"] == "vanishing" else "right"
    per = "right" if van == "left" else "left"
    vmask = left if van == "left" else right
    vals = phi[vmask] if van == "right" else phi[vmask][::-1]  # ordered toward the far end
    half = len(vals) // 2
    if half and vals[half:].max() > vals[:half].max() * (1 + 1e-9):
        raise DichotomyViolation(f"{van} tail is not decaying; {hint}")
    pmask = right if per == "right" else left
    m_, M_ = float(phi[pmask].min()), float(phi[pmask].max())
    profile.diagnostics["persistent_range"] = (m_, M_)
    kappa = G.kappa
    if kappa is not None and np.max(np.abs(phi[pmask] - kappa)) <= WAVEFRONT_TOL:
        cls = "wavefront"
    else:
        cls = "semi_wavefront"
    profile.classification = cls
    return cls


def containment(profile: WaveProfile, G: GMap) -> tuple[bool, float]:
    """Whether ``[m', M']`` lies in ``G([m', M'])`` up to ``10 dx max|phi'|``; returns slack."""
    m_, M_ = profile.diagnostics.get("persistent_range") or (None, None)
    if m_ is None:
        classify(profile, G)
        m_, M_ = profile.diagnostics["persistent_range"]
    lo, hi = interval_image(G, m_, M_)
    tol = 10 * profile.dx * profile.max_slope()
    slack = max(lo - m_, M_ - hi)
    return slack <= tol, slack
