"""The scalar birth map ``G(v) = Theta^{-1}(C g(v, tau0))`` and its dynamics.

``G`` encodes the constant solutions of a convolution system: its positive
fixed point is the equilibrium ``kappa`` and the interval ``[zeta1, zeta2]`` is
forward invariant.  Whether ``kappa`` attracts every orbit of ``G`` on
``(0, zeta2]`` decides whether semi-wavefronts are genuine wavefronts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from ._numerics import bisect_increasing, sign_change_roots, slope_at_zero
from .errors import NoZeta1, ThetaNotIncreasing

GLOBALLY_ATTRACTING = "globally_attracting"
NOT_ATTRACTING = "not_attracting"
UNDETERMINED = "undetermined"

SCAN_POINTS = 10_000
INVERSION_TOL = 1e-12
CONVERGED_TOL = 1e-8
CYCLE_TOL = 1e-10
MAX_PERIOD = 64


@dataclass
class GMap:
    func: Callable = field(repr=False)
    slope0: float
    zeta2: float
    zeta1: float | None = None
    fixed: tuple[float, ...] = ()
    zeta1_candidates: list = field(default_factory=list, repr=False)
    source: str = "function"

    def __call__(self, v):
        out = self.func(np.asarray(v, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    @property
    def positive_fixed(self) -> tuple[float, ...]:
        return tuple(s for s in self.fixed if s > 0)

    @property
    def kappa(self) -> float | None:
        pos = self.positive_fixed
        return pos[0] if len(pos) == 1 else None

    @cached_property
    def attractivity(self) -> str:
        return attractivity(self)

    @classmethod
    def from_function(cls, func: Callable, zeta2: float, slope0: float | None = None,
                      source: str = "function") -> "GMap":
        f = lambda v: np.asarray(func(np.asarray(v, dtype=float)), dtype=float)
        if slope0 is None:
            slope0 = slope_at_zero(f)
        G = cls(f, float(slope0), float(zeta2), source=source)
        _finish(G)
        return G

    def as_dict(self) -> dict:
        return {
            "zeta1": self.zeta1,
            "zeta2": self.zeta2,
            "kappa": self.kappa,
            "fixed_points": list(self.fixed),
            "slope0": self.slope0,
            "attractivity": self.attractivity,
            "source": self.source,
        }


def _finish(G: GMap) -> None:
    G.fixed = tuple(fixed_points(G))
    try:
        G.zeta1, G.zeta1_candidates = _zeta1(G)
    except NoZeta1:
        G.zeta1 = None


def theta_inverse(system, y, check: bool = True):
    """Inverse of ``Theta(v) = v - g_tilde(v)`` on ``[0, zeta2]`` by monotone bisection."""
    z2 = system.zeta2
    if check:
        v = np.linspace(0.0, z2, SCAN_POINTS + 1)
        th = system.theta(v)
        bad = np.flatnonzero(np.diff(th) <= 0)
        if len(bad):
            raise ThetaNotIncreasing(f"Theta not strictly increasing near v={v[bad[0] + 1]:.6g}")
    return bisect_increasing(system.theta, y, 0.0, z2, tol=INVERSION_TOL)


def generic_G(system) -> Callable:
    """``v -> Theta^{-1}(C g(v, tau0))`` built from the atoms alone."""
    theta_inverse(system, 0.0)  # monotonicity check
    C, g = system.C, system.birth_atom.g
    return lambda v: theta_inverse(system, C * g(np.asarray(v, dtype=float)), check=False)


def g_slope0(system) -> float:
    gt = system.g_tilde_slope0
    if gt >= 1 - 1e-12:
        return math.inf
    return system.C * system.birth_atom.slope0 / (1 - gt)


def build_G(system) -> GMap:
    """Birth map of a convolution system, specialized for the RD and lattice reductions."""
    model = system.model
    generic = generic_G(system)  # also certifies Theta
    if system.kind == "rd" and model is not None:
        f, g = model.f, model.g
        if f.name == "linear":
            rate = f.slope0
            func = lambda v: g(v) / rate
        else:
            hi = system.zeta2
            while float(f(hi)) < g.sup_value:
                hi *= 2
            func = lambda v: bisect_increasing(f, g(v), 0.0, hi, tol=INVERSION_TOL)
        source = "f^-1(g)"
    elif system.kind == "lattice" and model is not None:
        d, g = model.d, model.g
        func = lambda v: g(v) / d
        source = "g/d"
    else:
        func, source = generic, "theta_inverse"
    G = GMap(lambda v: np.asarray(func(np.asarray(v, dtype=float)), dtype=float),
             g_slope0(system), system.zeta2, source=source)
    _finish(G)
    return G


def _zeta1(G: GMap):
    s = np.linspace(0.0, G.zeta2, SCAN_POINTS + 1)[1:]
    gs = G(s)
    above = gs > s
    prefix = np.logical_and.accumulate(above)
    suffix_min = np.minimum.accumulate(gs[::-1])[::-1]
    ok = prefix & (gs <= suffix_min)
    idx = np.flatnonzero(ok)
    if not len(idx):
        raise NoZeta1("no t in (0, zeta2) with G > id on (0, t] and G(t) = min G on [t, zeta2]")
    # runs of valid grid points, logged as candidate intervals
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    candidates = [(float(s[a]), float(s[b])) for a, b in zip(starts, ends)]
    i = idx[-1]
    t = float(s[i])
    # refine only a boundary set by the minimum condition; where G(s) > s fails
    # next the boundary is a fixed point, which is itself inadmissible
    if i + 1 < len(s) and above[i + 1]:
        later = suffix_min[i + 1]
        pred = lambda x: G(x) > x and G(x) <= later
        lo, hi = t, float(s[i + 1])
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if pred(mid):
                lo = mid
            else:
                hi = mid
        t = lo
    return t, candidates


def zetas(G: GMap) -> tuple[float, float]:
    if G.zeta1 is None:
        raise NoZeta1("no valid zeta1 for this map")
    return G.zeta1, G.zeta2


def fixed_points(G: GMap, with_tangency: bool = False):
    """Roots of ``G(s) = s`` on ``[0, zeta2]``; 0 is always included.

    With ``with_tangency`` also returns the subset of touching (non-crossing) roots.
    """
    h = lambda s: G(s) - np.asarray(s, dtype=float)
    lo = 1e-9 * G.zeta2
    roots = [r for r in sign_change_roots(h, lo, G.zeta2, SCAN_POINTS) if r > lo]
    # touching roots: local minima of |G - id| that vanish without a sign change
    s = np.linspace(lo, G.zeta2, SCAN_POINTS + 1)
    a = np.abs(h(s))
    tangent = [] if abs(G.slope0 - 1.0) > 1e-9 else [0.0]
    for i in range(1, len(s) - 1):
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and a[i] < 1e-6:
            res = minimize_scalar(lambda x: abs(float(h(x))), bounds=(s[i - 1], s[i + 1]),
                                  method="bounded", options={"xatol": 1e-14})
            if abs(res.fun) <= 1e-12 and all(abs(res.x - r) > 1e-6 for r in roots):
                roots.append(float(res.x))
                tangent.append(float(res.x))
    out = [0.0] + sorted(roots)
    return (out, tangent) if with_tangency else out


def period_two_points(G: GMap, exclude: float = 1e-4) -> list[float]:
    """Roots of ``G(G(s)) = s`` on ``(0, zeta2]`` lying away from every fixed point."""
    h = lambda s: G(G(s)) - np.asarray(s, dtype=float)
    lo = 1e-6 * G.zeta2
    pts = sign_change_roots(h, lo, G.zeta2, SCAN_POINTS)
    fixed = fixed_points(G)
    return [p for p in pts if all(abs(p - f) > exclude * max(1.0, abs(f)) for f in fixed)]


def _iterate(G: GMap, x: float, n: int) -> float:
    for _ in range(n):
        x = float(G(x))
    return x


def _confirm_cycle(G: GMap, x: float, period: int, kappa: float) -> bool:
    """A near-repeat is a cycle only if ``G^p - id`` changes sign across ``x``.

    Slow orbits around a neutral fixed point also repeat to within the cycle
    tolerance; they fail this test because ``G^p - id`` keeps one sign there.
    """
    r = max(1e-7, 1e-3 * abs(x - kappa))
    lo, hi = x - r, x + r
    if lo <= kappa <= hi:
        return False
    return (_iterate(G, lo, period) - lo) * (_iterate(G, hi, period) - hi) < 0


def attractivity(G: GMap, seed: int = 0, n_points: int = 10_000, n_steps: int = 10_000) -> str:
    """Verdict on global attraction of ``kappa`` for ``G`` on ``(0, zeta2]``.

    Orbits of ``n_points`` log-uniform seeds are iterated; an orbit settling on a
    cycle away from ``kappa`` proves non-attraction.  Orbits still unresolved
    when the budget runs out are settled by the period-two test: an interval map
    without 2-cycles sends every orbit to a fixed point, and 0 repels.
    """
    pos = G.positive_fixed
    if len(pos) != 1:
        return NOT_ATTRACTING if len(pos) > 1 else UNDETERMINED
    kappa = pos[0]
    rng = np.random.default_rng(seed)
    x = np.exp(rng.uniform(math.log(1e-6 * G.zeta2), math.log(G.zeta2), n_points))
    depth = MAX_PERIOD + 1
    hist = np.empty((depth, n_points))
    for step in range(n_steps):
        x = G(x)
        hist[step % depth] = x
        done = np.abs(x - kappa) <= CONVERGED_TOL
        if step >= depth and step % MAX_PERIOD == 0:
            rows = [(step - p) % depth for p in range(1, depth)]
            diffs = np.abs(hist[rows] - x)  # diffs[p - 1] = |x_n - x_{n-p}|
            cycled = np.any(diffs <= CYCLE_TOL, axis=0) & ~done
            for i in np.flatnonzero(cycled)[:16]:
                period = int(np.argmax(diffs[:, i] <= CYCLE_TOL)) + 1
                if _confirm_cycle(G, float(x[i]), period, kappa):
                    return NOT_ATTRACTING
        if np.any(done):
            x, hist = x[~done], hist[:, ~done]
            if not len(x):
                return GLOBALLY_ATTRACTING
    if period_two_points(G):
        return NOT_ATTRACTING
    return GLOBALLY_ATTRACTING


def interval_image(G: GMap, m: float, M: float, n: int = SCAN_POINTS) -> tuple[float, float]:
    """``(min G, max G)`` over ``[m, M]``: dense scan refined near the extremes."""
    if M < m:
        raise ValueError("interval_image needs m <= M")
    if M == m:
        v = G(m)
        return v, v
    s = np.linspace(m, M, n + 1)
    gs = G(s)
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * gs))
        best = sign * gs[i]
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, n)]
        res = minimize_scalar(lambda t: sign * float(G(t)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        out.append(sign * min(best, res.fun))
    return out[0], out[1]


def chi0_negative(system) -> bool:
    """Whether ``chi(0) = 1 - sum_tau g'(0, tau) mass_tau`` is negative."""
    return float(system.chi(0.0)) < 0


def kappa_residual(G: GMap) -> float:
    return abs(G(G.kappa) - G.kappa) if G.kappa is not None else math.nan


__all__ = [
    "GMap", "build_G", "generic_G", "zetas", "fixed_points", "attractivity", "interval_image",
    "period_two_points", "theta_inverse", "chi0_negative", "GLOBALLY_ATTRACTING",
    "NOT_ATTRACTING", "UNDETERMINED",
]
