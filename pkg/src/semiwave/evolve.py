"""Time-domain simulation of the delayed nonlocal equations.

Reaction-diffusion:
    ``u_t = u_xx - f(u) + int K(x - y) g(u(t - h, y)) dy``
Lattice:
    ``w_j' = D (w_{j+1} - 2 w_j + w_{j-1}) - d w_j + sum_k beta(j - k) g(w_k(t - r))``

Both use the method of lines with classical RK4.  The delayed birth term is
kept in a ring buffer of full snapshots taken every time step; stage values at
half steps average the two neighbouring buffer entries.  A traveling wave
``u(t, x) = phi(x + c t)`` moves with velocity ``-c``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainTooNarrow, NoCrossing, StabilityViolation, WindowTooShort
from .kernels import DiscreteLattice

log = logging.getLogger(__name__)

DIFFUSION_CFL = 0.4
RK4_LATTICE_LIMIT = 2.5
BOUNDARY_QUIET = 1e-8
NEGATIVE_TOL = 1e-12
STATIONARY_SLOPE = 0.02


@dataclass
class FieldHistory:
    x: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    snapshots: np.ndarray = field(repr=False)
    dt: float
    delay_steps: int
    kind: str = "rd"
    kappa: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


# -- initial data -----------------------------------------------------------

def bump(kappa: float, half_width: float = 5.0, center: float = 0.0) -> Callable:
    """``kappa`` on ``|x - center| <= half_width``, zero elsewhere (constant in time)."""
    return lambda x, theta=0.0: np.where(np.abs(x - center) <= half_width, kappa, 0.0)


def step(kappa: float, at: float = 0.0) -> Callable:
    """``kappa`` for ``x >= at`` and zero to the left."""
    return lambda x, theta=0.0: np.where(x >= at, kappa, 0.0)


def from_profile(profile, c: float | None = None) -> Callable:
    """History ``u(x, theta) = phi(x + c theta)`` of a solved profile, tails by ansatz."""
    c = profile.c if c is None else c
    t, v = profile.t, profile.values
    lam = profile.lam

    def init(x, theta=0.0):
        xi = np.asarray(x, dtype=float) + c * theta
        out = np.interp(xi, t, v)
        if profile.vanishing_side < 0:
            left = xi < t[0]
            out[left] = v[0] * np.exp(lam * (xi[left] - t[0]))
        else:
            right = xi > t[-1]
            out[right] = v[-1] * np.exp(lam * (xi[right] - t[-1]))
        return out

    return init


def from_samples(xs, us) -> Callable:
    xs, us = np.asarray(xs, dtype=float), np.asarray(us, dtype=float)
    return lambda x, theta=0.0: np.interp(x, xs, us, left=us[0], right=us[-1])


# -- integrator -------------------------------------------------------------

def _history(init, x, n_delay: int, dt: float) -> list[np.ndarray]:
    if callable(init):
        return [np.asarray(init(x, m * dt), dtype=float) * np.ones_like(x)
                for m in range(-n_delay, 1)]
    u0 = np.asarray(init, dtype=float)
    if u0.shape != x.shape:
        raise ValueError("initial array does not match the grid")
    return [u0.copy() for _ in range(n_delay + 1)]


def _run(local, birth, hist, dt, n_steps, stride, quiet_edges):
    """RK4 for ``u' = local(u) + birth(u(t - h))``; ``hist`` holds ``u`` at ``-h..0``."""
    n_delay = len(hist) - 1
    u = hist[-1].copy()
    if n_delay:
        ring = [birth(v) for v in hist]  # B at steps n - N .. n
    snaps, times = [u.copy()], [0.0]
    clipped = 0
    for n in range(1, n_steps + 1):
        if n_delay:
            b0, b1 = ring[0], ring[1]
            bm = 0.5 * (b0 + b1)
            k1 = local(u) + b0
            k2 = local(u + 0.5 * dt * k1) + bm
            k3 = local(u + 0.5 * dt * k2) + bm
            k4 = local(u + dt * k3) + b1
        else:
            f = lambda v: local(v) + birth(v)
            k1 = f(u)
            k2 = f(u + 0.5 * dt * k1)
            k3 = f(u + 0.5 * dt * k2)
            k4 = f(u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        neg = u < 0
        if np.any(neg):
            if np.min(u) < -NEGATIVE_TOL:
                clipped += int(neg.sum())
            u[neg] = 0.0
        if n_delay:
            ring.pop(0)
            ring.append(birth(u))
        if n % stride == 0 or n == n_steps:
            snaps.append(u.copy())
            times.append(n * dt)
            for side in quiet_edges:
                if u[side] > BOUNDARY_QUIET:
                    raise DomainTooNarrow(
                        f"boundary value {u[side]:.3g} > {BOUNDARY_QUIET:g} at t={n * dt:.4g}; widen the domain")
    if clipped:
        log.warning("clipped %d negative values below -%g", clipped, NEGATIVE_TOL)
    return np.array(times), np.array(snaps), clipped


def _delay_steps(h: float, dt: float) -> tuple[int, float]:
    """Steps per delay and a time step dividing ``h`` exactly (not above ``dt``)."""
    if h <= 0:
        return 0, dt
    n = math.ceil(h / dt - 1e-12)
    return n, h / n


def _quiet_edges(u0: np.ndarray) -> list[int]:
    return [i for i in (0, -1) if u0[i] < BOUNDARY_QUIET]


def _stride(T_end: float, dt: float, snapshots: int) -> int:
    return max(1, int(round(T_end / dt / snapshots)))


def _widening(run, half_width, auto_widen: int):
    """Call ``run(L)``; on DomainTooNarrow retry with ``L`` doubled up to ``auto_widen`` times."""
    for attempt in range(auto_widen + 1):
        try:
            H = run(half_width)
        except DomainTooNarrow:
            if attempt == auto_widen:
                raise
            log.info("domain half-width %g too narrow, doubling", half_width)
            half_width = 2 * half_width
            continue
        H.notes["half_width"] = half_width
        return H


def _attach_equilibrium(H: FieldHistory, model) -> FieldHistory:
    from .model import LatticeModel, derive_beta, lattice_zeta2, positive_equilibria

    zeta2 = lattice_zeta2(model) if isinstance(model, LatticeModel) else derive_beta(model)[1]
    eq = positive_equilibria(model, zeta2)
    H.kappa = eq[0] if len(eq) == 1 else None
    H.notes["zeta2"] = zeta2
    H.notes["max_value"] = float(H.snapshots.max())
    if H.notes["max_value"] > 1.05 * zeta2:
        log.warning("solution exceeds zeta2=%g by more than 5%%: max %g", zeta2, H.notes["max_value"])
    return H


def simulate_rd(model, init, T_end: float, half_width: float = 100.0, dx: float = 0.1,
                dt: float | None = None, snapshots: int = 200, center: float = 0.0,
                auto_widen: int = 3) -> FieldHistory:
    """Integrate the delayed nonlocal RD equation on ``[center - L, center + L]`` with zero-flux ends.

    Boundaries that start below 1e-8 must stay there; otherwise the domain is
    doubled and the run restarted (at most ``auto_widen`` times).
    """
    run = lambda L: _simulate_rd(model, init, T_end, L, dx, dt, snapshots, center)
    return _attach_equilibrium(_widening(run, half_width, auto_widen), model)


def _simulate_rd(model, init, T_end, half_width, dx, dt, snapshots, center) -> FieldHistory:
    h = model.h
    dt_max = DIFFUSION_CFL * dx * dx
    if h > 0:
        dt_max = min(dt_max, h / 4)
    if dt is None:
        dt = dt_max
    if dt > dt_max * (1 + 1e-12):
        raise StabilityViolation(f"dt={dt:g} exceeds min(0.4 dx^2, h/4)={dt_max:g}")
    n_delay, dt = _delay_steps(h, dt)

    n = int(round(half_width / dx))
    x = center + dx * np.arange(-n, n + 1)
    j, k = model.K.sample(dx)
    raw = k.sum() * dx
    k = k / raw  # probability kernel: renormalize the truncated samples
    notes = {"kernel_renormalization": raw}
    if abs(raw - 1) > 1e-12:
        log.info("nonlocal kernel renormalized by factor %.15g", 1 / raw)
    j0, j1 = int(j[0]), int(j[-1])
    pad_l, pad_r = max(j1, 0), max(-j0, 0)
    g, f = model.g, model.f

    def birth(u):
        v = g(u)
        U = np.concatenate([np.full(pad_l, v[0]), v, np.full(pad_r, v[-1])])
        U = U[pad_l - j1: pad_l + len(u) - j0]
        # direct sums: FFT roundoff ahead of a front would grow like exp(t)
        return np.convolve(U, k, mode="valid") * dx

    inv = 1.0 / (dx * dx)

    def local(u):
        lap = np.empty_like(u)
        lap[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
        lap[0] = 2 * (u[1] - u[0])
        lap[-1] = 2 * (u[-2] - u[-1])
        return lap * inv - f(u)

    hist = _history(init, x, n_delay, dt)
    n_steps = int(round(T_end / dt))
    times, snaps, clipped = _run(local, birth, hist, dt, n_steps, _stride(T_end, dt, snapshots),
                                 _quiet_edges(hist[-1]))
    notes["clipped"] = clipped
    return FieldHistory(x, times, snaps, dt, n_delay, "rd", None, notes)


def simulate_lattice(model, init, T_end: float, half_width: int = 200, dt: float | None = None,
                     snapshots: int = 200, auto_widen: int = 3) -> FieldHistory:
    """Integrate the delayed nonlocal lattice system on ``j = -J..J``; ends copy their neighbours."""
    run = lambda J: _simulate_lattice(model, init, T_end, int(J), dt, snapshots)
    return _attach_equilibrium(_widening(run, half_width, auto_widen), model)


def _simulate_lattice(model, init, T_end, half_width, dt, snapshots) -> FieldHistory:
    beta: DiscreteLattice = model.beta
    if abs(beta.offset) > 0 or any(abs(p - round(p)) > 1e-12 for p in beta.points):
        raise ValueError("lattice simulation needs integer-supported weights")
    D, d, r = model.D, model.d, model.r
    if dt is None:
        dt = min(0.5 * RK4_LATTICE_LIMIT / (4 * D + d), r / 4 if r > 0 else math.inf)
    if dt * (4 * D + d) > RK4_LATTICE_LIMIT:
        raise StabilityViolation(f"dt={dt:g}: dt (4D + d) = {dt * (4 * D + d):.3g} > {RK4_LATTICE_LIMIT}")
    if r > 0 and dt > r / 4 * (1 + 1e-12):
        raise StabilityViolation(f"dt={dt:g} exceeds r/4")
    n_delay, dt = _delay_steps(r, dt)
    x = np.arange(-half_width, half_width + 1, dtype=float)
    ks = beta.ks.astype(int)
    kern = np.zeros(ks.max() - ks.min() + 1)
    kern[ks - ks.min()] = beta.ws
    j0, j1 = int(ks.min()), int(ks.max())
    pad_l, pad_r = max(j1, 0), max(-j0, 0)
    g = model.g

    def birth(w):
        v = g(w)
        U = np.concatenate([np.full(pad_l, v[0]), v, np.full(pad_r, v[-1])])
        U = U[pad_l - j1: pad_l + len(w) - j0]
        return np.convolve(U, kern, mode="valid")

    def local(w):
        lap = np.empty_like(w)
        lap[1:-1] = w[2:] - 2 * w[1:-1] + w[:-2]
        lap[0] = w[1] - w[0]
        lap[-1] = w[-2] - w[-1]
        return D * lap - d * w

    hist = _history(init, x, n_delay, dt)
    n_steps = int(round(T_end / dt))
    times, snaps, clipped = _run(local, birth, hist, dt, n_steps, _stride(T_end, dt, snapshots),
                                 _quiet_edges(hist[-1]))
    return FieldHistory(x, times, snaps, dt, n_delay, "lattice", None, {"clipped": clipped})


# -- diagnostics ------------------------------------------------------------

def _crossings(x, u, level):
    above = np.flatnonzero(u >= level)
    if not len(above) or len(above) == len(u):
        return None
    i, k = above[0], above[-1]
    if i == 0:
        xl = x[0]
    else:
        xl = x[i - 1] + (level - u[i - 1]) / (u[i] - u[i - 1]) * (x[i] - x[i - 1])
    if k == len(u) - 1:
        xr = x[-1]
    else:
        xr = x[k] + (u[k] - level) / (u[k] - u[k + 1]) * (x[k + 1] - x[k])
    return xl, xr


def front_positions(history: FieldHistory, level: float):
    rows = [_crossings(history.x, u, level) for u in history.snapshots]
    return rows


def front_speed(history: FieldHistory, level: float | None = None,
                min_snapshots: int = 20) -> tuple[float, float]:
    """Least-squares velocities of the left and right ``level`` crossings over the last half."""
    if level is None:
        if history.kappa is None:
            raise ValueError("front_speed needs a level or a history with kappa")
        level = 0.5 * history.kappa
    t = history.times
    sel = np.flatnonzero(t >= 0.5 * t[-1])
    if len(sel) < min_snapshots:
        raise WindowTooShort(f"{len(sel)} snapshots in the fit window, need {min_snapshots}")
    xl, xr = [], []
    for i in sel:
        c = _crossings(history.x, history.snapshots[i], level)
        if c is None:
            raise NoCrossing(f"level {level:g} set is empty or everything at t={t[i]:.4g}")
        xl.append(c[0])
        xr.append(c[1])
    left = float(np.polyfit(t[sel], xl, 1)[0])
    right = float(np.polyfit(t[sel], xr, 1)[0])
    return left, right


def classify_wave(history: FieldHistory, probes=None, level: float | None = None,
                  band: float = 0.1) -> dict:
    """Expansion, extinction, stationary or mixed behaviour at fixed probe positions."""
    kappa = history.kappa
    if kappa is None:
        raise ValueError("classify_wave needs the equilibrium kappa")
    try:
        speeds = front_speed(history, level)
    except (NoCrossing, WindowTooShort):
        speeds = None
    if probes is None:
        probes = [0.0]
    tail = history.snapshots[-max(2, len(history.snapshots) // 4):]
    verdicts = {}
    for xp in probes:
        i = int(np.argmin(np.abs(history.x - xp)))
        vals = tail[:, i]
        if np.all(np.abs(vals - kappa) <= band * kappa):
            verdicts[float(xp)] = "expansion"
        elif np.all(vals <= 1e-3 * kappa) or (vals[-1] < vals[0] and vals[-1] <= band * kappa * 1e-2):
            verdicts[float(xp)] = "extinction"
        else:
            verdicts[float(xp)] = "mixed"
    if speeds is not None and min(abs(speeds[0]), abs(speeds[1])) <= STATIONARY_SLOPE:
        overall = "stationary"
    elif set(verdicts.values()) == {"expansion"}:
        overall = "expansion"
    elif set(verdicts.values()) == {"extinction"}:
        overall = "extinction"
    else:
        overall = "mixed"
    return {"classification": overall, "probes": verdicts, "front_speeds": speeds}
