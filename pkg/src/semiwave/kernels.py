"""Nonnegative kernels on the line and the lattice, with bilateral Laplace transforms.

A kernel is an immutable description of a density ``K(s) >= 0`` together with
the maximal open strip ``(a, b)`` on which ``L(z) = int K(s) exp(-z s) ds``
converges.  Point-mass (lattice) kernels use ``sum_k beta(k) exp(-z (k + offset))``.

Closed forms are used wherever they exist; tabulated kernels are integrated
with the trapezoid rule and generic convolutions fall back on quadrature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

from .errors import OutOfStrip, ValidationError

INF = math.inf

#: Strip bounds estimated from finitely many lattice weights beyond this are reported as infinite.
STRIP_CUTOFF = 50.0

#: Relative tail mass ignored when truncating kernels for sampling.
TAIL_EPS = 1e-16

#: Gaussian tails are cut at this many standard deviations.
GAUSS_SDS = 12.0

#: Gauss-Legendre nodes per smooth piece in cell-averaged sampling.
GAUSS_NODES = 8


def _as_array(x):
    return np.asarray(x, dtype=float)


class Kernel:
    """Base class; subclasses are frozen dataclasses."""

    family = "kernel"

    # -- interface -------------------------------------------------------
    def density(self, s):
        raise NotImplementedError

    @property
    def strip(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def total_mass(self) -> float:
        return float(self._laplace(0.0))

    def _laplace(self, z):
        raise NotImplementedError

    def _laplace_dz(self, z):
        raise NotImplementedError

    def extent(self, eps: float = TAIL_EPS) -> tuple[float, float]:
        raise NotImplementedError

    def reflect(self) -> "Kernel":
        raise NotImplementedError

    def translate(self, a: float) -> "Kernel":
        """Kernel ``s -> K(s - a)``."""
        if a == 0.0:
            return self
        return ConvolutionOf(self, DiscreteLattice(((0, 1.0),), offset=float(a)))

    def params(self) -> dict:
        return {}

    # -- shared behaviour ------------------------------------------------
    def in_strip(self, z) -> bool:
        a, b = self.strip
        z = _as_array(z)
        inside = (z > a) & (z < b)
        return bool(np.all(inside | (z == 0.0)))

    def laplace(self, z):
        """Bilateral Laplace transform; raises OutOfStrip outside the strip."""
        if not self.in_strip(z):
            raise OutOfStrip(f"z={z} outside strip {self.strip} of {self.family}")
        out = self._laplace(_as_array(z))
        return float(out) if np.ndim(out) == 0 else out

    def laplace_dz(self, z):
        if not self.in_strip(z):
            raise OutOfStrip(f"z={z} outside strip {self.strip} of {self.family}")
        out = self._laplace_dz(_as_array(z))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, step: float, lo: float | None = None, hi: float | None = None):
        """Density on the grid ``j * step`` covering ``[lo, hi]``.

        Returns ``(j, values)`` with integer offsets ``j``.
        """
        elo, ehi = self.extent()
        lo = elo if lo is None else lo
        hi = ehi if hi is None else hi
        j = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1)
        return j, self.density(j * step)

    def breaks(self) -> tuple[float, ...]:
        """Points where the density jumps (empty for continuous densities)."""
        return ()

    def cell_sample(self, step: float, lo: float | None = None, hi: float | None = None):
        """Hat-function weights ``(1/step) int K(s) hat(s/step - j) ds`` on the grid ``j * step``.

        Unlike point samples these stay second-order accurate across jumps of
        the density.  Each cell is split at the jumps and integrated by
        Gauss-Legendre, so the integrand is smooth on every piece.
        """
        elo, ehi = self.extent()
        lo = elo if lo is None else lo
        hi = ehi if hi is None else hi
        j = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1)
        nodes = np.union1d(j * step, [b for b in self.breaks() if j[0] * step < b < j[-1] * step])
        a, b = nodes[:-1], nodes[1:]
        xg, wg = np.polynomial.legendre.leggauss(GAUSS_NODES)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        s = mid[:, None] + half[:, None] * xg[None, :]
        f = self.density(s) * wg[None, :] * half[:, None]
        cell = np.floor(mid / step + 1e-9).astype(int)  # left grid index of each piece
        frac = s / step - cell[:, None]
        out = np.zeros(len(j) + 1)
        np.add.at(out, cell - j[0], (f * (1 - frac)).sum(axis=1))
        np.add.at(out, cell - j[0] + 1, (f * frac).sum(axis=1))
        return j, out[:-1] / step

    def moments(self) -> tuple[float, float]:
        """Mean and standard deviation of the normalized density."""
        lo, hi = self.extent(1e-12)
        step = max((hi - lo) / 20000, 1e-4)
        j, v = self.sample(step, lo, hi)
        s = j * step
        m0 = v.sum()
        mean = float((s * v).sum() / m0)
        var = float(((s - mean) ** 2 * v).sum() / m0)
        return mean, math.sqrt(max(var, 0.0))

    def width(self) -> float:
        mean, sd = self.moments()
        return abs(mean) + sd


@dataclass(frozen=True)
class ShiftedGaussian(Kernel):
    """Normal density with the given variance, centred at ``-shift``.

    ``ShiftedGaussian(2, rho)`` is ``exp(-(s + rho)**2 / 4) / sqrt(4 pi)``.
    """

    variance: float = 2.0
    shift: float = 0.0
    family = "gaussian"

    def __post_init__(self):
        if not self.variance > 0:
            raise ValidationError("gaussian variance must be positive")

    def density(self, s):
        s = _as_array(s)
        v = self.variance
        return np.exp(-((s + self.shift) ** 2) / (2 * v)) / math.sqrt(2 * math.pi * v)

    @property
    def strip(self):
        return (-INF, INF)

    @property
    def total_mass(self):
        return 1.0

    def _laplace(self, z):
        return np.exp(0.5 * self.variance * z * z + self.shift * z)

    def _laplace_dz(self, z):
        return (self.variance * z + self.shift) * self._laplace(z)

    def extent(self, eps=TAIL_EPS):
        half = max(GAUSS_SDS, math.sqrt(2 * math.log(1 / eps))) * math.sqrt(self.variance)
        return (-self.shift - half, -self.shift + half)

    def reflect(self):
        return ShiftedGaussian(self.variance, -self.shift)

    def translate(self, a):
        return ShiftedGaussian(self.variance, self.shift - a)

    def moments(self):
        return -self.shift, math.sqrt(self.variance)

    def params(self):
        return {"variance": self.variance, "shift": self.shift}


@dataclass(frozen=True)
class OneSidedExponential(Kernel):
    """``scale * exp(-rate |s - offset|)`` on the half line ``side * (s - offset) >= 0``."""

    rate: float
    side: int = 1
    scale: float | None = None
    offset: float = 0.0
    family = "one_sided"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError("one-sided exponential rate must be positive")
        if self.side not in (1, -1):
            raise ValidationError("side must be +1 or -1")
        if self.scale is None:
            object.__setattr__(self, "scale", float(self.rate))

    def density(self, s):
        u = self.side * (_as_array(s) - self.offset)
        return np.where(u >= 0, self.scale * np.exp(-self.rate * np.maximum(u, 0.0)), 0.0)

    @property
    def strip(self):
        return (-self.rate, INF) if self.side == 1 else (-INF, self.rate)

    @property
    def total_mass(self):
        return self.scale / self.rate

    def _laplace(self, z):
        return self.scale * np.exp(-z * self.offset) / (self.rate + self.side * z)

    def _laplace_dz(self, z):
        return self._laplace(z) * (-self.offset - self.side / (self.rate + self.side * z))

    def extent(self, eps=TAIL_EPS):
        far = self.offset + self.side * math.log(1 / eps) / self.rate
        return (min(self.offset, far), max(self.offset, far))

    def breaks(self):
        return (self.offset,)

    def reflect(self):
        return OneSidedExponential(self.rate, -self.side, self.scale, -self.offset)

    def translate(self, a):
        return OneSidedExponential(self.rate, self.side, self.scale, self.offset + a)

    def params(self):
        return {"rate": self.rate, "side": self.side, "scale": self.scale, "offset": self.offset}


@dataclass(frozen=True)
class TwoSidedResolvent(Kernel):
    """Green kernel ``exp(nu s)/sigma`` for ``s >= 0`` and ``exp(mu s)/sigma`` for ``s <= 0``."""

    nu: float
    mu: float
    sigma: float
    family = "resolvent"

    def __post_init__(self):
        if not (self.nu < 0 < self.mu and self.sigma > 0):
            raise ValidationError("resolvent needs nu < 0 < mu and sigma > 0")

    def density(self, s):
        s = _as_array(s)
        return np.exp(self.nu * np.maximum(s, 0.0) + self.mu * np.minimum(s, 0.0)) / self.sigma

    @property
    def strip(self):
        return (self.nu, self.mu)

    @property
    def total_mass(self):
        return (self.mu - self.nu) / (self.sigma * (-self.nu * self.mu))

    def _laplace(self, z):
        return (self.mu - self.nu) / self.sigma / ((z - self.nu) * (self.mu - z))

    def _laplace_dz(self, z):
        return self._laplace(z) * (1.0 / (self.mu - z) - 1.0 / (z - self.nu))

    def extent(self, eps=TAIL_EPS):
        return (math.log(eps) / self.mu, math.log(eps) / self.nu)

    def reflect(self):
        return TwoSidedResolvent(-self.mu, -self.nu, self.sigma)

    def params(self):
        return {"nu": self.nu, "mu": self.mu, "sigma": self.sigma}


def _tail_rate(ks: np.ndarray, ws: np.ndarray, cutoff: float) -> float:
    """Cauchy-Hadamard decay rate ``-limsup ln w(k) / k`` estimated from a finite tail."""
    keep = ws > 0
    ks, ws = ks[keep], ws[keep]
    if len(ks) < 3:
        return INF
    half = max(3, len(ks) // 2)
    ks, lw = ks[-half:], np.log(ws[-half:])
    rates = -np.diff(lw) / np.diff(ks)
    # rates growing without bound: super-exponential decay, transform is entire
    if len(rates) >= 2 and np.all(np.diff(rates) > 1e-9 * np.maximum(1.0, np.abs(rates[1:]))):
        return INF
    r = float(rates[-1])
    if r > cutoff:
        return INF
    return max(r, 0.0)


@dataclass(frozen=True)
class DiscreteLattice(Kernel):
    """Point masses ``beta(k)`` at ``k + offset``, ``k`` integer."""

    weights: tuple[tuple[int, float], ...]
    offset: float = 0.0
    cutoff: float = STRIP_CUTOFF
    family = "lattice"

    def __post_init__(self):
        w = tuple(sorted((int(k), float(v)) for k, v in self.weights))
        if not w:
            raise ValidationError("lattice kernel needs at least one weight")
        if any(v < 0 for _, v in w):
            raise ValidationError("lattice weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_mapping(cls, weights: Mapping[int, float], offset: float = 0.0) -> "DiscreteLattice":
        return cls(tuple((int(k), float(v)) for k, v in weights.items()), offset)

    @classmethod
    def from_sequence(cls, values: Sequence[float], first_index: int, offset: float = 0.0):
        return cls(tuple((first_index + i, float(v)) for i, v in enumerate(values)), offset)

    @property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.weights], dtype=float)

    @property
    def ws(self) -> np.ndarray:
        return np.array([v for _, v in self.weights])

    @property
    def points(self) -> np.ndarray:
        return self.ks + self.offset

    def density(self, s):
        s = _as_array(s)
        out = np.zeros_like(s)
        for x, w in zip(self.points, self.ws):
            out = out + np.where(np.abs(s - x) <= 1e-12, w, 0.0)
        return out

    @property
    def strip(self):
        ks, ws = self.ks, self.ws
        neg = ks < 0
        gamma_plus = _tail_rate(-ks[neg][::-1], ws[neg][::-1], self.cutoff)
        pos = ks > 0
        gamma_minus = -_tail_rate(ks[pos], ws[pos], self.cutoff)
        return (gamma_minus, gamma_plus)

    @property
    def total_mass(self):
        return float(self.ws.sum())

    def _laplace(self, z):
        z = _as_array(z)
        terms = self.ws * np.exp(-np.multiply.outer(z, self.points))
        return terms.sum(axis=-1)

    def _laplace_dz(self, z):
        z = _as_array(z)
        terms = -self.points * self.ws * np.exp(-np.multiply.outer(z, self.points))
        return terms.sum(axis=-1)

    def extent(self, eps=TAIL_EPS):
        p = self.points
        return (float(p.min()), float(p.max()))

    def sample(self, step, lo=None, hi=None):
        # point masses become discrete deltas of height w/step at the nearest node
        elo, ehi = self.extent()
        lo = elo if lo is None else lo
        hi = ehi if hi is None else hi
        j = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1)
        v = np.zeros(len(j))
        for x, w in zip(self.points, self.ws):
            idx = int(round(x / step)) - j[0]
            if 0 <= idx < len(j):
                v[idx] += w / step
        return j, v

    def moments(self):
        w, x = self.ws, self.points
        mean = float((w * x).sum() / w.sum())
        return mean, float(math.sqrt(max(((x - mean) ** 2 * w).sum() / w.sum(), 0.0)))

    def reflect(self):
        return DiscreteLattice(tuple((-k, w) for k, w in self.weights), -self.offset, self.cutoff)

    def translate(self, a):
        return DiscreteLattice(self.weights, self.offset + a, self.cutoff)

    def params(self):
        return {"weights": {str(k): w for k, w in self.weights}, "offset": self.offset}


@dataclass(frozen=True)
class GridTabulated(Kernel):
    """Samples on the uniform grid ``start + i * step``; linear in between, zero outside."""

    start: float
    step: float
    values: tuple[float, ...]
    family = "grid"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValidationError("tabulated kernel needs at least two samples")
        if min(vals) < 0:
            raise ValidationError("tabulated kernel has negative samples")
        if not self.step > 0:
            raise ValidationError("tabulated kernel step must be positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_csv(cls, path) -> "GridTabulated":
        s, v = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    s.append(float(row[0]))
                    v.append(float(row[1]))
                except ValueError:
                    if s:
                        raise ValidationError(f"{path}: bad row {row}")
                    continue  # header
        s = np.array(s)
        d = np.diff(s)
        if len(s) < 2 or not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
            raise ValidationError(f"{path}: abscissae must be uniformly spaced")
        return cls(float(s[0]), float(d[0]), tuple(v))

    @property
    def grid(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values))

    @property
    def _weights(self) -> np.ndarray:
        w = np.full(len(self.values), self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w * np.array(self.values)

    def density(self, s):
        return np.interp(_as_array(s), self.grid, np.array(self.values), left=0.0, right=0.0)

    @property
    def strip(self):
        s, v = self.grid, np.array(self.values)
        n = max(3, len(v) // 10)

        def rate(ss, vv):
            if vv[-1] == 0 or np.any(vv <= 0):
                return INF
            return -np.polyfit(ss, np.log(vv), 1)[0]

        right = rate(s[-n:], v[-n:])           # decay as s -> +inf bounds z from below
        left = rate(-s[:n][::-1], v[:n][::-1])  # decay as s -> -inf bounds z from above
        a = -INF if right == INF else -0.95 * max(right, 0.0)
        b = INF if left == INF else 0.95 * max(left, 0.0)
        return (a, b)

    @property
    def total_mass(self):
        return float(self._weights.sum())

    def _laplace(self, z):
        z = _as_array(z)
        return (self._weights * np.exp(-np.multiply.outer(z, self.grid))).sum(axis=-1)

    def _laplace_dz(self, z):
        z = _as_array(z)
        return (-self.grid * self._weights * np.exp(-np.multiply.outer(z, self.grid))).sum(axis=-1)

    def extent(self, eps=TAIL_EPS):
        return (self.start, float(self.grid[-1]))

    def reflect(self):
        return GridTabulated(-float(self.grid[-1]), self.step, tuple(reversed(self.values)))

    def translate(self, a):
        return GridTabulated(self.start + a, self.step, self.values)

    def params(self):
        return {"start": self.start, "step": self.step, "n": len(self.values)}


def _resolvent_gaussian(res: TwoSidedResolvent, gau: ShiftedGaussian, s):
    x = _as_array(s) + gau.shift
    v = gau.variance
    sd = math.sqrt(v)
    nu, mu = res.nu, res.mu
    right = nu * x + 0.5 * nu * nu * v + log_ndtr((x + nu * v) / sd)
    left = mu * x + 0.5 * mu * mu * v + log_ndtr(-(x + mu * v) / sd)
    return (np.exp(right) + np.exp(left)) / res.sigma


@dataclass(frozen=True)
class ConvolutionOf(Kernel):
    """``(first * second)(s) = int first(u) second(s - u) du``."""

    first: Kernel
    second: Kernel
    family = "convolution"

    def _pair(self):
        a, b = self.first, self.second
        if isinstance(a, TwoSidedResolvent) and isinstance(b, ShiftedGaussian):
            return a, b
        if isinstance(b, TwoSidedResolvent) and isinstance(a, ShiftedGaussian):
            return b, a
        return None

    def _lattice_split(self):
        if isinstance(self.first, DiscreteLattice):
            return self.first, self.second
        if isinstance(self.second, DiscreteLattice):
            return self.second, self.first
        return None

    def density(self, s):
        pair = self._pair()
        if pair is not None:
            return _resolvent_gaussian(*pair, s)
        split = self._lattice_split()
        if split is not None:
            lat, other = split
            s = _as_array(s)
            out = np.zeros_like(s)
            for x, w in zip(lat.points, lat.ws):
                out = out + w * other.density(s - x)
            return out
        return np.vectorize(self._quad_density, otypes=[float])(s)

    def _quad_density(self, s: float) -> float:
        lo, hi = self.first.extent()
        lo2, hi2 = self.second.extent()
        lo, hi = max(lo, s - hi2), min(hi, s - lo2)
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(
            lambda u: float(self.first.density(u) * self.second.density(s - u)),
            lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200,
            points=[p for p in (0.0, s) if lo < p < hi] or None,
        )
        return max(val, 0.0)

    def sample(self, step, lo=None, hi=None):
        if self._pair() is not None or self._lattice_split() is not None:
            return super().sample(step, lo, hi)
        j1, v1 = self.first.sample(step)
        j2, v2 = self.second.sample(step)
        v = np.convolve(v1, v2) * step
        j = np.arange(j1[0] + j2[0], j1[0] + j2[0] + len(v))
        elo, ehi = self.extent()
        lo = elo if lo is None else lo
        hi = ehi if hi is None else hi
        want = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1)
        out = np.zeros(len(want))
        ok = (want >= j[0]) & (want <= j[-1])
        out[ok] = v[want[ok] - j[0]]
        return want, out

    def breaks(self):
        split = self._lattice_split()
        if split is None:
            return ()  # a convolution with an integrable kernel is continuous unless one factor is atomic
        lat, other = split
        return tuple(sorted({x + b for x in lat.points for b in other.breaks()}))

    @property
    def strip(self):
        a1, b1 = self.first.strip
        a2, b2 = self.second.strip
        return (max(a1, a2), min(b1, b2))

    @property
    def total_mass(self):
        return self.first.total_mass * self.second.total_mass

    def _laplace(self, z):
        return self.first._laplace(z) * self.second._laplace(z)

    def _laplace_dz(self, z):
        return (self.first._laplace_dz(z) * self.second._laplace(z)
                + self.first._laplace(z) * self.second._laplace_dz(z))

    def extent(self, eps=TAIL_EPS):
        lo1, hi1 = self.first.extent(eps)
        lo2, hi2 = self.second.extent(eps)
        return (lo1 + lo2, hi1 + hi2)

    def reflect(self):
        return ConvolutionOf(self.first.reflect(), self.second.reflect())

    def translate(self, a):
        return ConvolutionOf(self.first, self.second.translate(a))

    def moments(self):
        m1, s1 = self.first.moments()
        m2, s2 = self.second.moments()
        return m1 + m2, math.hypot(s1, s2)

    def params(self):
        return {"first": describe(self.first), "second": describe(self.second)}


def describe(kernel: Kernel) -> dict:
    return {"family": kernel.family, **kernel.params()}


# -- operation-level API ----------------------------------------------------

def eval_density(kernel: Kernel, s):
    out = kernel.density(s)
    return float(out) if np.ndim(out) == 0 else out


def laplace(kernel: Kernel, z):
    return kernel.laplace(z)


def strip_bounds(kernel: Kernel) -> tuple[float, float]:
    return kernel.strip


def convolve(k1: Kernel, k2: Kernel) -> ConvolutionOf:
    for k in (k1, k2):
        if not math.isfinite(k.total_mass):
            raise ValidationError("convolve needs kernels of finite mass")
    return ConvolutionOf(k1, k2)


def positivity_interval(kernel: Kernel, window: float = 10.0, step: float = 1e-3):
    """Largest sampled interval around 0 on which the density is strictly positive.

    This is a sampled check at resolution ``step`` over ``[-window, window]``,
    not a proof.  An answer equal to ``(-window, window)`` means the density was
    positive on the whole check window.  Returns None when no open interval
    around 0 qualifies.
    """
    j, v = kernel.sample(step, -window, window)
    s = j * step
    i0 = int(np.argmin(np.abs(s)))
    if i0 == 0 or i0 == len(s) - 1 or not (v[i0 - 1] > 0 and v[i0] > 0 and v[i0 + 1] > 0):
        return None
    bad = np.flatnonzero(v <= 0)
    left = bad[bad < i0]
    right = bad[bad > i0]
    lo = float(s[left[-1]]) if len(left) else -window
    hi = float(s[right[0]]) if len(right) else window
    return (lo, hi)
