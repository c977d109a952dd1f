"""Small numerical helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np


def bisect_increasing(func, y, lo: float, hi: float, tol: float = 1e-12, maxiter: int = 200):
    """Vectorized inverse of an increasing function on ``[lo, hi]``."""
    y = np.asarray(y, dtype=float)
    a = np.full(y.shape, float(lo))
    b = np.full(y.shape, float(hi))
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        below = func(m) < y
        a = np.where(below, m, a)
        b = np.where(below, b, m)
        if np.max(b - a, initial=0.0) <= tol:
            break
    out = 0.5 * (a + b)
    return float(out) if out.ndim == 0 else out


def lipschitz(func, lo: float, hi: float, n: int = 10_000) -> float:
    """Largest finite-difference slope of ``func`` over ``n`` sample pairs."""
    s = np.linspace(lo, hi, n + 1)
    v = func(s)
    return float(np.max(np.abs(np.diff(v)) / np.diff(s)))


def slope_at_zero(func, h: float = 1e-6) -> float:
    """One-sided derivative at 0 with one Richardson step."""
    d1 = (func(np.array(h)) - func(np.array(0.0))) / h
    d2 = (func(np.array(h / 2)) - func(np.array(0.0))) / (h / 2)
    return float(2 * d2 - d1)


def sign_change_roots(func, lo: float, hi: float, n: int = 10_000, xtol: float = 1e-14):
    """Roots of ``func`` on ``[lo, hi]`` located by a sign-change scan and refined by brentq."""
    from scipy.optimize import brentq

    s = np.linspace(lo, hi, n + 1)
    v = func(s)
    roots = [float(x) for x, fx in zip(s, v) if fx == 0.0]
    change = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
    for i in change:
        roots.append(brentq(lambda x: float(func(np.array(x))), s[i], s[i + 1], xtol=xtol))
    return sorted(roots)


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")
