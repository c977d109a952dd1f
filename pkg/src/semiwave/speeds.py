"""Critical speeds ``c_*^-`` and ``c_*^+``.

For ``z > 0`` the convexified characteristic function ``psi(z, c)`` decreases in
``c``, so the set of speeds admitting a positive root is a half line
``[c_*^+, inf)``; symmetrically the negative-root speeds form ``(-inf, c_*^-]``.
Each endpoint is bracketed by an exponential scan, bisected, and then polished
by Newton's method on the tangency system ``psi = psi_z = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import characteristic as chmod
from .characteristic import CharacteristicFn, minimize
from .errors import BracketFailure, NoRoot, NotMonostable, StripTooNarrow

C_LIMIT = 1e6
BISECT_WIDTH = 1e-8
NEWTON_MAXITER = 50


@dataclass
class CriticalSpeeds:
    c_minus: float
    c_plus: float
    tangent_lambda_minus: float | None = None
    tangent_lambda_plus: float | None = None
    iterations: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    method_log: list = field(default_factory=list)

    def in_gap(self, c: float) -> bool:
        return self.c_minus < c < self.c_plus

    def as_dict(self) -> dict:
        return {
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
            "tangent_lambda_minus": self.tangent_lambda_minus,
            "tangent_lambda_plus": self.tangent_lambda_plus,
            "iterations": self.iterations,
            "residuals": self.residuals,
        }


def _form(model) -> CharacteristicFn:
    if isinstance(model, CharacteristicFn):
        return model
    from .model import LatticeModel, RDModel

    if isinstance(model, RDModel):
        if not model.g.slope0 > model.f.slope0:
            raise NotMonostable(f"g'(0)={model.g.slope0:.6g} <= f'(0)={model.f.slope0:.6g}")
    elif isinstance(model, LatticeModel):
        if not model.g.slope0 > model.d:
            raise NotMonostable(f"g'(0)={model.g.slope0:.6g} <= d={model.d:.6g}")
    return chmod.characteristic(model, 0.0)


def exists_root(cf: CharacteristicFn, c: float, side: int) -> tuple[bool, chmod.Minimum]:
    """Whether ``psi(., c)`` has a root with ``sign(z) == side``."""
    m = minimize(cf.at(c))
    return (side * m.z > 0 and m.value <= 0.0), m


def _bracket(pred, log: list) -> tuple[float, float]:
    """``(t_false, t_true)`` for an increasing predicate, scanning ``t = +-2^k``."""
    if pred(0.0):
        t_true, k = 0.0, 0
        while True:
            t = -(2.0 ** k)
            if abs(t) > C_LIMIT:
                raise BracketFailure("root existence persists for every speed down to -1e6")
            log.append(("scan", t))
            if not pred(t):
                return t, t_true
            t_true, k = t, k + 1
    t_false, k = 0.0, 0
    while True:
        t = 2.0 ** k
        if t > C_LIMIT:
            raise BracketFailure("no root up to speed 1e6")
        log.append(("scan", t))
        if pred(t):
            return t_false, t
        t_false, k = t, k + 1


def _bisect(pred, lo: float, hi: float) -> tuple[float, float, int]:
    n = 0
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
        n += 1
    return lo, hi, n


def _newton(cf: CharacteristicFn, z: float, c: float, bracket: tuple[float, float]):
    """Damped Newton on ``(psi, psi_z) = 0`` in ``(z, c)``; None if it leaves the bracket."""
    lo, hi = bracket
    pad = 10 * BISECT_WIDTH

    def resid(z, c):
        f = cf.at(c)
        return np.array([f.psi(z), f.psi_dz(z)])

    r = resid(z, c)
    for it in range(1, NEWTON_MAXITER + 1):
        f = cf.at(c)
        J = np.array([[f.psi_dz(z), f.psi_dc(z)], [f.psi_dzz(z), f.psi_dzc(z)]])
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        damp = 1.0
        while True:
            zn, cn = z + damp * step[0], c + damp * step[1]
            try:
                rn = resid(zn, cn)
            except Exception:
                rn = np.array([np.inf, np.inf])
            if np.all(np.isfinite(rn)) and np.linalg.norm(rn) < np.linalg.norm(r):
                break
            damp *= 0.5
            if damp < 1e-4:
                return (z, c, it) if np.linalg.norm(r) < 1e-12 else None
        z, c, r = zn, cn, rn
        if not (lo - pad <= c <= hi + pad):
            return None
        if abs(r[0]) <= 1e-14 and abs(r[1]) <= 1e-12:
            return z, c, it
    return z, c, NEWTON_MAXITER


def _critical(cf: CharacteristicFn, side: int, log: list):
    """``(c, lambda, iterations, residual)`` for one side; ``c`` may be infinite."""
    a, b = cf.strip
    if side > 0 and b <= 0:
        log.append(("strip", "no z > 0 in strip: c_plus = inf"))
        return math.inf, None, 0, None
    if side < 0 and a >= 0:
        log.append(("strip", "no z < 0 in strip: c_minus = -inf"))
        return -math.inf, None, 0, None

    # t = side * c makes existence increasing in t on both sides
    pred = lambda t: exists_root(cf, side * t, side)[0]
    t_false, t_true = _bracket(pred, log)
    t_lo, t_hi, n_bis = _bisect(pred, t_false, t_true)
    log.append(("bisect", side * t_lo, side * t_hi, n_bis))
    c_hi = side * t_hi
    m = minimize(cf.at(c_hi))
    result = (c_hi, m.z)
    newton = None if m.at_edge else _newton(cf, m.z, c_hi, tuple(sorted((side * t_lo, side * t_hi))))
    n_newton = 0
    if newton is not None:
        z, c, n_newton = newton
        if side * z > 0:
            result = (c, z)
            log.append(("newton", c, z, n_newton))
    else:
        log.append(("newton", "fallback to bisection"))
    c, z = result
    f = cf.at(c)
    resid = {"psi": abs(float(f.psi(z))), "psi_dz": abs(float(f.psi_dz(z)))}
    lam = None if m.at_edge else float(z)
    return float(c), lam, n_bis + n_newton, resid


def critical_speeds(model, side: str = "both") -> CriticalSpeeds:
    """Critical speeds of an RD or lattice model (or a characteristic form)."""
    if side not in ("plus", "minus", "both"):
        raise ValueError("side must be plus, minus or both")
    cf = _form(model)
    out = CriticalSpeeds(-math.inf, math.inf)
    if side in ("plus", "both"):
        c, lam, n, res = _critical(cf, 1, out.method_log)
        out.c_plus, out.tangent_lambda_plus = c, lam
        out.iterations["plus"], out.residuals["plus"] = n, res
    else:
        out.c_plus = math.nan
    if side in ("minus", "both"):
        c, lam, n, res = _critical(cf, -1, out.method_log)
        out.c_minus, out.tangent_lambda_minus = c, lam
        out.iterations["minus"], out.residuals["minus"] = n, res
    else:
        out.c_minus = math.nan
    return out


def lambda_leftmost(model, c: float) -> float:
    """The characteristic root nearest to zero at speed ``c`` (``lambda_1(c)``)."""
    cf = _form(model).at(c)
    try:
        roots = chmod.real_roots(cf)
    except StripTooNarrow as exc:
        raise NoRoot(str(exc)) from exc
    if not roots.roots:
        raise NoRoot(f"no real characteristic root at c={c:.6g} (gap speed)")
    return float(roots.lambda1)
