import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semiwave import gmap as gm
from semiwave import kernels as kc
from semiwave import model as mdl
from semiwave import profile as pf
from semiwave import speeds as sp

ACCEPTANCE_LINES: list[str] = []


def rd_model(p: float = 2.0, rho: float = 0.0, h: float = 2.0, q: float = 1.0, g=None):
    g = g or mdl.nicholson(p)
    return mdl.RDModel(mdl.linear(q), g, kc.ShiftedGaussian(2.0, rho), h)


def gaussian_weights(n: int = 10) -> dict[int, float]:
    w = {k: math.exp(-k * k) for k in range(-n, n + 1)}
    total = sum(w.values())
    return {k: v / total for k, v in w.items()}


def lattice_model(p: float = math.e, D: float = 1.0, d: float = 1.0, r: float = 1.0, weights=None):
    beta = kc.DiscreteLattice.from_mapping(weights or gaussian_weights())
    return mdl.LatticeModel(D, d, r, beta, mdl.nicholson(p))


@pytest.fixture(scope="session")
def sym_model():
    return rd_model()


@pytest.fixture(scope="session")
def rho5_model():
    return rd_model(rho=5.0)


@pytest.fixture(scope="session")
def sym_speeds(sym_model):
    return sp.critical_speeds(sym_model)


@pytest.fixture(scope="session")
def rho5_speeds(rho5_model):
    return sp.critical_speeds(rho5_model)


@pytest.fixture(scope="session")
def monotone_model():
    """Nicholson with ln(p/delta) = 1, so kappa = 1."""
    return rd_model(p=math.e)


@pytest.fixture(scope="session")
def monotone_solution(monotone_model):
    cs = sp.critical_speeds(monotone_model, "plus")
    c = cs.c_plus + 1.0
    system = mdl.reduce(monotone_model, c)
    G = gm.build_G(system)
    prof = pf.solve(system, pf.SolveOptions(T=200, dx=0.05), G)
    return system, G, prof


@pytest.fixture(scope="session")
def lattice():
    return lattice_model()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


__all__ = ["rd_model", "lattice_model", "gaussian_weights", "ACCEPTANCE_LINES", "np"]
