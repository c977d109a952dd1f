"""Run configuration: a TOML file with sections [model], [kernel], [nonlinearity],
[numerics] and [output].

Unknown keys are rejected.  Every bad field is collected before a single
ValidationError is raised.  Command-line flags override file values.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import kernels as kc
from . import model as mdl
from .errors import ParseError, ValidationError

REQUIRED = object()

MODEL_KEYS = {
    "rd": {"type": "rd", "h": 0.0, "death": None},
    "lattice": {"type": "lattice", "D": 1.0, "d": 1.0, "r": 0.0},
}

NONLINEARITY_PARAMS = {
    "nicholson": {"p": REQUIRED},
    "mackey": {"p": REQUIRED, "n": 2.0},
    "linear_capped": {"p": REQUIRED, "cap": REQUIRED},
    "linear": {"rate": REQUIRED},
    "exponential": {"rate": 1.0},
    "tabulated": {"path": REQUIRED},
}

KERNEL_PARAMS = {
    "gaussian": {"variance": 2.0, "shift": 0.0},
    "exponential": {"rate": REQUIRED, "side": 1, "scale": None, "offset": 0.0},
    "resolvent": {"nu": REQUIRED, "mu": REQUIRED, "sigma": None},
    "lattice": {"weights": None, "values": None, "first_index": 0, "offset": 0.0,
                "gaussian_width": None, "cutoff": 10, "normalize": True},
    "tabulated": {"path": REQUIRED},
}

NUMERICS = {
    # profile
    "c": None, "T": 200.0, "dx": 0.05, "tol": 1e-6, "max_iter": 10_000, "damping": 1.0,
    "damping_floor": 0.05, "delta": None, "plateau": 1000,
    # speeds / characteristic / gmap
    "side": "both", "scan": "-3:3:601", "seed": 0, "orbit_points": 10_000, "orbit_steps": 10_000,
    "samples": 10_000,
    # evolve
    "T_end": 100.0, "evolve_dx": 0.1, "dt": "auto", "snapshots": 200, "half_width": 100.0,
    "init": "bump", "init_width": 5.0, "level": None, "probes": None,
}

OUTPUT = {"dir": ".", "json": None, "csv": None, "snapshots": None, "figure": None, "echo": True}

POSITIVE = ("T", "dx", "tol", "T_end", "evolve_dx", "init_width", "half_width")
POSITIVE_INT = ("max_iter", "plateau", "orbit_points", "orbit_steps", "samples", "snapshots")


@dataclass
class RunConfig:
    model: dict
    kernel: dict
    nonlinearity: dict
    numerics: dict
    output: dict
    base: Path = field(default_factory=Path.cwd)

    def effective(self) -> dict:
        """The fully-defaulted configuration, for the echo written beside outputs."""
        return {"model": self.model, "kernel": self.kernel, "nonlinearity": self.nonlinearity,
                "numerics": self.numerics, "output": self.output}

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def build_kernel(self) -> kc.Kernel:
        return build_kernel(self.kernel, self.base)

    def build_model(self):
        g = build_nonlinearity(self.nonlinearity, self.base)
        K = self.build_kernel()
        if self.model["type"] == "rd":
            f = build_nonlinearity(self.model["death"], self.base)
            return mdl.RDModel(f, g, K, float(self.model["h"]))
        m = self.model
        return mdl.LatticeModel(float(m["D"]), float(m["d"]), float(m["r"]), K, g)


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _fill(section: str, given: dict, spec: dict, errors: list[str]) -> dict:
    out = {}
    for key in given:
        if key not in spec:
            errors.append(f"{section}.{key}: unknown key")
    for key, default in spec.items():
        if key in given:
            out[key] = given[key]
        elif default is REQUIRED:
            errors.append(f"{section}.{key}: required")
        else:
            out[key] = copy.deepcopy(default)
    return out


def _family(section: str, given: dict, tag: str, table: dict, default: str | None,
            errors: list[str]) -> dict:
    name = given.get(tag, default)
    if name not in table:
        errors.append(f"{section}.{tag}: unknown value {name!r} (choose from {', '.join(table)})")
        return {tag: name}
    rest = {k: v for k, v in given.items() if k != tag}
    out = {tag: name}
    out.update(_fill(section, rest, table[name], errors))
    for key, value in out.items():
        if key not in (tag, "path", "weights", "values", "normalize") and value is not None \
                and not _number(value):
            errors.append(f"{section}.{key}: expected a number, got {value!r}")
    return out


def _validate(raw: dict, errors: list[str]) -> dict:
    for key in raw:
        if key not in ("model", "kernel", "nonlinearity", "numerics", "output"):
            errors.append(f"{key}: unknown section")
    m = dict(raw.get("model", {}))
    kind = m.get("type", "rd")
    if kind not in MODEL_KEYS:
        errors.append(f"model.type: unknown value {kind!r} (choose from rd, lattice)")
        kind = "rd"
    model = _fill("model", m, MODEL_KEYS[kind], errors)
    if kind == "rd":
        death = model["death"] if model["death"] is not None else {"name": "linear", "rate": 1.0}
        if not isinstance(death, dict):
            errors.append("model.death: expected a table")
            death = {"name": "linear", "rate": 1.0}
        model["death"] = _family("model.death", death, "name", NONLINEARITY_PARAMS, None, errors)
        if not (_number(model["h"]) and model["h"] >= 0):
            errors.append(f"model.h: must be a nonnegative number, got {model['h']!r}")
    else:
        for key in ("D", "d"):
            if not (_number(model[key]) and model[key] > 0):
                errors.append(f"model.{key}: must be positive, got {model[key]!r}")
        if not (_number(model["r"]) and model["r"] >= 0):
            errors.append(f"model.r: must be nonnegative, got {model['r']!r}")

    default_family = "lattice" if kind == "lattice" else "gaussian"
    kernel = _family("kernel", dict(raw.get("kernel", {})), "family", KERNEL_PARAMS,
                     default_family, errors)
    nonlin = _family("nonlinearity", dict(raw.get("nonlinearity", {"name": "nicholson", "p": 2.0})),
                     "name", NONLINEARITY_PARAMS, None, errors)
    numerics = _fill("numerics", dict(raw.get("numerics", {})), NUMERICS, errors)
    output = _fill("output", dict(raw.get("output", {})), OUTPUT, errors)
    check_numerics(numerics, errors)
    return {"model": model, "kernel": kernel, "nonlinearity": nonlin, "numerics": numerics,
            "output": output}


def check_numerics(num: dict, errors: list[str]) -> None:
    for key in POSITIVE:
        v = num[key]
        if not (_number(v) and v > 0 and math.isfinite(v)):
            errors.append(f"numerics.{key}: must be a positive number, got {v!r}")
    for key in POSITIVE_INT:
        v = num[key]
        if not (isinstance(v, int) and not isinstance(v, bool) and v > 0):
            errors.append(f"numerics.{key}: must be a positive integer, got {v!r}")
    if not (_number(num["damping"]) and 0 < num["damping"] <= 1):
        errors.append(f"numerics.damping: must lie in (0, 1], got {num['damping']!r}")
    if not (_number(num["damping_floor"]) and 0 < num["damping_floor"] <= 1):
        errors.append(f"numerics.damping_floor: must lie in (0, 1], got {num['damping_floor']!r}")
    if num["dt"] != "auto" and not (_number(num["dt"]) and num["dt"] > 0):
        errors.append(f"numerics.dt: must be 'auto' or a positive number, got {num['dt']!r}")
    if num["side"] not in ("plus", "minus", "both"):
        errors.append(f"numerics.side: must be plus, minus or both, got {num['side']!r}")
    if num["c"] is not None and not _number(num["c"]):
        errors.append(f"numerics.c: must be a number, got {num['c']!r}")
    if num["delta"] is not None and not (_number(num["delta"]) and num["delta"] > 0):
        errors.append(f"numerics.delta: must be positive, got {num['delta']!r}")
    if not (isinstance(num["seed"], int) and not isinstance(num["seed"], bool)):
        errors.append(f"numerics.seed: must be an integer, got {num['seed']!r}")
    try:
        parse_scan(num["scan"])
    except ValueError as exc:
        errors.append(f"numerics.scan: {exc}")


def parse_scan(text: str) -> tuple[float, float, int]:
    """``"z0:z1:n"`` into its parts."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"expected z0:z1:n, got {text!r}")
    z0, z1, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (z1 > z0 and n >= 2):
        raise ValueError(f"need z0 < z1 and n >= 2, got {text!r}")
    return z0, z1, n


def build_nonlinearity(spec: dict, base: Path = Path(".")) -> mdl.Nonlinearity:
    name = spec["name"]
    params = {k: v for k, v in spec.items() if k != "name"}
    if name == "tabulated":
        path = Path(params["path"])
        return mdl.tabulated(path if path.is_absolute() else base / path)
    return mdl.CATALOG[name](**params)


def _lattice_kernel(spec: dict) -> kc.DiscreteLattice:
    weights: dict[int, float] = {}
    if spec["weights"] is not None:
        weights = {int(k): float(v) for k, v in spec["weights"].items()}
    elif spec["values"] is not None:
        weights = {spec["first_index"] + i: float(v) for i, v in enumerate(spec["values"])}
    elif spec["gaussian_width"] is not None:
        w, n = float(spec["gaussian_width"]), int(spec["cutoff"])
        weights = {k: math.exp(-(k / w) ** 2) for k in range(-n, n + 1)}
    else:
        weights = {0: 1.0}
    if spec["normalize"]:
        total = sum(weights.values())
        weights = {k: v / total for k, v in weights.items()}
    return kc.DiscreteLattice.from_mapping(weights, float(spec["offset"]))


def build_kernel(spec: dict, base: Path = Path(".")) -> kc.Kernel:
    fam = spec["family"]
    if fam == "gaussian":
        return kc.ShiftedGaussian(float(spec["variance"]), float(spec["shift"]))
    if fam == "exponential":
        return kc.OneSidedExponential(float(spec["rate"]), int(spec["side"]), spec["scale"],
                                      float(spec["offset"]))
    if fam == "resolvent":
        sigma = spec["sigma"] if spec["sigma"] is not None else spec["mu"] - spec["nu"]
        return kc.TwoSidedResolvent(float(spec["nu"]), float(spec["mu"]), float(sigma))
    if fam == "lattice":
        return _lattice_kernel(spec)
    path = Path(spec["path"])
    return kc.GridTabulated.from_csv(path if path.is_absolute() else base / path)


def from_dict(raw: dict, base: Path | None = None) -> RunConfig:
    errors: list[str] = []
    cfg = _validate(raw, errors)
    if errors:
        raise ValidationError(errors)
    rc = RunConfig(**cfg, base=base or Path.cwd())
    try:
        rc.build_model()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid model parameters: {exc}") from exc
    return rc


def parse_config(path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_dict(raw, path.parent)


def check_grid(rc: RunConfig, c: float | None) -> None:
    """``T > 10 max(kernel width, |c| h)``."""
    T = rc.numerics["T"]
    width = rc.build_kernel().width()
    lag = abs(c or 0.0) * float(rc.model.get("h", rc.model.get("r", 0.0)))
    if not T > 10 * max(width, lag):
        raise ValidationError(f"numerics.T: {T:g} must exceed 10 * max(kernel width {width:.4g}, |c| h {lag:.4g})")
