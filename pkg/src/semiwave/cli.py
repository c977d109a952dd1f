"""Command-line entry point: ``semiwave <subcommand> --model run.toml [options]``.

Flags override the matching keys of the config file.  Exit codes: 0 ok,
2 configuration error, 3 numerical failure, 4 violated model hypothesis.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import characteristic as chmod
from . import config as cfgmod
from . import evolve as ev
from . import gmap as gm
from . import model as mdl
from . import output as out
from . import profile as pf
from . import speeds as sp
from .errors import HypothesisError, SemiwaveError, ValidationError

log = logging.getLogger("semiwave")


# -- helpers ----------------------------------------------------------------

def _load(args) -> cfgmod.RunConfig:
    rc = cfgmod.parse_config(args.model)
    overrides = {k: v for k, v in getattr(args, "overrides", {}).items()}
    for key, dest in overrides.items():
        value = getattr(args, dest, None)
        if value is not None:
            rc.numerics[key] = value
    if getattr(args, "seed", None) is not None:
        rc.numerics["seed"] = args.seed
    errors: list[str] = []
    cfgmod.check_numerics(rc.numerics, errors)
    if errors:
        raise ValidationError(errors)
    return rc


def _out_path(rc: cfgmod.RunConfig, flag, key: str):
    """Flag paths are relative to the working directory, config paths to ``output.dir``."""
    if flag is not None:
        return Path(flag)
    value = rc.output.get(key)
    if value is None:
        return None
    return rc.path(rc.output["dir"]) / value


def _emit(rc: cfgmod.RunConfig, payload: dict, path) -> None:
    if path is None:
        sys.stdout.write(out.dumps(payload))
        return
    out.write_json(path, payload)
    if rc.output.get("echo", True):
        out.write_json(Path(path).parent / "effective_config.json", rc.effective())
    print(f"wrote {path}")


def _require_valid(model) -> mdl.ValidationReport:
    report = mdl.validate(model)
    if not report.ok:
        names = ", ".join(f"{c.name} ({c.detail})" for c in report.failures)
        raise HypothesisError(f"model hypotheses fail: {names}")
    return report


def _system(model, c: float):
    if isinstance(model, mdl.LatticeModel):
        return mdl.reduce_lattice(model, c)
    return mdl.reduce(model, c)


def _g_system(model):
    # G does not depend on the speed; the lattice reduction only excludes c = 0
    return _system(model, 1.0 if isinstance(model, mdl.LatticeModel) else 0.0)


# -- subcommands ------------------------------------------------------------

def cmd_validate(args) -> int:
    rc = _load(args)
    model = rc.build_model()
    report = mdl.validate(model, rc.numerics["samples"])
    for c in report.checks:
        flag = "PASS" if c.passed else "FAIL"
        wit = "" if c.passed or c.witness is None else f" (witness s={c.witness:.6g})"
        print(f"{flag} {c.name}: {c.detail}{wit}")
    path = _out_path(rc, args.json, "json")
    if path is not None:
        _emit(rc, report.as_dict(), path)
    if not report.ok:
        print("error: HypothesisError: model hypotheses fail", file=sys.stderr)
        return HypothesisError.exit_code
    return 0


def cmd_speeds(args) -> int:
    rc = _load(args)
    cs = sp.critical_speeds(rc.build_model(), rc.numerics["side"])
    _emit(rc, cs.as_dict(), _out_path(rc, args.json, "json"))
    return 0


def cmd_characteristic(args) -> int:
    rc = _load(args)
    c = rc.numerics["c"]
    if c is None:
        raise ValidationError("numerics.c: required for characteristic (or pass --c)")
    cf = chmod.characteristic(rc.build_model(), c)
    z0, z1, n = cfgmod.parse_scan(rc.numerics["scan"])
    a, b = cf.strip
    z = np.linspace(z0, z1, n)
    z = z[(z > a) & (z < b)]
    with np.errstate(over="ignore", invalid="ignore"):
        psi = np.array([cf.psi(x) for x in z])
    path = _out_path(rc, args.csv, "csv")
    if path is None:
        sys.stdout.write("z,psi\n" + "".join(f"{x:.17g},{v:.17g}\n" for x, v in zip(z, psi)))
    else:
        out.write_csv(path, ["z", "psi"], z, psi)
        print(f"wrote {path}")
    roots = chmod.real_roots(cf)
    summary = {"c": c, "form": cf.form, "strip": list(cf.strip), "kind": roots.kind,
               "roots": list(roots.roots), "minimizer": roots.minimizer,
               "min_value": roots.min_value, "discarded": list(roots.discarded)}
    jpath = _out_path(rc, args.json, "json")
    if jpath is not None:
        _emit(rc, summary, jpath)
    else:
        print(f"roots: {roots.kind} {list(roots.roots)}", file=sys.stderr)
    return 0


def cmd_gmap(args) -> int:
    rc = _load(args)
    model = rc.build_model()
    G = gm.build_G(_g_system(model))
    num = rc.numerics
    verdict = gm.attractivity(G, num["seed"], num["orbit_points"], num["orbit_steps"])
    report = {
        "zeta1": G.zeta1,
        "zeta2": G.zeta2,
        "kappa": G.kappa,
        "G_slope0": G.slope0,
        "verdict": verdict,
        "fixed_points": list(G.fixed),
        "zeta1_candidates": [list(c) for c in G.zeta1_candidates],
        "source": G.source,
        "seed": num["seed"],
    }
    _emit(rc, report, _out_path(rc, args.report, "json"))
    csv_path = _out_path(rc, args.csv, "csv")
    if csv_path is not None:
        s = np.linspace(0.0, G.zeta2, 1001)
        out.write_csv(csv_path, ["s", "G"], s, G(s))
        print(f"wrote {csv_path}")
    if args.figure:
        from .plotting import gmap_figure

        gmap_figure(G, args.figure)
    return 0


def cmd_profile(args) -> int:
    rc = _load(args)
    num = rc.numerics
    c = num["c"]
    if c is None:
        raise ValidationError("numerics.c: required for profile (or pass --c)")
    cfgmod.check_grid(rc, c)
    model = rc.build_model()
    _require_valid(model)
    system = _system(model, c)
    G = gm.build_G(system)
    opts = pf.SolveOptions(T=num["T"], dx=num["dx"], tol=num["tol"], max_iter=num["max_iter"],
                           damping=num["damping"], damping_floor=num["damping_floor"],
                           delta=num["delta"], plateau=num["plateau"])
    prof = pf.solve(system, opts, G)
    pf.decay_rate(prof)
    pf.classify(prof, G)
    ok, slack = pf.containment(prof, G)
    meta = prof.meta()
    meta.update({"kappa": G.kappa, "containment": {"ok": ok, "slack": slack}})
    csv_path = _out_path(rc, args.csv, "csv")
    if csv_path is not None:
        out.write_csv(csv_path, ["t", "phi"], prof.t, prof.values)
        print(f"wrote {csv_path}")
    _emit(rc, meta, _out_path(rc, args.json, "json"))
    if args.figure:
        from .plotting import profile_figure

        profile_figure(prof, args.figure, G.kappa)
    return 0


def _initial(rc: cfgmod.RunConfig, model, init: str):
    eq = mdl.positive_equilibria(model)
    kappa = eq[0] if eq else 1.0
    w = rc.numerics["init_width"]
    if init == "bump":
        return ev.bump(kappa, w)
    if init == "step":
        return ev.step(kappa)
    path = Path(init)
    if not path.exists():
        raise ValidationError(f"numerics.init: {init!r} is neither bump, step nor an existing CSV file")
    xs, us = out.read_csv_columns(path)
    if len(xs) < 2:
        raise ValidationError(f"numerics.init: {init} holds fewer than two (x, u) rows")
    return ev.from_samples(xs, us)


def cmd_evolve(args) -> int:
    rc = _load(args)
    num = rc.numerics
    model = rc.build_model()
    init = _initial(rc, model, str(num["init"]))
    dt = None if num["dt"] == "auto" else float(num["dt"])
    if isinstance(model, mdl.LatticeModel):
        H = ev.simulate_lattice(model, init, num["T_end"], int(math.ceil(num["half_width"])), dt,
                                num["snapshots"])
    else:
        H = ev.simulate_rd(model, init, num["T_end"], num["half_width"], num["evolve_dx"], dt,
                           num["snapshots"])
    speeds = ev.front_speed(H, num["level"])
    wave = ev.classify_wave(H, num["probes"], num["level"])
    summary = {
        "left_speed": speeds[0],
        "right_speed": speeds[1],
        "classification": wave["classification"],
        "probes": [{"x": x, "verdict": v} for x, v in wave["probes"].items()],
        "kappa": H.kappa,
        "dt": H.dt,
        "delay_steps": H.delay_steps,
        "T_end": float(H.times[-1]),
        "snapshots": len(H.times),
        "notes": H.notes,
    }
    snap_dir = _out_path(rc, args.snapshots, "snapshots")
    if snap_dir is not None:
        snap_dir = Path(snap_dir)
        for i, (t, u) in enumerate(zip(H.times, H.snapshots)):
            out.write_csv(snap_dir / f"snapshot_{i:05d}.csv", ["x", "u"], H.x, u)
        out.write_csv(snap_dir / "times.csv", ["index", "t"], np.arange(len(H.times)), H.times)
        print(f"wrote {len(H.times)} snapshots to {snap_dir}")
    _emit(rc, summary, _out_path(rc, args.json, "json"))
    if args.figure:
        from .plotting import evolve_figure

        evolve_figure(H, args.figure)
    return 0


# -- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, metavar="M", help="TOML run configuration")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semiwave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"semiwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the model hypotheses")
    _common(p)
    p.add_argument("--json")
    p.set_defaults(func=cmd_validate, overrides={})

    p = sub.add_parser("speeds", help="critical speeds c_minus and c_plus")
    _common(p)
    p.add_argument("--side", choices=["plus", "minus", "both"])
    p.add_argument("--json")
    p.set_defaults(func=cmd_speeds, overrides={"side": "side"})

    p = sub.add_parser("characteristic", help="scan psi(z, c) and report its real roots")
    _common(p)
    p.add_argument("--c", type=float)
    p.add_argument("--scan", metavar="z0:z1:n")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_characteristic, overrides={"c": "c", "scan": "scan"})

    p = sub.add_parser("gmap", help="birth map G: thresholds, equilibrium, attractivity")
    _common(p)
    p.add_argument("--report", "--json", dest="report", help="JSON report path")
    p.add_argument("--csv", help="samples (s, G(s))")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_gmap, overrides={})

    p = sub.add_parser("profile", help="solve for a wave profile at speed c")
    _common(p)
    p.add_argument("--c", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--dx", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_profile,
                   overrides={"c": "c", "T": "T", "dx": "dx", "tol": "tol", "max_iter": "max_iter"})

    p = sub.add_parser("evolve", help="time-domain simulation and front speeds")
    _common(p)
    p.add_argument("--init", help="bump, step or a CSV file of (x, u)")
    p.add_argument("--T", type=float, dest="T_end", help="final time")
    p.add_argument("--dx", type=float, dest="evolve_dx")
    p.add_argument("--dt", help="time step or 'auto'")
    p.add_argument("--half-width", type=float, dest="half_width")
    p.add_argument("--snapshots", help="directory for snapshot CSV files")
    p.add_argument("--json")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_evolve,
                   overrides={"init": "init", "T_end": "T_end", "evolve_dx": "evolve_dx",
                              "dt": "dt", "half_width": "half_width"})
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evolve" and args.dt not in (None, "auto"):
        try:
            args.dt = float(args.dt)
        except ValueError:
            parser.error(f"--dt: expected a number or 'auto', got {args.dt!r}")
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SemiwaveError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
