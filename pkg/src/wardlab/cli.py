"""Command-line driver: one subcommand per diagnostic.

Every run writes its artifacts plus ``manifest.json`` into ``--out``.
Reports are written with a fixed number format and summation order so that
repeated runs with the same configuration produce identical bytes (the
manifest's wall time excepted).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .asymptotics import boundary_profile, decay_profile
from .closed_forms import (BumpScalar, ConstantScalar, OutgoingPulse, diagonal_wave,
                           nonsolution_field, radial_bump_field, u1_field)
from .dynamics import (diagnostics_csv, energy, evolve, initial_slices, trajectory_diagnostics,
                       ward_residual)
from .errors import ConfigurationError, WardLabError
from .field import (FieldSource, GridSpec, MatrixField, SampledSource, sample_field, scheme_width,
                    unitarize)
from .gauge import bogomolny_residual, gauge_stencil, zero_curvature_residual
from .io import (csv_text, json_text, read_snapshot, read_trajectory, write_snapshot, write_text,
                 write_trajectory)
from .monodromy import (DEFAULT_OFFSETS, default_thetas, frame_field, null_monodromy_sweep,
                        parse_mode, radon_u1)
from .solitons import SolitonSpec, constant_field, one_pole, topological_charge


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, field="arguments")


BUILTINS = {
    "identity": lambda: constant_field(np.eye(2)),
    "constant": lambda: constant_field(np.diag([1j, -1j])),
    "diagonal-wave": lambda: diagonal_wave(1.0),
    "bump": lambda: radial_bump_field(1.0, 5.0),
    "nonsolution": lambda: nonsolution_field(),
    "lump": lambda: one_pole(SolitonSpec(1j)),
    "moving-lump": lambda: one_pole(SolitonSpec(0.5 + 1j)),
    "u1-pulse": lambda: u1_field(OutgoingPulse(1.0, 1.0)),
    "u1-bump": lambda: u1_field(BumpScalar(1.0, 1.0)),
}

SCALARS = {
    "constant": lambda: ConstantScalar(1.0),
    "bump": lambda: BumpScalar(1.0, 1.0),
    "pulse": lambda: OutgoingPulse(1.0, 1.0),
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _pair(text: str, kind=float, n: int = 2, name: str = "value"):
    try:
        vals = [kind(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name} must be {n} comma-separated numbers, got {text!r}", field=name) from None
    if len(vals) != n:
        raise UsageError(f"{name} must have {n} comma-separated entries, got {text!r}", field=name)
    return vals


def _floats(text: str, name: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of numbers", field=name) from None


def _complexes(text: str, name: str):
    try:
        return [complex(v.strip().replace("i", "j")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of complex numbers", field=name) from None


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("global")
    g.add_argument("--config", help="JSON file of option defaults (keys are option names)")
    g.add_argument("--out", default="out", help="output directory")
    g.add_argument("--grid", default=None,
                   help="node counts nx,ny (default 65,65, or the input grid for sampled sources)")
    g.add_argument("--extent", default=None,
                   help="xmin,xmax,ymin,ymax (default -4,4,-4,4, or the input grid)")
    g.add_argument("--tol", type=float, default=None, help="tolerance override")
    g.add_argument("--json", action="store_true", help="machine-readable stdout and errors")


def _source_args(p: argparse.ArgumentParser):
    p.add_argument("--spec", help="soliton spec JSON file")
    p.add_argument("--builtin", choices=sorted(BUILTINS), help="built-in closed-form field")
    p.add_argument("--snapshot", help="WDF1 snapshot (static field)")
    p.add_argument("--trajectory", help="trajectory index.json")
    p.add_argument("--t", type=float, default=0.0, help="time slice")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wardlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wardlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p)
        return p

    p = add("make", "sample a field into WDF1 snapshots")
    _source_args(p)
    p.add_argument("--steps", type=int, default=0, help="extra time slices (trajectory)")
    p.add_argument("--dt", type=float, default=None)

    p = add("slice", "extract one slice of a trajectory or re-emit a snapshot")
    p.add_argument("--input", required=True, help="snapshot or index.json")
    p.add_argument("--index", type=int, default=0)

    for name, help_ in (("residual", "Ward-equation residual"), ("energy", "energy totals"),
                        ("gauge-check", "Bogomolny residuals per refinement")):
        p = add(name, help_)
        _source_args(p)
        p.add_argument("--scheme", choices=["order-2", "order-4"], default="order-2")
        p.add_argument("--refine", type=int, default=1, help="number of grids (h halves each time)")

    p = add("lax-check", "zero-curvature residual at spectral parameters")
    _source_args(p)
    p.add_argument("--scheme", choices=["order-2", "order-4"], default="order-2")
    p.add_argument("--lambdas", default="1,-1,1j,2,0.5j")

    p = add("evolve", "leapfrog evolution from exact initial data")
    _source_args(p)
    p.add_argument("--dt", type=float, default=None, help="time step (default h/2)")
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--boundary", choices=["clamped", "frozen"], default="clamped")

    p = add("monodromy", "null-monodromy sweep")
    _source_args(p)
    p.add_argument("--mode", default="compactified", help="compactified or truncated:L")
    p.add_argument("--n-theta", type=int, default=16)
    p.add_argument("--offsets", default=None, help="x,y;x,y;... base points")
    p.add_argument("--steps", type=int, default=None, help="fixed step count")
    p.add_argument("--integrator", choices=["rk4", "magnus2"], default="rk4")

    p = add("frame", "frame field of one direction")
    _source_args(p)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--gate", type=float, default=1e-2)

    p = add("charge", "topological charge of the frame family")
    _source_args(p)
    p.add_argument("--n-theta", type=int, default=32)
    p.add_argument("--steps", type=int, default=64)
    p.add_argument("--gate", type=float, default=1e-2)

    p = add("decay", "boundary exponent and energy decay slope")
    _source_args(p)
    p.add_argument("--radii", default="25,50,100,200")
    p.add_argument("--n-theta", type=int, default=64)

    p = add("radon-u1", "abelian line integrals of a scalar field")
    p.add_argument("--scalar", choices=sorted(SCALARS), default="pulse")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--base", default="0,0")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--mode", default="compactified")
    p.add_argument("--dt", type=float, default=1e-4)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required", field="command")
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}", field="config") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object", field="config")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        for key in cfg:
            if key.replace("-", "_") not in known:
                raise UsageError(f"unknown config key {key!r}", field=key)
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# configuration helpers
# ---------------------------------------------------------------------------


DEFAULT_GRID = "65,65"
DEFAULT_EXTENT = "-4,4,-4,4"


def grid_from_args(args, source: Optional[FieldSource] = None, margin: int = 0) -> GridSpec:
    """Grid from ``--grid``/``--extent``. For snapshot or trajectory sources
    with neither flag given, the input grid shrunk by ``margin`` nodes, so
    that stencils stay inside the sampled data."""
    if isinstance(source, SampledSource) and args.grid is None and args.extent is None:
        try:
            return source.grid.shrink(margin)
        except ConfigurationError:
            raise UsageError(f"input grid is too small for a {margin}-node stencil margin",
                             field="grid") from None
    nx, ny = _pair(args.grid or DEFAULT_GRID, int, 2, "grid")
    x0, x1, y0, y1 = _pair(args.extent or DEFAULT_EXTENT, float, 4, "extent")
    if nx < 8 or ny < 8:
        raise UsageError("grid needs at least 8x8 nodes", field="grid")
    if not (x1 > x0 and y1 > y0):
        raise UsageError("extent must have xmax > xmin and ymax > ymin", field="extent")
    hx, hy = (x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1)
    if abs(hx - hy) > 1e-9 * hx:
        raise UsageError(f"grid spacing differs in x ({hx:g}) and y ({hy:g})", field="grid")
    return GridSpec(nx, ny, hx, (x0, y0))


def source_from_args(args) -> FieldSource:
    chosen = [k for k in ("spec", "builtin", "snapshot", "trajectory") if getattr(args, k, None)]
    if len(chosen) != 1:
        raise UsageError("choose exactly one of --spec, --builtin, --snapshot, --trajectory",
                         field="source")
    if args.spec:
        try:
            text = Path(args.spec).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read spec: {exc}", field="spec") from None
        return one_pole(SolitonSpec.from_json(text))
    if args.builtin:
        return BUILTINS[args.builtin]()
    if args.snapshot:
        return SampledSource([read_snapshot(args.snapshot)])
    return read_trajectory(args.trajectory)


def refinements(grid: GridSpec, k: int):
    if k < 1:
        raise UsageError("--refine must be at least 1", field="refine")
    x0, x1, y0, y1 = grid.extent
    out = []
    h = grid.h
    for _ in range(k):
        out.append(GridSpec.from_extent(x0, x1, y0, y1, h))
        h /= 2
    return out


def config_hash(args) -> str:
    d = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "json", "config")}
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


# ---------------------------------------------------------------------------
# subcommands; each returns (summary dict, list of written files)
# ---------------------------------------------------------------------------


def cmd_make(args, out: Path):
    src = source_from_args(args)
    grid = grid_from_args(args)
    if args.steps < 0:
        raise UsageError("--steps must be non-negative", field="steps")
    if args.steps == 0:
        f = sample_field(src, grid, args.t)
        p = write_snapshot(f, out / "field.wdf")
        return {"file": p.name, "t": args.t}, [p]
    dt = args.dt if args.dt is not None else grid.h / 2
    slices = [sample_field(src, grid, args.t + k * dt) for k in range(args.steps + 1)]
    idx = write_trajectory(SampledSource(slices), out)
    return {"index": idx.name, "steps": args.steps, "dt": dt}, [idx]


def cmd_slice(args, out: Path):
    src = Path(args.input)
    if src.suffix == ".json":
        traj = read_trajectory(src)
        if not 0 <= args.index < len(traj.trajectory):
            raise UsageError(f"slice index {args.index} out of range", field="index")
        f = traj.trajectory[args.index]
    else:
        f = read_snapshot(src)
    p = write_snapshot(f, out / "slice.wdf")
    return {"file": p.name, "nx": f.grid.nx, "ny": f.grid.ny, "N": f.N, "t": f.t,
            "unitarity_defect": float(np.max(f.unitarity_defect()))}, [p]


def cmd_residual(args, out: Path):
    src = source_from_args(args)
    rows = []
    w = scheme_width(args.scheme)
    for g in refinements(grid_from_args(args, src, 2 * w), args.refine):
        r = ward_residual(src, g, args.t, args.scheme)
        rows.append((g.h, r.sup, r.l2))
    p = write_text(out / "residual.csv", csv_text(["h", "sup_residual", "l2_residual"], rows))
    return {"sup_residual": [r[1] for r in rows]}, [p]


def cmd_energy(args, out: Path):
    src = source_from_args(args)
    rows = []
    for g in refinements(grid_from_args(args, src, scheme_width(args.scheme)), args.refine):
        e = energy(src, g, args.t, args.scheme)
        rows.append((g.h, args.t, e.total))
    p = write_text(out / "energy.csv", csv_text(["h", "t", "energy"], rows))
    return {"energy": [r[2] for r in rows]}, [p]


def cmd_gauge_check(args, out: Path):
    src = source_from_args(args)
    rows = []
    for g in refinements(grid_from_args(args, src, 2 * scheme_width(args.scheme)), args.refine):
        R = bogomolny_residual(gauge_stencil(src, g, args.t, args.scheme))
        rows.append((g.h,) + tuple(r.sup for r in R))
    p = write_text(out / "gauge.csv", csv_text(["h", "R1_sup", "R2_sup", "R3_sup"], rows))
    return {"rows": [list(r) for r in rows]}, [p]


def cmd_lax_check(args, out: Path):
    src = source_from_args(args)
    g = gauge_stencil(src, grid_from_args(args, src, 2 * scheme_width(args.scheme)), args.t,
                      args.scheme)
    rows = []
    for lam in _complexes(args.lambdas, "lambdas"):
        r = zero_curvature_residual(g, lam)
        rows.append((lam.real, lam.imag, r.sup, r.l2))
    p = write_text(out / "lax.csv",
                   csv_text(["lambda_re", "lambda_im", "sup_residual", "l2_residual"], rows))
    return {"max_sup": max(r[2] for r in rows)}, [p]


def cmd_evolve(args, out: Path):
    src = source_from_args(args)
    grid = grid_from_args(args)
    dt = args.dt if args.dt is not None else grid.h / 2
    J0, J1 = initial_slices(src, grid, args.t, dt)
    traj = evolve(J0, J1, args.steps, dt, boundary=src if args.boundary == "clamped" else None)
    idx = write_trajectory(traj, out)
    rows = trajectory_diagnostics(traj) if len(traj.trajectory) >= 5 else []
    p = write_text(out / "diagnostics.csv", diagnostics_csv(rows))
    last = traj.trajectory[-1]
    return {"steps": args.steps, "dt": dt, "t_final": last.t,
            "unitarity_defect": float(max(np.max(f.unitarity_defect()) for f in traj.trajectory))}, [idx, p]


def _offsets(text: Optional[str]):
    if not text:
        return list(DEFAULT_OFFSETS)
    return [tuple(_pair(item, float, 2, "offsets")) for item in text.split(";") if item.strip()]


def cmd_monodromy(args, out: Path):
    src = source_from_args(args)
    mode = parse_mode(args.mode, steps=args.steps)
    tol = args.tol if args.tol is not None else 1e-8
    rep = null_monodromy_sweep(src, args.t, default_thetas(args.n_theta), _offsets(args.offsets),
                               mode, args.integrator, tol)
    p = write_text(out / "monodromy.csv", rep.to_csv())
    return {"max_deviation": rep.max_deviation, "mean_deviation": rep.mean_deviation,
            "mode": rep.mode}, [p]


def cmd_frame(args, out: Path):
    src = source_from_args(args)
    tol = args.tol if args.tol is not None else 1e-8
    f = frame_field(src, args.theta, grid_from_args(args), args.t, gate=args.gate,
                    steps=args.steps, tol=tol)
    defect = float(np.max(f.unitarity_defect())) if f.unitary else None
    if f.unitary:
        # RK4 drifts off the group at the 1e-9 level; the file format wants 1e-10
        f = MatrixField(f.grid, unitarize(f.data), f.t, True, dict(f.meta, unitarity_defect=defect))
    p = write_snapshot(f, out / "frame.wdf")
    return {"theta": f.meta["theta"], "steps": f.meta["steps"], "unitarity_defect": defect}, [p]


def cmd_charge(args, out: Path):
    src = source_from_args(args)
    res = topological_charge(src, grid_from_args(args), args.t, n_theta=args.n_theta,
                             steps=args.steps, gate=args.gate)
    p = write_text(out / "charge.json", json_text(res.to_dict()))
    return res.to_dict(), [p]


def cmd_decay(args, out: Path):
    src = source_from_args(args)
    radii = _floats(args.radii, "radii")
    prof = decay_profile(src, args.t, radii, args.n_theta)
    fit = boundary_profile(src, args.t, radii, args.n_theta)
    summary = {"energy_slope": prof.slope, "boundary_exponent": fit.exponent,
               "degenerate": bool(prof.degenerate or fit.degenerate)}
    p1 = write_text(out / "decay.csv", prof.to_csv())
    p2 = write_text(out / "decay.json", json_text(summary))
    return summary, [p1, p2]


def cmd_radon_u1(args, out: Path):
    scalar = SCALARS[args.scalar]()
    base = _pair(args.base, float, 2, "base")
    res = radon_u1(scalar, args.theta, base, args.t, parse_mode(args.mode), dt=args.dt)
    p = write_text(out / "radon.json", json_text(res.to_dict()))
    return res.to_dict(), [p]


COMMANDS = {
    "make": cmd_make, "slice": cmd_slice, "residual": cmd_residual, "energy": cmd_energy,
    "evolve": cmd_evolve, "gauge-check": cmd_gauge_check, "lax-check": cmd_lax_check,
    "monodromy": cmd_monodromy, "frame": cmd_frame, "charge": cmd_charge, "decay": cmd_decay,
    "radon-u1": cmd_radon_u1,
}


def _error_object(exc: Exception) -> dict:
    obj = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("field", "offset", "step", "deviation", "leak", "node", "u"):
        if getattr(exc, attr, None) is not None:
            obj[attr] = getattr(exc, attr)
    return obj


def main(argv=None) -> int:
    as_json = "--json" in (sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        summary, files = COMMANDS[args.command](args, out)
        wall = time.perf_counter() - start
        manifest = {"command": args.command, "config_hash": config_hash(args),
                    "version": __version__, "wall_time": wall,
                    "outputs": [Path(f).name for f in files]}
        write_text(out / "manifest.json", json_text(manifest))
    except (WardLabError, OSError) as exc:
        obj = _error_object(exc)
        if as_json:
            print(json_text(obj), end="")
        else:
            print(f"wardlab: {obj['error']}: {obj['message']}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1
    if as_json:
        print(json_text(summary), end="")
    else:
        for k, v in summary.items():
            print(f"{k}: {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
