"""Command line: ``hwdd {gen-data,run,compare,study}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import benchmark as bm
from . import data_foundry as dfd
from . import fem_core as fem
from . import metrics_study as ms
from . import tensor_lab as tl
from .config import load_config
from .dd_engine import DataDrivenSolver
from .reference_plasticity import ReferenceSolver
from .yield_surface import fit_yield, read_yield_points, write_yield_points

log = logging.getLogger("hwdd")

_EPS_COLS = ["eps11", "eps22", "eps33", "eps23", "eps13", "eps12"]
_SIG_COLS = ["sig11", "sig22", "sig33", "sig23", "sig13", "sig12"]
_SHEAR = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


class CLIError(Exception):
    pass


def _out_dir(cfg, args):
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mesh(cfg):
    if cfg.mesh.kind == "file":
        return fem.read_mesh(cfg.mesh.path)
    return fem.generate_mesh(cfg.mesh.spec())


def _data_paths(cfg, out):
    yp = Path(cfg.data.yield_points) if cfg.data.yield_points else out / "yield_points.csv"
    tp = Path(cfg.data.tensile) if cfg.data.tensile else out / "tensile.csv"
    return yp, tp


def cmd_gen_data(cfg, args):
    out = _out_dir(cfg, args)
    m = cfg.material.build()
    d = cfg.data
    pts = dfd.gen_tension_torsion(d.n1, m.k, m.sigma_y0, seed=d.seed)
    yp = dfd.yield_point_array(pts)
    rec = dfd.gen_tensile_paths(d.n2, d.n_p, m, eps_max=d.eps_max)
    surface = fit_yield(yp, cfg.solver.kind)
    phi0 = float(surface.phi(0.0))
    ext = dfd.build_extended(rec, phi0)
    ypath, tpath = _data_paths(cfg, out)
    write_yield_points(ypath, yp)
    dfd.write_tensile(tpath, rec)
    dfd.write_extended(out / "extended.csv", ext)
    print(
        f"yield points: {len(pts)}  tensile records: {len(rec)}  increments: {len(ext)} "
        f"(inelastic {int(np.sum(ext.subset == dfd.INELASTIC))})  Phi(0)={phi0:.6e}  seed={d.seed}"
    )
    return 0


def _write_history(out, hist, mesh, meta):
    out.mkdir(parents=True, exist_ok=True)
    fem.write_mesh(out / "mesh.txt", mesh)
    T1, ndof = hist.u.shape
    nn = ndof // 3
    step = np.repeat(np.arange(T1), nn)
    node = np.tile(np.arange(nn), T1)
    u = hist.u.reshape(T1 * nn, 3)
    np.savetxt(
        out / "nodal_u.csv", np.column_stack([step, node, u]), delimiter=",",
        header="step,node,ux,uy,uz", comments="", fmt=["%d", "%d", "%.17g", "%.17g", "%.17g"],
    )
    q = hist.eps.shape[1]
    step = np.repeat(np.arange(T1), q)
    point = np.tile(np.arange(q), T1)
    eps = (hist.eps / _SHEAR).reshape(-1, 6)
    sig = hist.sigma.reshape(-1, 6)
    np.savetxt(
        out / "points.csv",
        np.column_stack([step, point, eps, sig, hist.alpha_y.reshape(-1)]),
        delimiter=",",
        header=",".join(["step", "point", *_EPS_COLS, *_SIG_COLS, "alpha_y"]),
        comments="",
        fmt=["%d", "%d"] + ["%.17g"] * 13,
    )
    (out / "run.json").write_text(json.dumps(meta, indent=2))


def read_run(run_dir):
    """Load a run directory into a ``History`` plus its metadata and weights."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    mesh = fem.read_mesh(run_dir / "mesh.txt")
    weights = fem.build_integration(mesh).weight
    pts = np.loadtxt(run_dir / "points.csv", delimiter=",", skiprows=1, ndmin=2)
    nod = np.loadtxt(run_dir / "nodal_u.csv", delimiter=",", skiprows=1, ndmin=2)
    T1 = int(pts[:, 0].max()) + 1
    q = len(pts) // T1
    if q * T1 != len(pts) or q != len(weights):
        raise CLIError(f"{run_dir}: points.csv does not match the mesh")
    eps = pts[:, 2:8].reshape(T1, q, 6) * _SHEAR
    sig = pts[:, 8:14].reshape(T1, q, 6)
    ay = pts[:, 14].reshape(T1, q)
    u = nod[:, 2:5].reshape(T1, -1)
    return bm.History(u, eps, sig, ay, np.zeros((T1, 2))), meta, weights


def _summary(hist):
    disp = np.linalg.norm(hist.u[-1].reshape(-1, 3), axis=1).max() if hist.u.size else 0.0
    smax = 0.0
    if hist.sigma.shape[1]:
        smax = float(np.linalg.eigvalsh(tl.from_voigt_stress(hist.sigma[-1])).max())
    return disp, smax


def cmd_run(cfg, args):
    out = _out_dir(cfg, args)
    solver_name = args.solver
    m = cfg.material.build()
    mesh = _mesh(cfg)
    problem = bm.BenchmarkProblem(mesh)
    path = bm.load_path(cfg.segments())
    if solver_name == "datadriven":
        ypath, tpath = _data_paths(cfg, out)
        if not ypath.exists() or not tpath.exists():
            raise CLIError(f"data files missing ({ypath}, {tpath}); run gen-data first")
        solver = DataDrivenSolver(
            E=m.E, nu=m.nu, kind=cfg.solver.kind,
            check_fixed_point=cfg.solver.check_fixed_point,
            fixed_point_rtol=cfg.solver.fixed_point_rtol,
        ).fit(read_yield_points(ypath), dfd.read_tensile(tpath))
        solver.reset(problem.points)
    else:
        solver = ReferenceSolver(problem.points, m, rtol=cfg.solver.reference_rtol)
    current = {"t": 0}

    def track(t, st):
        current["t"] = t

    try:
        hist = bm.simulate(solver, problem, path, callback=track)
    except Exception as exc:
        raise CLIError(f"{solver_name} solver failed at step {current['t'] + 1}: {exc}") from exc
    run_dir = out / solver_name
    meta = {"solver": solver_name, "E": m.E, "mesh": mesh.name, "steps": hist.steps}
    _write_history(run_dir, hist, mesh, meta)
    disp, smax = _summary(hist)
    print(f"solver={solver_name} steps={hist.steps} max_displacement={disp:.6e} max_principal_stress={smax:.6e}")
    return 0


def cmd_compare(cfg, args):
    a, meta_a, w = read_run(args.run_a)
    b, meta_b, wb = read_run(args.run_b)
    if a.u.shape != b.u.shape or a.eps.shape != b.eps.shape or not np.allclose(w, wb):
        raise CLIError(f"layout mismatch: {a.eps.shape} steps/points vs {b.eps.shape}")
    E = cfg.material.E
    rep = ms.compare_histories(a, b, w, E, {"run": meta_a.get("solver"), "ref": meta_b.get("solver")})
    out = Path(args.out) if args.out else Path(args.run_a)
    rep.write_steps(out / "errors.csv")
    print(f"rmsd={rep.rmsd:.6e} steps={len(rep.errors)} E={E:g}")
    return 0


def cmd_study(cfg, args):
    out = _out_dir(cfg, args)
    if cfg.mesh.kind == "file":
        raise CLIError("studies need a generated mesh")
    setup = ms.StudySetup(
        mesh=cfg.mesh.spec(), segments=cfg.segments(), material=cfg.material.build(),
        n1=cfg.data.n1, kind=cfg.solver.kind, eps_max=cfg.data.eps_max,
    )
    rows = ms.run_study(setup, cfg.study.n2_values, cfg.study.n_p_values, cfg.study.seeds, out_dir=out)
    failed = [r for r in rows if r.status != "ok"]
    for r in rows:
        print(f"n2={r.n2} n_p={r.n_p} seed={r.seed} rmsd={r.rmsd:.6e} status={r.status}")
    if failed:
        print(f"{len(failed)} of {len(rows)} cells failed", file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="hwdd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")

    common(sub.add_parser("gen-data", help="write yield-point and tensile data"))
    p = sub.add_parser("run", help="solve the configured problem")
    common(p)
    p.add_argument("--solver", choices=["datadriven", "reference"], default="datadriven")
    p = sub.add_parser("compare", help="RMSD of run A against run B")
    common(p)
    p.add_argument("run_a")
    p.add_argument("run_b")
    common(sub.add_parser("study", help="convergence study over the data grid"))
    return parser


_COMMANDS = {"gen-data": cmd_gen_data, "run": cmd_run, "compare": cmd_compare, "study": cmd_study}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
    except (CLIError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
