"""Energy-norm errors, RMSD and the data-size convergence study."""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import benchmark as bm
from . import data_foundry as dfd
from . import fem_core as fem
from .dd_engine import DataDrivenSolver
from .reference_plasticity import ReferenceMaterial, ReferenceSolver

log = logging.getLogger(__name__)

_SHEAR = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


def _strain_sq(eps):
    # full-tensor Frobenius norm of engineering-shear Voigt strains
    return np.sum(eps * eps / _SHEAR, axis=-1)


def _stress_sq(sig):
    return np.sum(sig * sig * _SHEAR, axis=-1)


def energy_norm_sq(eps, sig, E):
    """``1/2 E |eps|^2 + 1/2 |sig|^2 / E`` per point for Voigt arrays."""
    return 0.5 * E * _strain_sq(eps) + 0.5 * _stress_sq(sig) / E


def step_error(eps, sig, eps_ref, sig_ref, weights, E):
    """Weighted relative energy-norm distance of one step's state to the reference.

    A zero reference is only allowed together with a zero difference
    (both states unloaded); that step counts as error 0.
    """
    w = np.asarray(weights, dtype=float)
    num = np.sum(w * energy_norm_sq(np.asarray(eps) - eps_ref, np.asarray(sig) - sig_ref, E))
    den = np.sum(w * energy_norm_sq(eps_ref, sig_ref, E))
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ZeroDivisionError("reference state has zero norm but the states differ")
    return float(np.sqrt(num / den))


def rmsd(errors):
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no steps to average")
    return float(np.sqrt(np.mean(e * e)))


@dataclass
class ErrorReport:
    errors: np.ndarray  # per step 1..T
    rmsd: float
    meta: dict = field(default_factory=dict)

    def write_steps(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "error"])
            for t, e in enumerate(self.errors, start=1):
                w.writerow([t, repr(float(e))])


def compare_histories(run, ref, weights, E, meta=None):
    """Per-step errors (steps 1..T) and RMSD of ``run`` against ``ref``."""
    if run.eps.shape != ref.eps.shape:
        raise ValueError(f"layout mismatch: {run.eps.shape} vs {ref.eps.shape}")
    errs = np.array(
        [step_error(run.eps[t], run.sigma[t], ref.eps[t], ref.sigma[t], weights, E) for t in range(1, run.steps + 1)]
    )
    return ErrorReport(errs, rmsd(errs), dict(meta or {}, E=E))


# --------------------------------------------------------------------------
# convergence study


@dataclass
class StudySetup:
    """Everything fixed across the grid cells of a study."""

    mesh: dict
    segments: list
    material: ReferenceMaterial = field(default_factory=ReferenceMaterial)
    n1: int = 50
    kind: str = "spline"
    eps_max: float = 0.05


def reference_history(setup):
    problem = bm.BenchmarkProblem(fem.generate_mesh(setup.mesh))
    solver = ReferenceSolver(problem.points, setup.material)
    return bm.simulate(solver, problem, bm.load_path(setup.segments))


def run_cell(setup, n2, n_p, seed, reference):
    """One data-driven run of the grid, compared against the reference history."""
    t0 = time.perf_counter()
    m = setup.material
    mesh = fem.generate_mesh(setup.mesh)
    problem = bm.BenchmarkProblem(mesh)
    pts = dfd.gen_tension_torsion(setup.n1, m.k, m.sigma_y0, seed=seed)
    rec = dfd.gen_tensile_paths(n2, n_p, m, eps_max=setup.eps_max)
    solver = DataDrivenSolver(E=m.E, nu=m.nu, kind=setup.kind).fit(dfd.yield_point_array(pts), rec)
    solver.reset(problem.points)
    hist = bm.simulate(solver, problem, bm.load_path(setup.segments))
    meta = dict(n1=setup.n1, n2=n2, n_p=n_p, seed=seed, mesh=mesh.name)
    rep = compare_histories(hist, reference, problem.points.weight, m.E, meta)
    rep.meta["wallclock_s"] = time.perf_counter() - t0
    return rep


def _cell_job(args):
    setup, n2, n_p, seed, reference = args
    try:
        return run_cell(setup, n2, n_p, seed, reference), None
    except Exception as exc:  # recorded per cell, the study continues
        log.exception("study cell n2=%s n_p=%s seed=%s failed", n2, n_p, seed)
        return None, f"{type(exc).__name__}: {exc}"


def worker_count(requested=None):
    """Worker processes, capped by ``HWDD_THREADS`` (0 or unset means all CPUs)."""
    if requested is None:
        requested = int(os.environ.get("HWDD_THREADS", "0") or 0)
    if requested < 0:
        raise ValueError("thread count must be >= 0")
    return requested or os.cpu_count() or 1


@dataclass
class StudyRow:
    n2: int
    n_p: int
    seed: int
    rmsd: float
    steps: int
    mesh: str
    wallclock_s: float
    status: str = "ok"
    report: ErrorReport | None = None


STUDY_COLUMNS = ["n2", "n_p", "seed", "rmsd", "steps", "mesh", "wallclock_s"]


def run_study(setup, n2_values, n_p_values, seeds=(0,), out_dir=None, workers=None, reference=None):
    """Run every ``(n2, n_p, seed)`` cell; rows follow grid order.

    Writes ``study.csv`` plus one per-step error CSV per cell when
    ``out_dir`` is given. Failed cells get ``rmsd = nan`` and their message
    in ``status``.
    """
    if reference is None:
        reference = reference_history(setup)
    mesh_name = fem.generate_mesh(setup.mesh).name
    grid = [(n2, n_p, s) for n2 in n2_values for n_p in n_p_values for s in seeds]
    jobs = [(setup, n2, n_p, s, reference) for n2, n_p, s in grid]
    n = min(worker_count(workers), len(jobs)) if jobs else 1
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    rows = []
    for (n2, n_p, s), (rep, err) in zip(grid, results):
        if rep is None:
            rows.append(StudyRow(n2, n_p, s, float("nan"), reference.steps, mesh_name, float("nan"), err))
        else:
            rows.append(StudyRow(n2, n_p, s, rep.rmsd, len(rep.errors), mesh_name, rep.meta["wallclock_s"], "ok", rep))
    if out_dir is not None:
        write_study(out_dir, rows)
    return rows


def write_study(out_dir, rows):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "study.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STUDY_COLUMNS)
        for r in rows:
            w.writerow([r.n2, r.n_p, r.seed, repr(r.rmsd), r.steps, r.mesh, f"{r.wallclock_s:.3f}"])
    with open(out / "study_status.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n2", "n_p", "seed", "status"])
        for r in rows:
            w.writerow([r.n2, r.n_p, r.seed, r.status])
    for r in rows:
        if r.report is not None:
            r.report.write_steps(out / f"errors_n2-{r.n2}_np-{r.n_p}_seed-{r.seed}.csv")
