"""Boundary-value problems shared by both solvers.

The benchmark body has symmetry planes at its minimum ``x``, ``y`` and
``z`` faces, a prescribed normal displacement ``u_bar`` on its maximum
``x`` face and a pressure ``p`` pushing down on its maximum ``z`` face.
This covers the quarter plate with a hole, boxes and the corner
tetrahedron.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem_core as fem


@dataclass(frozen=True)
class LoadSegment:
    u_bar: float  # target displacement at the end of the segment, m
    p: float  # target pressure, Pa
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("a load segment needs at least one step")


def load_path(segments):
    """``(T, 2)`` array of ``(u_bar, p)`` at the end of each step, starting from zero."""
    rows = []
    start = np.zeros(2)
    for seg in segments:
        target = np.array([seg.u_bar, seg.p], dtype=float)
        s = np.arange(1, seg.steps + 1)[:, None] / seg.steps
        rows.append(start + s * (target - start))
        start = target
    if not rows:
        return np.zeros((0, 2))
    return np.concatenate(rows)


def benchmark_segments(steps=20, scale=0.1):
    """Load-unload-reload pattern of the plate benchmark, scaled by ``scale``.

    Full scale is ``u_bar: 0 -> 0.3 -> 0 -> 0.4`` m together with
    ``p: 0 -> 3e7 -> 0 -> 3.5e7`` Pa.
    """
    return [
        LoadSegment(0.3 * scale, 3.0e7 * scale, steps),
        LoadSegment(0.0, 0.0, steps),
        LoadSegment(0.4 * scale, 3.5e7 * scale, steps),
    ]


class BenchmarkProblem:
    """Mesh, integration points and the load-dependent boundary conditions."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.points = fem.build_integration(mesh)
        x = mesh.nodes
        lo, hi = x.min(axis=0), x.max(axis=0)
        tol = 1e-9 * float(np.max(hi - lo))
        fixed = [3 * np.flatnonzero(np.abs(x[:, d] - lo[d]) <= tol) + d for d in range(3)]
        self._fixed = np.concatenate(fixed)
        self._pulled = 3 * np.flatnonzero(np.abs(x[:, 0] - hi[0]) <= tol)
        if self._pulled.size == 0:
            raise fem.MeshError("no nodes on the loaded face")
        top = hi[2]
        self._unit_pressure = fem.surface_load(
            mesh, lambda a, b, c: np.abs(c - top) <= tol, (0.0, 0.0, -1.0)
        )

    @property
    def n_dofs(self):
        return self.mesh.n_dofs

    def bc(self, u_bar, p):
        dofs = np.concatenate([self._fixed, self._pulled])
        vals = np.concatenate([np.zeros(self._fixed.size), np.full(self._pulled.size, float(u_bar))])
        return fem.BoundaryConditions(dofs, vals, float(p) * self._unit_pressure)


@dataclass
class History:
    """Stacked per-step results; step 0 is the unloaded initial state."""

    u: np.ndarray  # (T+1, ndof)
    eps: np.ndarray  # (T+1, q, 6) Voigt strain
    sigma: np.ndarray  # (T+1, q, 6) Voigt stress
    alpha_y: np.ndarray  # (T+1, q)
    loads: np.ndarray  # (T+1, 2)

    @property
    def steps(self):
        return len(self.u) - 1


def simulate(solver, problem, path, callback=None):
    """Drive ``solver.step(bc)`` along a ``load_path`` array."""
    q = len(problem.points)
    us, eps, sig, ay = [np.zeros(problem.n_dofs)], [np.zeros((q, 6))], [np.zeros((q, 6))], [np.ones(q)]
    for t, (u_bar, p) in enumerate(path, start=1):
        st = solver.step(problem.bc(u_bar, p))
        us.append(st.u)
        eps.append(st.eps)
        sig.append(st.sigma)
        ay.append(st.alpha_y)
        if callback is not None:
            callback(t, st)
    loads = np.vstack([np.zeros((1, 2)), np.asarray(path, dtype=float).reshape(-1, 2)])
    return History(np.array(us), np.array(eps), np.array(sig), np.array(ay), loads)
