"""Synthetic measurement sets and the extended tensile data set.

Two experiments feed the data-driven solver:

* a combined tension-torsion test giving points ``(theta, rho)`` on the
  initial yield locus, used to fit ``Phi(theta)``;
* uniaxial tensile tests along prescribed strain paths, turned into
  increments ``(d_eps, d_sig, alpha)`` that carry the hardening response.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import tensor_lab as tl
from .reference_plasticity import ReferenceMaterial, uniaxial_driver
from .yield_surface import fold_theta, stress_normal

log = logging.getLogger(__name__)

ELASTIC, INELASTIC = 0, 1
SUBSET_NAMES = ("elastic", "inelastic")


class NoAdmissibleDataError(LookupError):
    """The requested data subset is empty (a hole in data coverage)."""


# --------------------------------------------------------------------------
# tension-torsion yield points


def torsion_residual(sig11, sig23, k, sigma_y0):
    """Yield function of ``sigma = sig11 e1e1 + sig23 (e2e3 + e3e2)`` minus ``sigma_y0``."""
    q = sig11 * sig11 + 3.0 * sig23 * sig23
    if q == 0.0:
        return -sigma_y0
    cos3 = (sig11**3 - 9.0 * sig11 * sig23 * sig23) / q**1.5
    return np.sqrt(q) / (2.0 * k) * (1.0 + k + (1.0 - k) * cos3) - sigma_y0


def torsion_shear(sig11, k, sigma_y0, max_expand=60):
    """Non-negative ``sig23`` placing ``(sig11, sig23)`` on the initial yield locus."""
    g0 = torsion_residual(sig11, 0.0, k, sigma_y0)
    if abs(g0) <= 1e-14 * sigma_y0:
        return 0.0
    if g0 > 0:
        raise ValueError(f"sig11={sig11:g} already lies outside the yield locus")
    hi = sigma_y0
    for _ in range(max_expand):
        if torsion_residual(sig11, hi, k, sigma_y0) > 0:
            break
        hi *= 2.0
    else:
        raise ValueError(f"could not bracket the torsion root for sig11={sig11:g}")
    return brentq(lambda t: torsion_residual(sig11, t, k, sigma_y0), 0.0, hi, xtol=1e-10, rtol=1e-15)


@dataclass(frozen=True)
class TorsionYieldPoint:
    sig11: float
    sig23: float
    theta: float
    rho: float

    @property
    def stress(self):
        return tl.sym([self.sig11, 0.0, 0.0, self.sig23, 0.0, 0.0])


def gen_tension_torsion(n1, k, sigma_y0, seed=0, max_retries=10):
    """Draw ``n1`` points on the initial yield locus from a tension-torsion test.

    ``sig11`` is uniform in ``[-sigma_y0, k sigma_y0]``; ``sig23 >= 0``
    solves the yield condition. The Lode angle is taken from the full
    stress tensor and folded into ``[0, pi/3]``.
    """
    if n1 < 2:
        raise ValueError("n1 must be at least 2")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n1):
        for attempt in range(max_retries + 1):
            s11 = float(rng.uniform(-sigma_y0, k * sigma_y0))
            try:
                s23 = torsion_shear(s11, k, sigma_y0)
                break
            except ValueError:
                if attempt == max_retries:
                    raise
                log.warning("resampling tension-torsion point (sig11=%g)", s11)
        hw = tl.haigh_westergaard(tl.sym([s11, 0.0, 0.0, s23, 0.0, 0.0]))
        out.append(TorsionYieldPoint(s11, s23, float(fold_theta(hw.theta)), float(hw.rho)))
    return out


def yield_point_array(points):
    """``(n, 2)`` array of ``(theta, rho)`` from tension-torsion points."""
    return np.array([[p.theta, p.rho] for p in points], dtype=float).reshape(-1, 2)


# --------------------------------------------------------------------------
# uniaxial tensile paths


@dataclass
class TensileData:
    """Columnar tensile records; ``eps22`` is the lateral strain (``eps33 = eps22``)."""

    path: np.ndarray
    step: np.ndarray
    eps11: np.ndarray
    eps22: np.ndarray
    sig11: np.ndarray

    def __post_init__(self):
        self.path = np.asarray(self.path, dtype=np.int64)
        self.step = np.asarray(self.step, dtype=np.int64)
        self.eps11 = np.asarray(self.eps11, dtype=float)
        self.eps22 = np.asarray(self.eps22, dtype=float)
        self.sig11 = np.asarray(self.sig11, dtype=float)
        n = len(self.path)
        if not all(len(a) == n for a in (self.step, self.eps11, self.eps22, self.sig11)):
            raise ValueError("tensile columns differ in length")
        same = self.path[1:] == self.path[:-1]
        if np.any(same & (self.step[1:] <= self.step[:-1])):
            raise ValueError("step indices must increase within a path")

    def __len__(self):
        return len(self.path)

    def strain(self):
        z = np.zeros((len(self), 3, 3))
        z[:, 0, 0] = self.eps11
        z[:, 1, 1] = z[:, 2, 2] = self.eps22
        return z

    def stress(self):
        z = np.zeros((len(self), 3, 3))
        z[:, 0, 0] = self.sig11
        return z


def default_loading_paths(n_p, eps_max=0.05, material=None):
    """Load-unload-reload strain paths, one per loading path.

    Path ``j`` loads to ``eps_max (j + 1) / (n_p + 1)``, unloads by an
    elastic strain amount that keeps the bar in tension and reloads to
    ``eps_max``. Returned as lists of ``(target eps11, weight)`` segments;
    the weights share out the ``n2 - 1`` steps of a path.
    """
    if n_p < 1:
        raise ValueError("n_p must be at least 1")
    m = material or ReferenceMaterial()
    back = 0.5 * m.k * m.sigma_y0 / m.E
    paths = []
    for j in range(n_p):
        peak = eps_max * (j + 1) / (n_p + 1)
        paths.append([(peak, peak), (peak - back, back), (eps_max, eps_max - peak + back)])
    return paths


def _sample_path(segments, n2):
    """Strain values (``n2`` of them, starting at 0) along piecewise-linear segments."""
    if n2 - 1 < len(segments):
        # too few points for the full pattern: keep a monotone load to the end
        return np.linspace(0.0, segments[-1][0], n2)
    weights = np.array([w for _, w in segments], dtype=float)
    steps = np.maximum(1, np.floor((n2 - 1) * weights / weights.sum()).astype(int))
    while steps.sum() > n2 - 1:
        steps[np.argmax(steps)] -= 1
    steps[np.argmax(weights)] += (n2 - 1) - steps.sum()
    start = 0.0
    out = [np.zeros(1)]
    for (target, _), s in zip(segments, steps):
        out.append(np.linspace(start, target, s + 1)[1:])
        start = target
    return np.concatenate(out)


def gen_tensile_paths(n2, n_p, material, loading=None, eps_max=0.05):
    """Simulate ``n_p`` uniaxial tensile tests with ``n2`` records each."""
    if n2 < 2:
        raise ValueError("n2 must be at least 2")
    if n_p < 1:
        raise ValueError("n_p must be at least 1")
    loading = loading or default_loading_paths(n_p, eps_max, material)
    if len(loading) != n_p:
        raise ValueError(f"expected {n_p} loading paths, got {len(loading)}")
    cols = {name: [] for name in ("path", "step", "eps11", "eps22", "sig11")}
    for j, segs in enumerate(loading):
        e11 = _sample_path([(float(t), float(w)) for t, w in segs], n2)
        e11, e22, s11 = uniaxial_driver(e11, material)
        cols["path"].append(np.full(n2, j))
        cols["step"].append(np.arange(n2))
        cols["eps11"].append(e11)
        cols["eps22"].append(e22)
        cols["sig11"].append(s11)
    return TensileData(**{k: np.concatenate(v) for k, v in cols.items()})


# --------------------------------------------------------------------------
# extended data set


@dataclass
class ExtendedDataSet:
    """Tensile increments with endpoint hardening variable and subset tag.

    ``deps``/``dsig`` are ``(n, 3, 3)``. ``gamma`` holds the identified
    plastic modulus of each increment once :func:`identify_gamma` ran.
    """

    path: np.ndarray
    step: np.ndarray
    deps: np.ndarray
    dsig: np.ndarray
    alpha: np.ndarray
    subset: np.ndarray
    sigma_end: np.ndarray
    gamma: np.ndarray | None = None

    def __len__(self):
        return len(self.alpha)

    def select(self, subset):
        return np.flatnonzero(self.subset == subset)


def build_extended(records, phi0):
    """Consecutive increments per path with ``alpha = sqrt(2/3) |sig11| / Phi(0)``.

    Increments attach the hardening variable of their end record. An
    increment is inelastic iff its ``alpha`` exceeds the running maximum of
    the path, which starts at the initial yield level 1.
    """
    if not phi0 > 0:
        raise ValueError("Phi(0) must be positive")
    eps, sig = records.strain(), records.stress()
    alpha_all = tl.SQRT23 * np.abs(records.sig11) / phi0
    keep = np.flatnonzero(records.path[1:] == records.path[:-1]) + 1
    subset = np.empty(len(keep), dtype=np.int8)
    run_max, current = 1.0, None
    for n, i in enumerate(keep):
        if records.path[i] != current:
            current, run_max = records.path[i], 1.0
        if alpha_all[i] > run_max:
            subset[n] = INELASTIC
            run_max = alpha_all[i]
        else:
            subset[n] = ELASTIC
    return ExtendedDataSet(
        path=records.path[keep],
        step=records.step[keep],
        deps=eps[keep] - eps[keep - 1],
        dsig=sig[keep] - sig[keep - 1],
        alpha=alpha_all[keep],
        subset=subset,
        sigma_end=sig[keep],
    )


@dataclass
class GammaFit:
    gamma: float
    off_normal: float
    clamped: bool


def gamma_solve(deps, dsig, N, lam, mu):
    """Plastic modulus ``gamma`` with ``dsig = C_el : deps - gamma (N : deps) N``.

    Least-squares projection of the residual ``R = C_el : deps - dsig`` on
    ``N``; negative values are clamped to 0. ``off_normal`` is
    ``|R - (R:N) N| / |R|``, a data consistency check.
    """
    deps = np.asarray(deps, dtype=float)
    dsig = np.asarray(dsig, dtype=float)
    N = np.asarray(N, dtype=float)
    el = lam * tl.trace(deps)[..., None, None] * np.eye(3) + 2.0 * mu * deps
    R = el - dsig
    nd = tl.ddot(N, deps)
    if np.any(np.abs(nd) <= 1e-14 * tl.frobenius(deps)):
        raise ValueError("ill-posed gamma identification: N is orthogonal to the strain increment")
    rn = tl.ddot(R, N)
    g = rn / nd
    rnorm = tl.frobenius(R)
    perp = tl.frobenius(R - rn[..., None, None] * N)
    off = np.divide(perp, rnorm, out=np.zeros_like(perp), where=rnorm > 0)
    clamped = g < 0
    return GammaFit(np.maximum(g, 0.0), off, clamped)


def identify_gamma(data, surface, lam, mu):
    """Fill ``data.gamma`` for inelastic increments using each point's own normal."""
    gamma = np.zeros(len(data))
    idx = data.select(INELASTIC)
    if idx.size:
        N = stress_normal(data.sigma_end[idx], surface, alpha=data.alpha[idx])
        fit = gamma_solve(data.deps[idx], data.dsig[idx], N, lam, mu)
        if np.any(fit.clamped):
            log.info("%d data increments gave negative gamma (clamped)", int(np.sum(fit.clamped)))
        gamma[idx] = fit.gamma
    data.gamma = gamma
    return data


class AlphaIndex:
    """Sorted lookup of the nearest ``alpha`` within one subset.

    Ties (equal distance or equal ``alpha``) resolve to the lowest
    ``(path, step)``.
    """

    def __init__(self, data, subset):
        idx = data.select(subset)
        if idx.size == 0:
            self.order = idx
            self.keys = np.empty(0)
            return
        order = np.lexsort((data.step[idx], data.path[idx], data.alpha[idx]))
        self.order = idx[order]
        self.keys = data.alpha[self.order]
        # first position of each run of equal keys
        first = np.ones(len(self.keys), bool)
        first[1:] = self.keys[1:] != self.keys[:-1]
        self._run_start = np.maximum.accumulate(np.where(first, np.arange(len(self.keys)), 0))
        # rank of (path, step) among all records, for equal-distance ties
        rank = np.empty(len(data), dtype=np.int64)
        rank[np.lexsort((data.step, data.path))] = np.arange(len(data))
        self._tie = rank[self.order]

    def query(self, alpha):
        """Data indices of the nearest points for an array of ``alpha`` values."""
        if self.keys.size == 0:
            raise NoAdmissibleDataError("no admissible data in the requested subset")
        a = np.asarray(alpha, dtype=float)
        n = self.keys.size
        hi = np.clip(np.searchsorted(self.keys, a, side="left"), 0, n - 1)
        lo = self._run_start[np.clip(hi - 1, 0, n - 1)]
        hi = self._run_start[hi]
        dl = np.abs(a - self.keys[lo])
        dh = np.abs(a - self.keys[hi])
        pick_lo = (dl < dh) | ((dl == dh) & (self._tie[lo] <= self._tie[hi]))
        return self.order[np.where(pick_lo, lo, hi)]


def nearest_by_alpha(alpha, subset, data):
    """Index of the data point of ``subset`` with minimal ``|alpha - alpha_i|``."""
    return int(AlphaIndex(data, subset).query(alpha))


# --------------------------------------------------------------------------
# CSV IO


def write_tensile(path, records):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "step", "eps11", "eps22", "sig11"])
        for row in zip(records.path, records.step, records.eps11, records.eps22, records.sig11):
            w.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2:]])


def read_tensile(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "step", "eps11", "eps22", "sig11"]:
            raise ValueError(f"{path}: expected header 'path,step,eps11,eps22,sig11'")
        rows = list(reader)
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    return TensileData(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2], arr[:, 3], arr[:, 4])


def write_extended(path, data):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "step", "deps11", "deps22", "dsig11", "alpha", "subset"])
        for i in range(len(data)):
            w.writerow(
                [
                    int(data.path[i]),
                    int(data.step[i]),
                    repr(float(data.deps[i, 0, 0])),
                    repr(float(data.deps[i, 1, 1])),
                    repr(float(data.dsig[i, 0, 0])),
                    repr(float(data.alpha[i])),
                    SUBSET_NAMES[data.subset[i]],
                ]
            )
