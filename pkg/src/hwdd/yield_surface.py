"""Initial yield surface in the octahedral plane and its normals.

A yield surface is anything with ``phi(theta)`` and ``dphi(theta)``
returning the deviatoric radius of the initial yield locus and its
derivative for Lode angles in ``[0, pi/3]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import tensor_lab as tl

SECTOR = np.pi / 3.0
_C = np.sqrt(3.0) / (2.0 * np.sqrt(2.0))


class DegenerateNormalError(ValueError):
    """Raised when a normal is requested on the hydrostatic axis."""


def fold_theta(theta):
    """Map any Lode angle into ``[0, pi/3]`` using the six-fold isotropy symmetry."""
    t = np.mod(np.asarray(theta, dtype=float), 2.0 * SECTOR)
    return np.where(t > SECTOR, 2.0 * SECTOR - t, t)


def _shape_factor(theta, k):
    return 1.0 + 1.0 / k - (1.0 - 1.0 / k) * np.cos(3.0 * theta)


def phi_analytic(theta, k, sigma_y0):
    """Radius of the k-parameterised initial yield locus; ``k = 1`` is von Mises."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    return sigma_y0 / (_C * _shape_factor(theta, k))


def dphi_analytic(theta, k, sigma_y0):
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    g = _shape_factor(theta, k)
    dg = 3.0 * (1.0 - 1.0 / k) * np.sin(3.0 * theta)
    return -sigma_y0 * dg / (_C * g * g)


@dataclass(frozen=True)
class AnalyticYield:
    k: float
    sigma_y0: float

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.sigma_y0 <= 0:
            raise ValueError("sigma_y0 must be positive")

    def phi(self, theta):
        return phi_analytic(fold_theta(theta), self.k, self.sigma_y0)

    def dphi(self, theta):
        return dphi_analytic(fold_theta(theta), self.k, self.sigma_y0)


class YieldSurfaceInterpolator(RegressorMixin, BaseEstimator):
    """Interpolate ``rho(theta)`` samples on the initial yield locus.

    Samples are mirrored about ``theta = 0`` and extended with period
    ``2 pi / 3`` before interpolation, so the interpolant honours the
    isotropy symmetry and has zero slope at both ends of the sector.

    Parameters
    ----------
    kind : {"spline", "linear", "nearest"}
        ``"spline"`` is a periodic cubic spline with analytic derivative.
        ``"nearest"`` is piecewise constant; its derivative is taken as 0,
        which degrades normals to the deviator direction.
    """

    def __init__(self, kind="spline"):
        self.kind = kind

    def fit(self, X, y):
        theta = np.asarray(X, dtype=float).reshape(-1)
        rho = np.asarray(y, dtype=float).reshape(-1)
        if theta.shape != rho.shape:
            raise ValueError("theta and rho must have the same length")
        if self.kind not in ("spline", "linear", "nearest"):
            raise ValueError(f"unknown interpolation kind {self.kind!r}")
        if theta.size < 2:
            raise ValueError("at least two yield points are required")
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(rho)):
            raise ValueError("yield points must be finite")
        if np.any(theta < -1e-12) or np.any(theta > SECTOR + 1e-12):
            raise ValueError("theta samples must lie in [0, pi/3]")
        if np.any(rho <= 0):
            raise ValueError("rho samples must be positive")
        order = np.argsort(theta, kind="stable")
        theta, rho = np.clip(theta[order], 0.0, SECTOR), rho[order]
        if np.any(np.diff(theta) <= 1e-12):
            raise ValueError("duplicate theta samples (within 1e-12)")

        self.theta_ = theta
        self.rho_ = rho
        x, v = self._periodic_extension(theta, rho)
        self.knots_ = x
        self.values_ = v
        if self.kind == "spline":
            self.spline_ = CubicSpline(x, v, bc_type="periodic")
        grid = np.linspace(0.0, SECTOR, 721)
        if np.any(self._phi(grid) <= 0):
            raise ValueError("interpolated yield surface is not positive on [0, pi/3]")
        return self

    @staticmethod
    def _periodic_extension(theta, rho):
        # one full period [-pi/3, pi/3) of the mirrored samples, closed at +pi/3
        tol = 1e-12
        mirror = theta > tol
        x = np.concatenate([-theta[mirror][::-1], theta])
        v = np.concatenate([rho[mirror][::-1], rho])
        if x[-1] >= SECTOR - tol and x[0] <= -SECTOR + tol:
            x, v = x[1:], v[1:]
        x = np.append(x, x[0] + 2.0 * SECTOR)
        v = np.append(v, v[0])
        return x, v

    def _wrap(self, theta):
        # folded angle into the base period starting at knots_[0]
        t = fold_theta(theta)
        period = 2.0 * SECTOR
        return self.knots_[0] + np.mod(t - self.knots_[0], period)

    def _phi(self, theta):
        t = self._wrap(theta)
        if self.kind == "spline":
            return self.spline_(t)
        if self.kind == "linear":
            return np.interp(t, self.knots_, self.values_)
        idx = np.searchsorted(self.knots_, t)
        idx = np.clip(idx, 1, self.knots_.size - 1)
        left = self.knots_[idx - 1]
        right = self.knots_[idx]
        pick = np.where(t - left <= right - t, idx - 1, idx)
        return self.values_[pick]

    def predict(self, X):
        check_is_fitted(self, "knots_")
        return self._phi(np.asarray(X, dtype=float))

    def phi(self, theta):
        return self.predict(theta)

    def dphi(self, theta):
        """Derivative of the interpolant with respect to the folded Lode angle."""
        check_is_fitted(self, "knots_")
        theta = np.asarray(theta, dtype=float)
        t = fold_theta(theta)
        w = self._wrap(t)
        if self.kind == "spline":
            d = self.spline_(w, 1)
        elif self.kind == "linear":
            idx = np.clip(np.searchsorted(self.knots_, w, side="right"), 1, self.knots_.size - 1)
            d = (self.values_[idx] - self.values_[idx - 1]) / (self.knots_[idx] - self.knots_[idx - 1])
            # the mirrored chords through theta = 0 and pi/3 average to a flat slope
            d = np.where((t == 0.0) | (t == SECTOR), 0.0, d)
        else:
            d = np.zeros_like(w)
        return d


def fit_yield(points, kind="spline") -> YieldSurfaceInterpolator:
    """Fit a yield surface to ``(theta, rho)`` pairs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array of (theta, rho)")
    return YieldSurfaceInterpolator(kind=kind).fit(pts[:, 0], pts[:, 1])


def comparison_stress(sigma, surface):
    """Comparison stress ``rho / Phi(theta)``; zero on the hydrostatic axis."""
    hw = tl.haigh_westergaard(sigma)
    phi = surface.phi(hw.theta)
    return np.where(hw.degenerate, 0.0, hw.rho / phi)


def normal_octahedral(theta, rho, drho, s_principal):
    """Unit outward normal of the locus ``rho(theta)`` in principal stress space.

    ``s_principal`` are the deviatoric principal values at the point
    (norm ``rho``); ``drho`` is ``d rho / d theta`` there. The result is
    orthogonal to the hydrostatic axis.
    """
    theta = np.asarray(theta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    drho = np.asarray(drho, dtype=float)
    s = np.asarray(s_principal, dtype=float)
    if np.any(rho <= 0):
        raise DegenerateNormalError("normal undefined for rho = 0 (hydrostatic state)")
    v = np.stack(
        [np.sin(theta), -np.cos(np.pi / 6 - theta), np.cos(np.pi / 6 + theta)], axis=-1
    )
    n = s + (tl.SQRT23 * drho)[..., None] * v
    return n / np.sqrt(rho * rho + drho * drho)[..., None]


def normal_cartesian(n_hat, rotation):
    """Rotate a principal-space normal back to Cartesian: ``T diag(n) T^T``."""
    return tl.rotate_diagonal(n_hat, rotation)


def stress_normal(sigma, surface, alpha=None):
    """Cartesian yield-surface normal at stress ``sigma`` on the locus scaled by ``alpha``.

    ``alpha`` defaults to the comparison stress of ``sigma`` itself, i.e.
    the normal of the hardened surface passing through the point.
    """
    frame = tl.principal_frame(sigma)
    hw = tl.haigh_westergaard(sigma)
    if np.any(hw.degenerate):
        raise DegenerateNormalError("normal undefined for hydrostatic stress")
    if alpha is None:
        alpha = hw.rho / surface.phi(hw.theta)
    drho = alpha * surface.dphi(hw.theta)
    s = frame.values - frame.values.mean(axis=-1, keepdims=True)
    n_hat = normal_octahedral(hw.theta, hw.rho, drho, s)
    return normal_cartesian(n_hat, frame.rotation)


def read_yield_points(path) -> np.ndarray:
    """Read a ``theta,rho`` CSV into an ``(n, 2)`` array."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames[:2]) != ["theta", "rho"]:
            raise ValueError(f"{path}: expected header 'theta,rho'")
        rows = [(float(r["theta"]), float(r["rho"])) for r in reader]
    return np.array(rows, dtype=float).reshape(-1, 2)


def write_yield_points(path, points) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "rho"])
        for t, r in pts:
            w.writerow([repr(float(t)), repr(float(r))])
