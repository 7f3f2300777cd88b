"""Classical elasto-plasticity with power-law isotropic hardening.

Yield criterion ``F(sigma) <= sigma_y(ebar)`` with the k-parameterised
Lode-angle dependent ``F`` and associative flow. ``F`` is evaluated from
the deviatoric invariants as ``a sqrt(J2) - b J3 / J2``, which is smooth
everywhere off the hydrostatic axis, so gradients and Hessians are exact.

The equivalent plastic strain is work-conjugate to ``F``: because ``F`` is
positively homogeneous of degree one, ``sigma : d eps_p = F d ebar``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import fem_core as fem
from . import tensor_lab as tl
from .yield_surface import AnalyticYield

log = logging.getLogger(__name__)

# prefactor printed with the hardening law, applied verbatim
HARDENING_PREFACTOR = 1.0 - np.tan(np.pi / 6.0) / 3.0

_DEV = np.eye(6)
_DEV[:3, :3] -= 1.0 / 3.0
_ONE = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
_MANDEL_BASIS = tl.from_mandel(np.eye(6))  # (6, 3, 3), orthonormal
_STRAIN_TO_MANDEL = np.array([1, 1, 1, 1 / tl.SQRT2, 1 / tl.SQRT2, 1 / tl.SQRT2])
_STRESS_TO_MANDEL = np.array([1, 1, 1, tl.SQRT2, tl.SQRT2, tl.SQRT2])


class ReturnMappingError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReferenceMaterial:
    E: float = 3e10
    nu: float = 0.2
    H: float = 2.5e9
    sigma0: float = 3e8
    h: float = 2.0
    k: float = 0.75

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("E must be positive")
        if not 0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 0.5)")
        if not self.H >= 0:
            raise ValueError("H must be non-negative")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.k > 0:
            raise ValueError("k must be positive")

    @property
    def bulk(self):
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def shear(self):
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self):
        return self.bulk - 2.0 * self.shear / 3.0

    @property
    def mu(self):
        return self.shear

    @property
    def sigma_y0(self):
        return sigma_y(0.0, self)

    def surface(self):
        """Analytic initial yield locus of this material."""
        return AnalyticYield(self.k, self.sigma_y0)

    def elastic_voigt(self):
        return elastic_voigt(self.lam, self.mu)


def elastic_voigt(lam, mu):
    """Isotropic stiffness acting on engineering-shear Voigt strains."""
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.arange(3), np.arange(3)] += 2.0 * mu
    C[np.arange(3, 6), np.arange(3, 6)] = mu
    return C


def sigma_y(ebar, material):
    """Power-law hardening ``c (sigma0 + H ebar^(1/h))``."""
    ebar = np.asarray(ebar, dtype=float)
    if np.any(ebar < 0):
        raise ValueError("equivalent plastic strain must be non-negative")
    return HARDENING_PREFACTOR * (material.sigma0 + material.H * ebar ** (1.0 / material.h))


def _yield_coeffs(k):
    return 0.5 * tl.SQRT3 * (1.0 + 1.0 / k), 2.25 * (1.0 - 1.0 / k)


def yield_F(sigma, k):
    """Comparison stress ``F``; reduces to ``sqrt(3 J2)`` for ``k = 1``."""
    hw = tl.haigh_westergaard(sigma)
    g = 1.0 + 1.0 / k - (1.0 - 1.0 / k) * np.cos(3.0 * hw.theta)
    return hw.rho * tl.SQRT3 / (2.0 * tl.SQRT2) * g


def yield_derivatives(s, k, hessian=True):
    """``F``, ``dF/dsigma`` and ``d2F/dsigma2`` at deviatoric Mandel stresses ``s``."""
    a, b = _yield_coeffs(k)
    s = np.asarray(s, dtype=float)
    j2 = 0.5 * np.einsum("...i,...i->...", s, s)
    st = tl.from_mandel(s)
    j3 = np.linalg.det(st)
    t = tl.to_mandel(tl.deviator(st @ st))
    r = np.sqrt(j2)
    F = a * r - b * j3 / j2
    n = (a / (2.0 * r))[..., None] * s - b * (t / j2[..., None] - (j3 / j2**2)[..., None] * s)
    if not hessian:
        return F, n, None
    # d dev(s.s)/d sigma, built column by column on the Mandel basis
    prod = np.einsum("...ik,jkl->...jil", st, _MANDEL_BASIS)
    Q = tl.to_mandel(prod + np.swapaxes(prod, -1, -2))  # (..., 6 cols, 6)
    M = _DEV @ np.swapaxes(Q, -1, -2) @ _DEV
    ss = np.einsum("...i,...j->...ij", s, s)
    ts = np.einsum("...i,...j->...ij", t, s)
    e = lambda x: x[..., None, None]  # noqa: E731
    hess = (a / 2.0) * (_DEV / e(r) - ss / e(2.0 * r**3)) - b * (
        M / e(j2)
        - (ts + np.swapaxes(ts, -1, -2)) / e(j2**2)
        - e(j3) * _DEV / e(j2**2)
        + 2.0 * e(j3) * ss / e(j2**3)
    )
    return F, n, hess


class _Hardening:
    """Hardening in a variable ``y`` that keeps the local Newton smooth.

    For ``h > 1`` the law has an infinite slope at ``ebar = 0``; with
    ``ebar = y^h`` it becomes linear in ``y``.
    """

    def __init__(self, material):
        self.m = material
        self.subst = material.h > 1.0 and material.H > 0

    def y_of(self, ebar):
        return ebar ** (1.0 / self.m.h) if self.subst else ebar

    def ebar(self, y):
        return y**self.m.h if self.subst else y

    def debar(self, y):
        return self.m.h * y ** (self.m.h - 1.0) if self.subst else np.ones_like(y)

    def sy(self, y):
        m = self.m
        if self.subst:
            return HARDENING_PREFACTOR * (m.sigma0 + m.H * y)
        return HARDENING_PREFACTOR * (m.sigma0 + m.H * np.maximum(y, 0.0) ** (1.0 / m.h))

    def dsy(self, y):
        m = self.m
        c = HARDENING_PREFACTOR * m.H
        if self.subst:
            return np.full_like(y, c)
        if m.H == 0:
            return np.zeros_like(y)
        p = 1.0 / m.h
        if p == 1.0:
            return np.full_like(y, c)
        # here h < 1, so the slope vanishes at ebar = 0
        return c * p * np.maximum(y, 0.0) ** (p - 1.0)


@dataclass
class ReturnMapResult:
    sigma: np.ndarray  # (q, 6) Voigt stress
    eps_p: np.ndarray  # (q, 6) Voigt strain
    ebar: np.ndarray  # (q,)
    tangent: np.ndarray  # (q, 6, 6) Voigt consistent tangent
    plastic: np.ndarray  # (q,) bool


def return_map(eps, eps_p, ebar, material, tol=1e-12, max_iter=60):
    """Closest-point stress update for Voigt strains ``eps`` of shape ``(q, 6)``.

    ``eps_p`` (Voigt, engineering shear) and ``ebar`` are the converged
    history of the previous step. Returns stresses, updated history and
    the consistent tangent.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    eps_p = np.atleast_2d(np.asarray(eps_p, dtype=float))
    ebar = np.atleast_1d(np.asarray(ebar, dtype=float))
    m = material
    G, K = m.shear, m.bulk
    e_el = (eps - eps_p) * _STRAIN_TO_MANDEL
    tr = e_el[:, :3].sum(axis=1)
    s_tr = 2.0 * G * (e_el @ _DEV)
    sigma_m = K * tr[:, None] * _ONE + s_tr
    Cel_m = K * np.outer(_ONE, _ONE) + 2.0 * G * _DEV
    q = len(eps)
    tangent_m = np.broadcast_to(Cel_m, (q, 6, 6)).copy()
    eps_p_new = eps_p.copy()
    ebar_new = ebar.copy()

    hard = _Hardening(m)
    sy_n = sigma_y(ebar, m)
    rho_tr = np.linalg.norm(s_tr, axis=1)
    live = rho_tr > 1e-12 * np.maximum(np.abs(sigma_m).max(axis=1), 1.0)
    F_tr = np.zeros(q)
    if np.any(live):
        F_tr[live] = yield_derivatives(s_tr[live], m.k, hessian=False)[0]
    plastic = live & (F_tr - sy_n > tol * sy_n)
    idx = np.flatnonzero(plastic)
    if idx.size:
        s, y, dlam, tang_dev = _local_newton(s_tr[idx], ebar[idx], hard, G, m.k, tol, max_iter)
        _, n, _ = yield_derivatives(s, m.k, hessian=False)
        sigma_m[idx] = K * tr[idx, None] * _ONE + s
        tangent_m[idx] = K * np.outer(_ONE, _ONE) + tang_dev
        eps_p_new[idx] += (dlam[:, None] * n) / _STRAIN_TO_MANDEL
        ebar_new[idx] = hard.ebar(y)
    return ReturnMapResult(
        sigma_m / _STRESS_TO_MANDEL,
        eps_p_new,
        ebar_new,
        tl.mandel_to_voigt_stiffness(tangent_m),
        plastic,
    )


def _local_newton(s_tr, ebar_n, hard, G, k, tol, max_iter):
    """Solve ``s = s_tr - 2G dlam n(s)``, ``F(s) = sigma_y`` for a batch of points."""
    scale = hard.sy(hard.y_of(ebar_n))
    y_n = hard.y_of(ebar_n)
    s = s_tr.copy()
    y = y_n.copy()
    eye = np.eye(6)

    def residual(s, y):
        F, n, hess = yield_derivatives(s, k)
        dlam = hard.ebar(y) - ebar_n
        rs = (s - s_tr + 2.0 * G * dlam[:, None] * n) / scale[:, None]
        rf = (F - hard.sy(y)) / scale
        return np.concatenate([rs, rf[:, None]], axis=1), n, hess, dlam

    R, n, hess, dlam = residual(s, y)
    norm = np.linalg.norm(R, axis=1)
    for it in range(max_iter):
        if np.all(norm <= tol):
            break
        J = np.zeros((len(s), 7, 7))
        J[:, :6, :6] = (eye + 2.0 * G * dlam[:, None, None] * hess) / scale[:, None, None]
        J[:, :6, 6] = 2.0 * G * hard.debar(y)[:, None] * n / scale[:, None]
        J[:, 6, :6] = n / scale[:, None]
        J[:, 6, 6] = -hard.dsy(y) / scale
        dx = -np.linalg.solve(J, R[..., None])[..., 0]
        step = np.ones(len(s))
        for _ in range(30):
            y_try = np.maximum(y + step * dx[:, 6], y_n)
            s_try = s + step[:, None] * dx[:, :6]
            R_try, n_try, h_try, d_try = residual(s_try, y_try)
            nt = np.linalg.norm(R_try, axis=1)
            bad = (nt > (1.0 - 1e-4 * step) * norm) & (norm > 1e3 * tol)
            bad |= ~np.isfinite(nt)
            if not np.any(bad):
                break
            step = np.where(bad, 0.5 * step, step)
        s, y, R, n, hess, dlam, norm = s_try, y_try, R_try, n_try, h_try, d_try, nt
    else:
        if np.any(norm > tol):
            raise ReturnMappingError(
                f"local Newton did not converge in {max_iter} iterations, max residual {norm.max():.3e}"
            )
    if np.any(norm > tol):
        raise ReturnMappingError(f"local Newton stalled, max residual {norm.max():.3e}")

    # consistent tangent of the deviatoric response from the converged Jacobian
    J = np.zeros((len(s), 7, 7))
    J[:, :6, :6] = (eye + 2.0 * G * dlam[:, None, None] * hess) / scale[:, None, None]
    J[:, :6, 6] = 2.0 * G * hard.debar(y)[:, None] * n / scale[:, None]
    J[:, 6, :6] = n / scale[:, None]
    J[:, 6, 6] = -hard.dsy(y) / scale
    Jinv = np.linalg.inv(J)
    tang_dev = Jinv[:, :6, :6] @ (2.0 * G * _DEV) / scale[:, None, None]
    return s, y, dlam, tang_dev


# --------------------------------------------------------------------------
# uniaxial stress driver


def uniaxial_driver(eps11_path, material):
    """Exact uniaxial-stress response along a prescribed axial strain path.

    Returns arrays ``(eps11, eps22, sig11)``; lateral strains follow from
    zero transverse stress and deviatoric plastic flow.
    """
    m = material
    E = m.E
    ep = 0.0
    ebar = 0.0
    path = np.asarray(eps11_path, dtype=float)
    out = np.empty((len(path), 3))
    for i, e in enumerate(path):
        sig_tr = E * (e - ep)
        if sig_tr >= 0:
            F_tr, n11 = sig_tr / m.k, 1.0 / m.k
        else:
            F_tr, n11 = -sig_tr, -1.0
        sy = float(sigma_y(ebar, m))
        if F_tr > sy * (1.0 + 1e-14):

            def g(dl):
                sig = E * (e - ep - dl * n11)
                return abs(sig) / (m.k if n11 > 0 else 1.0) - float(sigma_y(ebar + dl, m))

            hi = abs(e - ep) / abs(n11)
            dl = brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
            ep += dl * n11
            ebar += dl
        sig = E * (e - ep)
        out[i] = (e, -m.nu * sig / E - 0.5 * ep, sig)
    return out[:, 0], out[:, 1], out[:, 2]


# --------------------------------------------------------------------------
# global Newton solver


@dataclass
class StepState:
    u: np.ndarray
    eps: np.ndarray  # (q, 6) Voigt strain
    sigma: np.ndarray  # (q, 6) Voigt stress
    alpha_y: np.ndarray  # (q,) sigma_y(ebar) / sigma_y(0)
    eps_p: np.ndarray
    ebar: np.ndarray
    iterations: int = 0


class ReferenceSolver:
    """Incremental Newton-Raphson solver with return mapping at each point."""

    def __init__(self, points, material, rtol=1e-8, max_iter=25, max_bisections=8):
        self.points = points
        self.material = material
        self.rtol = rtol
        self.max_iter = max_iter
        self.max_bisections = max_bisections
        q = len(points)
        self.u = np.zeros(points.n_dofs)
        self.eps_p = np.zeros((q, 6))
        self.ebar = np.zeros(q)
        self.sigma = np.zeros((q, 6))
        self.eps = np.zeros((q, 6))
        self._bc = None

    def _newton(self, bc):
        pts, m = self.points, self.material
        u = self.u.copy()
        free = bc.free_dofs()
        # first correction carries the Dirichlet increment
        lift = bc.dirichlet_values - u[bc.dirichlet_dofs]
        for it in range(1, self.max_iter + 1):
            eps = pts.strain(u)
            res = return_map(eps, self.eps_p, self.ebar, m)
            fint = pts.internal_force(res.sigma)
            r = bc.force - fint
            scale = max(np.linalg.norm(bc.force), np.linalg.norm(fint), 1e-30)
            if it > 1 and np.linalg.norm(r[free]) <= self.rtol * scale:
                return u, eps, res, it - 1
            if it == 1 and not np.any(lift) and np.linalg.norm(r[free]) <= self.rtol * scale:
                return u, eps, res, 0
            K = fem.assemble_stiffness(pts, res.tangent)
            incr = fem.BoundaryConditions(bc.dirichlet_dofs, lift, r)
            u = u + fem.solve_constrained(K, r, incr)
            lift = np.zeros_like(lift)
        raise ConvergenceError(f"global Newton did not converge in {self.max_iter} iterations")

    def _advance(self, bc_old, bc_new, depth):
        try:
            u, eps, res, it = self._newton(bc_new)
        except (ConvergenceError, ReturnMappingError, fem.SingularSystemError):
            if depth >= self.max_bisections:
                raise
            log.info("bisecting load step (depth %d)", depth + 1)
            mid = fem.BoundaryConditions(
                bc_new.dirichlet_dofs,
                0.5 * (bc_old.dirichlet_values + bc_new.dirichlet_values),
                0.5 * (bc_old.force + bc_new.force),
            )
            a = self._advance(bc_old, mid, depth + 1)
            b = self._advance(mid, bc_new, depth + 1)
            return a + b
        self.u, self.eps, self.sigma = u, eps, res.sigma
        self.eps_p, self.ebar = res.eps_p, res.ebar
        return it

    def step(self, bc):
        """Advance to the loads in ``bc``; bisects internally on divergence."""
        prev = self._bc
        if prev is None:
            prev = fem.BoundaryConditions(
                bc.dirichlet_dofs, np.zeros(len(bc.dirichlet_dofs)), np.zeros_like(bc.force)
            )
        it = self._advance(prev, bc, 0)
        self._bc = bc
        sy0 = self.material.sigma_y0
        return StepState(
            self.u.copy(),
            self.eps.copy(),
            self.sigma.copy(),
            sigma_y(self.ebar, self.material) / sy0,
            self.eps_p.copy(),
            self.ebar.copy(),
            it,
        )
