"""Data-driven solver in Haigh-Westergaard space.

Each load step is one ``P_C`` (a linear FE solve around the current
anchors with the current tangents) followed by one ``P_D``, which maps
every material point onto the tensile data by its hardening variable
``alpha = rho / Phi(theta)`` and sets its tangent to
``C_el - gamma N (x) N``. Because ``P_D`` anchors every point at its own
state, a second ``P_C`` returns the same displacements, so a single
fixed-point iteration per step suffices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import data_foundry as dfd
from . import fem_core as fem
from . import tensor_lab as tl
from .reference_plasticity import elastic_voigt
from .yield_surface import fit_yield, stress_normal

log = logging.getLogger(__name__)


class TangentError(ArithmeticError):
    """An identified tangent would not be positive definite."""


class FixedPointError(RuntimeError):
    """A second ``P_C`` moved the displacements."""


@dataclass
class MaterialPoints:
    """Per-point data state: anchors ``(eps_hat, sig_hat)``, tangents and ``alpha_y``."""

    eps_hat: np.ndarray  # (q, 6) Voigt strain
    sig_hat: np.ndarray  # (q, 6) Voigt stress
    C: np.ndarray  # (q, 6, 6)
    alpha_y: np.ndarray  # (q,)

    @classmethod
    def initial(cls, q, C_el):
        return cls(np.zeros((q, 6)), np.zeros((q, 6)), np.repeat(C_el[None], q, axis=0), np.ones(q))


@dataclass
class DDStep:
    u: np.ndarray
    eps: np.ndarray
    sigma: np.ndarray
    alpha_y: np.ndarray
    inelastic: np.ndarray  # (q,) bool, points that took the plastic branch
    fixed_point_residual: float = float("nan")
    info: dict = field(default_factory=dict)


def project_C(points, state, bc):
    """Closest compatible, equilibrated state to the anchors under the tangents."""
    u = fem.assemble_and_solve(points, state.C, state.eps_hat, state.sig_hat, bc)
    eps = points.strain(u)
    sig = state.sig_hat + np.einsum("qab,qb->qa", state.C, eps - state.eps_hat)
    return u, eps, sig


def comparison_alpha(sigma_voigt, surface):
    """``alpha = rho / Phi(theta)`` for Voigt stresses; hydrostatic states give 0."""
    sig = tl.from_voigt_stress(sigma_voigt)
    hw = tl.haigh_westergaard(sig)
    alpha = np.where(hw.degenerate, 0.0, hw.rho / surface.phi(hw.theta))
    return alpha, hw.degenerate


def plastic_tangent(C_el, gamma, N):
    """``C_el - gamma N (x) N`` in Voigt form; ``N`` are ``(q, 3, 3)`` unit tensors."""
    n = tl.voigt_stress(N)
    return C_el[None] - gamma[:, None, None] * np.einsum("qa,qb->qab", n, n)


def project_D(eps, sig, state, surface, data, index, C_el, mu):
    """Transition rules, data search and tangent update for every point.

    Returns the new :class:`MaterialPoints` and the inelastic mask. Points
    with ``alpha <= alpha_y`` get ``C_el``; the others raise ``alpha_y`` to
    ``alpha`` and take ``gamma`` from the data increment nearest in
    ``alpha``, applied along the normal of the surface through the point.
    """
    alpha, degenerate = comparison_alpha(sig, surface)
    inelastic = (alpha > state.alpha_y) & ~degenerate
    C = np.repeat(C_el[None], len(alpha), axis=0)
    alpha_y = state.alpha_y.copy()
    idx = np.flatnonzero(inelastic)
    if idx.size:
        hit = index.query(alpha[idx])
        gamma = data.gamma[hit]
        if np.any(gamma >= 2.0 * mu):
            bad = idx[np.argmax(gamma)]
            raise TangentError(
                f"gamma={gamma.max():.4e} >= 2 mu={2 * mu:.4e} at point {bad}: tangent not positive definite"
            )
        N = stress_normal(tl.from_voigt_stress(sig[idx]), surface, alpha=alpha[idx])
        C[idx] = plastic_tangent(C_el, gamma, N)
        alpha_y[idx] = alpha[idx]
    return MaterialPoints(eps.copy(), sig.copy(), C, alpha_y), inelastic


class DataDrivenSolver(BaseEstimator):
    """Model-free elasto-plastic solver driven by yield-point and tensile data.

    Parameters
    ----------
    E, nu : float
        Elastic constants of the material (the elastic stiffness is known).
    kind : str
        Interpolation of the yield locus, see ``YieldSurfaceInterpolator``.
    check_fixed_point : bool
        Run a second ``P_C`` after each step and require the displacements
        to stay put within ``fixed_point_rtol``.
    """

    def __init__(self, E=3e10, nu=0.2, kind="spline", check_fixed_point=False, fixed_point_rtol=1e-9):
        self.E = E
        self.nu = nu
        self.kind = kind
        self.check_fixed_point = check_fixed_point
        self.fixed_point_rtol = fixed_point_rtol

    def fit(self, yield_points, tensile):
        """Fit ``Phi`` to ``(theta, rho)`` points and index the tensile increments."""
        if not self.E > 0 or not 0 < self.nu < 0.5:
            raise ValueError("invalid elastic constants")
        self.lam_ = self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))
        self.mu_ = self.E / (2 * (1 + self.nu))
        self.C_el_ = elastic_voigt(self.lam_, self.mu_)
        self.surface_ = fit_yield(yield_points, self.kind)
        data = dfd.build_extended(tensile, float(self.surface_.phi(0.0)))
        self.data_ = dfd.identify_gamma(data, self.surface_, self.lam_, self.mu_)
        self.index_ = dfd.AlphaIndex(self.data_, dfd.INELASTIC)
        self.points_ = None
        return self

    def reset(self, points):
        """Start a new simulation: zero anchors, elastic tangents, ``alpha_y = 1``."""
        check_is_fitted(self, "data_")
        self.points_ = points
        self.state_ = MaterialPoints.initial(len(points), self.C_el_)
        self.u_ = np.zeros(points.n_dofs)
        return self

    def step(self, bc):
        """One ``P_D(P_C(.))`` cycle for the loads in ``bc``."""
        if getattr(self, "points_", None) is None:
            raise RuntimeError("call reset(points) before stepping")
        pts = self.points_
        u, eps, sig = project_C(pts, self.state_, bc)
        state, inelastic = project_D(
            eps, sig, self.state_, self.surface_, self.data_, self.index_, self.C_el_, self.mu_
        )
        res = float("nan")
        if self.check_fixed_point:
            u2, _, _ = project_C(pts, state, bc)
            res = float(np.linalg.norm(u2 - u) / max(np.linalg.norm(u), np.finfo(float).tiny))
            if np.linalg.norm(u) == 0.0:
                res = float(np.linalg.norm(u2))
            if res > self.fixed_point_rtol:
                raise FixedPointError(f"second P_C changed u by {res:.3e} (relative)")
        self.state_ = state
        self.u_ = u
        return DDStep(u, eps, sig, state.alpha_y.copy(), inelastic, res, {"n_inelastic": int(inelastic.sum())})
