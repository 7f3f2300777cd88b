"""Symmetric 3x3 tensor algebra and Haigh-Westergaard coordinates.

Tensors are plain numpy arrays of shape ``(..., 3, 3)``; every function
broadcasts over leading axes.

Voigt convention (the only place it is defined): component order is
``(11, 22, 33, 23, 13, 12)``. Stresses are packed raw, strains are packed
with engineering shear (off-diagonals doubled), so that
``voigt_stress(s) @ voigt_strain(e) == s : e``. Stiffness matrices map
strain-Voigt vectors to stress-Voigt vectors without extra factors.

Mandel packing (``sqrt(2)`` on off-diagonals) is orthonormal and is used
internally where a metric-preserving 6-vector is needed.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)
SQRT23 = np.sqrt(2.0 / 3.0)

_ROW = np.array([p[0] for p in VOIGT_PAIRS])
_COL = np.array([p[1] for p in VOIGT_PAIRS])
_MANDEL_SCALE = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])
_STRAIN_SCALE = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


def sym(components) -> np.ndarray:
    """Build symmetric tensors from ``(..., 6)`` components ``(11, 22, 33, 23, 13, 12)``."""
    c = np.asarray(components, dtype=float)
    if c.shape[-1] != 6:
        raise ValueError("expected six components (11, 22, 33, 23, 13, 12)")
    out = np.empty(c.shape[:-1] + (3, 3))
    out[..., _ROW, _COL] = c
    out[..., _COL, _ROW] = c
    return out


def components(t) -> np.ndarray:
    """Six independent components of symmetric tensors (no shear scaling)."""
    t = np.asarray(t, dtype=float)
    return t[..., _ROW, _COL]


def voigt_stress(t) -> np.ndarray:
    return components(t)


def voigt_strain(t) -> np.ndarray:
    return components(t) * _STRAIN_SCALE


def from_voigt_stress(v) -> np.ndarray:
    return sym(v)


def from_voigt_strain(v) -> np.ndarray:
    return sym(np.asarray(v, dtype=float) / _STRAIN_SCALE)


def to_mandel(t) -> np.ndarray:
    return components(t) * _MANDEL_SCALE


def from_mandel(m) -> np.ndarray:
    return sym(np.asarray(m, dtype=float) / _MANDEL_SCALE)


def mandel_to_voigt_stiffness(cm) -> np.ndarray:
    """Convert a Mandel 6x6 operator to the stress/strain Voigt convention."""
    s = 1.0 / _MANDEL_SCALE
    return cm * s[:, None] * s[None, :]


def voigt_to_mandel_stiffness(cv) -> np.ndarray:
    return np.asarray(cv) * _MANDEL_SCALE[:, None] * _MANDEL_SCALE[None, :]


def frobenius(t) -> np.ndarray:
    """Norm of the full 3x3 tensor (off-diagonals counted twice)."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(np.einsum("...ij,...ij->...", t, t))


def ddot(a, b) -> np.ndarray:
    return np.einsum("...ij,...ij->...", np.asarray(a, float), np.asarray(b, float))


def trace(t) -> np.ndarray:
    return np.trace(np.asarray(t, dtype=float), axis1=-2, axis2=-1)


def deviator(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return t - (trace(t) / 3.0)[..., None, None] * np.eye(3)


def invariants(t):
    """Return ``(J1, J2, J3)``: trace, ``tr(s.s)/2`` and ``det(s)`` of the deviator ``s``."""
    t = np.asarray(t, dtype=float)
    s = deviator(t)
    j1 = trace(t)
    j2 = 0.5 * ddot(s, s)
    j3 = np.linalg.det(s)
    return j1, j2, j3


class HWCoords(NamedTuple):
    xi: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    degenerate: np.ndarray


def _rel_tol(scale):
    return 1e-12 * np.maximum(scale, np.finfo(float).tiny)


def haigh_westergaard(t) -> HWCoords:
    """Haigh-Westergaard coordinates ``(xi, rho, theta)`` of stress tensors.

    ``theta`` lies in ``[0, pi/3]`` and satisfies
    ``cos(3 theta) = (3 sqrt(3) / 2) J3 / J2^(3/2)``. It is evaluated as
    ``atan2(sqrt(3) (s2 - s3), 2 s1 - s2 - s3)`` from the ordered principal
    values, which is the same angle but keeps full precision near the
    tension and compression meridians where arccos loses half the digits.
    Purely hydrostatic states have no Lode angle: they get ``theta = 0``
    and ``degenerate = True``.
    """
    t = np.asarray(t, dtype=float)
    j1, j2, _ = invariants(t)
    xi = j1 / SQRT3
    rho = np.sqrt(2.0 * np.maximum(j2, 0.0))
    scale = np.max(np.abs(t), axis=(-2, -1))
    degenerate = rho <= _rel_tol(scale)
    s = np.linalg.eigvalsh(deviator(t))[..., ::-1]
    theta = np.arctan2(SQRT3 * (s[..., 1] - s[..., 2]), 2.0 * s[..., 0] - s[..., 1] - s[..., 2])
    theta = np.where(degenerate, 0.0, np.clip(theta, 0.0, np.pi / 3.0))
    return HWCoords(xi, rho, theta, degenerate)


def lode_basis(theta) -> np.ndarray:
    """Unit-free direction ``(cos t, cos(t - 2pi/3), cos(t + 2pi/3))`` along the last axis."""
    theta = np.asarray(theta, dtype=float)
    return np.stack(
        [np.cos(theta), np.cos(theta - 2 * np.pi / 3), np.cos(theta + 2 * np.pi / 3)],
        axis=-1,
    )


def reconstruct_principal(xi, rho, theta) -> np.ndarray:
    """Principal stresses ``(s1 >= s2 >= s3)`` from HW coordinates, shape ``(..., 3)``."""
    xi = np.asarray(xi, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return (xi / SQRT3)[..., None] + (SQRT23 * rho)[..., None] * lode_basis(theta)


class PrincipalFrame(NamedTuple):
    values: np.ndarray  # (..., 3) descending
    rotation: np.ndarray  # (..., 3, 3); columns are eigenvectors, det = +1


def principal_frame(t) -> PrincipalFrame:
    """Descending eigenvalues and a proper rotation ``T`` with ``t = T diag T^T``."""
    t = np.asarray(t, dtype=float)
    w, v = np.linalg.eigh(t)
    w = w[..., ::-1]
    v = v[..., ::-1].copy()
    flip = np.linalg.det(v) < 0
    v[..., :, 2] = np.where(flip[..., None], -v[..., :, 2], v[..., :, 2])
    return PrincipalFrame(w, v)


def rotate_diagonal(diag, rotation) -> np.ndarray:
    """``T diag(d) T^T`` for principal values ``d`` of shape ``(..., 3)``."""
    d = np.asarray(diag, dtype=float)
    r = np.asarray(rotation, dtype=float)
    return np.einsum("...ik,...k,...jk->...ij", r, d, r)
