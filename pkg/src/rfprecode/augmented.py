"""Real 2-D representation of complex scalars and fixed-size 2x2 matrix helpers.

A complex number ``c`` is carried as the vector ``[Re c, Im c]`` and
multiplication by a complex ``h`` as the 2x2 block ``[[Re h, -Im h], [Im h, Re h]]``.
All functions broadcast over leading axes, so arrays of shape ``(..., 2)`` and
``(..., 2, 2)`` are accepted.
"""

from __future__ import annotations

import numpy as np

SYM_TOL = 1e-10
EIG_FLOOR = 1e-12


class NearSingularError(ArithmeticError):
    """Raised when a 2x2 matrix has a determinant below the inversion floor."""


def augment(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    return np.stack([c.real, c.imag], axis=-1)


def de_augment(x) -> np.ndarray | complex:
    x = np.asarray(x, dtype=float)
    out = x[..., 0] + 1j * x[..., 1]
    return complex(out) if out.ndim == 0 else out


def channel_block(h) -> np.ndarray:
    """Return the 2x2 real block acting like multiplication by ``h``."""
    h = np.asarray(h, dtype=complex)
    a, b = h.real, h.imag
    return np.stack([np.stack([a, -b], axis=-1), np.stack([b, a], axis=-1)], axis=-2)


def symmetrize(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    return 0.5 * (R + np.swapaxes(R, -1, -2))


def det2(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    return R[..., 0, 0] * R[..., 1, 1] - R[..., 0, 1] * R[..., 1, 0]


def eigvalsh2(R) -> np.ndarray:
    """Eigenvalues (ascending) of symmetric 2x2 matrices in closed form."""
    R = symmetrize(R)
    half_tr = 0.5 * (R[..., 0, 0] + R[..., 1, 1])
    rad = np.hypot(0.5 * (R[..., 0, 0] - R[..., 1, 1]), R[..., 0, 1])
    return np.stack([half_tr - rad, half_tr + rad], axis=-1)


def is_spd(R, sym_tol: float = SYM_TOL, eig_floor: float = EIG_FLOOR) -> bool:
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        return False
    skew = np.abs(R[..., 0, 1] - R[..., 1, 0])
    scale = np.maximum(1.0, np.abs(R).max(axis=(-1, -2)))
    if np.any(skew > sym_tol * scale):
        return False
    return bool(np.all(eigvalsh2(R)[..., 0] > eig_floor))


def check_spd(R, name: str = "R") -> np.ndarray:
    """Validate and return the symmetrized matrix; raise ValueError otherwise."""
    if not is_spd(R):
        raise ValueError(f"{name} is not symmetric positive-definite")
    return symmetrize(R)


def clamp_spd(R, jitter: float) -> np.ndarray:
    """Symmetrize and lift the smallest eigenvalue to at least ``jitter``."""
    R = symmetrize(R)
    lo = eigvalsh2(R)[..., 0]
    shift = np.where(lo < jitter, jitter - lo, 0.0)
    return R + shift[..., None, None] * np.eye(2)


def inv2(R, floor: float = 0.0) -> np.ndarray:
    """Inverse of general 2x2 matrices via the adjugate."""
    R = np.asarray(R, dtype=float)
    det = det2(R)
    if np.any(np.abs(det) <= floor):
        raise NearSingularError(f"2x2 determinant below floor {floor:g}")
    adj = np.empty_like(R)
    adj[..., 0, 0] = R[..., 1, 1]
    adj[..., 1, 1] = R[..., 0, 0]
    adj[..., 0, 1] = -R[..., 0, 1]
    adj[..., 1, 0] = -R[..., 1, 0]
    return adj / det[..., None, None]


def spd2_inverse(R, floor: float = 1e-300) -> np.ndarray:
    """Inverse of an SPD 2x2 matrix.

    Raises:
        NearSingularError: if the determinant is at or below ``floor``; callers
            are expected to clamp with :func:`clamp_spd` and retry.
    """
    R = symmetrize(R)
    if np.any(det2(R) <= floor):
        raise NearSingularError(f"determinant below floor {floor:g}")
    return symmetrize(inv2(R))


def matvec(A, x) -> np.ndarray:
    return np.einsum("...ij,...j->...i", A, x)


def matmul(A, B) -> np.ndarray:
    return np.einsum("...ij,...jk->...ik", A, B)


def quad_form(x, R) -> np.ndarray | float:
    """Return ``x^T R^{-1} x / 2`` for SPD ``R``."""
    R = check_spd(R)
    x = np.asarray(x, dtype=float)
    val = 0.5 * np.einsum("...i,...i->...", x, matvec(spd2_inverse(R), x))
    return float(val) if np.ndim(val) == 0 else val
