"""Matrix Moebius action, Cayley transform and the Lagrangian-plane/unitary map."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import FrameDegenerate, MoebiusSingular, ValidationError
from .symplectic import (check_frame, left_boundary_frame, orthonormalize,
                         right_boundary_frame, split_blocks)

SINGULAR_COND = 1e8


def cayley(L: int) -> np.ndarray:
    """``C = (1/sqrt 2) [[1, -i], [1, i]]``."""
    I = np.eye(L, dtype=complex)
    return np.block([[I, -1j * I], [I, 1j * I]]) / np.sqrt(2.0)


def _solve_checked(M, rhs, side="left"):
    """``M^{-1} rhs`` (``side='left'``) or ``rhs M^{-1}`` (``side='right'``)."""
    if np.linalg.cond(M) > SINGULAR_COND:
        raise MoebiusSingular(f"matrix inverse ill-conditioned (cond {np.linalg.cond(M):.2e})")
    if side == "left":
        return np.linalg.solve(M, rhs)
    return np.linalg.solve(M.T, rhs.T).T


def mobius(t, Z) -> np.ndarray:
    """``t . Z = (A Z + B)(C Z + D)^{-1}``."""
    A, B, C, D = split_blocks(np.asarray(t))
    Z = np.asarray(Z, dtype=complex)
    return _solve_checked(C @ Z + D, A @ Z + B, side="right")


def mobius_inverse(W, t) -> np.ndarray:
    """``W : t = (W C - A)^{-1} (B - W D)``."""
    A, B, C, D = split_blocks(np.asarray(t))
    W = np.asarray(W, dtype=complex)
    return _solve_checked(W @ C - A, B - W @ D)


def to_disc(Z) -> np.ndarray:
    """``(Z - i)(Z + i)^{-1}``, the same as ``cayley(L) . Z``."""
    Z = np.asarray(Z, dtype=complex)
    I = np.eye(Z.shape[0])
    return _solve_checked(Z + 1j * I, Z - 1j * I, side="right")


def to_half_plane(U) -> np.ndarray:
    """``i (1 + U)(1 - U)^{-1}``, the same as ``cayley(L)^* . U``."""
    U = np.asarray(U, dtype=complex)
    I = np.eye(U.shape[0])
    return _solve_checked(I - U, 1j * (I + U), side="right")


def disc_half_maps(x, direction: str) -> np.ndarray:
    if direction == "to_disc":
        return to_disc(x)
    if direction == "to_half_plane":
        return to_half_plane(x)
    raise ValidationError(f"unknown direction {direction!r}")


def unitarity_residual(U) -> float:
    U = np.asarray(U)
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))


def check_unitary(U, tol=1e-12) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    res = unitarity_residual(U)
    if res > tol:
        raise ValidationError(f"matrix is not unitary (residual {res:.2e})")
    return U


def plane_to_unitary(Phi, check=True) -> np.ndarray:
    """``(a - i b)(a + i b)^{-1}`` for the frame ``Phi = (a; b)``.

    The frame is orthonormalized first; for an orthonormal Lagrangian frame
    ``a + i b`` is itself unitary, so the inverse is perfectly conditioned.
    """
    if check:
        Phi = check_frame(Phi, lagrangian=True, tol_lagr=1e-8)
    Q = orthonormalize(np.asarray(Phi, dtype=complex))
    L = Q.shape[1]
    a, b = Q[:L], Q[L:]
    s = np.linalg.svd(a + 1j * b, compute_uv=False)
    if s[-1] < 1e-8:
        raise FrameDegenerate("a + ib is numerically singular")
    U = np.linalg.solve((a + 1j * b).T, (a - 1j * b).T).T
    return U


def unitary_to_plane(U) -> np.ndarray:
    """Canonical Lagrangian frame ``((1 + U)/2; (1 - U)/(2i))`` with ``Pi = U``."""
    U = np.asarray(U, dtype=complex)
    I = np.eye(U.shape[-1])
    return np.concatenate([(I + U) / 2, (I - U) / 2j], axis=-2)


class BoundaryUnitaries(NamedTuple):
    Uhat: np.ndarray
    U: np.ndarray
    Phihat: np.ndarray
    Phi: np.ndarray


def boundary_to_unitaries(Zhat, Z) -> BoundaryUnitaries:
    """Boundary frames and their unitaries ``Uhat = -C.Zhat``, ``U = C.(-Z)``.

    Both unitaries are also computed as ``Pi`` of the frames; the two routes
    must agree to 1e-12.
    """
    Zhat = np.asarray(Zhat, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    Phihat = left_boundary_frame(Zhat)
    Phi = right_boundary_frame(Z)
    L = Z.shape[0]
    Uhat = -mobius(cayley(L), Zhat)
    U = mobius(cayley(L), -Z)
    scale = 1e-12 * max(1.0, np.linalg.norm(Z, 2), np.linalg.norm(Zhat, 2))
    if (np.abs(plane_to_unitary(Phihat) - Uhat).max() > scale
            or np.abs(plane_to_unitary(Phi) - U).max() > scale):
        raise FrameDegenerate("explicit and frame routes for the boundary unitaries disagree")
    return BoundaryUnitaries(Uhat, U, Phihat, Phi)


def unitary_to_left_boundary(Uhat) -> np.ndarray:
    """Inverse of ``Zhat -> -C.Zhat``: ``Zhat = C^* . (-Uhat)``."""
    return to_half_plane(-np.asarray(Uhat, dtype=complex))


def unitary_to_right_boundary(U) -> np.ndarray:
    """Inverse of ``Z -> C.(-Z)``: ``Z = -C^* . U``."""
    return -to_half_plane(U)
