"""Transfer matrices, their block structure and Lagrangian plane propagation.

The one-site transfer matrix at complex energy ``z`` is

    T_n^z = [[(z - V_n) T_n^{-1}, -T_n^*],
             [T_n^{-1},            0    ]]

and carries ``(T_n phi_n; phi_{n-1})`` to ``(T_{n+1} phi_{n+1}; phi_n)``.
At real energy it preserves the form ``J = [[0, -1], [1, 0]]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FrameDegenerate, IndexOutOfRange, RankIndeterminate, ShapeMismatch
from .model import BlockJacobiModel

RANK_TOL = 1e-8
REAL_ENERGY_TOL = 1e-14


def symplectic_form(L: int) -> np.ndarray:
    J = np.zeros((2 * L, 2 * L), dtype=complex)
    J[:L, L:] = -np.eye(L)
    J[L:, :L] = np.eye(L)
    return J


def is_real_energy(z) -> bool:
    return abs(np.imag(z)) <= REAL_ENERGY_TOL


class CornerBlocks(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])


def split_blocks(M) -> CornerBlocks:
    L = M.shape[0] // 2
    return CornerBlocks(M[:L, :L], M[:L, L:], M[L:, :L], M[L:, L:])


@dataclass(frozen=True)
class Transfer2L:
    """A ``2L x 2L`` transfer matrix over the site range ``span = (n, m)``."""
    M: np.ndarray
    energy: complex
    span: tuple

    @property
    def L(self):
        return self.M.shape[0] // 2

    def blocks(self) -> CornerBlocks:
        return split_blocks(self.M)

    def corner_blocks(self) -> CornerBlocks:
        """The ``A, B, C, D`` blocks; only meaningful over the whole sample."""
        return self.blocks()


def single_transfer(model: BlockJacobiModel, n: int, z) -> Transfer2L:
    if not 1 <= n <= model.N:
        raise IndexOutOfRange(f"site {n} outside 1..{model.N}")
    L = model.L
    T = model.T_at(n)
    Tinv = np.linalg.inv(T)
    M = np.zeros((2 * L, 2 * L), dtype=complex)
    M[:L, :L] = (z * np.eye(L) - model.V_at(n)) @ Tinv
    M[:L, L:] = -T.conj().T
    M[L:, :L] = Tinv
    return Transfer2L(M, complex(z), (n, n - 1))


def _site_matrices(model, z, sites):
    for n in sites:
        yield single_transfer(model, n, z).M


def transfer_product(model: BlockJacobiModel, z, n=None, m=0, rescale=False) -> Transfer2L:
    """``T^z(n, m) = T_n ... T_{m+1}`` for ``n > m``; inverse for ``n < m``.

    ``rescale=True`` divides by the running spectral norm after every site.
    The result is then only correct up to a positive scalar, which is all
    that projective quantities (Moebius images, planes) need.
    """
    N = model.N
    if n is None:
        n = N
    if not (0 <= n <= N and 0 <= m <= N):
        raise IndexOutOfRange(f"span ({n}, {m}) outside 0..{N}")
    L = model.L
    M = np.eye(2 * L, dtype=complex)
    for S in _site_matrices(model, z, range(min(n, m) + 1, max(n, m) + 1)):
        M = S @ M
        if rescale:
            M = M / np.linalg.norm(M, 2)
    if n < m:
        M = np.linalg.inv(M)
    return Transfer2L(M, complex(z), (n, m))


def transfer_blocks(model: BlockJacobiModel, z, rescale=False) -> CornerBlocks:
    """Blocks ``A, B, C, D`` of ``T^z(N, 0)``."""
    return transfer_product(model, z, rescale=rescale).blocks()


def with_boundary(t: Transfer2L, Zhat, Z) -> Transfer2L:
    """``[[1, Z], [0, 1]] T [[1, 0], [-Zhat, 1]]``."""
    L = t.L
    I, O = np.eye(L), np.zeros((L, L))
    left = np.block([[I, Z], [O, I]])
    right = np.block([[I, O], [-np.asarray(Zhat), I]])
    return Transfer2L(left @ t.M @ right, t.energy, t.span)


def symplectic_residual(t) -> float:
    """Spectral norm of ``M^* J M - J``."""
    M = t.M if isinstance(t, Transfer2L) else np.asarray(t)
    J = symplectic_form(M.shape[0] // 2)
    return float(np.linalg.norm(M.conj().T @ J @ M - J, 2))


# ---------------------------------------------------------------- frames

def frame_rank_ok(Phi, rank_tol=RANK_TOL) -> bool:
    s = np.linalg.svd(Phi, compute_uv=False)
    return s[-1] > rank_tol * s[0]


def lagrangian_residual(Phi) -> float:
    """``|Phi^* J Phi| / |Phi|^2``."""
    Phi = np.asarray(Phi)
    J = symplectic_form(Phi.shape[0] // 2)
    return float(np.linalg.norm(Phi.conj().T @ J @ Phi, 2) / np.linalg.norm(Phi, 2) ** 2)


def check_frame(Phi, lagrangian=True, tol_lagr=1e-10) -> np.ndarray:
    Phi = np.asarray(Phi, dtype=complex)
    if Phi.ndim != 2 or Phi.shape[0] != 2 * Phi.shape[1]:
        raise ShapeMismatch(f"a frame must be 2L x L, got {Phi.shape}")
    if not frame_rank_ok(Phi):
        raise FrameDegenerate("frame does not have rank L")
    if lagrangian and lagrangian_residual(Phi) > tol_lagr:
        raise FrameDegenerate(
            f"frame is not Lagrangian (residual {lagrangian_residual(Phi):.2e})")
    return Phi


def orthonormalize(Phi) -> np.ndarray:
    Q, _ = np.linalg.qr(Phi)
    return Q


def dirichlet_frame(L, side="left") -> np.ndarray:
    """``(1; 0)`` on the left, ``(0; 1)`` on the right."""
    I, O = np.eye(L, dtype=complex), np.zeros((L, L), dtype=complex)
    return np.vstack([I, O]) if side == "left" else np.vstack([O, I])


def left_boundary_frame(Zhat) -> np.ndarray:
    Zhat = np.asarray(Zhat, dtype=complex)
    return np.vstack([np.eye(Zhat.shape[0]), -Zhat])


def right_boundary_frame(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=complex)
    return np.vstack([-Z, np.eye(Z.shape[0])])


def propagate_plane(model: BlockJacobiModel, z, Phi0, n=None, renormalize=False,
                    check=True) -> np.ndarray:
    """``T^z(n, 0) Phi0``.

    With ``renormalize=True`` the columns are re-orthonormalized after every
    site, so the result spans the same plane but is returned as an
    orthonormal frame (the column normalization is lost).
    """
    if n is None:
        n = model.N
    if not 0 <= n <= model.N:
        raise IndexOutOfRange(f"site {n} outside 0..{model.N}")
    Phi = np.array(Phi0, dtype=complex)
    for S in _site_matrices(model, z, range(1, n + 1)):
        Phi = S @ Phi
        if renormalize:
            Phi = orthonormalize(Phi)
    if not check:
        return Phi
    if not frame_rank_ok(Phi):
        raise FrameDegenerate("propagated frame lost rank")
    if is_real_energy(z) and lagrangian_residual(Phi0) < 1e-12:
        if lagrangian_residual(orthonormalize(Phi)) > 1e-8:
            raise FrameDegenerate("propagated frame is no longer Lagrangian")
    return Phi


def propagate_plane_factored(model: BlockJacobiModel, z, Phi0, n=None):
    """QR-renormalized propagation returning ``(Q, Rinv)`` with ``T(n,0) Phi0 = Q R``.

    ``Q`` is orthonormal and ``Rinv`` is the inverse of the accumulated
    triangular factor. ``Rinv`` only shrinks when the frame grows, so it can
    underflow harmlessly where the full product would overflow. The Gram
    matrix inverse is ``[(T Phi0)^* (T Phi0)]^{-1} = Rinv Rinv^*``.
    """
    if n is None:
        n = model.N
    Q, R = np.linalg.qr(np.array(Phi0, dtype=complex))
    Rinv = np.linalg.inv(R)
    for S in _site_matrices(model, z, range(1, n + 1)):
        Q, r = np.linalg.qr(S @ Q)
        Rinv = Rinv @ np.linalg.inv(r)
    return Q, Rinv


def intersection_dimension(Phi, Psi, rank_tol=RANK_TOL) -> int:
    """``dim(span Phi  cap  span Psi)`` from the singular values of ``[Phi | Psi]``.

    Each frame is orthonormalized first so that the threshold is scale free.

    Raises
    ------
    RankIndeterminate
        If a singular value falls within a factor 10 of the threshold.
    """
    Phi = orthonormalize(check_frame(Phi, lagrangian=False))
    Psi = orthonormalize(check_frame(Psi, lagrangian=False))
    s = np.linalg.svd(np.hstack([Phi, Psi]), compute_uv=False)
    rel = s / s[0]
    if np.any((rel > rank_tol / 10) & (rel < rank_tol * 10)):
        raise RankIndeterminate(f"singular values {rel} straddle the rank threshold")
    rank = int(np.sum(rel >= rank_tol))
    return Phi.shape[0] - rank
