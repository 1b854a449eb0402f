"""Green's matrix at site 1 from the transfer-matrix blocks."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, MoebiusSingular, NoConvergence, ValidationError
from .model import BlockJacobiModel, SemiInfiniteModel, in_closed_upper_half_plane
from .moebius import SINGULAR_COND, unitary_to_left_boundary, unitary_to_plane
from .symplectic import check_frame, transfer_blocks

FORMULA_RTOL = 1e-9


@dataclass(frozen=True)
class GreenEvaluation:
    value: np.ndarray
    z: complex
    route: str
    condition: float

    def herglotz_margin(self) -> float:
        """Smallest eigenvalue of ``i (G^* - G)``; nonnegative for Herglotz values."""
        G = self.value
        im = 1j * (G.conj().T - G)
        return float(np.linalg.eigvalsh(0.5 * (im + im.conj().T)).min())


def _solve(M, rhs):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise MoebiusSingular(f"bracket is numerically singular (cond {cond:.2e})")
    return np.linalg.solve(M, rhs), cond


def _check_z(z):
    if np.imag(z) <= 0:
        raise ValidationError("Green's matrix needs Im z > 0")


def _formula(blocks, Zhat, Z):
    A, B, C, D = blocks
    return _solve(A + Z @ C - B @ Zhat - Z @ D @ Zhat, B + Z @ D)


def green_corner(model: BlockJacobiModel, Zhat, Z, z, check=True) -> GreenEvaluation:
    """``[A + Z C - B Zhat - Z D Zhat]^{-1} [B + Z D]`` with blocks of ``T^z(N, 0)``.

    With ``check=True`` the adjoint form evaluated at ``conj(z)`` (with
    adjoint boundary conditions) is computed as well and must agree to 1e-9
    relative.
    """
    _check_z(z)
    Zhat = np.asarray(Zhat, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    for M, name in ((Zhat, "Zhat"), (Z, "Z")):
        if not in_closed_upper_half_plane(M):
            raise ValidationError(f"{name} is not in the closed upper half-plane")
    G, cond = _formula(transfer_blocks(model, z), Zhat, Z)
    if check:
        G2, cond2 = _formula(transfer_blocks(model, np.conj(z)),
                             Zhat.conj().T, Z.conj().T)
        G2 = G2.conj().T
        cond = max(cond, cond2)
        err = np.linalg.norm(G - G2) / max(np.linalg.norm(G), 1e-300)
        if err > FORMULA_RTOL:
            raise ConsistencyError(f"the two Green formulas differ by {err:.2e} (relative)")
    return GreenEvaluation(G, complex(z), "formula_one", float(cond))


def green_corner_frame(model: BlockJacobiModel, Zhat, right_frame, z, blocks=None) -> GreenEvaluation:
    """Homogeneous form ``[R T (1; -Zhat)]^{-1} [R T (0; 1)]`` with ``R = (q^*, -p^*)``.

    Stays finite for right frames ``(p; q)`` whose lower block is singular.
    """
    _check_z(z)
    Phi = check_frame(right_frame, lagrangian=True, tol_lagr=1e-8)
    L = Phi.shape[1]
    p, q = Phi[:L], Phi[L:]
    if blocks is None:
        blocks = transfer_blocks(model, z)
    A, B, C, D = blocks
    Zhat = np.asarray(Zhat, dtype=complex)
    qh, ph = q.conj().T, p.conj().T
    lhs = qh @ (A - B @ Zhat) - ph @ (C - D @ Zhat)
    rhs = qh @ B - ph @ D
    G, cond = _solve(lhs, rhs)
    return GreenEvaluation(G, complex(z), "formula_one", float(cond))


def green_frames_batch(blocks, Zhat, frames) -> np.ndarray:
    """Vectorized homogeneous formula for a stack of right frames ``(K, 2L, L)``.

    Singular brackets yield ``nan`` entries instead of raising.
    """
    A, B, C, D = blocks
    L = A.shape[0]
    Zhat = np.zeros((L, L)) if Zhat is None else np.asarray(Zhat, dtype=complex)
    p, q = frames[:, :L, :], frames[:, L:, :]
    qh = np.conj(np.swapaxes(q, 1, 2))
    ph = np.conj(np.swapaxes(p, 1, 2))
    lhs = qh @ (A - B @ Zhat) - ph @ (C - D @ Zhat)
    rhs = qh @ B - ph @ D
    out = np.full(rhs.shape, np.nan, dtype=complex)
    cond = np.linalg.cond(lhs)
    ok = np.isfinite(cond) & (cond <= SINGULAR_COND)
    if ok.any():
        out[ok] = np.linalg.solve(lhs[ok], rhs[ok])
    return out


def _weak_hopping_warning(semi, N):
    smallest = min(np.linalg.svd(semi.site(n)[0], compute_uv=False)[-1]
                   for n in range(2, N + 1)) if N >= 2 else 1.0
    if smallest < 1e-3:
        warnings.warn(f"off-diagonal blocks become small (min singular value {smallest:.1e});"
                      " the limit point declaration may not hold", RuntimeWarning)


def limit_green(semi: SemiInfiniteModel, z, Uhat=None, tol=1e-8, N_max=1 << 16,
                Zhat=None, N_start=8):
    """Green's function of the half-line operator by truncation.

    Truncations ``N = 8, 16, 32, ...`` are evaluated with the right boundary
    unitaries ``U = 1`` and ``U = -1``. Iteration stops once the two agree to
    ``tol`` and both moved by less than ``tol`` since the previous ``N``.

    Returns
    -------
    (GreenEvaluation, int)
        The common value and the truncation size reached.

    Raises
    ------
    NoConvergence
        With the trajectory ``[(N, G_plus, G_minus), ...]`` attached.
    """
    if not semi.limit_point:
        raise ValidationError("limit_green requires a limit point model")
    _check_z(z)
    L = semi.L
    if Zhat is None:
        Zhat = np.zeros((L, L)) if Uhat is None else unitary_to_left_boundary(Uhat)
    Zhat = np.asarray(Zhat, dtype=complex)
    frame_plus = unitary_to_plane(np.eye(L))
    frame_minus = unitary_to_plane(-np.eye(L))
    trajectory = []
    N = N_start
    prev = None
    while N <= N_max:
        model = semi.truncate(N)
        blocks = transfer_blocks(model, z, rescale=True)
        gp = green_corner_frame(model, Zhat, frame_plus, z, blocks=blocks)
        gm = green_corner_frame(model, Zhat, frame_minus, z, blocks=blocks)
        trajectory.append((N, gp.value, gm.value))
        gap = np.abs(gp.value - gm.value).max()
        if prev is not None:
            moved = max(np.abs(gp.value - prev[0]).max(), np.abs(gm.value - prev[1]).max())
            if gap < tol and moved < tol:
                _weak_hopping_warning(semi, N)
                value = 0.5 * (gp.value + gm.value)
                return GreenEvaluation(value, complex(z), "formula_one",
                                       max(gp.condition, gm.condition)), N
        prev = (gp.value, gm.value)
        N *= 2
    raise NoConvergence(f"truncated Green functions did not settle up to N={N_max}", trajectory)
