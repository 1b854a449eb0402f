"""Boundary-condition averages of the Green matrix and of the spectral measure.

Conventions: the left boundary unitary ``Uhat`` and hermitian ``Zhat`` are
related by ``Zhat = C^* . (-Uhat)`` and the right ones by ``Z = -C^* . U``.
``Uhat = 1`` is the Dirichlet condition ``Zhat = 0``.

Measure-valued outputs carry the factor ``c_measure = 1/pi`` of Stieltjes
inversion; see :class:`NormalizationLedger`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, MoebiusSingular, NoConvergence, QuadratureNotConverged, \
    ValidationError
from .green import FORMULA_RTOL, green_frames_batch
from .haar import C_RADAV, MCEstimate, mc_average
from .model import BlockJacobiModel, BoundaryPair, SemiInfiniteModel, assemble_dense
from .moebius import SINGULAR_COND, unitary_to_left_boundary, unitary_to_plane
from .symplectic import CornerBlocks, transfer_blocks

C_MEASURE = 1.0 / np.pi


@dataclass(frozen=True)
class NormalizationLedger:
    c_radav: float = C_RADAV
    c_measure: float = C_MEASURE
    provenance: dict = field(default_factory=lambda: {
        "c_radav": "L=1 circle quadrature (2048 nodes) of the positive U(L,L) integral; "
                   "exact value 1/2 for every eta",
        "c_measure": "L=1, N=1, V=0 Cauchy-mass oracle: mass of [-1,1] is 1/2",
    })
    notes: tuple = (
        "the unitary-group integral of [(U;V)^* T (U;V)]^{-1} equals 1/2, not 1",
        "interval masses from the transfer-matrix integrand carry the Stieltjes factor 1/pi",
        "the double average is taken with the hermitian-chart weight (Zhat+i) X (Zhat-i)",
    )

    def to_dict(self):
        return {"c_radav": self.c_radav, "c_measure": self.c_measure,
                "provenance": dict(self.provenance), "notes": list(self.notes)}


LEDGER = NormalizationLedger()


@dataclass(frozen=True)
class DensitySample:
    E: float
    density: np.ndarray


@dataclass(frozen=True)
class IntervalMass:
    """Half-sum of closed and open interval masses of the averaged measure."""
    E0: float
    E1: float
    mass: np.ndarray
    error: float = 0.0
    N: int = 0
    trajectory: tuple = ()


def _left_blocks(blocks: CornerBlocks, Zhat):
    """Blocks of ``T(N,0) [[1, 0], [-Zhat, 1]]``."""
    if Zhat is None:
        return blocks
    A, B, C, D = blocks
    Zhat = np.asarray(Zhat, dtype=complex)
    return CornerBlocks(A - B @ Zhat, B, C - D @ Zhat, D)


def _resolve_zhat(L, Uhat=None, Zhat=None):
    if Zhat is not None:
        return np.asarray(Zhat, dtype=complex)
    if Uhat is not None:
        return unitary_to_left_boundary(Uhat)
    return None


def _solve(M, rhs):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise MoebiusSingular(f"bracket is numerically singular (cond {cond:.2e})")
    return np.linalg.solve(M, rhs)


def averaged_green_forms(model: BlockJacobiModel, z, Zhat=None, Uhat=None):
    """Both closed forms ``[A + iC]^{-1} [B + iD]`` and ``[B'^* + i D'^*][A'^* + i C'^*]^{-1}``.

    Primes denote blocks at ``conj(z)`` with the adjoint left boundary.
    """
    if np.imag(z) <= 0:
        raise ValidationError("averaged_green needs Im z > 0")
    Zhat = _resolve_zhat(model.L, Uhat, Zhat)
    A, B, C, D = _left_blocks(transfer_blocks(model, z), Zhat)
    G = _solve(A + 1j * C, B + 1j * D)
    Zc = None if Zhat is None else Zhat.conj().T
    A2, B2, C2, D2 = _left_blocks(transfer_blocks(model, np.conj(z)), Zc)
    left = B2.conj().T + 1j * D2.conj().T
    right = A2.conj().T + 1j * C2.conj().T
    return G, _solve(right.T, left.T).T


def averaged_green(model: BlockJacobiModel, z, Zhat=None, Uhat=None, check=True) -> np.ndarray:
    """Haar average over right boundaries: ``[A + iC]^{-1} [B + iD]``.

    A left boundary is absorbed into the blocks (``A - B Zhat``,
    ``C - D Zhat``). With ``check=True`` the second closed form of
    :func:`averaged_green_forms` must agree to 1e-9 relative.
    """
    if not check:
        if np.imag(z) <= 0:
            raise ValidationError("averaged_green needs Im z > 0")
        Zhat = _resolve_zhat(model.L, Uhat, Zhat)
        A, B, C, D = _left_blocks(transfer_blocks(model, z), Zhat)
        return _solve(A + 1j * C, B + 1j * D)
    G, G2 = averaged_green_forms(model, z, Zhat, Uhat)
    err = np.linalg.norm(G - G2) / max(np.linalg.norm(G), 1e-300)
    if err > FORMULA_RTOL:
        raise ConsistencyError(f"closed forms of the averaged Green matrix differ by {err:.2e}")
    return G


def averaged_density(model: BlockJacobiModel, E, Zhat=None, Uhat=None) -> DensitySample:
    """``[A^* A + C^* C]^{-1}`` at real energy (blocks including the left boundary).

    This is the boundary value of ``Im`` of :func:`averaged_green`; the
    averaged measure has density ``c_measure`` times this matrix.
    """
    E = float(np.real(E))
    Zhat = _resolve_zhat(model.L, Uhat, Zhat)
    A, B, C, D = _left_blocks(transfer_blocks(model, E), Zhat)
    G = A.conj().T @ A + C.conj().T @ C
    dens = np.linalg.inv(0.5 * (G + G.conj().T))
    return DensitySample(E, 0.5 * (dens + dens.conj().T))


def _hermitian_part_im(G):
    return (G - G.conj().T) / 2j


def im_averaged_green(model, E, eps, **kw) -> np.ndarray:
    return _hermitian_part_im(averaged_green(model, E + 1j * eps, **kw))


BOUNDARY_EPS = tuple(np.geomspace(1e-3, 1e-4, 6))


def boundary_value_extrapolation(model, E, eps=BOUNDARY_EPS, **kw) -> np.ndarray:
    """Polynomial extrapolation of ``Im averaged_green(E + i eps)`` to ``eps = 0``.

    The default nodes run geometrically from 1e-3 to 1e-4; a linear fit
    through the two ends alone is spoiled by poles a few 1e-2 below the axis.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.size < 2 or np.any(eps <= 0) or np.unique(eps).size != eps.size:
        raise ValidationError("need at least two distinct positive eps values")
    out = 0.0
    for i, h in enumerate(eps):
        others = np.delete(eps, i)
        out = out + np.prod(others / (others - h)) * im_averaged_green(model, E, h, **kw)
    return out


# ------------------------------------------------------------ quadrature

def adaptive_simpson(f, a, b, tol, init=16, max_intervals=1 << 17):
    """Adaptive composite Simpson rule for a vectorized array-valued integrand.

    ``f(x)`` takes a 1-d array of nodes and returns an array of shape
    ``(len(x), ...)``. Each interval is split until its Richardson error
    estimate, measured in the max entry norm, is below its share
    ``tol * width / (b - a)`` of the tolerance.

    Returns
    -------
    (value, error_bound)
    """
    edges = np.linspace(a, b, init + 1)
    lo, hi = edges[:-1], edges[1:]
    total = 0.0
    err_total = 0.0
    while True:
        mid = 0.5 * (lo + hi)
        q1, q3 = 0.5 * (lo + mid), 0.5 * (mid + hi)
        x = np.concatenate([lo, q1, mid, q3, hi])
        vals = f(x)
        n = lo.size
        flo, fq1, fmid, fq3, fhi = (vals[k * n:(k + 1) * n] for k in range(5))
        w = (hi - lo).reshape((-1,) + (1,) * (vals.ndim - 1))
        coarse = w / 6 * (flo + 4 * fmid + fhi)
        fine = w / 12 * (flo + 4 * fq1 + 2 * fmid + 4 * fq3 + fhi)
        est = fine + (fine - coarse) / 15
        err = np.abs(fine - coarse).reshape(n, -1).max(axis=1) / 15
        ok = err <= tol * (hi - lo) / (b - a)
        # intervals at roundoff width cannot be refined further
        ok |= (hi - lo) <= 1e-13 * max(1.0, abs(a), abs(b))
        total = total + est[ok].sum(axis=0)
        err_total += err[ok].sum()
        if ok.all():
            return total, err_total
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        if lo.size > max_intervals:
            raise QuadratureNotConverged("adaptive Simpson exceeded its interval budget",
                                         err_total + err[~ok].sum())


def _batched_site(model, n, E):
    """One-site transfer matrices for an array of real energies, shape ``(K, 2L, 2L)``."""
    L = model.L
    T = model.T_at(n)
    Tinv = np.linalg.inv(T)
    K = E.size
    S = np.zeros((K, 2 * L, 2 * L), dtype=complex)
    S[:, :L, :L] = E[:, None, None] * Tinv - (model.V_at(n) @ Tinv)
    S[:, :L, L:] = -T.conj().T
    S[:, L:, :L] = Tinv
    return S


def _batched_blocks(model, E):
    L = model.L
    M = np.broadcast_to(np.eye(2 * L, dtype=complex), (E.size, 2 * L, 2 * L))
    for n in range(1, model.N + 1):
        M = _batched_site(model, n, E) @ M
    return M[:, :L, :L], M[:, :L, L:], M[:, L:, :L], M[:, L:, L:]


def _inv_gram(X):
    G = np.conj(np.swapaxes(X, 1, 2)) @ X
    return np.linalg.inv(0.5 * (G + np.conj(np.swapaxes(G, 1, 2))))


def interval_integrand(model: BlockJacobiModel, Zhat=None):
    """Vectorized ``E -> [ |A - B Zhat|^2 + |C - D Zhat|^2 ]^{-1}``."""
    def f(E):
        A, B, C, D = _batched_blocks(model, np.asarray(E, dtype=float))
        if Zhat is not None:
            A = A - B @ Zhat
            C = C - D @ Zhat
        return _inv_gram(np.concatenate([A, C], axis=1))
    return f


def averaged_interval_measure(model: BlockJacobiModel, E0, E1, Uhat=None, Zhat=None,
                              tol=1e-10) -> IntervalMass:
    """``c_measure * int_{E0}^{E1} dE [ |A - B Zhat|^2 + |C - D Zhat|^2 ]^{-1}``."""
    if not E0 < E1:
        raise ValidationError("need E0 < E1")
    Zhat = _resolve_zhat(model.L, Uhat, Zhat)
    val, err = adaptive_simpson(interval_integrand(model, Zhat), E0, E1, tol / C_MEASURE)
    mass = C_MEASURE * val
    return IntervalMass(float(E0), float(E1), 0.5 * (mass + mass.conj().T), C_MEASURE * err,
                        model.N)


def interval_measure_oracle(model: BlockJacobiModel, E0, E1, Zhat=None, n_samples=20000,
                            seed=0, endpoint_tol=1e-9) -> MCEstimate:
    """Haar average over right boundaries ``Z = -C^* . U`` of the eigensolve masses.

    Endpoint atoms count one half, as in :meth:`AtomicMatrixMeasure.mass`.
    """
    from .haar import cayley_image_batch
    L, N = model.L, model.N
    Zhat = np.zeros((L, L)) if Zhat is None else np.asarray(Zhat, dtype=complex)
    H0 = assemble_dense(model, BoundaryPair(Zhat, np.zeros((L, L))))

    def f(U):
        Z = -cayley_image_batch(U)
        ok = np.all(np.isfinite(Z), axis=(1, 2))
        out = np.full(U.shape, np.nan, dtype=complex)
        Z = 0.5 * (Z[ok] + np.conj(np.swapaxes(Z[ok], 1, 2)))
        H = np.broadcast_to(H0, (Z.shape[0],) + H0.shape).copy()
        H[:, (N - 1) * L:, (N - 1) * L:] -= Z
        ev, vec = np.linalg.eigh(H)
        coef = (((ev > E0 + endpoint_tol) & (ev < E1 - endpoint_tol)).astype(float)
                + 0.5 * ((np.abs(ev - E0) <= endpoint_tol)
                         | (np.abs(ev - E1) <= endpoint_tol)).astype(float))
        top = vec[:, :L, :]
        out[ok] = (top * coef[:, None, :]) @ np.conj(np.swapaxes(top, 1, 2))
        return out

    return mc_average(f, L, n_samples, seed, vectorized=True)


def averaged_green_mc(model: BlockJacobiModel, z, n_samples=20000, seed=0, Zhat=None) -> MCEstimate:
    """Monte Carlo over Haar right boundaries of the homogeneous Green formula."""
    blocks = transfer_blocks(model, z)

    def f(U):
        return green_frames_batch(blocks, Zhat, unitary_to_plane(U))

    return mc_average(f, model.L, n_samples, seed, vectorized=True)


def _frame_inv_gram_batched(model, E, N):
    """``[Phi^* Phi]^{-1}`` for ``Phi = T^E(N, 0) (1; 0)`` with QR renormalization."""
    L = model.L
    K = E.size
    Q = np.zeros((K, 2 * L, L), dtype=complex)
    Q[:, :L, :] = np.eye(L)
    Rinv = np.broadcast_to(np.eye(L, dtype=complex), (K, L, L)).copy()
    for n in range(1, N + 1):
        Q, r = np.linalg.qr(_batched_site(model, n, E) @ Q)
        Rinv = Rinv @ np.linalg.inv(r)
    return Rinv @ np.conj(np.swapaxes(Rinv, 1, 2))


def carmona_limit_measure(semi: SemiInfiniteModel, E0, E1, tol=2e-2, N_max=4096, N_start=8,
                          quad_tol=None) -> IntervalMass:
    """Half-line spectral mass of ``[E0, E1]`` from truncated transfer matrices.

    Evaluates ``c_measure * int dE [A_N^* A_N + C_N^* C_N]^{-1}`` for
    ``N = N_start, 2 N_start, ...`` until two successive values differ by less
    than ``tol`` (max entry), and returns the mean of those two.
    """
    if not semi.limit_point:
        raise ValidationError("carmona_limit_measure requires a limit point model")
    if not E0 < E1:
        raise ValidationError("need E0 < E1")
    quad_tol = tol / 20 if quad_tol is None else quad_tol
    trajectory = []
    N = N_start
    prev = None
    while N <= N_max:
        model = semi.truncate(N)
        val, err = adaptive_simpson(lambda E: _frame_inv_gram_batched(model, E, N), E0, E1,
                                    quad_tol / C_MEASURE, init=max(16, 2 * N))
        mass = C_MEASURE * val
        mass = 0.5 * (mass + mass.conj().T)
        trajectory.append((N, mass))
        if prev is not None and np.abs(mass - prev).max() < tol:
            mean = 0.5 * (mass + prev)
            return IntervalMass(float(E0), float(E1), mean, C_MEASURE * err, N, tuple(trajectory))
        prev = mass
        N *= 2
    raise NoConvergence(f"interval mass did not settle up to N={N_max}", trajectory)


def double_average_integrand(model: BlockJacobiModel, E):
    """Vectorized ``Uhat -> (Zhat + i) r_Zhat(E) (Zhat - i)`` with ``Zhat = C^* . (-Uhat)``."""
    A, B, C, D = transfer_blocks(model, float(E))
    L = model.L
    I = np.eye(L)

    def f(U):
        # Zhat + i = 2i (1 + Uhat)^{-1}, the exact hermitian-chart weight
        P = I + U
        cond = np.linalg.cond(P)
        ok = np.isfinite(cond) & (cond < SINGULAR_COND)
        out = np.full(U.shape, np.nan, dtype=complex)
        Pinv = np.linalg.inv(P[ok])
        X = 2j * Pinv
        Zhat = X - 1j * I
        Zhat = 0.5 * (Zhat + np.conj(np.swapaxes(Zhat, 1, 2)))
        Ap = A - B @ Zhat
        Cp = C - D @ Zhat
        r = _inv_gram(np.concatenate([Ap, Cp], axis=1))
        out[ok] = X @ r @ np.conj(np.swapaxes(X, 1, 2))
        return out
    return f


def double_average_density(model: BlockJacobiModel, E, n_samples=20000, seed=0) -> MCEstimate:
    """Haar average over left boundaries of the weighted interval integrand; equals ``1``."""
    return mc_average(double_average_integrand(model, E), model.L, n_samples, seed,
                      vectorized=True)
