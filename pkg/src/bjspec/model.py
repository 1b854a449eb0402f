"""Finite and semi-infinite block Jacobi operators and the dense eigensolve oracle.

A block Jacobi matrix acts on ``C^N (x) C^L`` by

    (H phi)_n = T_{n+1} phi_{n+1} + V_n phi_n + T_n^* phi_{n-1},

with ``T_1 = T_{N+1} = 1``. The left and right boundary conditions ``Zhat`` and
``Z`` enter the dense matrix as the corner blocks ``V_1 - Zhat`` and ``V_N - Z``.
Everything here is plain numpy; it is the brute-force reference against which
the transfer-matrix formulas of the other modules are checked.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import (EigensolveFailure, NonHermitianDiagonal, ShapeMismatch,
                     SingularOffDiagonal, SolveFailure, ValidationError)

TOL_HERM = 1e-10
SIGMA_MIN = 1e-10
DEGENERACY_TOL = 1e-10


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _herm_residual(M):
    scale = max(1.0, np.linalg.norm(M, 2))
    return np.linalg.norm(M - M.conj().T, 2) / scale


@dataclass(frozen=True)
class BlockJacobiModel:
    """Data ``(V_1..V_N, T_2..T_N)`` of a finite block Jacobi matrix.

    ``V`` has shape ``(N, L, L)``; ``T`` has shape ``(N-1, L, L)`` and
    ``T[k]`` is the block ``T_{k+2}``. Use :func:`validate_model` to build one
    from raw data.
    """
    V: np.ndarray
    T: np.ndarray

    @property
    def L(self) -> int:
        return self.V.shape[1]

    @property
    def N(self) -> int:
        return self.V.shape[0]

    def V_at(self, n: int) -> np.ndarray:
        return self.V[n - 1]

    def T_at(self, n: int) -> np.ndarray:
        """Off-diagonal block ``T_n`` for ``1 <= n <= N+1`` (identity at both ends)."""
        if n == 1 or n == self.N + 1:
            return np.eye(self.L, dtype=complex)
        return self.T[n - 2]

    def replace_V(self, V) -> "BlockJacobiModel":
        return BlockJacobiModel(_frozen(V), self.T)


@dataclass(frozen=True)
class BoundaryPair:
    """Left (``Zhat``) and right (``Z``) boundary conditions.

    Both must lie in the closed matrix upper half-plane ``i(Z^* - Z) >= 0``.
    """
    Zhat: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        for name in ("Zhat", "Z"):
            M = np.asarray(getattr(self, name), dtype=complex)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ShapeMismatch(f"{name} must be a square matrix, got shape {M.shape}")
            object.__setattr__(self, name, _frozen(M))
        if self.Zhat.shape != self.Z.shape:
            raise ShapeMismatch("Zhat and Z must have the same size")
        for name in ("Zhat", "Z"):
            if not in_closed_upper_half_plane(getattr(self, name)):
                raise ValidationError(f"{name} is not in the closed upper half-plane")

    @classmethod
    def dirichlet(cls, L: int) -> "BoundaryPair":
        z = np.zeros((L, L), dtype=complex)
        return cls(z, z)

    @property
    def is_hermitian(self) -> bool:
        return (_herm_residual(self.Zhat) <= TOL_HERM
                and _herm_residual(self.Z) <= TOL_HERM)


def in_closed_upper_half_plane(Z, tol=1e-10) -> bool:
    Z = np.asarray(Z, dtype=complex)
    im = 1j * (Z.conj().T - Z)
    im = 0.5 * (im + im.conj().T)
    scale = max(1.0, np.linalg.norm(Z, 2))
    return np.linalg.eigvalsh(im).min() >= -tol * scale


def validate_model(V, T, L=None, N=None, tol_herm=TOL_HERM, sigma_min=SIGMA_MIN):
    """Validate raw block data and return a :class:`BlockJacobiModel`.

    Parameters
    ----------
    V : array_like, shape (N, L, L)
        Diagonal blocks; each must be hermitian up to ``tol_herm`` (relative).
    T : array_like, shape (N-1, L, L)
        Off-diagonal blocks ``T_2..T_N``; each must have smallest singular
        value at least ``sigma_min`` times its largest one.
    L, N : int, optional
        Declared sizes, checked against the data when given.

    Raises
    ------
    ShapeMismatch, NonHermitianDiagonal, SingularOffDiagonal
    """
    V = np.array(V, dtype=complex)
    T = np.array(T, dtype=complex)
    if V.ndim != 3 or V.shape[1] != V.shape[2]:
        raise ShapeMismatch(f"V must have shape (N, L, L), got {V.shape}")
    n_sites, size = V.shape[0], V.shape[1]
    if n_sites < 1 or size < 1:
        raise ShapeMismatch("need N >= 1 and L >= 1")
    if T.size == 0:
        T = T.reshape(0, size, size)
    if T.ndim != 3 or T.shape[1:] != (size, size) or T.shape[0] != n_sites - 1:
        raise ShapeMismatch(
            f"T must have shape ({n_sites - 1}, {size}, {size}), got {T.shape}")
    if L is not None and L != size:
        raise ShapeMismatch(f"declared L={L} but blocks are {size}x{size}")
    if N is not None and N != n_sites:
        raise ShapeMismatch(f"declared N={N} but {n_sites} diagonal blocks given")
    for n in range(1, n_sites + 1):
        res = _herm_residual(V[n - 1])
        if res > tol_herm:
            raise NonHermitianDiagonal(n, res)
    for n in range(2, n_sites + 1):
        s = np.linalg.svd(T[n - 2], compute_uv=False)
        if s[-1] == 0.0 or s[-1] < sigma_min * s[0]:
            raise SingularOffDiagonal(n, float(s[-1]))
    # exact hermitian symmetrization removes roundoff-level asymmetry
    V = 0.5 * (V + np.conj(np.transpose(V, (0, 2, 1))))
    return BlockJacobiModel(_frozen(V), _frozen(T))


def assemble_dense(model: BlockJacobiModel, bc: Optional[BoundaryPair] = None) -> np.ndarray:
    """Dense ``NL x NL`` matrix with corner blocks ``V_1 - Zhat`` and ``V_N - Z``."""
    L, N = model.L, model.N
    if bc is None:
        bc = BoundaryPair.dirichlet(L)
    if bc.Z.shape != (L, L):
        raise ShapeMismatch("boundary conditions do not match the block size")
    H = np.zeros((N * L, N * L), dtype=complex)
    for n in range(N):
        H[n * L:(n + 1) * L, n * L:(n + 1) * L] = model.V[n]
    for k in range(N - 1):
        T = model.T[k]
        H[k * L:(k + 1) * L, (k + 1) * L:(k + 2) * L] = T
        H[(k + 1) * L:(k + 2) * L, k * L:(k + 1) * L] = T.conj().T
    H[:L, :L] -= bc.Zhat
    H[(N - 1) * L:, (N - 1) * L:] -= bc.Z
    return H


@dataclass(frozen=True)
class AtomicMatrixMeasure:
    """Matrix-valued atomic measure ``sum_k weights[k] * delta(E - energies[k])``."""
    energies: np.ndarray
    weights: np.ndarray

    @property
    def L(self):
        return self.weights.shape[1]

    def stieltjes(self, z) -> np.ndarray:
        """``sum_k w_k / (E_k - z)``."""
        return np.einsum("k,kij->ij", 1.0 / (self.energies - z), self.weights)

    def mass(self, E0, E1, endpoint_tol=1e-9) -> np.ndarray:
        """Half-sum of the closed and open interval masses (endpoint atoms count 1/2)."""
        E = self.energies
        inside = (E > E0 + endpoint_tol) & (E < E1 - endpoint_tol)
        edge = (np.abs(E - E0) <= endpoint_tol) | (np.abs(E - E1) <= endpoint_tol)
        coef = inside.astype(float) + 0.5 * edge.astype(float)
        return np.einsum("k,kij->ij", coef, self.weights)

    def total(self) -> np.ndarray:
        return self.weights.sum(axis=0)


def _hermitian_eigh(H):
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolveFailure(str(exc)) from exc


def spectral_measure_oracle(model: BlockJacobiModel, bc: Optional[BoundaryPair] = None,
                            degeneracy_tol=DEGENERACY_TOL) -> AtomicMatrixMeasure:
    """Corner spectral measure ``pi_1^* P_lambda pi_1`` by dense eigendecomposition.

    Numerically degenerate eigenvalues (within ``degeneracy_tol`` times the
    spectral radius) are merged into a single atom carrying the full
    eigenprojection.
    """
    if bc is None:
        bc = BoundaryPair.dirichlet(model.L)
    if not bc.is_hermitian:
        raise ValidationError("the spectral oracle needs hermitian boundary conditions")
    H = assemble_dense(model, bc)
    H = 0.5 * (H + H.conj().T)
    evals, evecs = _hermitian_eigh(H)
    L = model.L
    top = evecs[:L, :]
    scale = max(1.0, np.abs(evals).max())
    energies, weights = [], []
    start = 0
    for k in range(1, len(evals) + 1):
        if k == len(evals) or evals[k] - evals[k - 1] > degeneracy_tol * scale:
            block = top[:, start:k]
            energies.append(evals[start:k].mean())
            weights.append(block @ block.conj().T)
            start = k
    return AtomicMatrixMeasure(_frozen(energies, float), _frozen(weights))


def resolvent_corner_oracle(model: BlockJacobiModel, bc: Optional[BoundaryPair], z) -> np.ndarray:
    """``pi_1^* (H - z)^{-1} pi_1`` by a direct dense linear solve."""
    if np.imag(z) <= 0:
        raise ValidationError("resolvent oracle needs Im z > 0")
    H = assemble_dense(model, bc)
    L = model.L
    rhs = np.zeros((H.shape[0], L), dtype=complex)
    rhs[:L] = np.eye(L)
    try:
        X = scipy.linalg.solve(H - z * np.eye(H.shape[0]), rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolveFailure(str(exc)) from exc
    return X[:L]


@dataclass(frozen=True)
class SemiInfiniteModel:
    """Half-line operator given by a site generator ``n -> (T_n, V_n)``, ``n >= 1``.

    ``T_1`` returned by the generator is ignored (the convention ``T_1 = 1``
    applies). ``limit_point`` is the caller's declaration.
    """
    generator: Callable[[int], tuple]
    L: int
    limit_point: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def site(self, n):
        if n not in self._cache:
            T, V = self.generator(n)
            self._cache[n] = (np.asarray(T, dtype=complex), np.asarray(V, dtype=complex))
        return self._cache[n]

    def truncate(self, N: int) -> BlockJacobiModel:
        V = [self.site(n)[1] for n in range(1, N + 1)]
        T = [self.site(n)[0] for n in range(2, N + 1)]
        return validate_model(V, np.array(T).reshape(N - 1, self.L, self.L), L=self.L)

    @classmethod
    def periodic(cls, V, T=None, limit_point=True) -> "SemiInfiniteModel":
        """Periodic half-line with period ``len(V)``; ``T`` cycles over sites ``n >= 2``."""
        V = [np.atleast_2d(np.asarray(v, dtype=complex)) for v in V]
        L = V[0].shape[0]
        if T is None or len(T) == 0:
            T = [np.eye(L, dtype=complex)]
        T = [np.atleast_2d(np.asarray(t, dtype=complex)) for t in T]

        def gen(n):
            return T[(n - 2) % len(T)], V[(n - 1) % len(V)]

        return cls(gen, L, limit_point)

    @classmethod
    def free(cls, L=1) -> "SemiInfiniteModel":
        return cls.periodic([np.zeros((L, L))], [np.eye(L)])


@dataclass(frozen=True)
class CouplingFamily:
    """``H(mu) = H + mu * sum_n pi_n W_n pi_n^*`` over ``mu`` in ``interval``."""
    base: object
    W: np.ndarray
    interval: tuple

    def __post_init__(self):
        W = np.array(self.W, dtype=complex)
        if W.ndim != 3:
            raise ShapeMismatch(f"W must have shape (K, L, L), got {W.shape}")
        L = self.base.L
        if W.shape[1:] != (L, L):
            raise ShapeMismatch("perturbation blocks do not match the block size")
        if isinstance(self.base, BlockJacobiModel) and W.shape[0] > self.base.N:
            raise ShapeMismatch("more perturbation blocks than sites")
        for n, w in enumerate(W, start=1):
            res = _herm_residual(w)
            if res > TOL_HERM:
                raise NonHermitianDiagonal(n, res)
            w = 0.5 * (w + w.conj().T)
            if np.linalg.eigvalsh(w).min() < -TOL_HERM * max(1.0, np.abs(w).max()):
                raise ValidationError(f"W_{n} is not positive semi-definite")
        mu0, mu1 = map(float, self.interval)
        if not mu0 < mu1:
            raise ValidationError("interval must satisfy mu0 < mu1")
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "interval", (mu0, mu1))

    @property
    def L(self):
        return self.base.L

    @property
    def N(self) -> int:
        """Number of sites of the finite operator ``H^N(mu)``."""
        if isinstance(self.base, BlockJacobiModel):
            return self.base.N
        return self.W.shape[0]

    def finite_base(self) -> BlockJacobiModel:
        if isinstance(self.base, BlockJacobiModel):
            return self.base
        return self.base.truncate(self.N)

    def W_padded(self) -> np.ndarray:
        out = np.zeros((self.N, self.L, self.L), dtype=complex)
        out[:self.W.shape[0]] = self.W
        return out


def coupled_model(family: CouplingFamily, mu: float) -> BlockJacobiModel:
    """Finite model with ``V_n`` replaced by ``V_n + mu W_n``."""
    base = family.finite_base()
    if mu == 0:
        return base
    return base.replace_V(base.V + mu * family.W_padded())


def random_hermitian(L, rng, scale=1.0):
    X = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    return scale * 0.5 * (X + X.conj().T) / np.sqrt(2.0)


def random_model(L, N, rng, v_scale=1.0, t_spread=0.5) -> BlockJacobiModel:
    """Random model with GUE-like ``V_n`` and well-conditioned ``T_n``.

    ``T_n = Q_1 diag(s) Q_2`` with Haar-ish unitaries and singular values
    ``s`` uniform in ``[1 - t_spread, 1 + t_spread]``.
    """
    V = [random_hermitian(L, rng, v_scale) for _ in range(N)]
    T = []
    for _ in range(N - 1):
        q1, _ = np.linalg.qr(rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L)))
        q2, _ = np.linalg.qr(rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L)))
        s = rng.uniform(1 - t_spread, 1 + t_spread, size=L)
        T.append(q1 @ np.diag(s) @ q2)
    return validate_model(V, np.array(T).reshape(N - 1, L, L))


def free_model(L, N) -> BlockJacobiModel:
    """``V_n = 0``, ``T_n = 1``."""
    V = np.zeros((N, L, L))
    T = np.broadcast_to(np.eye(L), (N - 1, L, L))
    return validate_model(V, T)
