"""Coupling-constant averaging: Dirichlet solutions, P-matrices and the mu-winding criterion.

The family is ``H(mu) = H + mu * sum_n pi_n W_n pi_n^*`` with ``W_n >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, RefinementLimit, ValidationError
from .model import CouplingFamily, coupled_model
from .oscillation import UnitaryPath, track_unitary_path, winding_of_path
from .symplectic import lagrangian_residual, propagate_plane, symplectic_form

P_FD_RTOL = 1e-6
DEFAULT_NODES = 400


@dataclass(frozen=True)
class DirichletSolution:
    """``Psi = T^E(N, 0, mu) (1; 0)``."""
    Psi: np.ndarray
    E: float
    mu: float
    N: int

    @property
    def lagrangian_residual(self) -> float:
        return lagrangian_residual(self.Psi)


@dataclass(frozen=True)
class PMatrix:
    P: np.ndarray
    E: float
    mu: float

    def extreme_eigenvalues(self):
        w = np.linalg.eigvalsh(self.P)
        return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class CriteriaReport:
    """Outcome of the two criteria on an interval ``I`` of couplings.

    ``C1``, ``C2`` bound the spectrum of ``P(mu)`` over the grid; ``winding``
    is the mu-winding of ``Pi(Psi(mu))``.
    """
    C1: float
    C2: float
    winding: float
    passes_i: bool
    passes_ii: bool
    grid: int
    E: float = 0.0
    interval: tuple = ()

    def to_dict(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "winding": self.winding,
                "passes_i": self.passes_i, "passes_ii": self.passes_ii,
                "grid": self.grid, "E": self.E, "interval": list(self.interval)}


def _start_frame(L):
    return np.vstack([np.eye(L), np.zeros((L, L))]).astype(complex)


def dirichlet_solution(family: CouplingFamily, E, mu) -> DirichletSolution:
    """Dirichlet solution at energy ``E`` (real) and coupling ``mu``."""
    model = coupled_model(family, float(mu))
    Psi = propagate_plane(model, float(E), _start_frame(family.L), check=False)
    return DirichletSolution(Psi, float(E), float(mu), model.N)


def _mu_sites(family, E, mu):
    """Batched one-site matrices in ``mu`` and their exact ``mu`` derivatives."""
    base = family.finite_base()
    W = family.W_padded()
    L = family.L
    mu = np.asarray(mu, dtype=float)
    sites, dsites = [], []
    for n in range(1, base.N + 1):
        T = base.T_at(n)
        Tinv = np.linalg.inv(T)
        S = np.zeros((mu.size, 2 * L, 2 * L), dtype=complex)
        S[:, :L, :L] = (E * np.eye(L) - base.V_at(n)) @ Tinv - mu[:, None, None] * (W[n - 1] @ Tinv)
        S[:, :L, L:] = -T.conj().T
        S[:, L:, :L] = Tinv
        d = np.zeros((2 * L, 2 * L), dtype=complex)
        d[:L, :L] = -W[n - 1] @ Tinv
        sites.append(S)
        dsites.append(d)
    return sites, dsites


def p_terms(family: CouplingFamily, E, mu) -> np.ndarray:
    """Site terms ``(T_n^{-1} a_{n-1})^* W_n (T_n^{-1} a_{n-1})`` for an array of ``mu``.

    ``a_{n-1}`` is the top block of ``T^E(n-1, 0, mu) (1; 0)``. Returns shape
    ``(K, N, L, L)``; the P-matrix is the sum over the site axis.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    base = family.finite_base()
    W = family.W_padded()
    L = family.L
    sites, _ = _mu_sites(family, E, mu)
    Psi = np.broadcast_to(_start_frame(L), (mu.size, 2 * L, L)).copy()
    out = np.zeros((mu.size, base.N, L, L), dtype=complex)
    for n in range(1, base.N + 1):
        X = np.linalg.inv(base.T_at(n)) @ Psi[:, :L]
        out[:, n - 1] = np.conj(np.swapaxes(X, 1, 2)) @ W[n - 1] @ X
        Psi = sites[n - 1] @ Psi
    return out


def p_matrix(family: CouplingFamily, E, mu, check=True) -> PMatrix:
    """``P(mu) = -Psi^* J d/dmu Psi`` from the exact site sum.

    With ``check=True`` the central difference of ``Psi`` in ``mu`` must give
    the same matrix to 1e-6 relative.
    """
    P = p_terms(family, E, mu).sum(axis=1)[0]
    P = 0.5 * (P + P.conj().T)
    if check:
        h = 1e-4 * max(1.0, abs(float(mu)))
        Psi = dirichlet_solution(family, E, mu).Psi
        dPsi = (dirichlet_solution(family, E, mu + h).Psi
                - dirichlet_solution(family, E, mu - h).Psi) / (2 * h)
        J = symplectic_form(family.L)
        P_fd = -Psi.conj().T @ J @ dPsi
        scale = max(np.linalg.norm(P), 1e-300)
        err = np.linalg.norm(P - P_fd) / scale
        if np.linalg.norm(P) > 0 and err > P_FD_RTOL:
            raise ConsistencyError(f"P-matrix sum and finite difference differ by {err:.2e}")
    return PMatrix(P, float(E), float(mu))


def mu_unitary_path(family: CouplingFamily, E) -> UnitaryPath:
    """``mu -> Pi(Psi(mu))`` with its exact derivative."""
    return UnitaryPath(lambda mu: _mu_sites(family, float(E), mu), _start_frame(family.L))


def _grid(I, grid_spec):
    if grid_spec is None:
        grid_spec = DEFAULT_NODES
    if np.isscalar(grid_spec):
        return np.linspace(I[0], I[1], int(grid_spec))
    return np.asarray(grid_spec, dtype=float)


def mu_phase_path(family: CouplingFamily, E, I=None, grid_spec=None):
    I = family.interval if I is None else tuple(map(float, I))
    return track_unitary_path(mu_unitary_path(family, E), _grid(I, grid_spec), velocity=False)


def mu_phase_winding(family: CouplingFamily, E, I=None, grid_spec=None) -> float:
    """Winding of ``Pi(Psi(mu))`` over ``I``; negative for nonzero ``W >= 0``."""
    if not np.any(family.W):
        return 0.0
    return winding_of_path(mu_phase_path(family, E, I, grid_spec))


def _p_bounds(family, E, mu):
    P = p_terms(family, E, mu).sum(axis=1)
    P = 0.5 * (P + np.conj(np.swapaxes(P, 1, 2)))
    w = np.linalg.eigvalsh(P)
    return float(w[:, 0].min()), float(w[:, -1].max())


def criteria_report(family: CouplingFamily, E, I=None, grid_spec=None, rel_tol=0.01,
                    max_doublings=12) -> CriteriaReport:
    """Check the positivity and winding criteria at energy ``E`` over ``I``.

    ``C1``, ``C2`` are the extreme eigenvalues of ``P(mu)`` over the grid,
    which is doubled until both move by less than ``rel_tol``. The winding
    criterion is the strict inequality ``winding < -L``.
    """
    I = family.interval if I is None else tuple(map(float, I))
    mu = _grid(I, grid_spec)
    C1, C2 = _p_bounds(family, E, mu)
    for _ in range(max_doublings):
        mu = np.linspace(I[0], I[1], 2 * mu.size - 1)
        c1, c2 = _p_bounds(family, E, mu)
        moved = max(abs(c1 - C1) / max(abs(c1), 1e-300) if c1 > 0 else abs(c1 - C1),
                    abs(c2 - C2) / max(abs(c2), 1e-300))
        C1, C2 = c1, c2
        if moved < rel_tol:
            break
    else:
        raise RefinementLimit("P-matrix bounds did not settle under grid doubling")
    C1 = max(C1, 0.0) if C1 > -1e-12 * max(1.0, C2) else C1
    winding = mu_phase_winding(family, E, I, grid_spec)
    return CriteriaReport(C1=C1, C2=C2, winding=winding, passes_i=bool(C1 > 0),
                          passes_ii=bool(winding < -family.L), grid=int(mu.size),
                          E=float(E), interval=I)


def oracle_crossings(family: CouplingFamily, E, I=None) -> int:
    """Eigenvalues of ``H^N(mu)`` passing ``E`` as ``mu`` runs over ``I`` (dense eigensolves)."""
    from .model import assemble_dense
    I = family.interval if I is None else I
    below = [int(np.sum(np.linalg.eigvalsh(assemble_dense(coupled_model(family, m))) < E))
             for m in I]
    return below[0] - below[1]


@dataclass(frozen=True)
class DensityBounds:
    minimum: float
    maximum: float

    @property
    def ratio(self) -> float:
        return self.maximum / self.minimum if self.minimum > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"min": self.minimum, "max": self.maximum, "ratio": self.ratio}


@dataclass(frozen=True)
class CoupledDensity:
    """Bin centres and ``mu``-integrated trace densities over an energy window."""
    E: np.ndarray
    density: np.ndarray
    edges: np.ndarray
    bounds: DensityBounds = field(default=None)


def _branches(family, mu):
    """Sorted eigenvalues and corner weights ``|pi_1^* psi|^2`` of ``H^N(mu)``."""
    from .model import assemble_dense
    L = family.L
    E, w = [], []
    for m in mu:
        H = assemble_dense(coupled_model(family, float(m)))
        ev, vec = np.linalg.eigh(0.5 * (H + H.conj().T))
        E.append(ev)
        w.append(np.sum(np.abs(vec[:L]) ** 2, axis=0))
    return np.array(E), np.array(w)


def _segment_overlap(e0, e1, lo, hi):
    """Fraction of the straight segment ``e0 -> e1`` lying in each bin ``[lo, hi)``."""
    a = np.minimum(e0, e1)[..., None]
    b = np.maximum(e0, e1)[..., None]
    length = b - a
    inside = np.clip(np.minimum(b, hi) - np.maximum(a, lo), 0.0, None)
    flat = length[..., 0] <= 0
    frac = np.where(length > 0, inside / np.where(length > 0, length, 1.0), 0.0)
    if np.any(flat):
        hit = ((a >= lo) & (a < hi)).astype(float)
        frac = np.where(flat[..., None], hit, frac)
    return frac


def coupling_averaged_density(family: CouplingFamily, window, mu_grid=DEFAULT_NODES, n_E=12,
                              I=None) -> CoupledDensity:
    """``int_I dmu Tr mu_{H^N(mu)}(bin) / |bin|`` on ``n_E`` bins of ``window``.

    Every eigenvalue branch (in sorted order) is taken linear in ``mu``
    between grid nodes, with its corner weight averaged over the step, so a
    branch deposits mass in every bin it passes rather than only at nodes.
    """
    E0, E1 = map(float, window)
    if not E0 < E1 or n_E < 1:
        raise ValidationError("need E0 < E1 and at least one bin")
    I = family.interval if I is None else tuple(map(float, I))
    mu = _grid(I, mu_grid)
    edges = np.linspace(E0, E1, n_E + 1)
    lo, hi = edges[:-1], edges[1:]
    ev, w = _branches(family, mu)
    dmu = np.diff(mu)[:, None, None]
    frac = _segment_overlap(ev[:-1], ev[1:], lo, hi)
    wavg = 0.5 * (w[:-1] + w[1:])[..., None]
    mass = np.sum(dmu * wavg * frac, axis=(0, 1))
    density = mass / (hi - lo)
    centres = 0.5 * (lo + hi)
    return CoupledDensity(centres, density, edges,
                          DensityBounds(float(density.min()), float(density.max())))
