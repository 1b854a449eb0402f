"""Eigenphase tracking of unitary paths and eigenvalue counting by winding.

For real ``E`` the plane ``Phi_N^E = T^E(N, 0) (1; -Zhat)`` is Lagrangian and
``U_N^E = Pi(Phi_N^E)`` is unitary. Its eigenphases increase strictly with
``E`` and ``E`` is an eigenvalue of ``H_{Zhat, 0}`` exactly when ``-1`` is an
eigenvalue of ``U_N^E``, with the same multiplicity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EndpointOnSpectrum, RefinementLimit, ValidationError
from .model import BlockJacobiModel
from .moebius import plane_to_unitary, right_boundary_frame

MAX_STEP = np.pi / 2
MAX_POINTS = 1 << 20
PI_TOL = 1e-9


def _wrap(x):
    """Map angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - x, 2 * np.pi)


@dataclass(frozen=True)
class PhasePath:
    """A sampled unitary path with continuously tracked eigenphases.

    ``phases[k, l]`` is branch ``l`` at ``grid[k]``; ``velocities[k]`` is the
    hermitian part of ``(1/i) U^* dU/dt`` at ``grid[k]`` (or ``None``).
    """
    grid: np.ndarray
    unitaries: np.ndarray
    phases: np.ndarray
    velocities: Optional[np.ndarray] = None

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.phases, axis=0)

    def velocity_min_eigenvalues(self) -> np.ndarray:
        if self.velocities is None:
            raise ValidationError("path was built without velocities")
        return np.linalg.eigvalsh(self.velocities).min(axis=1)

    def crossings(self, target=np.pi) -> int:
        """Signed number of times the branches pass ``target`` (mod 2 pi)."""
        k0 = np.floor((self.phases[0] - target) / (2 * np.pi))
        k1 = np.floor((self.phases[-1] - target) / (2 * np.pi))
        return int(np.sum(k1 - k0))


def propagate_with_derivative(sites, dsites, Phi0, K):
    """Frame ``Phi_N`` and its parameter derivative for ``K`` parameter values.

    ``sites[n](K)`` and ``dsites[n]`` give batched one-site matrices and their
    derivatives. Both frames are multiplied by the same ``R^{-1}`` after each
    site; this leaves the plane and its tangent direction unchanged.
    """
    Phi = np.broadcast_to(np.asarray(Phi0, dtype=complex), (K,) + np.shape(Phi0)).copy()
    dPhi = np.zeros_like(Phi)
    for S, dS in zip(sites, dsites):
        dPhi = S @ dPhi + dS @ Phi
        Phi = S @ Phi
        Q, R = np.linalg.qr(Phi)
        Phi = Q
        dPhi = np.swapaxes(np.linalg.solve(np.swapaxes(R, 1, 2), np.swapaxes(dPhi, 1, 2)), 1, 2)
    return Phi, dPhi


def frames_to_unitaries(Q, dQ=None):
    """Batched ``Pi`` for frames ``(K, 2L, L)``; with ``dQ`` also the derivative of ``Pi``."""
    L = Q.shape[2]
    a, b = Q[:, :L, :], Q[:, L:, :]
    Mt = np.swapaxes(a + 1j * b, 1, 2)
    # X M^{-1} = solve(M^T, X^T)^T
    U = np.swapaxes(np.linalg.solve(Mt, np.swapaxes(a - 1j * b, 1, 2)), 1, 2)
    if dQ is None:
        return U
    da, db = dQ[:, :L, :], dQ[:, L:, :]
    dU = (da - 1j * db) - U @ (da + 1j * db)
    dU = np.swapaxes(np.linalg.solve(Mt, np.swapaxes(dU, 1, 2)), 1, 2)
    return U, dU


def _energy_sites(model, E):
    from .averaging import _batched_site
    L = model.L
    sites, dsites = [], []
    for n in range(1, model.N + 1):
        sites.append(_batched_site(model, n, E))
        d = np.zeros((2 * L, 2 * L), dtype=complex)
        d[:L, :L] = np.linalg.inv(model.T_at(n))
        dsites.append(d)
    return sites, dsites


class UnitaryPath:
    """Vectorized parameter-to-unitary map with an exact derivative.

    ``sites_fn(t)`` returns the batched one-site matrices and their
    derivatives for a 1-d array ``t``; ``ref`` (optional) multiplies from the left.
    """

    def __init__(self, sites_fn, Phi0, ref=None):
        self.sites_fn = sites_fn
        self.Phi0 = np.asarray(Phi0, dtype=complex)
        self.ref = ref

    def _eval(self, t, derivative):
        t = np.asarray(t, dtype=float)
        sites, dsites = self.sites_fn(t)
        Q, dQ = propagate_with_derivative(sites, dsites, self.Phi0, t.size)
        U, dU = frames_to_unitaries(Q, dQ)
        if self.ref is not None:
            U, dU = self.ref @ U, self.ref @ dU
        return (U, dU) if derivative else U

    def __call__(self, t):
        return self._eval(t, False)

    def with_derivative(self, t):
        return self._eval(t, True)


def energy_unitaries(model: BlockJacobiModel, Zhat=None, Z=None) -> UnitaryPath:
    """``E -> U_N^E``; with a right boundary ``Z`` the path ``-Pi(Phi_Z)^* U_N^E``."""
    L = model.L
    Zhat = np.zeros((L, L)) if Zhat is None else np.asarray(Zhat, dtype=complex)
    ref = None
    if Z is not None:
        ref = -plane_to_unitary(right_boundary_frame(Z)).conj().T
    Phi0 = np.linalg.qr(np.vstack([np.eye(L), -Zhat]))[0]
    return UnitaryPath(lambda E: _energy_sites(model, E), Phi0, ref)


def _eigphases(U):
    return np.angle(np.linalg.eigvals(U))


def _match(prev, new):
    """Assignment of ``new`` angles to ``prev`` branches minimizing wrapped distances."""
    d = _wrap(new[None, :] - prev[:, None])
    rows, cols = linear_sum_assignment(np.abs(d))
    return cols, d[rows, cols]


def _velocity(ufunc, t, U, dU=None):
    """Hermitian part of ``(1/i) U^* dU/dt``; central differences unless ``dU`` is given."""
    if dU is None:
        h = 1e-6 * np.maximum(1.0, np.abs(t))
        dU = (ufunc(t + h) - ufunc(t - h)) / (2 * h)[:, None, None]
    X = np.conj(np.swapaxes(U, 1, 2)) @ dU / 1j
    return 0.5 * (X + np.conj(np.swapaxes(X, 1, 2)))


def _sample(ufunc, t):
    if hasattr(ufunc, "with_derivative"):
        U, dU = ufunc.with_derivative(t)
    else:
        U, dU = ufunc(t), None
    vel = _velocity(ufunc, t, U, dU)
    return U, _eigphases(U), vel, np.linalg.eigvalsh(vel)


def track_unitary_path(ufunc: Callable, grid, monotone: Optional[int] = None, max_step=MAX_STEP,
                       velocity=True, max_points=MAX_POINTS, min_width=1e-12,
                       trace_tol=0.25) -> PhasePath:
    """Sample ``ufunc`` on ``grid`` and refine by bisection until eigenphases can be tracked.

    A step is accepted when every matched increment is below ``max_step`` in
    modulus and, if ``monotone`` is ``+1`` or ``-1``, strictly of that sign.
    Full turns between samples are excluded by requiring the summed increment
    to match the trapezoid integral of ``tr`` of the phase velocity to
    ``trace_tol``, and the largest velocity times the step to stay below
    ``max_step``.
    """
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValidationError("grid must be strictly ascending with at least two points")
    U, ang, vel, lam = _sample(ufunc, t)
    width_floor = min_width * max(1.0, np.abs(t).max())
    while True:
        dt = np.diff(t)
        speed = np.maximum(np.abs(lam[:-1]).max(axis=1), np.abs(lam[1:]).max(axis=1))
        predicted = 0.5 * (lam[:-1].sum(axis=1) + lam[1:].sum(axis=1)) * dt
        bad = []
        for k in range(t.size - 1):
            _, d = _match(ang[k], ang[k + 1])
            ok = (np.abs(d).max() < max_step and speed[k] * dt[k] < max_step
                  and abs(d.sum() - predicted[k]) < trace_tol)
            if monotone is not None:
                ok = ok and bool(np.all(monotone * d > 0))
            if not ok and dt[k] > width_floor:
                bad.append(k)
        if not bad:
            break
        mids = 0.5 * (t[bad] + t[np.array(bad) + 1])
        if t.size + mids.size > max_points:
            raise RefinementLimit(f"phase tracking needs more than {max_points} points")
        Um, am, vm, lm = _sample(ufunc, mids)
        order = np.argsort(np.concatenate([t, mids]), kind="stable")
        t = np.concatenate([t, mids])[order]
        U = np.concatenate([U, Um])[order]
        ang = np.concatenate([ang, am])[order]
        vel = np.concatenate([vel, vm])[order]
        lam = np.concatenate([lam, lm])[order]
    L = ang.shape[1]
    phases = np.zeros_like(ang)
    phases[0] = np.sort(ang[0])
    current = phases[0].copy()
    wrapped = _wrap(current)
    for k in range(1, t.size):
        _, d = _match(wrapped, ang[k])
        current = current + d
        wrapped = _wrap(current)
        phases[k] = current
    return PhasePath(t, U, phases.reshape(t.size, L), vel if velocity else None)


def _initial_grid(E0, E1, model):
    n = max(32, 8 * model.N * model.L)
    return np.linspace(E0, E1, n)


def phase_unitary_path(model: BlockJacobiModel, Zhat=None, grid=None, E0=None, E1=None,
                       velocity=True, Z=None) -> PhasePath:
    """Tracked eigenphases of ``E -> U_N^E`` (increasing in ``E``)."""
    if grid is None:
        if E0 is None or E1 is None:
            raise ValidationError("give either a grid or the window E0, E1")
        grid = _initial_grid(E0, E1, model)
    return track_unitary_path(energy_unitaries(model, Zhat, Z), grid, monotone=+1,
                              velocity=velocity)


def _log_derivative(model, Zhat, z):
    """``tr(a^{-1} da/dz)`` for the top block ``a`` of ``T^z(N,0) (1; -Zhat)``."""
    L = model.L
    z = np.asarray(z, dtype=complex)
    sites, dsites = _energy_sites(model, z)
    Phi, dPhi = propagate_with_derivative(sites, dsites, np.vstack([np.eye(L), -Zhat]), z.size)
    return np.trace(np.linalg.solve(Phi[:, :L], dPhi[:, :L]), axis1=1, axis2=2)


def eigenvalue_count_certificate(model: BlockJacobiModel, Zhat, E0, E1, tol=1e-4) -> int:
    """Zeros of ``det a(z)`` inside the rectangle over ``(E0, E1)`` by the argument principle.

    ``det a`` is a polynomial whose zeros are the eigenvalues of
    ``H_{Zhat, 0}``, so the contour integral of its log derivative counts
    them without resolving the real axis.
    """
    from .averaging import adaptive_simpson
    from .errors import NumericalError
    L = model.L
    Zhat = np.zeros((L, L)) if Zhat is None else np.asarray(Zhat, dtype=complex)
    h = 0.5 * (E1 - E0)
    legs = (  # (start, direction) of the four sides, counterclockwise
        (E0 - 1j * h, E1 - E0), (E1 - 1j * h, 2j * h),
        (E1 + 1j * h, E0 - E1), (E0 + 1j * h, -2j * h))
    total = 0.0
    for start, step in legs:
        val, _ = adaptive_simpson(lambda s: _log_derivative(model, Zhat, start + s * step) * step,
                                  0.0, 1.0, tol)
        total += val
    count = total / (2j * np.pi)
    k = int(np.rint(count.real))
    if abs(count - k) > 0.25:
        raise NumericalError(f"argument principle count {count:.3f} is not near an integer")
    return k


def _mismatched_steps(model, Zhat, path, i, j, cert):
    """Grid steps within ``[i, j]`` whose tracked crossings miss the certified count."""
    ph = path.phases
    tracked = int(np.sum(np.floor((ph[j] - np.pi) / (2 * np.pi))
                         - np.floor((ph[i] - np.pi) / (2 * np.pi))))
    if cert is None:
        cert = eigenvalue_count_certificate(model, Zhat, path.grid[i], path.grid[j])
    if tracked == cert:
        return []
    if j == i + 1:
        return [i]
    m = (i + j) // 2
    return (_mismatched_steps(model, Zhat, path, i, m, None)
            + _mismatched_steps(model, Zhat, path, m, j, None))


def count_eigenvalues_by_winding(model: BlockJacobiModel, Zhat=None, E0=-1.0, E1=1.0, Z=None,
                                 return_path=False, max_rounds=64):
    """Number of eigenvalues of ``H_{Zhat, Z}`` in ``(E0, E1)`` with multiplicity.

    The count is the number of crossings of the tracked phases through
    ``pi``. For a Dirichlet right boundary an argument principle count
    guards against resonances narrower than the grid: steps where the two
    disagree are subdivided until they match.
    With ``Z`` given the phases of ``-Pi(Phi_Z)^* U_N^E`` are tracked
    instead, without the guard.

    Raises
    ------
    EndpointOnSpectrum
        If an endpoint phase lies within 1e-9 of ``pi``.
    """
    if not E0 < E1:
        raise ValidationError("need E0 < E1")
    grid = _initial_grid(E0, E1, model)
    path = phase_unitary_path(model, Zhat, grid=grid, Z=Z, velocity=return_path)
    for k in (0, -1):
        if np.abs(_wrap(path.phases[k] - np.pi)).min() < PI_TOL:
            raise EndpointOnSpectrum(f"E = {path.grid[k]} is (numerically) an eigenvalue")
    if Z is None:
        Zh = np.zeros((model.L, model.L)) if Zhat is None else Zhat
        cert = eigenvalue_count_certificate(model, Zh, E0, E1)
        for _ in range(max_rounds):
            bad = _mismatched_steps(model, Zh, path, 0, path.grid.size - 1, cert)
            if not bad:
                break
            extra = [np.linspace(path.grid[k], path.grid[k + 1], 33)[1:-1] for k in bad]
            grid = np.union1d(path.grid, np.concatenate(extra))
            path = phase_unitary_path(model, Zhat, grid=grid, velocity=return_path)
        else:
            raise RefinementLimit("tracked crossings never matched the argument principle count")
    count = path.crossings(np.pi)
    return (count, path) if return_path else count


def winding_of_path(path: PhasePath) -> float:
    """``(1/2 pi) sum_l (theta_l(end) - theta_l(start))``."""
    return float(np.sum(path.phases[-1] - path.phases[0]) / (2 * np.pi))


def crossing_energies(model: BlockJacobiModel, Zhat=None, E0=-1.0, E1=1.0, tol=1e-10):
    """Energies in ``(E0, E1)`` where a branch passes ``pi``, localized by bisection.

    Returns a list of ``(E, multiplicity)``; branches crossing within ``tol``
    of each other are merged.
    """
    path = count_eigenvalues_by_winding(model, Zhat, E0, E1, return_path=True)[1]
    ufunc = energy_unitaries(model, Zhat)
    found = []
    k0 = np.floor((path.phases - np.pi) / (2 * np.pi))
    for k in range(path.grid.size - 1):
        jumps = k0[k + 1] - k0[k]
        for l in np.nonzero(jumps)[0]:
            a, b = path.grid[k], path.grid[k + 1]
            # phase of branch l is monotone in the step; use the wrapped distance to pi
            ref = path.phases[k, l]
            while b - a > tol:
                m = 0.5 * (a + b)
                am = _eigphases(ufunc(np.array([m])))[0]
                d = _wrap(am - _wrap(ref))
                step = d[np.argmin(np.abs(d))]
                if np.floor((ref + step - np.pi) / (2 * np.pi)) > k0[k, l]:
                    b = m
                else:
                    a, ref = m, ref + step
            found.append(0.5 * (a + b))
    found.sort()
    merged = []
    for E in found:
        if merged and E - merged[-1][0] <= 10 * tol:
            merged[-1] = (merged[-1][0], merged[-1][1] + 1)
        else:
            merged.append((E, 1))
    return merged
