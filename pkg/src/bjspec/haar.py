"""Haar measure on U(L): sampling, Monte Carlo averages and unitary-group identities.

Monte Carlo runs are split into fixed blocks of ``BLOCK`` samples; block ``b``
draws from ``default_rng(SeedSequence(seed, spawn_key=(b,)))``. Results depend
only on ``(seed, n_samples)``, never on how blocks are scheduled.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import FrameDegenerate, MoebiusSingular, TooManySingular, ValidationError

BLOCK = 1024
MAX_SKIPPED_FRACTION = 1e-3

# Exact L=1 value of the integral in radav_integral, confirmed by the
# 2048-node circle quadrature (see radav_integral(method="quadrature")).
C_RADAV = 0.5


def _threads():
    env = os.environ.get("BJSPEC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def sample_haar_batch(L, n, rng) -> np.ndarray:
    """``n`` Haar unitaries of size ``L``, shape ``(n, L, L)``.

    QR of a complex Ginibre matrix, with the columns of ``Q`` multiplied by
    the phases of ``diag(R)`` so that ``R`` has a positive diagonal.
    """
    G = (rng.standard_normal((n, L, L)) + 1j * rng.standard_normal((n, L, L))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(G)
    d = np.diagonal(R, axis1=1, axis2=2)
    return Q * (d / np.abs(d))[:, None, :]


def sample_haar(L, rng) -> np.ndarray:
    return sample_haar_batch(L, 1, rng)[0]


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with per-entry standard errors of real and imaginary parts."""
    mean: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    samples: int
    seed: int
    skipped: int = 0

    @property
    def stderr(self) -> np.ndarray:
        return np.hypot(self.stderr_re, self.stderr_im)

    @property
    def reliable(self) -> bool:
        return self.skipped <= MAX_SKIPPED_FRACTION * self.samples

    def z_scores(self, target) -> np.ndarray:
        """Largest of the real/imaginary deviations in units of standard errors, per entry."""
        diff = self.mean - np.asarray(target)
        zr = _ratio(np.abs(diff.real), self.stderr_re)
        zi = _ratio(np.abs(diff.imag), self.stderr_im)
        return np.maximum(zr, zi)

    def max_z(self, target) -> float:
        return float(np.max(self.z_scores(target)))

    def agrees(self, target, nsigma=4.0) -> bool:
        return self.max_z(target) <= nsigma


def _ratio(dev, se, floor=1e-12):
    # a vanishing standard error only tolerates roundoff-level deviations
    return dev / np.maximum(se, floor)


def combined_z(a: MCEstimate, b: MCEstimate) -> float:
    """Max-entry z-score of ``a - b`` for independent estimates."""
    diff = a.mean - b.mean
    zr = _ratio(np.abs(diff.real), np.hypot(a.stderr_re, b.stderr_re))
    zi = _ratio(np.abs(diff.imag), np.hypot(a.stderr_im, b.stderr_im))
    return float(np.max(np.maximum(zr, zi)))


def _evaluate_block(f, L, seed, b, count, vectorized, antithetic):
    U = sample_haar_batch(L, count, block_rng(seed, b))
    if vectorized:
        vals = np.asarray(f(U), dtype=complex)
        if antithetic:
            vals = 0.5 * (vals + np.asarray(f(np.conj(np.swapaxes(U, 1, 2))), dtype=complex))
    else:
        rows = []
        for u in U:
            try:
                v = np.asarray(f(u), dtype=complex)
                if antithetic:
                    v = 0.5 * (v + np.asarray(f(u.conj().T), dtype=complex))
            except (np.linalg.LinAlgError, ArithmeticError, MoebiusSingular, FrameDegenerate):
                v = None
            rows.append(v)
        shape = next((r.shape for r in rows if r is not None), ())
        vals = np.array([r if r is not None else np.full(shape, np.nan) for r in rows],
                        dtype=complex)
    shape = vals.shape[1:]
    vals = vals.reshape(count, -1)
    good = np.all(np.isfinite(vals), axis=1)
    v = vals[good]
    return v.sum(axis=0), (v.real ** 2).sum(axis=0), (v.imag ** 2).sum(axis=0), \
        int(good.sum()), shape


def mc_average(f: Callable, L: int, n_samples: int, seed: int, vectorized=False,
               antithetic=False, workers: Optional[int] = None,
               allow_unreliable=False) -> MCEstimate:
    """Haar average of a (matrix-valued) function on U(L).

    Parameters
    ----------
    f : callable
        ``f(U)`` for a single unitary, or ``f(U_stack)`` returning one value per
        sample when ``vectorized=True``. Evaluations that raise a linear
        algebra error or return non-finite values are skipped and counted.
    antithetic : bool
        Average ``f(U)`` with ``f(U^*)``; ``U -> U^*`` is the Haar-preserving
        map that sends the Cayley image ``C^*.U`` to its negative.
    workers : int, optional
        Threads used for block evaluation (default ``BJSPEC_THREADS`` or the CPU count);
        results do not depend on it.

    Raises
    ------
    TooManySingular
        If more than a fraction 1e-3 of the evaluations were skipped.
    """
    if n_samples < 100:
        raise ValidationError("mc_average needs at least 100 samples")
    counts = [min(BLOCK, n_samples - b * BLOCK) for b in range((n_samples + BLOCK - 1) // BLOCK)]
    args = [(f, L, seed, b, c, vectorized, antithetic) for b, c in enumerate(counts)]
    workers = workers or _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _evaluate_block(*a), args))
    else:
        parts = [_evaluate_block(*a) for a in args]
    shape = parts[0][4]
    s = np.zeros(parts[0][0].shape, dtype=complex)
    sr = np.zeros(s.shape)
    si = np.zeros(s.shape)
    good = 0
    for ps, psr, psi, pg, _ in parts:
        s += ps
        sr += psr
        si += psi
        good += pg
    skipped = n_samples - good
    if skipped > MAX_SKIPPED_FRACTION * n_samples and not allow_unreliable:
        raise TooManySingular(skipped, n_samples)
    if good < 2:
        raise TooManySingular(skipped, n_samples)
    mean = s / good
    var_r = np.maximum(sr / good - mean.real ** 2, 0.0) * good / (good - 1)
    var_i = np.maximum(si / good - mean.imag ** 2, 0.0) * good / (good - 1)
    return MCEstimate(mean.reshape(shape), np.sqrt(var_r / good).reshape(shape),
                      np.sqrt(var_i / good).reshape(shape), n_samples, seed, skipped)


def hua_cauchy_check(f: Callable, Z, n_samples=20000, seed=0, vectorized=False):
    """Both sides of Hua's Cauchy formula ``f(Z) = int dU det(1 - Z U^*)^{-L} f(U)``.

    Returns ``(f(Z), MCEstimate)``; ``Z`` must lie strictly inside the unit
    disc, ``f`` analytic on the disc.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    L = Z.shape[0]
    margin = 1.0 - np.linalg.norm(Z, 2) ** 2
    if margin < 1e-6:
        raise ValidationError("Z must lie strictly inside the unit disc")
    I = np.eye(L)

    def integrand(U):
        kernel = np.linalg.det(I - Z @ np.conj(np.swapaxes(U, -1, -2))) ** (-L)
        vals = np.asarray(f(U) if vectorized else [f(u) for u in U], dtype=complex)
        return vals * kernel.reshape((-1,) + (1,) * (vals.ndim - 1))

    lhs = np.asarray(f(Z[None])[0] if vectorized else f(Z), dtype=complex)
    return lhs, mc_average(integrand, L, n_samples, seed, vectorized=True)


def cayley_image_batch(U) -> np.ndarray:
    """Hermitian ``C^* . U = i (1 + U)(1 - U)^{-1}`` for a stack (``nan`` where singular)."""
    U = np.asarray(U, dtype=complex)
    I = np.eye(U.shape[-1])
    M = I - U
    out = np.full(U.shape, np.nan, dtype=complex)
    cond = np.linalg.cond(M)
    ok = np.isfinite(cond) & (cond < 1e8)
    # X (1 - U) = i (1 + U)  <=>  (1 - U)^T X^T = i (1 + U)^T
    rhs = 1j * (I + U[ok])
    out[ok] = np.swapaxes(np.linalg.solve(np.swapaxes(M[ok], 1, 2), np.swapaxes(rhs, 1, 2)), 1, 2)
    return out


def reflection_check(F: Callable, L: int, n_samples=20000, seed=0, vectorized=False):
    """Haar averages of ``F(C^*.U)`` and ``F(-C^*.U)`` over independent sample sets.

    ``F`` acts on hermitian matrices and should grow at most like
    ``(1 + |xi|)^(2L-2)`` so that both averages have finite variance.
    """
    def make(sign):
        def g(U):
            X = sign * cayley_image_batch(U)
            if vectorized:
                return F(X)
            return np.array([F(x) if np.all(np.isfinite(x)) else np.nan for x in X])
        return g

    plus = mc_average(make(+1), L, n_samples, seed, vectorized=True)
    minus = mc_average(make(-1), L, n_samples, seed + 1, vectorized=True)
    return plus, minus


@dataclass(frozen=True)
class LorentzPositive:
    """Positive element ``M`` of U(L, L) with its normal form ``diag(W, Wp) T_eta diag(W, Wp)^*``."""
    M: np.ndarray
    eta: np.ndarray
    W: np.ndarray
    Wp: np.ndarray

    def signature_residual(self) -> float:
        L = self.eta.size
        G = np.diag(np.r_[np.ones(L), -np.ones(L)])
        return float(np.linalg.norm(self.M.conj().T @ G @ self.M - G, 2))


def positive_lorentz_from_normal_form(W, Wp, eta) -> LorentzPositive:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any(eta < 0):
        raise ValidationError("eta must be nonnegative")
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    Wp = np.atleast_2d(np.asarray(Wp, dtype=complex))
    L = eta.size
    ch, sh = np.diag(np.cosh(eta)), np.diag(np.sinh(eta))
    T_eta = np.block([[ch, sh], [sh, ch]])
    Mw = np.zeros((2 * L, 2 * L), dtype=complex)
    Mw[:L, :L] = W
    Mw[L:, L:] = Wp
    M = Mw @ T_eta @ Mw.conj().T
    return LorentzPositive(0.5 * (M + M.conj().T), eta, W, Wp)


def _radav_integrand(Tm, V):
    L = V.shape[0]

    def g(U):
        n = U.shape[0]
        X = np.concatenate([U, np.broadcast_to(V, (n, L, L))], axis=1)
        G = np.conj(np.swapaxes(X, 1, 2)) @ Tm @ X
        return np.linalg.inv(G)
    return g


def radav_integral(t: LorentzPositive, V, method="mc", n_samples=20000, seed=0, n_nodes=2048):
    """``int dU [ (U; V)^* T (U; V) ]^{-1}`` for positive ``T`` in U(L, L).

    ``method="quadrature"`` (L = 1 only) uses an ``n_nodes`` trapezoid rule on
    the circle and returns the value as a 1x1 array; ``method="mc"`` returns
    an :class:`MCEstimate`. The exact value is ``C_RADAV * 1``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=complex))
    L = V.shape[0]
    g = _radav_integrand(t.M, V)
    if method == "quadrature":
        if L != 1:
            raise ValidationError("circle quadrature only for L = 1")
        theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
        U = np.exp(1j * theta).reshape(-1, 1, 1)
        return g(U).mean(axis=0)
    if method == "mc":
        return mc_average(g, L, n_samples, seed, vectorized=True)
    raise ValidationError(f"unknown method {method!r}")
