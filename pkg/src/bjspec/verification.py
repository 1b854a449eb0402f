"""Built-in verification suites: closed forms against oracles and Monte Carlo.

Each check returns a :class:`CheckResult`; :func:`run_suites` collects them
into a :class:`VerifyReport`. All randomness derives from the seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import averaging, coupling, green, haar, model as mdl, oscillation
from .errors import BJSpecError, TooManySingular

Z_TOL = 4.0


@dataclass
class CheckResult:
    name: str
    status: str
    statistic: float
    tolerance: float
    samples: int = 0
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self, timings=False) -> dict:
        out = {"name": self.name, "status": self.status, "statistic": self.statistic,
               "tolerance": self.tolerance, "samples": self.samples, "detail": self.detail}
        if timings:
            out["runtime"] = self.runtime
        return out


@dataclass
class VerifyReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self, timings=False) -> dict:
        return {"status": self.status, "checks": [c.to_dict(timings) for c in self.checks]}


def _result(name, stat, tol, samples=0, reliable=True, **detail):
    stat = float(stat)
    status = "pass" if stat <= tol else "fail"
    if not reliable:
        status = "unreliable"
    return CheckResult(name, status, stat, tol, samples, 0.0, detail)


def _flag(name, ok, stat, tol, **detail):
    """Result whose status is decided by ``ok`` rather than ``stat <= tol``."""
    return CheckResult(name, "pass" if ok else "fail", float(stat), float(tol), 0, 0.0, detail)


def _rng(seed, tag):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag,)))


# -------------------------------------------------------------- Green functions

def check_green_oracle(seed=0, samples=0, n_models=200):
    """``green_corner`` against a dense resolvent solve, relative error."""
    rng = _rng(seed, 1)
    zs = [x + 1j * y for y in (0.1, 1.0) for x in (-1.0, 0.0, 1.0)]
    worst = 0.0
    for _ in range(n_models):
        L = int(rng.integers(1, 4))
        N = int(rng.integers(1, 9))
        m = mdl.random_model(L, N, rng)
        Zhat, Z = mdl.random_hermitian(L, rng), mdl.random_hermitian(L, rng)
        bc = mdl.BoundaryPair(Zhat, Z)
        for z in zs:
            G = green.green_corner(m, Zhat, Z, z).value
            R = mdl.resolvent_corner_oracle(m, bc, z)
            worst = max(worst, np.linalg.norm(G - R) / np.linalg.norm(R))
    return [_result("green-oracle", worst, 1e-9, models=n_models)]


# ------------------------------------------------------ boundary-condition averages

def check_boundav(seed=0, samples=20000):
    """Closed-form Haar average at ``z = 0.4 + 0.6i`` (L=2, N=5) against Monte Carlo."""
    rng = _rng(seed, 2)
    m = mdl.random_model(2, 5, rng)
    z = 0.4 + 0.6j
    G1, G2 = averaging.averaged_green_forms(m, z)
    forms = np.linalg.norm(G1 - G2) / np.linalg.norm(G1)
    est = averaging.averaged_green_mc(m, z, samples, seed)
    return [_result("boundav-mc", est.max_z(G1), Z_TOL, samples, est.reliable),
            _result("boundav-forms", forms, 1e-9)]


def check_boundary_values(seed=0, samples=0):
    """Density against the extrapolated ``Im`` of the averaged Green matrix."""
    rng = _rng(seed, 3)
    worst = 0.0
    for L, N in ((1, 4), (2, 3), (3, 2)):
        m = mdl.random_model(L, N, rng)
        for E in np.linspace(-2.5, 2.5, 11):
            d = averaging.averaged_density(m, E).density
            x = averaging.boundary_value_extrapolation(m, E)
            worst = max(worst, np.abs(d - x).max())
    return [_result("boundary-values", worst, 1e-5)]


def check_exact_case(seed=0, samples=20000):
    """The solvable case ``L = N = 1``, ``V = 0``."""
    m = mdl.free_model(1, 1)
    zs = [0.3 + 0.5j, -1.0 + 0.1j, 2.0 + 1.0j]
    g_err = max(abs(averaging.averaged_green(m, z)[0, 0] + 1 / (z + 1j)) for z in zs)
    Es = np.linspace(-3, 3, 13)
    d_err = max(abs(averaging.averaged_density(m, E).density[0, 0] - 1 / (1 + E * E)) for E in Es)
    im = averaging.averaged_interval_measure(m, -1.0, 1.0)
    i_err = abs(im.mass[0, 0] - 0.5)
    out = [_result("exact-green", g_err, 1e-12), _result("exact-density", d_err, 1e-12),
           _result("exact-interval", i_err, 1e-8)]
    z = zs[0]
    mc = averaging.averaged_green_mc(m, z, samples, seed)
    out.append(_result("exact-green-mc", mc.max_z(np.array([[-1 / (z + 1j)]])), Z_TOL, samples,
                       mc.reliable))
    # density oracle: eigensolve masses of a short window around E = 0.5
    lo, hi = 0.4, 0.6
    target = averaging.averaged_interval_measure(m, lo, hi).mass
    dm = averaging.interval_measure_oracle(m, lo, hi, n_samples=samples, seed=seed + 1)
    out.append(_result("exact-density-mc", dm.max_z(target), Z_TOL, samples, dm.reliable))
    om = averaging.interval_measure_oracle(m, -1.0, 1.0, n_samples=samples, seed=seed + 2)
    out.append(_result("exact-interval-mc", om.max_z(np.array([[0.5]])), Z_TOL, samples,
                       om.reliable))
    return out


# ------------------------------------------------------------ unitary integrals

def check_radav(seed=0, samples=20000):
    """The positive ``U(L, L)`` integral equals ``c_radav = 1/2`` times the identity."""
    worst = 0.0
    for eta in (0.0, 0.5, 2.0):
        t = haar.positive_lorentz_from_normal_form([[np.exp(0.3j)]], [[np.exp(-1.1j)]], [eta])
        val = haar.radav_integral(t, [[np.exp(0.7j)]], method="quadrature", n_nodes=2048)
        worst = max(worst, abs(val[0, 0] - haar.C_RADAV))
    rng = _rng(seed, 5)
    W = haar.sample_haar(2, rng)
    Wp = haar.sample_haar(2, rng)
    t = haar.positive_lorentz_from_normal_form(W, Wp, [0.4, 1.3])
    V = haar.sample_haar(2, rng)
    est = haar.radav_integral(t, V, method="mc", n_samples=samples, seed=seed)
    return [_result("radav-quadrature", worst, 1e-10),
            _result("radav-mc", est.max_z(haar.C_RADAV * np.eye(2)), Z_TOL, samples,
                    est.reliable)]


def check_double_average(seed=0, samples=20000):
    """The double average is the identity for every model and energy."""
    rng = _rng(seed, 6)
    worst = 0.0
    reliable = True
    k = 0
    for L, N in ((1, 1), (1, 3), (2, 3)):
        m = mdl.random_model(L, N, rng)
        for E in (0.0, 0.2):
            est = averaging.double_average_density(m, E, samples, seed + k)
            k += 1
            worst = max(worst, est.max_z(np.eye(L)))
            reliable &= est.reliable
    return [_result("double-average", worst, Z_TOL, samples, reliable)]


def check_hua(seed=0, samples=20000):
    Z = np.array([[0.3]])
    one, kern = haar.hua_cauchy_check(lambda U: np.ones(U.shape[0]), Z, samples, seed,
                                      vectorized=True)
    lhs, rep = haar.hua_cauchy_check(lambda U: U, Z, samples, seed + 1, vectorized=True)
    return [_result("hua-normalization", kern.max_z(one), Z_TOL, samples, kern.reliable),
            _result("hua-reproduction", rep.max_z(lhs), Z_TOL, samples, rep.reliable)]


def _reflection_functions():
    def lorentz(X):
        return 1.0 / (1.0 + X[:, 0, 0].real ** 2)

    def gauss(X):
        return np.exp(-(X[:, 0, 0].real - 0.5) ** 2)

    def resolvent(X):
        return np.linalg.inv(X + 1j * np.eye(X.shape[-1]))

    return (("lorentz", 1, lorentz), ("shifted-gauss", 1, gauss), ("resolvent", 2, resolvent))


def check_reflection(seed=0, samples=20000):
    """``int F(C^*.U) dU = int F(-C^*.U) dU`` for three bounded test functions."""
    worst = 0.0
    reliable = True
    for k, (_, L, F) in enumerate(_reflection_functions()):
        plus, minus = haar.reflection_check(F, L, samples, seed + 2 * k, vectorized=True)
        worst = max(worst, haar.combined_z(plus, minus))
        reliable &= plus.reliable and minus.reliable
    return [_result("reflection", worst, Z_TOL, samples, reliable)]


# ---------------------------------------------------------------- oscillation

def check_oscillation(seed=0, samples=0, n_models=50):
    """Winding counts against eigensolve counts, with positivity of the phase velocity."""
    rng = _rng(seed, 8)
    mismatches = 0
    min_velocity = np.inf
    for _ in range(n_models):
        L = int(rng.integers(1, 4))
        N = int(rng.integers(1, 9))
        m = mdl.random_model(L, N, rng)
        Zhat = mdl.random_hermitian(L, rng)
        ev = np.linalg.eigvalsh(mdl.assemble_dense(m, mdl.BoundaryPair(Zhat, np.zeros((L, L)))))
        E0, E1 = sorted(rng.uniform(-4, 4, 2))
        count, path = oscillation.count_eigenvalues_by_winding(m, Zhat, E0, E1, return_path=True)
        mismatches += count != int(np.sum((ev > E0) & (ev < E1)))
        min_velocity = min(min_velocity, path.velocity_min_eigenvalues().min())
    res = [_result("oscillation-counts", mismatches, 0, models=n_models)]
    res.append(_flag("phase-velocity", min_velocity > 0, min_velocity, 0.0))
    return res


# ------------------------------------------------------------------ half-line

def check_carmona(seed=0, samples=0):
    """Free half-line masses at ``N`` of order 200 against a Dirichlet eigensolve at 2000 sites."""
    semi = mdl.SemiInfiniteModel.free(1)
    oracle = mdl.spectral_measure_oracle(mdl.free_model(1, 2000))
    out = []
    for name, (a, b) in (("carmona-band", (-2.0, 2.0)), ("carmona-half", (0.0, 2.0))):
        r = averaging.carmona_limit_measure(semi, a, b, tol=2e-2, N_start=128)
        ref = oracle.mass(a, b)[0, 0].real
        out.append(_result(name, abs(r.mass[0, 0].real - ref), 2e-2, N=r.N, mass=float(
            r.mass[0, 0].real), oracle=float(ref)))
    outside = max(averaging.carmona_limit_measure(semi, a, b, tol=2e-2, N_start=128).mass[0, 0].real
                  for a, b in ((2.0, 4.0), (-4.0, -2.0)))
    out.append(_result("carmona-outside", outside, 1e-3))
    return out


# ------------------------------------------------------------------- coupling

def _random_psd(L, rng, rank=None):
    A = rng.standard_normal((L, rank or L)) + 1j * rng.standard_normal((L, rank or L))
    return A @ A.conj().T / L


def check_coupling(seed=0, samples=0, n_families=20):
    fam = mdl.CouplingFamily(mdl.free_model(1, 1), [[[2.5]]], (-1.0, 1.0))
    hand = abs(coupling.p_matrix(fam, 0.3, 0.7).P[0, 0] - 2.5)
    rng = _rng(seed, 10)
    min_eig = np.inf
    for _ in range(n_families):
        L = int(rng.integers(1, 4))
        N = int(rng.integers(2, 7))
        m = mdl.random_model(L, N, rng)
        W = np.zeros((N, L, L), dtype=complex)
        n0 = int(rng.integers(0, N - 1))
        W[n0] = _random_psd(L, rng)
        W[n0 + 1] = _random_psd(L, rng)
        f = mdl.CouplingFamily(m, W, (0.0, 1.0))
        E, mu = rng.uniform(-2, 2), rng.uniform(-2, 2)
        min_eig = min(min_eig, np.linalg.eigvalsh(coupling.p_matrix(f, E, mu).P)[0])
    two = mdl.CouplingFamily(mdl.free_model(1, 2), [[[1.0]], [[1.0]]], (-3.0, 3.0))
    flips = []
    for I in ((-3.0, 3.0), (0.0, 3.0)):
        rep = coupling.criteria_report(two, 0.0, I)
        expected = coupling.oracle_crossings(two, 0.0, I) >= 2 * two.L
        flips.append(rep.passes_ii == expected)
    rep = coupling.criteria_report(two, 0.0)
    dens = coupling.coupling_averaged_density(two, (-0.3, 0.3), 400, 12)
    b = dens.bounds
    ok = rep.passes_i and rep.passes_ii and b.minimum > 0 and b.ratio <= 3 * rep.C2 / rep.C1
    return [_result("p-hand", hand, 1e-12),
            _flag("p-positive", min_eig > 0, min_eig, 0.0),
            _result("criteria-flip", sum(not x for x in flips), 0),
            _flag("coupling-density", ok, b.ratio, 3 * rep.C2 / rep.C1,
                  minimum=b.minimum, maximum=b.maximum)]


SUITES = {
    "green": check_green_oracle,
    "boundav": check_boundav,
    "boundary-values": check_boundary_values,
    "exact": check_exact_case,
    "radav": check_radav,
    "double-average": check_double_average,
    "hua": check_hua,
    "reflection": check_reflection,
    "oscillation": check_oscillation,
    "carmona": check_carmona,
    "coupling": check_coupling,
}


def run_suites(names=("all",), seed=42, samples=20000) -> VerifyReport:
    """Run the named suites (``"all"`` for every suite) in a fixed order."""
    if "all" in names:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(unknown[0])
    checks = []
    for name in names:
        t0 = time.perf_counter()
        try:
            results = SUITES[name](seed=seed, samples=samples)
        except TooManySingular as exc:
            results = [CheckResult(name, "unreliable", float("nan"), float("nan"), samples,
                                   detail={"error": str(exc)})]
        except BJSpecError as exc:
            results = [CheckResult(name, "fail", float("nan"), float("nan"), samples,
                                   detail={"error": f"{type(exc).__name__}: {exc}"})]
        elapsed = time.perf_counter() - t0
        for r in results:
            r.runtime = elapsed
        checks.extend(results)
    return VerifyReport(checks)
