"""Canonical equilibrium on a finite support: Gibbs solver, stationarity diagnostics, eigenvalue flow."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InfeasibleEnergyError
from .functionals import MultiplierSet
from .operators import hermitize, safe_log, support_mask, xlogx


@dataclass(frozen=True)
class SupportSpectrum:
    energies: tuple
    multiplicities: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        if e.size == 0 or not np.all(np.isfinite(e)):
            raise ValueError("spectrum must be nonempty and finite")
        m = np.ones(e.size, dtype=int) if not self.multiplicities else np.asarray(self.multiplicities, dtype=int)
        if m.shape != e.shape or np.any(m < 1):
            raise ValueError("multiplicities must be positive and match the energies")
        order = np.argsort(e, kind="stable")
        object.__setattr__(self, "energies", tuple(float(x) for x in e[order]))
        object.__setattr__(self, "multiplicities", tuple(int(x) for x in m[order]))

    @classmethod
    def from_levels(cls, levels, decimals: int = 12) -> "SupportSpectrum":
        """Group (possibly repeated) eigenvalues into distinct levels with multiplicities."""
        vals, counts = np.unique(np.round(np.asarray(levels, dtype=float), decimals), return_counts=True)
        return cls(tuple(vals), tuple(counts))

    @property
    def e(self) -> np.ndarray:
        return np.array(self.energies)

    @property
    def g(self) -> np.ndarray:
        return np.array(self.multiplicities, dtype=float)

    @property
    def spectral_range(self) -> float:
        return self.energies[-1] - self.energies[0]

    @property
    def mean_energy(self) -> float:
        return float(np.sum(self.g * self.e) / np.sum(self.g))


@dataclass(frozen=True)
class GibbsSolution:
    """``probabilities`` are per listed level (multiplicity included) and sum to one.

    ``degenerate`` marks the beta = +/-inf endpoint solutions.
    """

    beta: float
    log_z: float
    probabilities: tuple
    degenerate: bool = False

    def to_json(self) -> dict:
        return {"beta": _json_float(self.beta), "logZ": _json_float(self.log_z),
                "probabilities": list(self.probabilities), "degenerate": self.degenerate}


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _log_weights(spec: SupportSpectrum, beta: float) -> np.ndarray:
    return np.log(spec.g) - beta * spec.e


def mean_energy(spec: SupportSpectrum, beta: float) -> float:
    lw = _log_weights(spec, beta)
    w = np.exp(lw - logsumexp(lw))
    return float(np.dot(w, spec.e))


def gibbs_solution(spec: SupportSpectrum, beta: float) -> GibbsSolution:
    """Gibbs distribution over the levels of ``spec`` at a given finite beta."""
    lw = _log_weights(spec, beta)
    lz = float(logsumexp(lw))
    p = np.exp(lw - lz)
    return GibbsSolution(float(beta), lz, tuple(float(x) for x in p / p.sum()))


def solve_beta(spectrum: SupportSpectrum, energy: float, tol: float = 1e-14) -> GibbsSolution:
    """Inverse temperature whose Gibbs mean energy equals ``energy``.

    Bisection on the strictly decreasing map beta -> <E>_beta, starting from
    [-1, 1]/range and doubling outward until the target is bracketed.
    """
    spec = spectrum
    e_min, e_max = spec.energies[0], spec.energies[-1]
    span = spec.spectral_range
    slack = 1e-14 * max(1.0, abs(e_min), abs(e_max))
    if energy < e_min - slack or energy > e_max + slack:
        raise InfeasibleEnergyError(f"E = {energy} lies outside [{e_min}, {e_max}]")
    if span == 0.0:
        return GibbsSolution(0.0, float(np.log(spec.g.sum())), tuple(spec.g / spec.g.sum()))
    for edge, beta in ((e_min, math.inf), (e_max, -math.inf)):
        if abs(energy - edge) <= slack:
            p = np.zeros(len(spec.energies))
            k = 0 if beta > 0 else len(p) - 1
            p[k] = 1.0
            # log Z has no finite value at |beta| = inf
            return GibbsSolution(beta, math.nan, tuple(p), degenerate=True)

    lo, hi = -1.0 / span, 1.0 / span
    while mean_energy(spec, lo) < energy:
        lo *= 2.0
    while mean_energy(spec, hi) > energy:
        hi *= 2.0
    target = tol * span
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        em = mean_energy(spec, mid)
        if em > energy:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(mid)) and abs(em - energy) <= target:
            break
    return gibbs_solution(spec, 0.5 * (lo + hi))


def negative_temperature_predicate(spectrum: SupportSpectrum, energy: float) -> bool:
    """True iff E >= multiplicity-weighted mean level energy (beta <= 0)."""
    return energy >= spectrum.mean_energy


def gibbs_density(h, beta: float, support_projector=None) -> np.ndarray:
    """exp(-beta H)/Z, restricted to ``support_projector`` (which must commute with H) if given."""
    h = hermitize(h)
    d = h.shape[0]
    if support_projector is not None:
        p = hermitize(support_projector, tol=1e-10)
        w, v = np.linalg.eigh(p)
        basis = v[:, w > 0.5]
        hs = hermitize(basis.conj().T @ h @ basis, tol=1e-10)
        return basis @ gibbs_density(hs, beta) @ basis.conj().T
    w, v = np.linalg.eigh(h)
    if math.isinf(beta):
        target = w[0] if beta > 0 else w[-1]
        tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
        p = (np.abs(w - target) <= tol).astype(float)
    else:
        lw = -beta * w
        p = np.exp(lw - lw.max())
    p /= p.sum()
    out = (v * p) @ v.conj().T
    return 0.5 * (out + out.conj().T) if d else out


@dataclass(frozen=True)
class StationarityReport:
    commutator_norm: float
    rhs_norm: float
    stationary: bool
    zeta_eq: float | None = None
    entropy_eq: float | None = None
    max_log_residual: float | None = None

    @property
    def beta(self) -> float | None:
        return None if self.zeta_eq is None else 2.0 * self.zeta_eq


def stationarity_check(rho, h, tol: float = 1e-8, model=None) -> StationarityReport:
    """Commutator and full-RHS norms, plus a fit of ln rho_nu = -2 zeta (E_nu - E) - S on the support."""
    from .dynamics import ModelSpec, rhs_rho

    rho = hermitize(rho, tol=1e-10)
    rho = rho / np.trace(rho).real
    h = hermitize(h)
    model = model or ModelSpec(h)
    comm = float(np.linalg.norm(rho @ h - h @ rho))
    rhs = float(np.linalg.norm(rhs_rho(rho, model)))
    if comm > tol or rhs > tol:
        return StationarityReport(comm, rhs, False)
    # rho and H commute: diagonalize them jointly through H's eigenbasis
    ew, ev = np.linalg.eigh(h)
    p = np.clip(np.einsum("ij,jk,ki->i", ev.conj().T, rho, ev).real, 0.0, None)
    mask = support_mask(p)
    e_mean = float(np.dot(p, ew))
    x = ew[mask] - e_mean
    y = safe_log(p)[mask]
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.ptp(ew))):
        z = 0.0
        s_fit = float(-np.mean(y))
    else:
        a = np.column_stack([-2.0 * x, -np.ones_like(x)])
        z, s_fit = np.linalg.lstsq(a, y, rcond=None)[0]
    resid = float(np.max(np.abs(y - (-2.0 * z * x - s_fit)))) if y.size else 0.0
    return StationarityReport(comm, rhs, True, float(z), float(s_fit), resid)


@dataclass(frozen=True)
class EigenvalueFlow:
    rates: np.ndarray  # d rho_nu / dt
    alphas: np.ndarray


def eigenvalue_flow(rho_bar, h, multipliers: MultiplierSet) -> EigenvalueFlow:
    """rho_nu' = -sigma [rho_nu ln rho_nu + alpha_nu rho_nu], alpha_nu = 2 zeta <P_nu (H-E)> + S/kB.

    Eigenvalues are ordered as returned by ``numpy.linalg.eigh`` (ascending).
    """
    rho_bar = hermitize(rho_bar, tol=1e-10)
    h = hermitize(h)
    w, v = np.linalg.eigh(rho_bar)
    p = np.clip(w, 0.0, None)
    tr = p.sum()
    e = float(np.trace(h @ rho_bar).real) / tr
    s = float(-np.sum(xlogx(p))) / tr
    h_nn = np.einsum("ij,jk,ki->i", v.conj().T, h, v).real
    alphas = 2.0 * multipliers.zeta * (h_nn - e) + s
    rates = -multipliers.sigma * (xlogx(p) + alphas * p)
    return EigenvalueFlow(rates, alphas)


def gibbs_for_state(rho, h) -> tuple[np.ndarray, GibbsSolution]:
    """Gibbs state on the support of rho with rho's mean energy.

    The support is taken in H's eigenbasis, which is exact for states whose
    support is H-invariant (the case relevant to relaxation targets).
    """
    rho = hermitize(rho, tol=1e-10)
    rho = rho / np.trace(rho).real
    h = hermitize(h)
    ew, ev = np.linalg.eigh(h)
    occ = np.einsum("ij,jk,ki->i", ev.conj().T, rho, ev).real
    mask = occ > 1e-12
    e = float(np.trace(h @ rho).real)
    sol = solve_beta(SupportSpectrum.from_levels(ew[mask]), e)
    basis = ev[:, mask]
    proj = basis @ basis.conj().T
    return gibbs_density(h, sol.beta, proj if not np.all(mask) else None), sol
