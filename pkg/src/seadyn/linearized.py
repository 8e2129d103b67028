"""Near-equilibrium relaxation: closed-form rates and the element-wise linear propagator.

Deviations are expressed in the eigenbasis of H (the interaction picture), where
the linearized dynamics is diagonal: element (mu, nu) relaxes at

    lambda_mu_nu = sigma_eq * x coth(x),   x = beta (E_mu - E_nu) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import PreconditionError
from .operators import hermitize

SERIES_SWITCH = 1e-3


def xcothx(x):
    """x coth x, even and >= 1; a Taylor series covers |x| < 1e-3."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < SERIES_SWITCH
    xs = x[small] ** 2
    out[small] = 1.0 + xs / 3.0 - xs ** 2 / 45.0 + 2.0 * xs ** 3 / 945.0
    xl = x[~small]
    out[~small] = xl / np.tanh(xl)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class LinearizedModel:
    beta: float
    sigma_eq: float
    energies: np.ndarray
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.sigma_eq > 0:
            raise ValueError(f"sigma_eq must be > 0, got {self.sigma_eq}")
        object.__setattr__(self, "energies", np.asarray(self.energies, dtype=float))

    @classmethod
    def from_hamiltonian(cls, h, beta: float, sigma_eq: float = 1.0) -> "LinearizedModel":
        w, v = np.linalg.eigh(hermitize(h))
        return cls(beta, sigma_eq, w, v)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def gibbs_populations(self) -> np.ndarray:
        lw = -self.beta * self.energies
        p = np.exp(lw - lw.max())
        return p / p.sum()

    def to_eigenbasis(self, op) -> np.ndarray:
        v = self._basis()
        return v.conj().T @ np.asarray(op, dtype=complex) @ v

    def from_eigenbasis(self, op) -> np.ndarray:
        v = self._basis()
        return v @ np.asarray(op, dtype=complex) @ v.conj().T

    def _basis(self) -> np.ndarray:
        if self.eigenvectors is None:
            return np.eye(self.dim)
        return self.eigenvectors


def rate_matrix(model: LinearizedModel) -> np.ndarray:
    """lambda_mu_nu for every pair."""
    gap = model.energies[:, None] - model.energies[None, :]
    return model.sigma_eq * xcothx(0.5 * model.beta * gap)


def decay_rate(mu: int, nu: int, model: LinearizedModel) -> tuple[float, float]:
    """(lambda_mu_nu, gamma_mu_nu): total rate and excess decoherence rate lambda - sigma_eq."""
    gap = model.energies[mu] - model.energies[nu]
    lam = model.sigma_eq * xcothx(0.5 * model.beta * gap)
    return float(lam), float(max(lam - model.sigma_eq, 0.0))


def _check_deviation(delta: np.ndarray, model: LinearizedModel, tol: float = 1e-10) -> None:
    tr = np.trace(delta)
    if abs(tr) > tol:
        raise PreconditionError(f"Tr(delta0) = {tr:.3e} must vanish")
    tr_h = np.sum(model.energies * np.diag(delta))
    if abs(tr_h) > tol * max(1.0, float(np.max(np.abs(model.energies)))):
        raise PreconditionError(f"Tr(H delta0) = {tr_h:.3e} must vanish")


def linear_propagate(delta0, t: float, model: LinearizedModel, hbar: float | None = None) -> np.ndarray:
    """Deviation Delta(t) in the H eigenbasis, element-wise e^(-lambda t) decay.

    With ``hbar`` given the Schroedinger-picture phases e^(-i (E_mu - E_nu) t / hbar)
    are applied as well.
    """
    delta0 = hermitize(delta0, tol=1e-10)
    _check_deviation(delta0, model)
    out = delta0 * np.exp(-rate_matrix(model) * t)
    if hbar is not None:
        gap = model.energies[:, None] - model.energies[None, :]
        out = out * np.exp(-1j * gap * t / hbar)
    return out


def commuting_observable_decay(o, delta0, t: float, model: LinearizedModel) -> float:
    """<O>_Delta(t) = e^(-sigma_eq t) <O>_Delta(0) for [H, O] = 0 (operators in the H eigenbasis)."""
    o = hermitize(o)
    h = np.diag(model.energies)
    if np.linalg.norm(h @ o - o @ h) > 1e-10:
        raise PreconditionError("O does not commute with H")
    delta0 = hermitize(delta0, tol=1e-10)
    return float(np.exp(-model.sigma_eq * t) * np.trace(o @ delta0).real)


def two_level_rates(model: LinearizedModel) -> tuple[float, float]:
    """(k12, k21) = sigma_eq * (n2_eq, n1_eq); k12/k21 = exp(-beta (E2 - E1))."""
    if model.dim != 2:
        raise ValueError("two_level_rates needs a two-level model")
    e1, e2 = model.energies
    n2 = float(expit(-model.beta * (e2 - e1)))
    n1 = float(expit(model.beta * (e2 - e1)))
    return model.sigma_eq * n2, model.sigma_eq * n1


def two_level_populations(n1_0: float, t, model: LinearizedModel):
    """n1(t) from dn1/dt = -k12 n1 + k21 n2 with n1 + n2 = 1."""
    k12, k21 = two_level_rates(model)
    n1_eq = k21 / (k12 + k21)
    return n1_eq + (n1_0 - n1_eq) * np.exp(-(k12 + k21) * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class OscillatorDamping:
    gamma: float
    friction: float  # 2 gamma
    stiffness: float  # omega^2 + gamma^2


def oscillator_damping(omega: float, model: LinearizedModel, hbar: float = 1.0) -> OscillatorDamping:
    """Damping rate of <q>, <p> and the coefficients of q'' + 2 gamma q' + (omega^2 + gamma^2) q = 0."""
    if not omega > 0:
        raise ValueError("omega must be > 0")
    g = model.sigma_eq * xcothx(0.5 * model.beta * hbar * omega)
    return OscillatorDamping(float(g), 2.0 * g, omega ** 2 + g ** 2)


def oscillator_operators(n: int, omega: float = 1.0, hbar: float = 1.0, mass: float = 1.0):
    """Truncated H = hbar omega (a^dagger a + 1/2), a, q, p on n levels."""
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)
    h = hbar * omega * np.diag(np.arange(n) + 0.5).astype(complex)
    q = np.sqrt(hbar / (2.0 * mass * omega)) * (a + a.conj().T)
    p = 1j * np.sqrt(hbar * mass * omega / 2.0) * (a.conj().T - a)
    return h, a, q, p
