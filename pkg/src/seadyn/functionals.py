"""Scalar functionals of (rho, H) and the Lagrange multipliers of the steepest-ascent problem.

Every right-hand-side evaluation reduces to one small symmetric linear system.
With centered operators A_0 = H - E, A_j = C_j - <C_j> and the entropy kernel
K (ln rho for von Neumann, -dS/drho in general) the unknowns c = (zeta, eta_1..)
satisfy

    sum_b Tr({A_a, A_b} rho) c_b = -Tr(A_a K rho) - (i / hbar sigma) Tr([A_a, H] rho)

The matrix is twice the symmetrized covariance matrix of the A_a under rho.
All traces are evaluated through a square root B of rho (rho = B B^dagger), so
Tr(X Y rho) = (X B | Y B); the computation is the same whether the caller
holds gamma or rho.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateConstraintsError,
    DomainError,
    InternalConsistencyError,
    NonHermitianError,
)
from .operators import (
    _density_eig,
    as_matrix,
    hermitize,
    safe_log,
    support_mask,
    xlogx,
)

VARIANCE_FLOOR = 1e-12
COND_LIMIT = 1e12
ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True)
class MultiplierSet:
    zeta: float
    xi: float
    eta: tuple[float, ...] = ()
    sigma: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def im_zeta_times_sigma(self) -> float:
        return 1.0 / self.hbar


@dataclass(frozen=True)
class SigmaPolicy:
    """Scale-setting functional sigma(rho, H - E).

    ``constant`` returns a fixed value; ``callback`` calls
    ``fn(rho / Tr rho, H - E)`` so scaling and zero-point invariance hold by
    construction.
    """

    kind: str = "constant"
    value: float = 1.0
    fn: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value >= 0:
                raise ValueError(f"sigma must be >= 0, got {self.value}")
        elif self.kind == "callback":
            if self.fn is None:
                raise ValueError("callback sigma policy needs fn")
        else:
            raise ValueError(f"unknown sigma policy {self.kind!r}")

    @classmethod
    def constant(cls, value: float = 1.0) -> "SigmaPolicy":
        return cls("constant", float(value))

    @classmethod
    def callback(cls, fn: Callable) -> "SigmaPolicy":
        return cls("callback", fn=fn)

    def evaluate(self, rho, h) -> float:
        if self.kind == "constant":
            return self.value
        rho = as_matrix(rho)
        h = as_matrix(h)
        rho = rho / np.trace(rho).real
        e = float(np.einsum("ij,ji->", h, rho).real)
        s = float(self.fn(rho, h - e * np.eye(h.shape[0])))
        if not np.isfinite(s) or s < 0:
            raise ValueError(f"sigma policy returned {s}; must be finite and >= 0")
        return s


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    operators: tuple = ()
    conserved_averages: tuple = ()

    def __post_init__(self):
        ops = tuple(hermitize(c) for c in self.operators)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "conserved_averages", tuple(float(x) for x in self.conserved_averages))

    def __len__(self):
        return len(self.operators)

    @classmethod
    def from_state(cls, operators: Sequence, rho) -> "ConstraintSet":
        rho = as_matrix(rho)
        ops = [hermitize(c) for c in operators]
        avgs = [float(np.einsum("ij,ji->", c, rho).real / np.trace(rho).real) for c in ops]
        return cls(tuple(ops), tuple(avgs))

    def commutator_norms(self, h) -> tuple[float, float]:
        """max ||[C_j, H]||_F and max ||[C_j, C_l]||_F."""
        h = as_matrix(h)
        ch = max((np.linalg.norm(c @ h - h @ c) for c in self.operators), default=0.0)
        cc = 0.0
        for i, a in enumerate(self.operators):
            for b in self.operators[i + 1:]:
                cc = max(cc, float(np.linalg.norm(a @ b - b @ a)))
        return float(ch), cc

    def is_invariant(self, h, tol: float = 1e-10) -> bool:
        ch, cc = self.commutator_norms(h)
        return ch <= tol and cc <= tol


class EntropyModel:
    """Entropy functional S/kB = Tr S_hat(rho) and its kernel K = -dS_hat/drho.

    For von Neumann the kernel is taken as ln rho (the constant -1 is absorbed
    in xi), matching the multiplier conventions used throughout.
    """

    def __init__(self, kind: str = "von_neumann", q: float | None = None,
                 entropy_fn: Callable | None = None, derivative_fn: Callable | None = None):
        if kind == "tsallis":
            if q is None or q == 1.0:
                raise DomainError("tsallis entropy needs q != 1")
            q = float(q)
        elif kind == "custom":
            if entropy_fn is None or derivative_fn is None:
                raise ValueError("custom entropy needs entropy_fn and derivative_fn")
        elif kind != "von_neumann":
            raise ValueError(f"unknown entropy model {kind!r}")
        self.kind = kind
        self.q = q
        self.entropy_fn = entropy_fn
        self.derivative_fn = derivative_fn

    @classmethod
    def von_neumann(cls) -> "EntropyModel":
        return cls("von_neumann")

    @classmethod
    def tsallis(cls, q: float) -> "EntropyModel":
        return cls("tsallis", q=q)

    @classmethod
    def custom(cls, entropy_fn: Callable, derivative_fn: Callable) -> "EntropyModel":
        """``entropy_fn(rho) -> S/kB``, ``derivative_fn(rho) -> dS_hat/drho`` (Hermitian)."""
        return cls("custom", entropy_fn=entropy_fn, derivative_fn=derivative_fn)

    @property
    def spectral(self) -> bool:
        return self.kind != "custom"

    def __repr__(self):
        return f"EntropyModel({self.kind!r}" + (f", q={self.q})" if self.kind == "tsallis" else ")")

    def entropy_from_eigenvalues(self, p: np.ndarray) -> float:
        if self.kind == "von_neumann":
            return float(-np.sum(xlogx(p)))
        if self.kind == "tsallis":
            return float(np.sum(p - _power(p, self.q)) / (self.q - 1.0))
        raise TypeError("custom entropy is not spectral")

    def kernel_times_sqrt(self, p: np.ndarray) -> np.ndarray:
        """Eigenvalues of K rho^(1/2), i.e. k(p) * sqrt(p), zero off the support."""
        s = np.sqrt(p)
        out = np.zeros_like(p)
        m = support_mask(p)
        if self.kind == "von_neumann":
            out[m] = np.log(p[m]) * s[m]
        elif self.kind == "tsallis":
            q = self.q
            out[m] = (q * p[m] ** (q - 0.5) - s[m]) / (q - 1.0)
        else:
            raise TypeError("custom entropy is not spectral")
        return out

    def entropy(self, rho) -> float:
        if self.kind == "custom":
            return float(self.entropy_fn(as_matrix(rho)))
        p, _ = _density_eig(rho)
        return self.entropy_from_eigenvalues(p)


def _power(p: np.ndarray, q: float) -> np.ndarray:
    out = np.zeros_like(p)
    m = support_mask(p)
    if q <= 0 and not np.all(m):
        raise DomainError(f"rho**{q} is undefined on a singular state")
    out[m] = p[m] ** q
    return out


class _Root:
    """Canonical square root B = V sqrt(p) of rho plus its eigen-data."""

    __slots__ = ("p", "v", "b")

    def __init__(self, p: np.ndarray, v: np.ndarray):
        self.p = p
        self.v = v
        self.b = v * np.sqrt(p)

    @classmethod
    def from_rho(cls, rho) -> "_Root":
        p, v = _density_eig(rho)
        return cls(p, v)

    @classmethod
    def from_gamma(cls, gamma: np.ndarray) -> "_Root":
        u, s, _ = np.linalg.svd(gamma, full_matrices=False)
        return cls(s * s, u)

    @property
    def trace(self) -> float:
        return float(np.sum(self.p))

    @property
    def rho(self) -> np.ndarray:
        return (self.v * self.p) @ self.v.conj().T

    def expect(self, x: np.ndarray) -> float:
        """Tr(X rho) / Tr(rho) for Hermitian X."""
        return float(np.vdot(self.b, x @ self.b).real) / self.trace


def _spectral_range(a: np.ndarray) -> float:
    w = np.linalg.eigvalsh(a)
    return float(w[-1] - w[0]) if w.size else 0.0


def _kernel_b(root: _Root, model: EntropyModel) -> np.ndarray:
    """K B, the entropy kernel applied to the square root."""
    if model.spectral:
        return root.v * model.kernel_times_sqrt(root.p)
    k = -hermitize(model.derivative_fn(root.rho), tol=1e-10)
    return k @ root.b


def _dependent_operator(h: np.ndarray, constraints: Sequence[np.ndarray]) -> int | None:
    """Index of the first C_j linearly dependent on {I, H, C_1..C_{j-1}}, else None."""
    d = h.shape[0]
    basis: list[np.ndarray] = []

    def add(op):
        r = op.astype(complex).copy()
        for q in basis:
            r -= np.vdot(q, r) * q
        n = np.linalg.norm(r)
        if n <= 1e-6 * max(np.linalg.norm(op), 1e-300):
            return False
        basis.append(r / n)
        return True

    add(np.eye(d))
    add(h)
    for j, c in enumerate(constraints):
        if not add(c):
            return j
    return None


def _solve_coefficients(root: _Root, ops: list[np.ndarray], ranges: list[float], kb: np.ndarray,
                        sigma: float, hbar: float, h: np.ndarray, constraints_raw: Sequence[np.ndarray]):
    """Solve the covariance system for (zeta, eta...).

    ``ops`` are the centered operators, energy first.
    """
    n = len(ops)
    tr = root.trace
    vecs = [a @ root.b for a in ops]
    m = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            m[i, j] = m[j, i] = 2.0 * np.vdot(vecs[i], vecs[j]).real / tr
    rhs = np.array([-np.vdot(vecs[i], kb).real / tr for i in range(n)])
    if n > 1:
        for j in range(1, n):
            c = ops[j]
            comm = np.vdot(root.b, (c @ h - h @ c) @ root.b) / tr  # Tr([C, H] rho), imaginary
            if abs(comm) > 0:
                if sigma <= 0:
                    raise ValueError("sigma must be > 0 when a constraint does not commute with H")
                rhs[j] -= (1j * comm).real / (hbar * sigma)

    coeffs = np.zeros(n)
    active = [i for i in range(n) if 0.5 * m[i, i] >= VARIANCE_FLOOR * ranges[i] ** 2 and m[i, i] > 0]
    if not active:
        return coeffs
    sub = m[np.ix_(active, active)]
    if len(active) == 1:
        coeffs[active[0]] = rhs[active[0]] / sub[0, 0]
        return coeffs
    cond = np.linalg.cond(sub)
    if cond > COND_LIMIT:
        bad = _dependent_operator(h, constraints_raw)
        if bad is not None:
            raise DegenerateConstraintsError(
                f"constraint C_{bad + 1} is linearly dependent on the identity, H, "
                f"or earlier constraints (covariance condition number {cond:.2e})",
                index=bad,
            )
        sol = np.linalg.lstsq(sub, rhs[active], rcond=1.0 / COND_LIMIT)[0]
    else:
        sol = np.linalg.solve(sub, rhs[active])
    coeffs[active] = sol
    return coeffs


def _multipliers(root: _Root, h: np.ndarray, constraints: Sequence[np.ndarray], sigma: float,
                 hbar: float, model: EntropyModel, kb: np.ndarray | None = None) -> MultiplierSet:
    if kb is None:
        kb = _kernel_b(root, model)
    d = h.shape[0]
    eye = np.eye(d)
    e = root.expect(h)
    avgs = [root.expect(c) for c in constraints]
    ops = [h - e * eye] + [c - a * eye for c, a in zip(constraints, avgs)]
    ranges = [_spectral_range(h)] + [_spectral_range(c) for c in constraints]
    coeffs = _solve_coefficients(root, ops, ranges, kb, sigma, hbar, h, constraints)
    zeta_val = float(coeffs[0])
    eta = tuple(float(x) for x in coeffs[1:])
    mean_k = float(np.vdot(root.b, kb).real) / root.trace
    xi_val = -mean_k - 2.0 * zeta_val * e - 2.0 * sum(c * a for c, a in zip(eta, avgs))
    return MultiplierSet(zeta_val, xi_val, eta, sigma, hbar)


# --- von Neumann functionals -------------------------------------------------


def von_neumann_entropy(rho, kB: float = 1.0) -> float:
    p, _ = _density_eig(rho)
    return float(-kB * np.sum(xlogx(p)))


def energy_variance(rho, h) -> float:
    root = _Root.from_rho(rho)
    h = hermitize(h)
    e = root.expect(h)
    hb = h @ root.b
    return float(np.vdot(hb, hb).real / root.trace - e * e)


def _zeta_from_root(root: _Root, h: np.ndarray) -> float:
    e = root.expect(h)
    hc = h - e * np.eye(h.shape[0])
    hb = hc @ root.b
    var = float(np.vdot(hb, hb).real) / root.trace
    if var < VARIANCE_FLOOR * _spectral_range(h) ** 2 or var <= 0:
        return 0.0
    diag = np.einsum("ij,ij->j", root.v.conj(), hc @ root.v).real
    logs = safe_log(root.p)
    # centering ln p removes the ln Z offset, which only cancels in exact arithmetic
    logs = logs - np.sum(root.p * logs) / root.trace
    num = float(np.sum(root.p * logs * diag))
    return -0.5 * num / root.trace / var


def zeta(rho, h) -> float:
    """-(1/2) Tr[(H-E) rho ln rho] / Tr[(H-E)^2 rho]; zero below the variance floor."""
    return _zeta_from_root(_Root.from_rho(rho), hermitize(h))


def xi(rho, h, zeta_value: float) -> float:
    root = _Root.from_rho(rho)
    s = float(-np.sum(xlogx(root.p)))
    return s / root.trace - 2.0 * zeta_value * root.expect(hermitize(h))


def theta(gamma, h, multipliers: MultiplierSet, constraints: Sequence = (),
          entropy_model: EntropyModel | None = None) -> np.ndarray:
    """theta = K gamma + 2 zeta H gamma + 2 sum eta_j C_j gamma + xi gamma."""
    g = as_matrix(gamma)
    h = hermitize(h)
    model = entropy_model or EntropyModel.von_neumann()
    u, s, wh = np.linalg.svd(g, full_matrices=False)
    p = s * s
    if model.spectral:
        kg = (u * model.kernel_times_sqrt(p)) @ wh
    else:
        rho = (u * p) @ u.conj().T
        kg = -hermitize(model.derivative_fn(rho), tol=1e-10) @ g
    th = kg + 2.0 * multipliers.zeta * (h @ g) + multipliers.xi * g
    for eta_j, c in zip(multipliers.eta, constraints):
        th = th + 2.0 * eta_j * (hermitize(c) @ g)
    return th


def entropy_production(gamma, h, multipliers: MultiplierSet, constraints: Sequence = (),
                       entropy_model: EntropyModel | None = None, kB: float = 1.0,
                       check: bool = True) -> float:
    """dS/dt = kB sigma (theta|theta), with the orthogonality relations asserted."""
    g = as_matrix(gamma)
    th = theta(g, h, multipliers, constraints, entropy_model)
    if check:
        h = hermitize(h)
        scale = max(1.0, float(np.linalg.norm(h, 2)))
        checks = [("(gamma|theta)", np.vdot(g, th)), ("(gamma|H|theta)", np.vdot(h @ g, th))]
        for j, c in enumerate(constraints):
            checks.append((f"(gamma|C_{j + 1}|theta)", np.vdot(hermitize(c) @ g, th)))
        for name, val in checks:
            if abs(val) > ORTHOGONALITY_TOL * scale:
                raise InternalConsistencyError(f"{name} = {abs(val):.3e}: multipliers inconsistent with state")
    return float(kB * multipliers.sigma * np.vdot(th, th).real)


def lagrange_solve(rho, h, constraints: ConstraintSet | Sequence = (), sigma: float = 1.0,
                   hbar: float = 1.0) -> MultiplierSet:
    """Multipliers (zeta, xi, eta) for the constrained steepest-ascent direction."""
    ops = constraints.operators if isinstance(constraints, ConstraintSet) else tuple(hermitize(c) for c in constraints)
    root = _Root.from_rho(rho)
    return _multipliers(root, hermitize(h), ops, sigma, hbar, EntropyModel.von_neumann())


def lagrange_residual(rho, h, constraints: ConstraintSet | Sequence, multipliers: MultiplierSet,
                      hbar: float = 1.0) -> np.ndarray:
    """Residuals of the multiplier equations, evaluated directly with dense traces."""
    rho = hermitize(rho, tol=1e-10)
    rho = rho / np.trace(rho).real
    h = hermitize(h)
    ops = constraints.operators if isinstance(constraints, ConstraintSet) else [hermitize(c) for c in constraints]
    eye = np.eye(h.shape[0])
    from .operators import entropy_operator

    rlr = entropy_operator(rho)
    e = np.trace(h @ rho).real
    hc = h - e * eye
    cs = [c - np.trace(c @ rho).real * eye for c in ops]
    zeta_val, eta = multipliers.zeta, multipliers.eta
    tr = lambda x: np.trace(x)  # noqa: E731
    out = [
        tr(hc @ rlr).real + 2 * zeta_val * tr(hc @ hc @ rho).real
        + sum(eta_j * tr((hc @ c + c @ hc) @ rho).real for eta_j, c in zip(eta, cs))
    ]
    for c in cs:
        comm = tr((c @ hc - hc @ c) @ rho)
        val = (tr(c @ rlr) + 1j * comm / (hbar * multipliers.sigma)
               + zeta_val * tr((c @ hc + hc @ c) @ rho)
               + sum(eta_l * tr((c @ cl + cl @ c) @ rho) for eta_l, cl in zip(eta, cs)))
        out.append(val.real)
    return np.array(out)


# --- Tsallis and generalized functionals --------------------------------------


def tsallis_entropy(rho, q: float) -> float:
    """S_q / kB = Tr(rho - rho**q) / (q - 1)."""
    if q == 1.0:
        raise DomainError("q must differ from 1")
    p, _ = _density_eig(rho)
    return float(np.sum(p - _power(p, q)) / (q - 1.0))


def tsallis_zeta(rho, h, q: float) -> float:
    """-(1/2) q/(q-1) Tr[(H-E) rho**q] / Tr[(H-E)^2 rho]."""
    if q == 1.0:
        raise DomainError("q must differ from 1")
    root = _Root.from_rho(rho)
    h = hermitize(h)
    e = root.expect(h)
    hc = h - e * np.eye(h.shape[0])
    hb = hc @ root.b
    var = float(np.vdot(hb, hb).real) / root.trace
    if var < VARIANCE_FLOOR * _spectral_range(h) ** 2 or var <= 0:
        return 0.0
    diag = np.einsum("ij,ij->j", root.v.conj(), hc @ root.v).real
    num = float(np.sum(_power(root.p, q) * diag)) / root.trace
    return -0.5 * q / (q - 1.0) * num / var


def generalized_multipliers(rho, h_hat: Callable, s_hat_derivative: Callable, sigma: float = 1.0,
                            hbar: float = 1.0) -> MultiplierSet:
    """zeta = (1/2) <(Hh - <Hh>) dS/drho> / <(Hh - <Hh>)^2> for state-dependent Hh(rho)."""
    rho_m = as_matrix(rho)
    try:
        hh = hermitize(h_hat(rho_m), tol=1e-10)
    except NonHermitianError as exc:
        raise NonHermitianError(exc.asymmetry, 1e-10) from None
    model = EntropyModel.custom(lambda r: 0.0, s_hat_derivative)
    root = _Root.from_rho(rho_m)
    return _multipliers(root, hh, (), sigma, hbar, model)
