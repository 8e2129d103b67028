"""Dense operator algebra and spectral calculus on a d-dimensional Hilbert space.

The typed wrappers (:class:`HermitianOperator`, :class:`StateOperator`,
:class:`DensityMatrix`) validate at construction and expose ``__array__``, so
every function here accepts either a wrapper or a plain ``numpy`` array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NonHermitianError, PositivityError

HERMITIAN_TOL = 1e-12
# eigenvalues <= SUPPORT_CUTOFF * max eigenvalue are exact zeros in rho ln rho
SUPPORT_CUTOFF = 1e-14
POSITIVITY_TOL = 1e-8
DENSITY_EIG_TOL = 1e-10
TRACE_TOL = 1e-9


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {m.shape}")
    return m


def _square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermitize(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (A + A^dagger)/2, or raise if A is not Hermitian to within ``tol``.

    The tolerance is absolute for entries of order one and scales with the
    largest entry otherwise.
    """
    m = _square(a)
    asym = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    limit = tol * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if asym > limit:
        raise NonHermitianError(asym, limit)
    return 0.5 * (m + m.conj().T)


def _check_same_dim(*mats: np.ndarray) -> None:
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(shapes)}")


def _readonly(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class UnitsConfig:
    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.kB > 0):
            raise ValueError(f"hbar and kB must be positive, got {self.hbar}, {self.kB}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(hermitize(self.entries)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def to_json(self) -> dict:
        return matrix_to_json(self.entries)

    @classmethod
    def from_json(cls, data: dict) -> "HermitianOperator":
        return cls(matrix_from_json(data))


@dataclass(frozen=True, eq=False)
class StateOperator:
    """The state operator gamma with rho = gamma gamma^dagger.

    gamma may be rectangular (d x r); r then bounds the rank of rho.
    """

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(as_matrix(self.entries)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def norm2(self) -> float:
        """(gamma|gamma) = Tr(gamma gamma^dagger)."""
        return float(np.vdot(self.entries, self.entries).real)

    def normalized(self) -> "StateOperator":
        return StateOperator(self.entries / np.sqrt(self.norm2))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian positive-semidefinite rho.

    Hermiticity and positivity are checked at construction; the trace is
    exposed but only enforced by :meth:`check_normalized`.
    """

    entries: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = hermitize(self.entries)
        w = np.linalg.eigvalsh(m)
        if w.size and w[0] < -DENSITY_EIG_TOL * max(1.0, w[-1]):
            raise PositivityError(float(w[0]))
        object.__setattr__(self, "entries", _readonly(m))
        object.__setattr__(self, "eigenvalues", w)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def check_normalized(self, tol: float = TRACE_TOL) -> "DensityMatrix":
        if abs(self.trace - 1.0) > tol:
            raise ValueError(f"density matrix trace {self.trace!r} differs from 1 by more than {tol}")
        return self

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def to_json(self) -> dict:
        return matrix_to_json(self.entries)

    @classmethod
    def from_json(cls, data: dict) -> "DensityMatrix":
        return cls(matrix_from_json(data))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def apply(self, f) -> np.ndarray:
        """f(A) for a scalar function f acting on the eigenvalues."""
        v = self.eigenvectors
        return (v * f(self.eigenvalues)) @ v.conj().T


def spectral_decompose(a) -> SpectralDecomposition:
    w, v = np.linalg.eigh(hermitize(a))
    return SpectralDecomposition(w, v)


def density_from_state(gamma) -> DensityMatrix:
    g = as_matrix(gamma)
    return DensityMatrix(g @ g.conj().T)


def support_mask(p: np.ndarray) -> np.ndarray:
    """Eigenvalues that count as occupied under the 0 ln 0 = 0 convention."""
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    return p > SUPPORT_CUTOFF * max(float(np.max(p)), 0.0)


def xlogx(p: np.ndarray) -> np.ndarray:
    """p ln p elementwise, zero off the support."""
    out = np.zeros_like(p, dtype=float)
    m = support_mask(p)
    out[m] = p[m] * np.log(p[m])
    return out


def safe_log(p: np.ndarray) -> np.ndarray:
    """ln p on the support, zero elsewhere (only ever used multiplied by p)."""
    out = np.zeros_like(p, dtype=float)
    m = support_mask(p)
    out[m] = np.log(p[m])
    return out


def _density_eig(rho) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(hermitize(rho))
    if w.size and w[0] < -POSITIVITY_TOL:
        raise PositivityError(float(w[0]))
    return np.clip(w, 0.0, None), v


def entropy_operator(rho) -> np.ndarray:
    """rho ln rho on the support of rho (0 ln 0 = 0)."""
    p, v = _density_eig(rho)
    return (v * xlogx(p)) @ v.conj().T


def matrix_power_psd(rho, q: float) -> np.ndarray:
    """rho**q for positive-semidefinite rho with 0**q = 0 (q > 0)."""
    p, v = _density_eig(rho)
    out = np.zeros_like(p)
    m = support_mask(p)
    out[m] = p[m] ** q
    return (v * out) @ v.conj().T


def sqrt_psd(rho) -> np.ndarray:
    """Hermitian square root; eigenvalues below the support cutoff map to zero."""
    return matrix_power_psd(rho, 0.5)


def commutator(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    _check_same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    _check_same_dim(a, b)
    return a @ b + b @ a


def hs_inner(beta, gamma) -> complex:
    """(beta|gamma) = Tr(beta^dagger gamma)."""
    b, g = as_matrix(beta), as_matrix(gamma)
    _check_same_dim(b, g)
    return complex(np.vdot(b, g))


def average(o, rho) -> float:
    """Tr(O rho) / Tr(rho), real for Hermitian O."""
    o, r = _square(o), _square(rho)
    _check_same_dim(o, r)
    tr = np.trace(r).real
    if tr <= 0:
        raise ValueError("average requires Tr(rho) > 0")
    return float(np.einsum("ij,ji->", o, r).real / tr)


def trace_distance(a, b) -> float:
    """(1/2) ||A - B||_1 for Hermitian A, B."""
    w = np.linalg.eigvalsh(hermitize(as_matrix(a) - as_matrix(b), tol=1e-9))
    return 0.5 * float(np.sum(np.abs(w)))


def unitary_conjugate(u, rho) -> np.ndarray:
    u = as_matrix(u)
    return u @ as_matrix(rho) @ u.conj().T


def propagator(h, t: float, hbar: float = 1.0) -> np.ndarray:
    """exp(-i H t / hbar) computed spectrally."""
    w, v = np.linalg.eigh(hermitize(h))
    return (v * np.exp(-1j * w * t / hbar)) @ v.conj().T


def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    return {
        "dim": int(m.shape[0]),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def matrix_from_json(data: dict) -> np.ndarray:
    arr = np.asarray(data["entries"], dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise DimensionError("entries must be a matrix of [re, im] pairs")
    m = arr[..., 0] + 1j * arr[..., 1]
    if "dim" in data and m.shape[0] != int(data["dim"]):
        raise DimensionError(f"dim {data['dim']} does not match {m.shape[0]} rows")
    return m
