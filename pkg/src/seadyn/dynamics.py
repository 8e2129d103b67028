"""Right-hand sides of the entropy-ascent equation of motion and their time integration.

The propagated object is the state operator gamma (rho = gamma gamma^dagger), so
positivity of rho holds by construction. Density-matrix forms of every RHS are
provided alongside, written out term by term, and serve as independent checks
of the gamma path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import functionals as fn
from .errors import DimensionError, IntegrationError, PreconditionError
from .functionals import (
    ConstraintSet,
    EntropyModel,
    MultiplierSet,
    SigmaPolicy,
    VARIANCE_FLOOR,
    _Root,
    _kernel_b,
    _multipliers,
    _spectral_range,
)
from .integrator import StepSizeUnderflow, dopri54
from .operators import (
    DensityMatrix,
    StateOperator,
    UnitsConfig,
    as_matrix,
    entropy_operator,
    hermitize,
    matrix_power_psd,
    propagator,
    sqrt_psd,
    trace_distance,
    xlogx,
)

COMPOSITE_MODES = ("single", "thermal_contact", "adiabatic", "isolated")
STATIONARY_THRESHOLD = 1e-12
STATIONARY_SAMPLES = 3


@dataclass(eq=False)
class ModelSpec:
    hamiltonian: np.ndarray
    entropy_model: EntropyModel = field(default_factory=EntropyModel.von_neumann)
    sigma_policy: SigmaPolicy = field(default_factory=SigmaPolicy.constant)
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    composite_mode: str = "single"
    factors: tuple | None = None
    generalized_energy: Callable | None = None
    units: UnitsConfig = field(default_factory=UnitsConfig)

    def __post_init__(self):
        self.hamiltonian = hermitize(self.hamiltonian)
        if not isinstance(self.constraints, ConstraintSet):
            self.constraints = ConstraintSet(tuple(self.constraints))
        if self.composite_mode not in COMPOSITE_MODES:
            raise ValueError(f"composite_mode must be one of {COMPOSITE_MODES}")
        d = self.hamiltonian.shape[0]
        for c in self.constraints.operators:
            if c.shape != (d, d):
                raise DimensionError(f"constraint shape {c.shape} does not match H ({d}x{d})")
        if self.composite_mode != "single":
            if self.factors is None:
                raise ValueError("composite modes need factors=(H1, H2)")
            h1, h2 = (hermitize(x) for x in self.factors)
            self.factors = (h1, h2)
            joint = np.kron(h1, np.eye(h2.shape[0])) + np.kron(np.eye(h1.shape[0]), h2)
            if joint.shape != self.hamiltonian.shape or not np.allclose(joint, self.hamiltonian, atol=1e-12):
                raise DimensionError("hamiltonian must equal H1 x I + I x H2 in composite modes")
            if self.entropy_model.kind != "von_neumann" or self.generalized_energy is not None or len(self.constraints):
                raise ValueError("composite modes support the plain von Neumann model only")

    @classmethod
    def composite(cls, h1, h2, mode: str = "thermal_contact", **kwargs) -> "ModelSpec":
        h1, h2 = hermitize(h1), hermitize(h2)
        joint = np.kron(h1, np.eye(h2.shape[0])) + np.kron(np.eye(h1.shape[0]), h2)
        return cls(joint, composite_mode=mode, factors=(h1, h2), **kwargs)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def hbar(self) -> float:
        return self.units.hbar

    def energy_operator(self, rho: np.ndarray | None) -> np.ndarray:
        if self.generalized_energy is None:
            return self.hamiltonian
        return hermitize(self.generalized_energy(rho), tol=1e-10)

    def sigma(self, rho_fn: Callable[[], np.ndarray], h: np.ndarray) -> float:
        if self.sigma_policy.kind == "constant":
            return self.sigma_policy.value
        return self.sigma_policy.evaluate(rho_fn(), h)


@dataclass
class IntegratorConfig:
    t_end: float = 10.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    initial_step: float = 1e-3
    max_step: float = 0.5
    record_every: float = 0.1

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        for name in ("initial_step", "max_step", "record_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")

    @property
    def tolerance(self) -> float:
        return max(self.rel_tol, self.abs_tol)

    def sample_times(self) -> np.ndarray:
        n = int(np.floor(self.t_end / self.record_every + 1e-9))
        times = self.record_every * np.arange(n + 1)
        if self.t_end - times[-1] > 1e-12 * max(1.0, self.t_end):
            times = np.append(times, self.t_end)
        return times


@dataclass
class Trajectory:
    """Samples of an integrated trajectory.

    ``eigenvalues`` rows are sorted in descending order.
    """

    times: np.ndarray
    states: np.ndarray  # (n, d, d)
    trace: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray
    entropy_production: np.ndarray
    zeta: np.ndarray
    eigenvalues: np.ndarray
    constraint_averages: np.ndarray
    rho_dot_norm: np.ndarray
    status: str = "completed"
    message: str = ""

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class CompositeTrajectory:
    times: np.ndarray
    states1: np.ndarray
    states2: np.ndarray
    energy1: np.ndarray
    energy2: np.ndarray
    entropy1: np.ndarray
    entropy2: np.ndarray
    trace1: np.ndarray
    trace2: np.ndarray
    purity1: np.ndarray
    purity2: np.ndarray
    zeta1: np.ndarray
    zeta2: np.ndarray
    status: str = "completed"
    message: str = ""

    @property
    def total_energy(self) -> np.ndarray:
        return self.energy1 + self.energy2

    @property
    def total_entropy(self) -> np.ndarray:
        return self.entropy1 + self.entropy2


# --- gamma-form right-hand side ---------------------------------------------


@dataclass
class _Eval:
    gamma_dot: np.ndarray
    multipliers: MultiplierSet
    theta: np.ndarray
    energy_op: np.ndarray
    root: _Root


def multipliers_for(root: _Root, model: ModelSpec, h: np.ndarray, sigma: float,
                    kb: np.ndarray) -> MultiplierSet:
    return _multipliers(root, h, model.constraints.operators, sigma, model.hbar, model.entropy_model, kb)


def _evaluate(gamma: np.ndarray, model: ModelSpec, interaction: bool = False) -> _Eval:
    u, s, wh = np.linalg.svd(gamma, full_matrices=False)
    root = _Root(s * s, u)
    h = model.energy_operator(root.rho if model.generalized_energy is not None else None)
    sigma = model.sigma(lambda: root.rho, h)
    kb = _kernel_b(root, model.entropy_model)
    mult = multipliers_for(root, model, h, sigma, kb)
    th = kb @ wh + 2.0 * mult.zeta * (h @ gamma) + mult.xi * gamma
    for eta_j, c in zip(mult.eta, model.constraints.operators):
        th = th + 2.0 * eta_j * (c @ gamma)
    g_dot = -0.5 * sigma * th
    if not interaction:
        g_dot = g_dot - (1j / model.hbar) * (h @ gamma)
    return _Eval(g_dot, mult, th, h, root)


def rhs_gamma(gamma, model: ModelSpec) -> np.ndarray:
    """d gamma/dt = -sigma[(1/2) K gamma + zeta H gamma + sum eta_j C_j gamma + (xi/2) gamma] - (i/hbar) H gamma."""
    g = as_matrix(gamma)
    if abs(np.vdot(g, g).real - 1.0) > 1e-6:
        raise PreconditionError("gamma must be normalized to within 1e-6")
    return _evaluate(g, model).gamma_dot


def rho_dot_from_gamma(gamma, gamma_dot) -> np.ndarray:
    g, gd = as_matrix(gamma), as_matrix(gamma_dot)
    return gd @ g.conj().T + g @ gd.conj().T


# --- density-form right-hand sides ------------------------------------------


def _density(rho) -> np.ndarray:
    return hermitize(rho, tol=1e-10)


def _rhs_rho_vn(rho: np.ndarray, model: ModelSpec, interaction: bool) -> np.ndarray:
    h = model.hamiltonian
    d = h.shape[0]
    eye = np.eye(d)
    tr = np.trace(rho).real
    sigma = model.sigma(lambda: rho, h)
    mult = fn.lagrange_solve(rho, h, model.constraints, sigma, model.hbar)
    e = np.trace(h @ rho).real / tr
    dis = mult.zeta * (h - e * eye)
    for eta_j, c in zip(mult.eta, model.constraints.operators):
        dis = dis + eta_j * (c - (np.trace(c @ rho).real / tr) * eye)
    rlr = entropy_operator(rho)
    out = -sigma * (rlr + dis @ rho + rho @ dis - rho * (np.trace(rlr).real / tr))
    if not interaction:
        out = out + (1j / model.hbar) * (rho @ h - h @ rho)
    return out


def rhs_rho(rho, model: ModelSpec) -> np.ndarray:
    """Density-matrix RHS for the model (von Neumann with optional constraints;
    Tsallis and generalized models are routed to their dedicated forms)."""
    rho = _density(rho)
    if model.generalized_energy is not None or model.entropy_model.kind == "custom":
        return rhs_generalized(rho, model)
    if model.entropy_model.kind == "tsallis":
        return rhs_tsallis(rho, model)
    return _rhs_rho_vn(rho, model, interaction=False)


def rhs_interaction(rho_bar, model: ModelSpec) -> np.ndarray:
    """Commutator-free RHS in the frame rotating with H."""
    return _rhs_rho_vn(_density(rho_bar), model, interaction=True)


def rhs_tsallis(rho, model: ModelSpec) -> np.ndarray:
    rho = _density(rho)
    q = model.entropy_model.q
    if model.entropy_model.kind != "tsallis":
        raise ValueError("rhs_tsallis needs a tsallis entropy model")
    h = model.hamiltonian
    tr = np.trace(rho).real
    e = np.trace(h @ rho).real / tr
    hc = h - e * np.eye(h.shape[0])
    sigma = model.sigma(lambda: rho, h)
    z = fn.tsallis_zeta(rho, h, q)
    rq = matrix_power_psd(rho, q)
    f = q / (q - 1.0)
    dis = f * rq + z * (hc @ rho + rho @ hc) - f * (np.trace(rq).real / tr) * rho
    return -sigma * dis + (1j / model.hbar) * (rho @ h - h @ rho)


def rhs_generalized(rho, model: ModelSpec) -> np.ndarray:
    """-sigma[-(dS/drho) rho + zeta{Hh - <Hh>, rho} + <dS/drho> rho] + (i/hbar)[rho, Hh(rho)]."""
    rho = _density(rho)
    tr = np.trace(rho).real
    hh = model.energy_operator(rho)
    em = model.entropy_model
    if em.kind == "custom":
        deriv = lambda r: hermitize(em.derivative_fn(r), tol=1e-10)  # noqa: E731
    else:
        deriv = _spectral_derivative(em)
    ds = deriv(rho)
    sigma = model.sigma(lambda: rho, hh)
    mult = fn.generalized_multipliers(rho, lambda r: hh, deriv, sigma, model.hbar)
    e = np.trace(hh @ rho).real / tr
    hc = hh - e * np.eye(hh.shape[0])
    ds_rho = 0.5 * (ds @ rho + rho @ ds)
    mean_ds = np.trace(ds @ rho).real / tr
    dis = -ds_rho + mult.zeta * (hc @ rho + rho @ hc) + mean_ds * rho
    return -sigma * dis + (1j / model.hbar) * (rho @ hh - hh @ rho)


def _spectral_derivative(em: EntropyModel) -> Callable:
    """dS_hat/drho for the spectral entropy models (von Neumann: -ln rho - 1).

    Off the support the derivative is irrelevant (always multiplied by rho) and
    is set to zero.
    """
    def deriv(rho):
        w, v = np.linalg.eigh(rho)
        p = np.clip(w, 0.0, None)
        m = fn.support_mask(p)
        out = np.zeros_like(p)
        if em.kind == "von_neumann":
            out[m] = -np.log(p[m]) - 1.0
        else:
            q = em.q
            out[m] = (1.0 - q * p[m] ** (q - 1.0)) / (q - 1.0)
        return (v * out) @ v.conj().T
    return deriv


# --- composite systems -------------------------------------------------------


def _factor_stats(root: _Root, h: np.ndarray):
    """E, S/kB, N = Tr[(H-E) rho ln rho], V = Tr[(H-E)^2 rho] of a normalized factor."""
    tr = root.trace
    e = root.expect(h)
    hc = h - e * np.eye(h.shape[0])
    diag = np.einsum("ij,ij->j", root.v.conj(), hc @ root.v).real
    plp = xlogx(root.p)
    n = float(np.sum(plp * diag)) / tr
    hb = hc @ root.b
    var = float(np.vdot(hb, hb).real) / tr
    s = -float(np.sum(plp)) / tr
    return e, s, n, var


def _composite_zetas(model: ModelSpec, stats1, stats2) -> tuple[float, float]:
    h1, h2 = model.factors
    e1, s1, n1, v1 = stats1
    e2, s2, n2, v2 = stats2
    if model.composite_mode == "thermal_contact":
        r = _spectral_range(h1) + _spectral_range(h2)
        v = v1 + v2
        z = 0.0 if (v <= 0 or v < VARIANCE_FLOOR * r * r) else -0.5 * (n1 + n2) / v
        return z, z

    def single(n, v, h):
        r = _spectral_range(h)
        return 0.0 if (v <= 0 or v < VARIANCE_FLOOR * r * r) else -0.5 * n / v

    return single(n1, v1, h1), single(n2, v2, h2)


def _composite_sigmas(model: ModelSpec, rho1_fn, rho2_fn) -> tuple[float, float]:
    pol = model.sigma_policy
    if pol.kind == "constant":
        return pol.value, pol.value
    h1, h2 = model.factors
    if model.composite_mode == "isolated":
        return pol.evaluate(rho1_fn(), h1), pol.evaluate(rho2_fn(), h2)
    s = pol.evaluate(np.kron(rho1_fn(), rho2_fn()), model.hamiltonian)
    return s, s


def rhs_composite(rho1, rho2, model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Density-form RHS of the pseudo-separable composite equations."""
    if model.composite_mode == "single":
        raise ValueError("rhs_composite needs a composite model")
    h1, h2 = model.factors
    rho1, rho2 = _density(rho1), _density(rho2)
    if rho1.shape != h1.shape or rho2.shape != h2.shape:
        raise DimensionError("factor states do not match the factor hamiltonians")
    r1, r2 = _Root.from_rho(rho1), _Root.from_rho(rho2)
    z1, z2 = _composite_zetas(model, _factor_stats(r1, h1), _factor_stats(r2, h2))
    sg1, sg2 = _composite_sigmas(model, lambda: rho1, lambda: rho2)
    out = []
    for rho, h, z, sg in ((rho1, h1, z1, sg1), (rho2, h2, z2, sg2)):
        tr = np.trace(rho).real
        hc = h - (np.trace(h @ rho).real / tr) * np.eye(h.shape[0])
        rlr = entropy_operator(rho)
        dis = rlr + z * (hc @ rho + rho @ hc) - rho * (np.trace(rlr).real / tr)
        out.append(-sg * dis + (1j / model.hbar) * (rho @ h - h @ rho))
    return out[0], out[1]


def _composite_gamma_rhs(g1: np.ndarray, g2: np.ndarray, model: ModelSpec):
    h1, h2 = model.factors
    parts = []
    for g in (g1, g2):
        u, s, wh = np.linalg.svd(g, full_matrices=False)
        parts.append((_Root(s * s, u), wh))
    (r1, w1), (r2, w2) = parts
    st1, st2 = _factor_stats(r1, h1), _factor_stats(r2, h2)
    z1, z2 = _composite_zetas(model, st1, st2)
    sg1, sg2 = _composite_sigmas(model, lambda: r1.rho, lambda: r2.rho)
    vn = EntropyModel.von_neumann()
    out = []
    for g, h, (root, wh), st, z, sg in ((g1, h1, parts[0], st1, z1, sg1), (g2, h2, parts[1], st2, z2, sg2)):
        e, s = st[0], st[1]
        xi = s - 2.0 * z * e
        th = _kernel_b(root, vn) @ wh + 2.0 * z * (h @ g) + xi * g
        out.append(-0.5 * sg * th - (1j / model.hbar) * (h @ g))
    return out[0], out[1], (z1, z2)


# --- integration -------------------------------------------------------------


def _initial_gamma(initial) -> np.ndarray:
    if isinstance(initial, StateOperator):
        g = np.array(initial.entries)
    else:
        rho = np.array(initial.entries if isinstance(initial, DensityMatrix) else as_matrix(initial))
        DensityMatrix(rho)  # validates Hermiticity and positivity
        g = sqrt_psd(rho)
    n = np.linalg.norm(g)
    if n == 0:
        raise ValueError("initial state has zero norm")
    return g / n


def _renormalize(y: np.ndarray) -> np.ndarray:
    return y / np.linalg.norm(y)


def evolve(initial, model: ModelSpec, config: IntegratorConfig | None = None,
           picture: str = "schrodinger"):
    """Integrate the gamma equation and record diagnostics every ``record_every``.

    ``initial`` is a :class:`StateOperator`, a :class:`DensityMatrix`, or a plain
    array read as a density matrix; composite models take a pair ``(rho1, rho2)``.
    ``picture="interaction"`` integrates the commutator-free equation and maps
    samples back with exp(-iHt/hbar).
    """
    config = config or IntegratorConfig()
    if model.composite_mode != "single":
        return evolve_composite(initial[0], initial[1], model, config)
    if picture not in ("schrodinger", "interaction"):
        raise ValueError("picture must be 'schrodinger' or 'interaction'")
    interaction = picture == "interaction"
    g0 = _initial_gamma(initial)
    d = model.dim
    if g0.shape[0] != d:
        raise DimensionError(f"state dimension {g0.shape[0]} does not match H ({d})")
    shape = g0.shape
    rec: dict[str, list] = {k: [] for k in
                            ("t", "rho", "trace", "energy", "entropy", "sdot", "zeta", "eig", "cavg", "rdot")}
    kB = model.units.kB
    hbar = model.hbar
    still = [0]

    def fun(t, y):
        return _evaluate(y.reshape(shape), model, interaction).gamma_dot.ravel()

    def on_sample(t, y):
        g = y.reshape(shape)
        ev = _evaluate(g, model, interaction)
        rho = g @ g.conj().T
        rdot = rho_dot_from_gamma(g, ev.gamma_dot)
        if interaction:
            h = model.hamiltonian
            rdot = rdot + (1j / hbar) * (rho @ h - h @ rho)
            u = propagator(h, t, hbar)
            rho = u @ rho @ u.conj().T
            rdot = u @ rdot @ u.conj().T
        h_e = ev.energy_op
        rec["t"].append(t)
        rec["rho"].append(rho)
        rec["trace"].append(float(np.trace(rho).real))
        rec["energy"].append(float(np.trace(h_e @ rho).real))
        w = np.linalg.eigvalsh(rho)[::-1]
        rec["eig"].append(w)
        rec["entropy"].append(kB * model.entropy_model.entropy(rho))
        rec["sdot"].append(kB * ev.multipliers.sigma * float(np.vdot(ev.theta, ev.theta).real))
        rec["zeta"].append(ev.multipliers.zeta)
        rec["cavg"].append([float(np.trace(c @ rho).real) for c in model.constraints.operators])
        nrm = float(np.linalg.norm(rdot))
        rec["rdot"].append(nrm)
        if nrm < STATIONARY_THRESHOLD * max(ev.multipliers.sigma, 1e-300):
            still[0] += 1
        else:
            still[0] = 0
        return still[0] >= STATIONARY_SAMPLES

    def build(status, message=""):
        n = len(rec["t"])
        return Trajectory(
            times=np.array(rec["t"]),
            states=np.array(rec["rho"]).reshape(n, d, d),
            trace=np.array(rec["trace"]),
            energy=np.array(rec["energy"]),
            entropy=np.array(rec["entropy"]),
            entropy_production=np.array(rec["sdot"]),
            zeta=np.array(rec["zeta"]),
            eigenvalues=np.array(rec["eig"]).reshape(n, d),
            constraint_averages=np.array(rec["cavg"]).reshape(n, len(model.constraints)),
            rho_dot_norm=np.array(rec["rdot"]),
            status=status,
            message=message,
        )

    times = config.sample_times()
    try:
        dopri54(fun, g0.ravel(), times, config.rel_tol, config.abs_tol, config.initial_step,
                config.max_step, post_step=_renormalize, on_sample=on_sample)
    except StepSizeUnderflow as exc:
        raise IntegrationError(str(exc), build("failed", str(exc))) from exc
    except (ValueError, ArithmeticError) as exc:
        raise IntegrationError(f"RHS evaluation failed: {exc}", build("failed", str(exc))) from exc
    stopped = len(rec["t"]) < len(times)
    return build("stationary" if stopped else "completed")


def evolve_composite(rho1, rho2, model: ModelSpec, config: IntegratorConfig | None = None) -> CompositeTrajectory:
    """Integrate the two factor state operators of a composite model."""
    config = config or IntegratorConfig()
    h1, h2 = model.factors
    g1, g2 = _initial_gamma(rho1), _initial_gamma(rho2)
    if g1.shape[0] != h1.shape[0] or g2.shape[0] != h2.shape[0]:
        raise DimensionError("factor states do not match the factor hamiltonians")
    n1 = g1.size
    s1, s2 = g1.shape, g2.shape
    keys = ("t", "r1", "r2", "e1", "e2", "s1", "s2", "t1", "t2", "p1", "p2", "z1", "z2")
    rec: dict[str, list] = {k: [] for k in keys}

    def split(y):
        return y[:n1].reshape(s1), y[n1:].reshape(s2)

    def fun(t, y):
        a, b, _ = _composite_gamma_rhs(*split(y), model)
        return np.concatenate([a.ravel(), b.ravel()])

    def post(y):
        a, b = split(y)
        return np.concatenate([_renormalize(a).ravel(), _renormalize(b).ravel()])

    def on_sample(t, y):
        a, b = split(y)
        _, _, (z1, z2) = _composite_gamma_rhs(a, b, model)
        rec["t"].append(t)
        for tag, g, h in (("1", a, h1), ("2", b, h2)):
            rho = g @ g.conj().T
            rec["r" + tag].append(rho)
            rec["e" + tag].append(float(np.trace(h @ rho).real))
            rec["s" + tag].append(model.units.kB * model.entropy_model.entropy(rho))
            rec["t" + tag].append(float(np.trace(rho).real))
            rec["p" + tag].append(float(np.vdot(rho, rho).real))
        rec["z1"].append(z1)
        rec["z2"].append(z2)
        return False

    def build(status, message=""):
        arr = {k: np.array(v) for k, v in rec.items()}
        return CompositeTrajectory(arr["t"], arr["r1"], arr["r2"], arr["e1"], arr["e2"], arr["s1"],
                                   arr["s2"], arr["t1"], arr["t2"], arr["p1"], arr["p2"], arr["z1"],
                                   arr["z2"], status, message)

    y0 = np.concatenate([g1.ravel(), g2.ravel()])
    try:
        dopri54(fun, y0, config.sample_times(), config.rel_tol, config.abs_tol, config.initial_step,
                config.max_step, post_step=post, on_sample=on_sample)
    except StepSizeUnderflow as exc:
        raise IntegrationError(str(exc), build("failed", str(exc))) from exc
    return build("completed")


@dataclass
class CovarianceReport:
    times: np.ndarray
    distances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances))


def covariance_check(rho0, h, u, config: IntegratorConfig | None = None,
                     model: ModelSpec | None = None) -> CovarianceReport:
    """Compare evolve(U rho0 U^dagger) with U evolve(rho0) U^dagger for a symmetry U of H."""
    h = hermitize(h)
    u = as_matrix(u)
    d = h.shape[0]
    if np.linalg.norm(u @ u.conj().T - np.eye(d)) > 1e-10:
        raise PreconditionError("U is not unitary")
    if np.linalg.norm(u @ h - h @ u) > 1e-10:
        raise PreconditionError("U does not commute with H")
    model = model or ModelSpec(h)
    rho0 = as_matrix(rho0)
    a = evolve(rho0, model, config)
    b = evolve(u @ rho0 @ u.conj().T, model, config)
    n = min(len(a), len(b))
    dist = np.array([trace_distance(u @ a.states[k] @ u.conj().T, b.states[k]) for k in range(n)])
    return CovarianceReport(a.times[:n], dist)
