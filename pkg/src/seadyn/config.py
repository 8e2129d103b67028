"""Scenario configuration: JSON schema, validation, and construction of models and states.

Complex numbers are written as ``[re, im]`` pairs; matrices as nested lists of pairs.
Random elements draw from ``numpy.random.Philox`` (a 64-bit counter-based
generator), so a seed reproduces the same numbers on every platform.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import IntegratorConfig, ModelSpec
from .equilibrium import gibbs_density
from .errors import ConfigError
from .functionals import ConstraintSet, EntropyModel, SigmaPolicy
from .linearized import oscillator_operators
from .operators import DensityMatrix, UnitsConfig, hermitize

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_VECTOR = {"type": "array", "items": _COMPLEX, "minItems": 1}
_MATRIX = {"type": "array", "items": _VECTOR, "minItems": 1}

_HAMILTONIAN = {
    "oneOf": [
        {"type": "object", "required": ["type", "matrix"], "additionalProperties": False,
         "properties": {"type": {"const": "explicit"}, "matrix": _MATRIX}},
        {"type": "object", "required": ["type", "values"], "additionalProperties": False,
         "properties": {"type": {"const": "diag"},
                        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1}}},
        {"type": "object", "required": ["type", "levels"], "additionalProperties": False,
         "properties": {"type": {"const": "oscillator"}, "levels": {"type": "integer", "minimum": 2},
                        "omega": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "required": ["type", "E1", "E2"], "additionalProperties": False,
         "properties": {"type": {"const": "two_level"}, "E1": {"type": "number"}, "E2": {"type": "number"}}},
        {"type": "object", "required": ["type", "mode", "factors"], "additionalProperties": False,
         "properties": {"type": {"const": "composite"},
                        "mode": {"enum": ["thermal_contact", "adiabatic", "isolated"]},
                        "factors": {"type": "array", "minItems": 2, "maxItems": 2,
                                    "items": {"$ref": "#/$defs/hamiltonian"}}}},
    ]
}

_STATE = {
    "oneOf": [
        {"type": "object", "required": ["type", "matrix"], "additionalProperties": False,
         "properties": {"type": {"const": "explicit"}, "matrix": _MATRIX}},
        {"type": "object", "required": ["type", "beta"], "additionalProperties": False,
         "properties": {"type": {"const": "gibbs"}, "beta": {"type": "number"}}},
        {"type": "object", "required": ["type", "vector"], "additionalProperties": False,
         "properties": {"type": {"const": "pure"}, "vector": _VECTOR}},
        {"type": "object", "required": ["type", "rank", "seed"], "additionalProperties": False,
         "properties": {"type": {"const": "random_mixed"}, "rank": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer", "minimum": 0}}},
        {"type": "object", "required": ["type", "beta", "scale", "seed"], "additionalProperties": False,
         "properties": {"type": {"const": "near_gibbs"}, "beta": {"type": "number"},
                        "scale": {"type": "number", "exclusiveMinimum": 0}, "seed": {"type": "integer", "minimum": 0}}},
        {"type": "object", "required": ["type", "factors"], "additionalProperties": False,
         "properties": {"type": {"const": "product"},
                        "factors": {"type": "array", "minItems": 2, "maxItems": 2,
                                    "items": {"$ref": "#/$defs/state"}}}},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["hamiltonian"],
    "additionalProperties": False,
    "$defs": {"hamiltonian": _HAMILTONIAN, "state": _STATE},
    "properties": {
        "hamiltonian": {"$ref": "#/$defs/hamiltonian"},
        "initial_state": {"$ref": "#/$defs/state"},
        "entropy_model": {
            "type": "object", "required": ["name"], "additionalProperties": False,
            "properties": {"name": {"enum": ["von_neumann", "tsallis"]}, "q": {"type": "number", "exclusiveMinimum": 0}},
        },
        "sigma_policy": {
            "type": "object", "required": ["name"], "additionalProperties": False,
            "properties": {"name": {"const": "constant"}, "value": {"type": "number", "minimum": 0}},
        },
        "constraints": {"type": "array", "items": _MATRIX},
        "units": {
            "type": "object", "additionalProperties": False,
            "properties": {"hbar": {"type": "number", "exclusiveMinimum": 0},
                           "kB": {"type": "number", "exclusiveMinimum": 0}},
        },
        "integrator": {
            "type": "object", "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in
                           ("t_end", "rel_tol", "abs_tol", "initial_step", "max_step", "record_every")},
        },
        "picture": {"enum": ["schrodinger", "interaction"]},
        "equilibrium": {
            "type": "object", "additionalProperties": False, "minProperties": 1, "maxProperties": 1,
            "properties": {"energy": {"type": "number"}, "beta": {"type": "number"}},
        },
        "linearize": {
            "type": "object", "additionalProperties": False,
            "properties": {"beta": {"type": "number"}, "sigma_eq": {"type": "number", "exclusiveMinimum": 0}},
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {"prefix": {"type": "string", "minLength": 1}, "states_json": {"type": "boolean"}},
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(err: jsonschema.ValidationError) -> str:
    parts = ["$"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate(data: dict) -> None:
    """Raise :class:`ConfigError` naming the deepest offending field."""
    errors = list(_VALIDATOR.iter_errors(data))
    if not errors:
        return
    best = jsonschema.exceptions.best_match(errors)
    # inside a oneOf, report the branch selected by the "type" tag
    while best.validator == "oneOf" and best.context:
        wrong_tag = {e.relative_schema_path[0] for e in best.context
                     if e.validator == "const" and list(e.relative_path) == ["type"]}
        chosen = [e for e in best.context if e.relative_schema_path[0] not in wrong_tag]
        if not chosen:
            break
        best = jsonschema.exceptions.best_match(chosen)
    raise ConfigError(_path(best), best.message)


def complex_matrix(data, path: str) -> np.ndarray:
    rows = [len(r) for r in data]
    if len(set(rows)) != 1:
        raise ConfigError(path, "matrix rows have different lengths")
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def complex_vector(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[:, 0] + 1j * arr[:, 1]


def matrix_to_pairs(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def random_mixed(dim: int, rank: int, seed: int) -> DensityMatrix:
    """rho = gamma gamma^dagger / Tr for a dim x rank gamma of standard complex normals."""
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must lie in [1, {dim}], got {rank}")
    rng = philox(seed)
    g = (rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))) / np.sqrt(2.0)
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)


def near_gibbs(h, beta: float, scale: float, seed: int) -> np.ndarray:
    """Gibbs state plus a random Hermitian deviation with Tr = Tr(H .) = 0 and Frobenius norm ``scale``."""
    h = hermitize(h)
    w, v = np.linalg.eigh(h)
    d = w.size
    rng = philox(seed)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    delta = 0.5 * (x + x.conj().T)
    diag = delta.diagonal().real.copy()
    a = np.vstack([np.ones(d), w])
    diag -= a.T @ np.linalg.lstsq(a @ a.T, a @ diag, rcond=None)[0]
    np.fill_diagonal(delta, diag)
    delta *= scale / np.linalg.norm(delta)
    rho = gibbs_density(h, beta) + v @ delta @ v.conj().T
    if np.linalg.eigvalsh(rho)[0] < 0:
        raise ConfigError("$.initial_state.scale", "deviation too large: state is not positive")
    return rho


def build_hamiltonian(spec: dict, path: str = "$.hamiltonian"):
    """Returns (H, factors or None, composite mode)."""
    kind = spec["type"]
    if kind == "explicit":
        m = complex_matrix(spec["matrix"], path + ".matrix")
        if m.shape[0] != m.shape[1]:
            raise ConfigError(path + ".matrix", f"matrix must be square, got {m.shape}")
        try:
            return hermitize(m), None, "single"
        except ValueError as exc:
            raise ConfigError(path + ".matrix", str(exc)) from None
    if kind == "diag":
        return np.diag(np.asarray(spec["values"], dtype=float)).astype(complex), None, "single"
    if kind == "oscillator":
        h, *_ = oscillator_operators(spec["levels"], spec.get("omega", 1.0))
        return h, None, "single"
    if kind == "two_level":
        return np.diag([float(spec["E1"]), float(spec["E2"])]).astype(complex), None, "single"
    factors = []
    for i, f in enumerate(spec["factors"]):
        hf, sub, _ = build_hamiltonian(f, f"{path}.factors[{i}]")
        if sub is not None:
            raise ConfigError(f"{path}.factors[{i}]", "nested composites are not supported")
        factors.append(hf)
    h1, h2 = factors
    joint = np.kron(h1, np.eye(h2.shape[0])) + np.kron(np.eye(h1.shape[0]), h2)
    return joint, (h1, h2), spec["mode"]


def build_state(spec: dict, h: np.ndarray, path: str = "$.initial_state") -> np.ndarray:
    d = h.shape[0]
    kind = spec["type"]
    if kind == "explicit":
        m = complex_matrix(spec["matrix"], path + ".matrix")
        if m.shape != (d, d):
            raise ConfigError(path + ".matrix", f"shape {m.shape} does not match hamiltonian dimension {d}")
        try:
            rho = np.array(DensityMatrix(m).entries)
        except ValueError as exc:
            raise ConfigError(path + ".matrix", str(exc)) from None
        return rho / np.trace(rho).real
    if kind == "gibbs":
        return gibbs_density(h, spec["beta"])
    if kind == "pure":
        psi = complex_vector(spec["vector"])
        if psi.size != d:
            raise ConfigError(path + ".vector", f"length {psi.size} does not match hamiltonian dimension {d}")
        n = np.linalg.norm(psi)
        if n == 0:
            raise ConfigError(path + ".vector", "zero vector")
        psi = psi / n
        return np.outer(psi, psi.conj())
    if kind == "random_mixed":
        if spec["rank"] > d:
            raise ConfigError(path + ".rank", f"rank {spec['rank']} exceeds dimension {d}")
        return np.array(random_mixed(d, spec["rank"], spec["seed"]).entries)
    if kind == "near_gibbs":
        return near_gibbs(h, spec["beta"], spec["scale"], spec["seed"])
    raise ConfigError(path + ".type", f"state type {kind!r} is not valid here")


@dataclass
class Scenario:
    """A validated configuration turned into library objects."""

    raw: dict
    model: ModelSpec
    integrator: IntegratorConfig
    initial: object  # density matrix, or (rho1, rho2) for composites
    picture: str = "schrodinger"
    prefix: str = "trajectory"
    states_json: bool = False

    @property
    def composite(self) -> bool:
        return self.model.composite_mode != "single"


def override_seeds(data: dict, seed: int) -> dict:
    """Copy of ``data`` with every ``seed`` field replaced."""
    out = copy.deepcopy(data)

    def walk(node):
        if isinstance(node, dict):
            if "seed" in node:
                node["seed"] = int(seed)
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)

    walk(out)
    return out


def load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("$", f"cannot read config: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None


def parse(data: dict, seed: int | None = None) -> Scenario:
    if seed is not None:
        data = override_seeds(data, seed)
    validate(data)
    h, factors, mode = build_hamiltonian(data["hamiltonian"])

    em_spec = data.get("entropy_model", {"name": "von_neumann"})
    if em_spec["name"] == "tsallis":
        if "q" not in em_spec:
            raise ConfigError("$.entropy_model", "'q' is a required property")
        if em_spec["q"] == 1:
            raise ConfigError("$.entropy_model.q", "q must differ from 1")
        em = EntropyModel.tsallis(em_spec["q"])
    else:
        em = EntropyModel.von_neumann()
    sp = data.get("sigma_policy", {"name": "constant"})
    sigma = SigmaPolicy.constant(sp.get("value", 1.0))

    constraints = []
    for i, c in enumerate(data.get("constraints", [])):
        m = complex_matrix(c, f"$.constraints[{i}]")
        if m.shape != h.shape:
            raise ConfigError(f"$.constraints[{i}]", f"shape {m.shape} does not match hamiltonian {h.shape}")
        try:
            constraints.append(hermitize(m))
        except ValueError as exc:
            raise ConfigError(f"$.constraints[{i}]", str(exc)) from None

    units = UnitsConfig(**data.get("units", {}))
    try:
        integ = IntegratorConfig(**data.get("integrator", {}))
    except ValueError as exc:
        raise ConfigError("$.integrator", str(exc)) from None

    try:
        if factors is None:
            model = ModelSpec(h, entropy_model=em, sigma_policy=sigma,
                              constraints=ConstraintSet(tuple(constraints)), units=units)
        else:
            model = ModelSpec.composite(*factors, mode=mode, entropy_model=em, sigma_policy=sigma,
                                        constraints=ConstraintSet(tuple(constraints)), units=units)
    except ValueError as exc:
        raise ConfigError("$", str(exc)) from None

    initial = None
    state_spec = data.get("initial_state")
    if state_spec is not None:
        if factors is None:
            if state_spec["type"] == "product":
                raise ConfigError("$.initial_state.type", "product states need a composite hamiltonian")
            initial = build_state(state_spec, h)
        else:
            if state_spec["type"] != "product":
                raise ConfigError("$.initial_state.type", "composite hamiltonians need a product initial state")
            initial = tuple(build_state(s, f, f"$.initial_state.factors[{i}]")
                            for i, (s, f) in enumerate(zip(state_spec["factors"], factors)))

    outputs = data.get("outputs", {})
    return Scenario(data, model, integ, initial, data.get("picture", "schrodinger"),
                    outputs.get("prefix", "trajectory"), outputs.get("states_json", False))
