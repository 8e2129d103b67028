"""Command-line entry point and data export.

Exit codes: 0 success, 2 configuration error, 3 integration failure,
4 invariant violation found in the recorded diagnostics.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfg
from .dynamics import CompositeTrajectory, Trajectory, evolve
from .equilibrium import SupportSpectrum, gibbs_density, gibbs_solution, solve_beta
from .errors import ConfigError, InfeasibleEnergyError, IntegrationError, PreconditionError
from .linearized import LinearizedModel, linear_propagate, rate_matrix

log = logging.getLogger("seadyn")

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_INVARIANT = 0, 2, 3, 4
COMMANDS = ("evolve", "equilibrium", "linearize", "compare", "contact")

TRACE_TOL = 1e-9
ENERGY_TOL = 1e-7
ENTROPY_TOL = 1e-9


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if not isinstance(x, (int, np.integer)) else str(int(x)) for x in row])


def write_trajectory_csv(traj: Trajectory, path) -> None:
    d = traj.eigenvalues.shape[1]
    n_c = traj.constraint_averages.shape[1]
    header = ["t", "trace", "energy", "entropy", "entropy_production", "zeta"]
    header += [f"eig_{i + 1}" for i in range(d)] + [f"c_{j + 1}" for j in range(n_c)]
    rows = (
        [traj.times[k], traj.trace[k], traj.energy[k], traj.entropy[k], traj.entropy_production[k], traj.zeta[k],
         *traj.eigenvalues[k], *traj.constraint_averages[k]]
        for k in range(len(traj))
    )
    write_csv(Path(path), header, rows)


def write_states_json(times, states, path) -> None:
    payload = {"samples": [{"t": float(t), "state": {"dim": int(s.shape[0]), "entries": cfg.matrix_to_pairs(s)}}
                           for t, s in zip(times, states)]}
    Path(path).write_text(json.dumps(payload))


def read_states_json(path) -> tuple[np.ndarray, np.ndarray]:
    data = json.loads(Path(path).read_text())
    times = np.array([s["t"] for s in data["samples"]])
    states = np.array([cfg.complex_matrix(s["state"]["entries"], "$") for s in data["samples"]])
    return times, states


def write_composite_csv(traj: CompositeTrajectory, path) -> None:
    header = ["t", "trace_1", "trace_2", "energy_1", "energy_2", "entropy_1", "entropy_2",
              "purity_1", "purity_2", "zeta_1", "zeta_2"]
    cols = [traj.times, traj.trace1, traj.trace2, traj.energy1, traj.energy2, traj.entropy1, traj.entropy2,
            traj.purity1, traj.purity2, traj.zeta1, traj.zeta2]
    write_csv(Path(path), header, zip(*cols))


@dataclass
class RunResult:
    status: int
    artifacts: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def trajectory_violations(traj: Trajectory, energy_range: float) -> list[str]:
    out = []
    if np.max(np.abs(traj.trace - 1.0)) > TRACE_TOL:
        out.append(f"trace drift {np.max(np.abs(traj.trace - 1.0)):.3e}")
    drift = np.max(np.abs(traj.energy - traj.energy[0]))
    if drift > ENERGY_TOL * max(energy_range, 1e-300):
        out.append(f"energy drift {drift:.3e}")
    if len(traj) > 1 and np.min(np.diff(traj.entropy)) < -ENTROPY_TOL:
        out.append(f"entropy decrease {np.min(np.diff(traj.entropy)):.3e}")
    if np.min(traj.entropy_production) < -1e-12:
        out.append("negative entropy production")
    return out


def _range(h) -> float:
    w = np.linalg.eigvalsh(h)
    return float(w[-1] - w[0])


def _need_state(sc: cfg.Scenario):
    if sc.initial is None:
        raise ConfigError("$.initial_state", "this command needs an initial_state")


def _evolve(sc: cfg.Scenario, out: Path) -> RunResult:
    _need_state(sc)
    if sc.composite:
        raise ConfigError("$.hamiltonian.type", "use the contact command for composite hamiltonians")
    csv_path = out / f"{sc.prefix}.csv"
    try:
        traj = evolve(sc.initial, sc.model, sc.integrator, picture=sc.picture)
        status = EXIT_OK
    except IntegrationError as exc:
        log.error("integration failed: %s", exc)
        traj, status = exc.trajectory, EXIT_INTEGRATION
    res = RunResult(status)
    if traj is not None and len(traj):
        write_trajectory_csv(traj, csv_path)
        res.artifacts.append(csv_path)
        if sc.states_json:
            js = out / f"{sc.prefix}_states.json"
            write_states_json(traj.times, traj.states, js)
            res.artifacts.append(js)
        res.summary = {"status": traj.status, "samples": len(traj), "final_entropy": float(traj.entropy[-1])}
    if status == EXIT_OK:
        res.violations = trajectory_violations(traj, _range(sc.model.hamiltonian))
        if res.violations:
            res.status = EXIT_INVARIANT
    return res


def _equilibrium(sc: cfg.Scenario, out: Path) -> RunResult:
    h = sc.model.hamiltonian
    levels = np.linalg.eigvalsh(h)
    spectrum = SupportSpectrum.from_levels(levels)
    req = sc.raw.get("equilibrium")
    if req is None:
        _need_state(sc)
        if sc.composite:
            raise ConfigError("$.equilibrium", "give an energy or beta for composite hamiltonians")
        req = {"energy": float(np.trace(h @ sc.initial).real)}
    if "energy" in req:
        try:
            sol = solve_beta(spectrum, req["energy"])
        except InfeasibleEnergyError as exc:
            raise ConfigError("$.equilibrium.energy", str(exc)) from None
    else:
        sol = gibbs_solution(spectrum, req["beta"])
    payload = {**sol.to_json(), "energies": list(spectrum.energies), "multiplicities": list(spectrum.multiplicities)}
    path = out / f"{sc.prefix}_equilibrium.json"
    path.write_text(json.dumps(payload, indent=2))
    return RunResult(EXIT_OK, [path], summary=payload)


def _linear_setup(sc: cfg.Scenario):
    _need_state(sc)
    if sc.composite:
        raise ConfigError("$.hamiltonian.type", "linearization needs a single system")
    h = sc.model.hamiltonian
    opts = sc.raw.get("linearize", {})
    rho0 = sc.initial
    if "beta" in opts:
        beta = opts["beta"]
    else:
        beta = solve_beta(SupportSpectrum.from_levels(np.linalg.eigvalsh(h)), float(np.trace(h @ rho0).real)).beta
    sigma_eq = opts.get("sigma_eq", sc.model.sigma_policy.evaluate(gibbs_density(h, beta), h))
    model = LinearizedModel.from_hamiltonian(h, beta, sigma_eq)
    delta0 = model.to_eigenbasis(rho0 - gibbs_density(h, beta))
    try:
        linear_propagate(delta0, 0.0, model)
    except PreconditionError as exc:
        raise ConfigError("$.linearize.beta", f"deviation from the Gibbs state is not admissible: {exc}") from None
    return model, delta0


def _pair_columns(d: int) -> list[tuple[int, int]]:
    return [(m, n) for m in range(d) for n in range(m, d)]


def _linearize(sc: cfg.Scenario, out: Path) -> RunResult:
    model, delta0 = _linear_setup(sc)
    d = model.dim
    lam = rate_matrix(model)
    rates = out / f"{sc.prefix}_rates.csv"
    write_csv(rates, ["mu", "nu", "lambda"], ((m, n, lam[m, n]) for m in range(d) for n in range(d)))
    pairs = _pair_columns(d)
    header = ["t"] + [f"d_{m + 1}_{n + 1}_{part}" for m, n in pairs for part in ("re", "im")]
    times = sc.integrator.sample_times()

    def rows():
        for t in times:
            dt = linear_propagate(delta0, t, model)
            yield [t] + [x for m, n in pairs for x in (dt[m, n].real, dt[m, n].imag)]

    lin = out / f"{sc.prefix}_linear.csv"
    write_csv(lin, header, rows())
    return RunResult(EXIT_OK, [rates, lin], summary={"beta": model.beta, "sigma_eq": model.sigma_eq})


def fitted_rates(times, deviations) -> np.ndarray:
    """Least-squares slopes of -ln|Delta_mu_nu(t)| per element (NaN where the element vanishes)."""
    mags = np.abs(deviations)
    d = mags.shape[1]
    out = np.full((d, d), np.nan)
    for m in range(d):
        for n in range(d):
            y = mags[:, m, n]
            if np.all(y > 1e-14):
                out[m, n] = -np.polyfit(times, np.log(y), 1)[0]
    return out


def _compare(sc: cfg.Scenario, out: Path) -> RunResult:
    model, delta0 = _linear_setup(sc)
    h = sc.model.hamiltonian
    try:
        traj = evolve(sc.initial, sc.model, sc.integrator, picture=sc.picture)
        status = EXIT_OK
    except IntegrationError as exc:
        log.error("integration failed: %s", exc)
        traj, status = exc.trajectory, EXIT_INTEGRATION
    rho_eq = gibbs_density(h, model.beta)
    dev = np.array([model.to_eigenbasis(s - rho_eq) for s in traj.states])
    lin = np.array([linear_propagate(delta0, t, model, hbar=sc.model.hbar) for t in traj.times])
    pairs = _pair_columns(model.dim)
    header = ["t"] + [f"{kind}_{m + 1}_{n + 1}" for m, n in pairs for kind in ("nonlinear", "linear")]
    path = out / f"{sc.prefix}_compare.csv"
    write_csv(path, header, ([t] + [x for m, n in pairs for x in (abs(dev[k, m, n]), abs(lin[k, m, n]))]
                              for k, t in enumerate(traj.times)))
    lam = rate_matrix(model)
    fit = fitted_rates(traj.times, dev)
    rpath = out / f"{sc.prefix}_compare_rates.csv"
    write_csv(rpath, ["mu", "nu", "lambda", "fitted", "rel_error"],
               ((m, n, lam[m, n], fit[m, n], fit[m, n] / lam[m, n] - 1.0) for m, n in pairs))
    res = RunResult(status, [path, rpath])
    rel = np.abs(fit / lam - 1.0)
    res.summary = {"max_rate_rel_error": float(np.nanmax(rel)) if np.any(np.isfinite(rel)) else None}
    if status == EXIT_OK:
        res.violations = trajectory_violations(traj, _range(h))
        if res.violations:
            res.status = EXIT_INVARIANT
    return res


def _contact(sc: cfg.Scenario, out: Path) -> RunResult:
    _need_state(sc)
    if not sc.composite:
        raise ConfigError("$.hamiltonian.type", "contact needs a composite hamiltonian")
    try:
        traj = evolve(sc.initial, sc.model, sc.integrator)
        status = EXIT_OK
    except IntegrationError as exc:
        log.error("integration failed: %s", exc)
        traj, status = exc.trajectory, EXIT_INTEGRATION
    path = out / f"{sc.prefix}_contact.csv"
    write_composite_csv(traj, path)
    res = RunResult(status, [path])
    if sc.states_json:
        for i, states in ((1, traj.states1), (2, traj.states2)):
            js = out / f"{sc.prefix}_states_{i}.json"
            write_states_json(traj.times, states, js)
            res.artifacts.append(js)
    h1, h2 = sc.model.factors
    scale = _range(h1) + _range(h2)
    if sc.model.composite_mode == "thermal_contact":
        drifts = {"total energy": traj.total_energy}
    else:
        drifts = {"energy 1": traj.energy1, "energy 2": traj.energy2}
    for name, series in drifts.items():
        d = float(np.max(np.abs(series - series[0])))
        if d > ENERGY_TOL * scale:
            res.violations.append(f"{name} drift {d:.3e}")
    for name, tr in (("trace 1", traj.trace1), ("trace 2", traj.trace2)):
        if np.max(np.abs(tr - 1.0)) > TRACE_TOL:
            res.violations.append(f"{name} drift")
    betas = []
    for states, h in ((traj.states1, h1), (traj.states2, h2)):
        rho = states[-1]
        e = float(np.trace(h @ rho).real)
        try:
            betas.append(solve_beta(SupportSpectrum.from_levels(np.linalg.eigvalsh(h)), e).beta)
        except ValueError:
            betas.append(float("nan"))
    res.summary = {"final_beta_1": betas[0], "final_beta_2": betas[1]}
    if status == EXIT_OK and res.violations:
        res.status = EXIT_INVARIANT
    return res


_HANDLERS = {"evolve": _evolve, "equilibrium": _equilibrium, "linearize": _linearize,
             "compare": _compare, "contact": _contact}


def run(command: str, data: dict, out_dir=".", seed: int | None = None) -> RunResult:
    """Execute one subcommand on a config dictionary, writing artifacts under ``out_dir``."""
    if command not in _HANDLERS:
        raise ValueError(f"unknown command {command!r}")
    sc = cfg.parse(data, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _HANDLERS[command](sc, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="seadyn", description="Steepest-entropy-ascent density-matrix dynamics")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="replaces every seed in the config")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        log.error("--seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    try:
        data = cfg.load(args.config)
        result = run(args.command, data, args.out, args.seed)
    except ConfigError as exc:
        log.error("config error at %s", exc)
        return EXIT_CONFIG
    if args.command == "equilibrium":
        print(json.dumps(result.summary))
    for v in result.violations:
        log.error("invariant violation: %s", v)
    if not args.quiet:
        for a in result.artifacts:
            log.info("wrote %s", a)
        if result.summary and args.command != "equilibrium":
            log.info(json.dumps(result.summary, default=str))
    return result.status


if __name__ == "__main__":
    sys.exit(main())
