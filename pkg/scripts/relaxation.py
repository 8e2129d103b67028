"""Relaxation of random mixed states towards the Gibbs state fixed by their energy.

Writes one trajectory CSV per seed and prints the final trace distance and the
fitted equilibrium beta against the bisection solution.
"""

import argparse
from pathlib import Path

import numpy as np

from seadyn.cli import write_trajectory_csv
from seadyn.config import random_mixed
from seadyn.dynamics import IntegratorConfig, ModelSpec, evolve
from seadyn.equilibrium import SupportSpectrum, gibbs_density, solve_beta, stationarity_check
from seadyn.operators import trace_distance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--t-end", type=float, default=50.0)
    ap.add_argument("--out", type=Path, default=Path("results/relaxation"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    h = np.diag(np.linspace(0.0, 2.0, args.dim))
    spectrum = SupportSpectrum.from_levels(np.diag(h))
    print("seed  beta_solved  beta_fitted  trace_distance  status")
    for seed in args.seeds:
        rho0 = random_mixed(args.dim, args.dim, seed).entries
        traj = evolve(rho0, ModelSpec(h), IntegratorConfig(t_end=args.t_end, record_every=0.5))
        write_trajectory_csv(traj, args.out / f"seed_{seed}.csv")
        beta = solve_beta(spectrum, traj.energy[0]).beta
        dist = trace_distance(traj.final_state, gibbs_density(h, beta))
        fitted = stationarity_check(traj.final_state, h).beta
        print(f"{seed:4d}  {beta:11.8f}  {fitted:11.8f}  {dist:14.3e}  {traj.status}")


if __name__ == "__main__":
    main()
