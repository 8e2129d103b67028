"""Two two-level factors in thermal contact and in adiabatic partition.

Prints the final per-factor temperatures for both modes and writes the
composite trajectories as CSV.
"""

import argparse
from pathlib import Path

import numpy as np

from seadyn.cli import write_composite_csv
from seadyn.dynamics import IntegratorConfig, ModelSpec, evolve_composite
from seadyn.equilibrium import SupportSpectrum, gibbs_density, solve_beta


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta1", type=float, default=0.5)
    ap.add_argument("--beta2", type=float, default=2.0)
    ap.add_argument("--t-end", type=float, default=30.0)
    ap.add_argument("--out", type=Path, default=Path("results/contact"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    h = np.diag([0.0, 1.0])
    two = SupportSpectrum((0.0, 1.0))
    r1, r2 = gibbs_density(h, args.beta1), gibbs_density(h, args.beta2)
    for mode in ("thermal_contact", "adiabatic", "isolated"):
        traj = evolve_composite(r1, r2, ModelSpec.composite(h, h, mode),
                                IntegratorConfig(t_end=args.t_end, record_every=0.5))
        write_composite_csv(traj, args.out / f"{mode}.csv")
        b1 = solve_beta(two, float(traj.energy1[-1])).beta
        b2 = solve_beta(two, float(traj.energy2[-1])).beta
        drift = np.ptp(traj.total_energy)
        print(f"{mode:16s} final beta {b1:.6f} / {b2:.6f}   total energy drift {drift:.2e}")


if __name__ == "__main__":
    main()
