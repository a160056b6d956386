"""Sweep the monomer source rate across the threshold R = 1.

For each lambda the moment ODE is run to t_end and the final polymer count
is printed next to R and the closed-form prediction.
"""

import argparse

import numpy as np

from prion_dynamics.model import Params, Threshold, disease_equilibrium_ode, threshold_classify
from prion_dynamics.ode import integrate_ode


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lam", type=float, nargs=2, default=[1.0, 10.0], metavar=("LO", "HI"))
    parser.add_argument("--steps", type=int, default=10)
    parser.add_argument("--t-end", type=float, default=200.0)
    args = parser.parse_args(argv)

    print(f"{'lambda':>8} {'R':>7} {'U(t_end)':>12} {'U* closed form':>15}")
    for lam in np.linspace(*args.lam, args.steps):
        p = Params(float(lam), 1.0, 1.0, 1.0, 1.0, 1.0)
        traj = integrate_ode(p, (0.5, p.lam, 1.0), args.t_end)
        if threshold_classify(p) is Threshold.SUPERCRITICAL:
            expected = disease_equilibrium_ode(p).U
        else:
            expected = 0.0
        print(f"{lam:8.3f} {p.R:7.3f} {traj.final.U:12.4e} {expected:15.6g}")


if __name__ == "__main__":
    main()
