"""Grid refinement study for the upwind solver.

Prints the moment-closure error and the gap to the characteristics route
for a ladder of grid sizes, with the ratio between neighbouring levels.
"""

import argparse

from prion_dynamics.verify import moment_errors, moment_runs, oracle_gap


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ladder", type=int, nargs="+", default=[500, 1000, 2000])
    parser.add_argument("--t-end", type=float, default=20.0)
    args = parser.parse_args(argv)

    print(f"{'n':>6} {'moment err':>12} {'ratio':>7} {'oracle gap':>12} {'ratio':>7}")
    runs = moment_runs(tuple(args.ladder), t_end=args.t_end)
    prev_m = prev_o = None
    for n, run, traj in runs:
        m = max(moment_errors(run, traj))
        o = oracle_gap(n)[0]
        rm = f"{m / prev_m:7.3f}" if prev_m else " " * 7
        ro = f"{o / prev_o:7.3f}" if prev_o else " " * 7
        print(f"{n:6d} {m:12.4e} {rm} {o:12.4e} {ro}")
        prev_m, prev_o = m, o


if __name__ == "__main__":
    main()
