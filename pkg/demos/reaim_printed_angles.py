"""Re-aim ADT branches that start from the printed bearing tables.

The printed angle tables do not all point at their intended rack: one
branch of ADT4 illuminates nothing. The aiming optimizer starts from those
bearings and searches a wide azimuth window until each branch serves
exactly its own rack, then keeps raising the weakest link.

    python3 demos/reaim_printed_angles.py [OUT_DIR]
"""

import sys
from pathlib import Path

from dcowc.optimize import optimize_aiming
from dcowc.run import parse_problem, write_solution

PROBLEM = Path(__file__).with_name("printed_angles.problem")


def main(out_dir=None):
    problem = parse_problem(PROBLEM.read_text(), PROBLEM.parent)
    sol = optimize_aiming(problem)
    print(f"{sol.evaluations} candidate aimings evaluated over {len(sol.history)} sweeps")
    print(f"feasible: {sol.feasible}")
    for (tx, b), (az, el, semi) in sorted(sol.branches.items()):
        before, after = sol.initial_snr.get((tx, b), 0.0), sol.snr[(tx, b)]
        print(f"  {tx} branch {b}: az {az:7.2f}  el {el:7.2f}  "
              f"SNR {before:10.3g} -> {after:10.3g}")
    print(f"weakest link now {sol.min_snr_db:.2f} dB (LoS-only evaluation)")
    if out_dir:
        write_solution(sol, problem, out_dir)
        print(f"solution.scene / solution.csv / summary.json written to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
