"""Stand-in external solver for adapter tests: fake_solver.py LP SOL TIME_LIMIT [FORMAT]."""
import math
import sys

import highspy


def main(lp_path, sol_path, time_limit, fmt="simple"):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if time_limit != "inf":
        h.setOptionValue("time_limit", float(time_limit))
    h.readModel(lp_path)
    h.run()
    if fmt == "highs":
        h.writeSolution(sol_path, 0)
        return
    status = h.getModelStatus()
    info = h.getInfo()
    names = h.getLp().col_names_
    with open(sol_path, "w") as fh:
        if status == highspy.HighsModelStatus.kInfeasible:
            fh.write("status infeasible\n")
            return
        optimal = status == highspy.HighsModelStatus.kOptimal
        fh.write(f"status {'optimal' if optimal else 'feasible'}\n")
        fh.write(f"objective {info.objective_function_value!r}\n")
        bound = info.mip_dual_bound
        fh.write(f"bound {bound!r}\n" if math.isfinite(bound) else "")
        for name, value in zip(names, h.getSolution().col_value):
            fh.write(f"{name} {value!r}\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
