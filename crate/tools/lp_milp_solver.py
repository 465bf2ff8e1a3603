#!/usr/bin/env python3
"""Solve an LP-format MILP written by `ration` with scipy's HiGHS backend.

Usage: lp_milp_solver.py MODEL.lp SOLUTION.sol

Reads the subset of CPLEX LP emitted by the crate (Maximize, Subject To,
Bounds, Binary, End) and writes `name value` lines plus a `# status` line.
"""

import math
import sys
import warnings

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix


def number(tok):
    if tok in ("+inf", "inf"):
        return math.inf
    if tok == "-inf":
        return -math.inf
    return float(tok)


def terms(tokens):
    out = {}
    for i in range(0, len(tokens), 3):
        sign = -1.0 if tokens[i] == "-" else 1.0
        out[tokens[i + 2]] = out.get(tokens[i + 2], 0.0) + sign * number(tokens[i + 1])
    return out


def parse(text):
    statements = []
    section = None
    for line in text.splitlines():
        if not line.startswith(" "):
            section = line.strip()
        elif line.startswith("   "):
            statements[-1][1] += line
        else:
            statements.append([section, line])

    objective, rows, bounds, binaries, order = {}, [], {}, [], []

    def see(name):
        if name not in bounds and name not in binaries and name not in order:
            order.append(name)

    for section, stmt in statements:
        tok = stmt.split()
        if section == "Maximize":
            objective = terms(tok[1:])
            for name in objective:
                see(name)
        elif section == "Subject To":
            row = terms(tok[1:-2])
            rows.append((row, tok[-2], number(tok[-1])))
            for name in row:
                see(name)
        elif section == "Bounds":
            bounds[tok[2]] = (number(tok[0]), number(tok[4]))
            see(tok[2])
        elif section == "Binary":
            binaries.append(tok[0])
            see(tok[0])
        else:
            raise ValueError(f"unexpected section {section!r}")
    return objective, rows, bounds, binaries, order


def main(lp_path, sol_path):
    with open(lp_path) as f:
        objective, rows, bounds, binaries, names = parse(f.read())
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    binary = set(binaries)

    if n == 0:
        with open(sol_path, "w") as f:
            f.write("# status optimal\n")
        return 0

    c = np.zeros(n)
    for name, coef in objective.items():
        c[index[name]] = -coef  # milp minimises

    lower = np.zeros(n)
    upper = np.ones(n)
    integrality = np.zeros(n)
    for name, i in index.items():
        if name in binary:
            integrality[i] = 1
        else:
            lower[i], upper[i] = bounds.get(name, (0.0, math.inf))

    constraints = []
    if rows:
        a = lil_matrix((len(rows), n))
        lo = np.full(len(rows), -np.inf)
        hi = np.full(len(rows), np.inf)
        for r, (row, sense, rhs) in enumerate(rows):
            for name, coef in row.items():
                a[r, index[name]] = coef
            if sense in ("<=", "="):
                hi[r] = rhs
            if sense in (">=", "="):
                lo[r] = rhs
        constraints.append(LinearConstraint(a.tocsr(), lo, hi))

    # Budgets carry a 1e-9 relative margin for strict inequalities, below
    # HiGHS's default 1e-6 feasibility tolerance; tighten to its minimum.
    # scipy forwards the unknown keys to HiGHS and warns about them.
    options = {
        "mip_rel_gap": 0.0,
        "presolve": True,
        "mip_feasibility_tolerance": 1e-10,
        "primal_feasibility_tolerance": 1e-10,
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = milp(
            c,
            constraints=constraints,
            integrality=integrality,
            bounds=Bounds(lower, upper),
            options=options,
        )
    with open(sol_path, "w") as f:
        if res.x is None:
            f.write("# status infeasible\n" if res.status == 2 else "# status error\n")
            return 0
        f.write("# status optimal\n" if res.status == 0 else "# status feasible\n")
        for name, value in zip(names, res.x):
            if name in binary:
                value = round(float(value))
            else:
                value = float(value)
            f.write(f"{name} {value!r}\n")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.stderr.write(__doc__)
        sys.exit(2)
    sys.exit(main(sys.argv[1], sys.argv[2]))
