#!/usr/bin/env python3
"""Solve an LP file written by flexride with scipy's HiGHS MILP interface.

Usage: highs_adapter.py MODEL.lp SOLUTION.sol

Only the LP subset that flexride emits is understood: one objective, rows
of `coef var` terms, a Bounds section of `lb <= var <= ub` lines, and the
Generals and Binaries name lists. The solution file has a `# objective`
header followed by one `name value` line per variable.
"""

import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

SECTIONS = {"maximize", "subject to", "bounds", "generals", "binaries", "end"}


def parse_terms(tokens):
    terms = []
    sign = 1.0
    k = 0
    while k < len(tokens):
        tok = tokens[k]
        if tok == "+":
            sign = 1.0
        elif tok == "-":
            sign = -1.0
        else:
            terms.append((sign * float(tok), tokens[k + 1]))
            sign = 1.0
            k += 1
        k += 1
    return terms


def parse_lp(text):
    section = None
    chunks = {"maximize": [], "subject to": [], "bounds": [], "generals": [], "binaries": []}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.lower() in SECTIONS:
            section = line.lower()
            continue
        if section is None or section == "end":
            raise ValueError(f"unexpected line outside a section: {line!r}")
        chunks[section].append(line)

    objective = parse_terms(" ".join(chunks["maximize"]).split(":", 1)[1].split())

    rows = []
    current = None
    for line in chunks["subject to"]:
        if ":" in line.split()[0]:
            if current is not None:
                rows.append(current)
            name, rest = line.split(":", 1)
            current = [name.strip(), rest]
        else:
            current[1] += " " + line
    if current is not None:
        rows.append(current)
    parsed_rows = []
    for name, body in rows:
        tokens = body.split()
        op, rhs = tokens[-2], float(tokens[-1])
        parsed_rows.append((name, parse_terms(tokens[:-2]), op, rhs))

    bounds = {}
    for line in chunks["bounds"]:
        lb, _, name, _, ub = line.split()
        bounds[name] = (float(lb), float(ub))
    generals = " ".join(chunks["generals"]).split()
    binaries = " ".join(chunks["binaries"]).split()
    return objective, parsed_rows, bounds, generals, binaries


def main(argv):
    if len(argv) != 3:
        sys.stderr.write(__doc__)
        return 2
    with open(argv[1]) as f:
        objective, rows, bounds, generals, binaries = parse_lp(f.read())

    names = generals + binaries
    index = {n: k for k, n in enumerate(names)}
    n = len(names)
    with open(argv[2], "w") as out:
        if n == 0:
            out.write("# objective 0\n")
            return 0

        c = np.zeros(n)
        for coef, var in objective:
            c[index[var]] -= coef

        lo = np.array([bounds[v][0] for v in generals] + [0.0] * len(binaries))
        hi = np.array([bounds[v][1] for v in generals] + [1.0] * len(binaries))

        constraints = []
        if rows:
            r_idx, c_idx, vals = [], [], []
            row_lo, row_hi = [], []
            for k, (_, terms, op, rhs) in enumerate(rows):
                for coef, var in terms:
                    r_idx.append(k)
                    c_idx.append(index[var])
                    vals.append(coef)
                row_lo.append(rhs if op in (">=", "=") else -np.inf)
                row_hi.append(rhs if op in ("<=", "=") else np.inf)
            a = coo_matrix((vals, (r_idx, c_idx)), shape=(len(rows), n)).tocsr()
            constraints.append(LinearConstraint(a, row_lo, row_hi))

        res = milp(
            c,
            constraints=constraints,
            integrality=np.ones(n),
            bounds=Bounds(lo, hi),
            options={"mip_rel_gap": 0.0, "disp": False},
        )
        if res.status == 2:
            out.write("# status infeasible\n")
            return 0
        if res.status != 0:
            sys.stderr.write(f"HiGHS did not prove optimality: {res.message}\n")
            return 1
        out.write(f"# objective {-res.fun!r}\n")
        for name, value in zip(names, res.x):
            out.write(f"{name} {int(round(value))}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
