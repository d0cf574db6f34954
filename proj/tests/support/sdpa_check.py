#!/usr/bin/env python3
"""Independent check of an exported sparse SDPA (.dat-s) file.

Parses the file from scratch (ignoring comment lines) and solves the SDPA
dual problem  max tr(F0 Y) s.t. tr(Fi Y) = c_i, Y >= 0 block-diagonal  with
cvxpy. Prints one line:  <status> <objective>  where the objective is reported
in the exporter's primal convention (min c'v = -max tr(F0 Y)).
"""
import sys

import numpy as np
import cvxpy as cp


def parse_dats(path):
    entries = []
    header = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line[0] in '"*':
                continue
            header.append(line)
            if len(header) >= 3:
                break
        m = int(header[0].split()[0])
        nblocks = int(header[1].split()[0])
        sizes = []
        while len(sizes) < nblocks:
            sizes.extend(int(tok.strip('{}(),')) for tok in fh.readline().split()
                         if tok.strip('{}(),'))
        b = []
        while len(b) < m:
            b.extend(float(tok.strip('{}(),')) for tok in fh.readline().split()
                     if tok.strip('{}(),'))
        for line in fh:
            toks = line.split()
            if len(toks) != 5:
                continue
            entries.append((int(toks[0]), int(toks[1]), int(toks[2]), int(toks[3]),
                            float(toks[4])))
    return m, sizes, np.array(b), entries


def main():
    if len(sys.argv) < 2:
        print("usage: sdpa_check.py problem.dat-s [solver]", file=sys.stderr)
        return 2
    m, sizes, b, entries = parse_dats(sys.argv[1])
    solver = sys.argv[2] if len(sys.argv) > 2 else "CLARABEL"

    blocks = []
    for s in sizes:
        if s >= 0:
            blocks.append(cp.Variable((s, s), PSD=True))
        else:
            blocks.append(cp.Variable(-s, nonneg=True))

    F = {}  # matno -> list of (blk, i, j, v)
    for matno, blk, i, j, v in entries:
        F.setdefault(matno, []).append((blk - 1, i - 1, j - 1, v))

    def trace_term(matno):
        expr = 0
        for blk, i, j, v in F.get(matno, []):
            Y = blocks[blk]
            if sizes[blk] >= 0:
                expr = expr + (v * Y[i, j] if i == j else 2 * v * Y[i, j])
            else:
                assert i == j
                expr = expr + v * Y[i]
        return expr

    cons = [trace_term(k) == b[k - 1] for k in range(1, m + 1)]
    prob = cp.Problem(cp.Maximize(trace_term(0)), cons)
    try:
        if solver == "SCS":
            prob.solve(solver=cp.SCS, eps=1e-8, max_iters=200000)
        else:
            prob.solve(solver=getattr(cp, solver))
    except cp.error.SolverError:
        try:
            prob.solve(solver=cp.SCS, eps=1e-8, max_iters=200000)
        except cp.error.SolverError:
            print("solver_error nan")
            return 3

    status = prob.status or "unknown"
    val = prob.value
    if val is None or status in ("infeasible", "unbounded"):
        print(f"{status} nan")
        return 0
    # exporter convention: min c'v = -max tr(F0 Y)
    print(f"{status} {-val:.12g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
