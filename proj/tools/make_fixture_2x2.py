#!/usr/bin/env python3
"""Writes the 2x2 discrete DGP fixture and its hand-enumerated counterfactual CDFs.

Usage: make_fixture_2x2.py OUT_DIR

The CDF of each chain step is enumerated directly from the cell tables:
    F(y) = sum_b p_v(b) sum_a p_s(a | b) F_t(y | a, b)
with block A = {a} swapped first (conditioned on B) and block B = {b}.
"""

import csv
import json
import sys
from fractions import Fraction as Fr
from pathlib import Path

PERIODS = ("base", "comparison")
SUPPORT = [1.0, 2.0, 3.0]

# (a, b) -> ((P_base, P_comparison), (outcome probs base, outcome probs comparison))
CELLS = {
    (0, 0): ((Fr(4, 10), Fr(2, 10)), ([Fr(5, 10), Fr(3, 10), Fr(2, 10)], [Fr(4, 10), Fr(4, 10), Fr(2, 10)])),
    (1, 0): ((Fr(1, 10), Fr(2, 10)), ([Fr(2, 10), Fr(5, 10), Fr(3, 10)], [Fr(1, 10), Fr(5, 10), Fr(4, 10)])),
    (0, 1): ((Fr(3, 10), Fr(25, 100)), ([Fr(3, 10), Fr(3, 10), Fr(4, 10)], [Fr(2, 10), Fr(3, 10), Fr(5, 10)])),
    (1, 1): ((Fr(2, 10), Fr(35, 100)), ([Fr(1, 10), Fr(2, 10), Fr(7, 10)], [Fr(1, 10), Fr(1, 10), Fr(8, 10)])),
}


def dgp_document():
    cells = []
    for (a, b), (prob, laws) in CELLS.items():
        cells.append({
            "covariates": [a, b],
            "probability": [float(p) for p in prob],
            "outcome": [{"kind": "discrete", "values": SUPPORT, "probs": [float(q) for q in law]} for law in laws],
        })
    return {
        "kind": "discrete",
        "n": 20000,
        "seed": 17,
        "schema": {
            "columns": [{"name": "a", "kind": "dummy"}, {"name": "b", "kind": "dummy"}],
            "blocks": [{"name": "A", "columns": ["a"]}, {"name": "B", "columns": ["b"]}],
            "interactions": [["a", "b"]],
            "intercept": True,
        },
        "cells": cells,
    }


def cell_cdf(t, a, b, y):
    law = CELLS[(a, b)][1][t]
    return sum((q for v, q in zip(SUPPORT, law) if v <= y), Fr(0))


def p_b(v, b):
    return sum(CELLS[(a, b)][0][v] for a in (0, 1))


def p_a_given_b(s, a, b):
    return CELLS[(a, b)][0][s] / p_b(s, b)


def counterfactual(t, s, v, y):
    return sum(p_b(v, b) * sum(p_a_given_b(s, a, b) * cell_cdf(t, a, b, y) for a in (0, 1)) for b in (0, 1))


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "dgp_2x2.json").write_text(json.dumps(dgp_document(), indent=2) + "\n")
    b, c = 0, 1
    chain = [(c, c, c), (c, b, c), (c, b, b), (b, b, b)]
    points = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
    with open(out / "dgp_2x2_cdf.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["spec", "y", "cdf"])
        for t, s, v in chain:
            label = f"({PERIODS[t]}; {PERIODS[s]}, {PERIODS[v]})"
            for y in points:
                w.writerow([label, repr(y), repr(float(counterfactual(t, s, v, y)))])


if __name__ == "__main__":
    main()
