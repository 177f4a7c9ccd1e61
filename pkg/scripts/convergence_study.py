"""Observed orders of the state solver on manufactured solutions.

Space and time are refined separately, each against a forcing that makes the
other discretisation exact, so each order is measured without contamination.
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from parabolic_ssc.grid import SpaceTimeGrid
from parabolic_ssc.testbeds import manufactured_error


@dataclass
class Config:
    space_nodes: tuple = (9, 17, 33, 65, 129)
    space_nt: int = 16
    time_steps: tuple = (16, 32, 64, 128, 256)
    time_nodes: int = 9


def table(label, sizes, errors):
    print(f"{label:>6s} {'error':>12s} {'order':>7s}")
    for i, (s, e) in enumerate(zip(sizes, errors)):
        order = "" if i == 0 else f"{math.log2(errors[i - 1] / e):7.3f}"
        print(f"{s:6d} {e:12.4e} {order}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=5, help="number of refinement levels per study")
    n = ap.parse_args().levels
    cfg = Config()
    sp = cfg.space_nodes[:n]
    tm = cfg.time_steps[:n]
    table("nodes", sp, [manufactured_error(SpaceTimeGrid.uniform(k, cfg.space_nt), "space") for k in sp])
    print()
    table("nt", tm, [manufactured_error(SpaceTimeGrid.uniform(cfg.time_nodes, k), "time") for k in tm])
    print()
    both = [(k, 2 * (k - 1)) for k in sp]
    table("nodes", sp, [manufactured_error(SpaceTimeGrid.uniform(k, s), "continuous") for k, s in both])
    print("(last table: joint refinement, nt = 2 (nodes - 1), first order expected)")


if __name__ == "__main__":
    main()
