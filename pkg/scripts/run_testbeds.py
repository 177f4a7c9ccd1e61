"""Solve every registered testbed, then report first- and second-order diagnostics.

    python3 scripts/run_testbeds.py [--names state_active_1d cubic_1d] [--n 200] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict, dataclass, field

from parabolic_ssc import testbeds
from parabolic_ssc.conditions import check_kkt, check_ssc
from parabolic_ssc.optimizer import solve_ocp


@dataclass
class Config:
    names: list = field(default_factory=lambda: sorted(testbeds.REGISTRY))
    tau: float = 1e-3
    n: int = 200
    seed: int = 0


def run(cfg: Config) -> list[dict]:
    rows = []
    for name in cfg.names:
        tb = testbeds.REGISTRY[name]()
        t0 = time.perf_counter()
        tr = solve_ocp(tb.spec, tb.grid, tb.opts)
        t_solve = time.perf_counter() - t0
        kkt = check_kkt(tb.spec, tb.grid, tr, u0=tb.u0)
        ssc = check_ssc(tb.spec, tb.grid, tr, cfg.tau, cfg.n, cfg.seed)
        rows.append({
            "name": name, "grid": [*tb.grid.space.nodes, tb.grid.time.nt], "stages": len(tr.history),
            "solve_seconds": round(t_solve, 3), "kkt_pass": kkt.passed, "stationarity": kkt.stationarity,
            "feasibility": kkt.feasibility, "total_variation": kkt.total_variation,
            "slater_margin": kkt.slater_margin, "min_ratio": ssc.min_ratio, "nu": ssc.nu,
            "acceptance": ssc.acceptance_rate,
        })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--names", nargs="*")
    ap.add_argument("--tau", type=float, default=Config.tau)
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--json")
    a = ap.parse_args()
    cfg = Config(tau=a.tau, n=a.n, seed=a.seed)
    if a.names:
        cfg.names = a.names
    rows = run(cfg)
    print(f"{'testbed':20s} {'stages':>6s} {'kkt':>4s} {'stat':>9s} {'feas':>9s} {'TV(mu)':>9s} "
          f"{'min q/|v|^2':>12s} {'nu':>6s} {'accept':>6s}")
    for r in rows:
        print(f"{r['name']:20s} {r['stages']:6d} {('ok' if r['kkt_pass'] else 'FAIL'):>4s} "
              f"{r['stationarity']:9.1e} {r['feasibility']:9.1e} {r['total_variation']:9.3g} "
              f"{r['min_ratio']:12.6g} {r['nu']:6g} {r['acceptance']:6.2f}")
    if a.json:
        with open(a.json, "w") as fh:
            json.dump({"config": asdict(cfg), "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
