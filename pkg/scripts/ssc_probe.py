"""Second-order probes: the Tikhonov limit on fine grids and the tau dependence of the cone.

On the indefinite instance (negative tracking weight at u = 0) the sampled
minimum of the quadratic form is negative, while the highest-frequency
checkerboard direction sees almost no state response and its ratio tends
to nu under refinement.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from parabolic_ssc import testbeds
from parabolic_ssc.calculus import quadforms
from parabolic_ssc.conditions import ConeContext, check_ssc, nu_limit_probe, tau_sweep
from parabolic_ssc.optimizer import solve_ocp
from parabolic_ssc.pde_forward import solve_state


@dataclass
class Config:
    grids: tuple = ((17, 16), (33, 32), (65, 64), (129, 128))
    n: int = 100
    seed: int = 0
    sweep_testbed: str = "state_active_1d"


def nu_limit(cfg: Config):
    print("indefinite instance: ratio q(v)/|v|^2 for the checkerboard and the sampled minimum")
    print(f"{'grid':>10s} {'checker/nu':>11s} {'smooth/nu':>10s} {'min_ratio':>11s}")
    for nodes, nt in cfg.grids:
        tb, tr = testbeds.indefinite_1d(nodes, nt)
        g = tb.grid
        st = solve_state(tb.spec, g, tr.u)
        ctx = ConeContext(tb.spec, g, tr)
        smooth = g.sample(lambda x, t: np.sin(np.pi * x[:, 0]) + 0 * t)
        smooth[0] = 0
        V = np.stack([nu_limit_probe(g), smooth], axis=-1)
        q = quadforms(tb.spec, g, st, ctx.bar.phi, V)
        l2 = np.sum(g.weights[..., None] * V * V, axis=(0, 1))
        r = q / l2 / tb.spec.nu
        rep = check_ssc(tb.spec, g, tr, 1e-3, cfg.n, cfg.seed, context=ctx)
        print(f"{nodes:4d}x{nt:<5d} {r[0]:11.6f} {r[1]:10.3f} {rep.min_ratio:11.4g}")


def sweep(cfg: Config):
    tb = testbeds.REGISTRY[cfg.sweep_testbed]()
    tr = solve_ocp(tb.spec, tb.grid, tb.opts)
    print(f"\ntau sweep on {cfg.sweep_testbed}: min_ratio over {cfg.n} directions")
    for tau, val in tau_sweep(tb.spec, tb.grid, tr, (1e-1, 1e-2, 1e-3, 0.0), cfg.n, cfg.seed).items():
        print(f"  tau={tau:<8g} {'empty cone sample' if val is None else f'{val:.6g}'}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--max-nodes", type=int, default=129)
    a = ap.parse_args()
    cfg = Config(n=a.n)
    cfg.grids = tuple(g for g in cfg.grids if g[0] <= a.max_nodes)
    nu_limit(cfg)
    sweep(cfg)


if __name__ == "__main__":
    main()
