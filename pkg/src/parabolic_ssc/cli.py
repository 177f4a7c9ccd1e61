"""Command-line front end.

    parabolic-ssc solve        --config run.json [--out DIR] [--seed N] [--quiet]
    parabolic-ssc check-kkt    --config run.json [--triplet DIR]
    parabolic-ssc check-ssc    --config run.json [--triplet DIR]
    parabolic-ssc gradcheck    --config run.json
    parabolic-ssc convergence  --config run.json

Exit codes: 0 success, 1 usage/config/IO error, 2 penalty path stalled,
3 a condition check failed, 4 cone sampling found no directions.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import calculus, conditions, testbeds
from .expr import ExpressionError, compile_expression
from .grid import SpaceTimeGrid
from .optimizer import PathStalled, SolveOpts, solve_ocp
from .pde_adjoint import MeasurePair, SignViolation
from .problem import (Bilateral, CubicOdd, ExpWeighted, InvalidProblem, LinearRate, ProblemSpec,
                      QuadraticCost, UpperOnly, Zero, ZeroCost, require_valid)

EXIT_OK, EXIT_USAGE, EXIT_STALLED, EXIT_CHECK, EXIT_EMPTY = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


# --- config schema ----------------------------------------------------------------

_PROBLEM_KEYS = {"preset", "dimension", "diffusion", "convection", "nonlinearity", "cost", "nu",
                 "alpha", "beta", "gamma", "gamma_min", "gamma_max", "y0", "p"}
_NONLIN_KEYS = {"type", "c", "g"}
_COST_KEYS = {"type", "y_d", "weight"}
_GRID_KEYS = {"nodes", "nt", "T", "lengths"}
_SOLVER_KEYS = {f.name for f in fields(SolveOpts)} - {"newton"}
_TOL_KEYS = {f.name for f in fields(conditions.KktTolerances)} - {"eps_act"}
_COND_KEYS = {"tau", "n_samples", "seed", "eps_act", "tolerances", "radii", "n_per_radius", "u0"}
_GRAD_KEYS = {"control", "directions", "step", "tol", "measure_Q", "measure_Omega"}
_CONV_KEYS = {"space", "time", "min_order"}
_OUTPUT_KEYS = {"directory", "formats"}
_TOP_KEYS = {"problem", "grid", "solver", "conditions", "gradcheck", "convergence", "output"}

_CONDITION_DEFAULTS = {"tau": [1e-3], "n_samples": 200, "seed": 0, "eps_act": 1e-6, "tolerances": {},
                       "radii": [1e-2, 1e-3], "n_per_radius": 20, "u0": None}
_GRAD_DEFAULTS = {"control": "0", "directions": 10, "step": 1e-4, "tol": 1e-5,
                  "measure_Q": None, "measure_Omega": None}
_CONV_DEFAULTS = {"space": {"nodes": [9, 17, 33, 65], "nt": 16},
                  "time": {"nodes": 9, "nt": [16, 32, 64, 128]},
                  "min_order": {"space": 1.9, "time": 0.9}}


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _reject_unknown(block: dict, allowed: set, where: str, text: str, path: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: block {where!r} must be an object")
    for key in sorted(set(block) - allowed):
        line = _line_of(text, key)
        anchor = f"{path}:{line}" if line else path
        raise ConfigError(f"{anchor}: unknown key {key!r} in {where}")


def load_config(path) -> dict:
    """Read and schema-check a JSON run configuration; errors name the file and line."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    _reject_unknown(cfg, _TOP_KEYS, "top level", text, path)
    checks = [("problem", _PROBLEM_KEYS), ("grid", _GRID_KEYS), ("solver", _SOLVER_KEYS),
              ("conditions", _COND_KEYS), ("gradcheck", _GRAD_KEYS), ("convergence", _CONV_KEYS),
              ("output", _OUTPUT_KEYS)]
    for name, keys in checks:
        if name in cfg:
            _reject_unknown(cfg[name], keys, name, text, path)
    prob = cfg.get("problem", {})
    if isinstance(prob.get("nonlinearity"), dict):
        _reject_unknown(prob["nonlinearity"], _NONLIN_KEYS, "problem.nonlinearity", text, path)
    if isinstance(prob.get("cost"), dict):
        _reject_unknown(prob["cost"], _COST_KEYS, "problem.cost", text, path)
    if "tolerances" in cfg.get("conditions", {}):
        _reject_unknown(cfg["conditions"]["tolerances"], _TOL_KEYS, "conditions.tolerances", text, path)
    return resolve(cfg)


def resolve(cfg: dict) -> dict:
    """Fill defaults so reports can carry the complete effective configuration."""
    out = copy.deepcopy(cfg)
    cond = dict(_CONDITION_DEFAULTS)
    cond.update(out.get("conditions", {}))
    out["conditions"] = cond
    grad = dict(_GRAD_DEFAULTS)
    grad.update(out.get("gradcheck", {}))
    out["gradcheck"] = grad
    conv = copy.deepcopy(_CONV_DEFAULTS)
    for k, v in out.get("convergence", {}).items():
        conv[k] = v
    out["convergence"] = conv
    outb = {"directory": "out", "formats": ["txt"]}
    outb.update(out.get("output", {}))
    bad = set(outb["formats"]) - {"txt", "npz"} if isinstance(outb["formats"], list) else {outb["formats"]}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(map(str, bad))} (txt, npz)")
    out["output"] = outb
    out.setdefault("solver", {})
    return out


def _num(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if value in ("inf", "-inf"):
            return float(value)
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def build_problem(cfg: dict) -> tuple[ProblemSpec, SpaceTimeGrid]:
    prob = cfg.get("problem")
    if prob is None:
        raise ConfigError("config has no problem block")
    base = None
    if "preset" in prob:
        if prob["preset"] not in testbeds.REGISTRY:
            raise ConfigError(f"unknown preset {prob['preset']!r}; choose from {sorted(testbeds.REGISTRY)}")
        base = testbeds.REGISTRY[prob["preset"]]()
    try:
        spec = _spec_from_block(prob, base.spec if base else None)
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from None
    grid = _grid_from_block(cfg.get("grid"), spec.n, base.grid if base else None)
    return spec, grid


def _spec_from_block(prob: dict, base: ProblemSpec | None) -> ProblemSpec:
    if base is None:
        dim = int(prob.get("dimension", 1))
        if dim < 1:
            raise ConfigError("dimension must be >= 1")
        diff = prob.get("diffusion", 1.0)
        a = np.eye(dim) * float(diff) if isinstance(diff, (int, float)) else np.asarray(diff, dtype=float)
        spec = ProblemSpec(diffusion=a)
    else:
        spec = base
    dim = spec.n
    upd = {}
    if "diffusion" in prob and base is not None:
        diff = prob["diffusion"]
        upd["diffusion"] = np.eye(dim) * float(diff) if isinstance(diff, (int, float)) else np.asarray(diff, float)
    for key in ("nu", "alpha", "beta", "p"):
        if key in prob:
            upd[key] = _num(prob[key], key)
    if "gamma" in prob:
        upd["constraint"] = UpperOnly(_num(prob["gamma"], "gamma"))
    if "gamma_min" in prob or "gamma_max" in prob:
        if "gamma" in prob:
            raise ConfigError("give either gamma or gamma_min/gamma_max, not both")
        if not ("gamma_min" in prob and "gamma_max" in prob):
            raise ConfigError("bilateral bounds need both gamma_min and gamma_max")
        upd["constraint"] = Bilateral(_num(prob["gamma_min"], "gamma_min"), _num(prob["gamma_max"], "gamma_max"))
    if "y0" in prob:
        upd["y0"] = compile_expression(prob["y0"], dim, with_time=False)
    if "convection" in prob:
        comps = prob["convection"]
        if not isinstance(comps, list) or len(comps) != dim:
            raise ConfigError(f"convection needs a list of {dim} expressions")
        funcs = [compile_expression(c, dim) for c in comps]
        upd["convection"] = lambda x, t: np.stack([f(x, t) for f in funcs], axis=1)
    if "nonlinearity" in prob:
        upd["nonlinearity"] = _nonlinearity(prob["nonlinearity"], dim)
    if "cost" in prob:
        upd["cost"] = _cost(prob["cost"], dim)
    return replace(spec, **upd)


def _nonlinearity(block, dim):
    kind = block.get("type", "zero") if isinstance(block, dict) else block
    params = block if isinstance(block, dict) else {}
    if kind == "zero":
        return Zero()
    if kind == "linear":
        return LinearRate(_num(params.get("c", 1.0), "nonlinearity.c"))
    if kind == "cubic":
        return CubicOdd(_num(params.get("c", 1.0), "nonlinearity.c"))
    if kind == "exp":
        return ExpWeighted(compile_expression(params.get("g", "1"), dim))
    raise ConfigError(f"unknown nonlinearity type {kind!r} (zero, linear, cubic, exp)")


def _cost(block, dim):
    kind = block.get("type", "quadratic") if isinstance(block, dict) else block
    if kind == "zero":
        return ZeroCost()
    if kind == "quadratic":
        return QuadraticCost(compile_expression(block.get("y_d", "0"), dim),
                             _num(block.get("weight", 1.0), "cost.weight"))
    raise ConfigError(f"unknown cost type {kind!r} (zero, quadratic)")


def _grid_from_block(block, dim, base: SpaceTimeGrid | None) -> SpaceTimeGrid:
    if block is None:
        if base is None:
            raise ConfigError("config has no grid block")
        return base
    try:
        nodes = block.get("nodes", base.space.nodes if base else None)
        nt = block.get("nt", base.time.nt if base else None)
        if nodes is None or nt is None:
            raise ConfigError("grid needs nodes and nt")
        if isinstance(nodes, int):
            nodes = (nodes,) * dim
        return SpaceTimeGrid.uniform(tuple(nodes), int(nt), float(block.get("T", 1.0)), block.get("lengths"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid block: {exc}") from None


def build_solver(cfg: dict) -> SolveOpts:
    """SolveOpts from the solver block, on top of the preset's own defaults if any."""
    preset = cfg.get("problem", {}).get("preset")
    base = testbeds.REGISTRY[preset]().opts if preset in testbeds.REGISTRY else SolveOpts()
    try:
        return replace(base, **cfg.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver block: {exc}") from None


# --- output -----------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(path: Path, report: dict) -> None:
    atomic_write(path, json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")


def _header(grid: SpaceTimeGrid, rows: int) -> str:
    dims = " ".join(str(n) for n in grid.space.nodes)
    return f"# n {grid.space.n} dims {dims} T {grid.time.T!r} Nt {grid.time.nt} rows {rows}"


def write_field(path: Path, grid: SpaceTimeGrid, values: np.ndarray) -> None:
    values = np.atleast_2d(values)
    body = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in values)
    atomic_write(path, _header(grid, values.shape[0]) + "\n" + body + "\n")


def read_field(path: Path, grid: SpaceTimeGrid) -> np.ndarray:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read field ({exc.strerror})") from None
    if not lines or not lines[0].startswith("#"):
        raise ConfigError(f"{path}:1: missing field header")
    rows = int(lines[0].split()[-1])
    expect = _header(grid, rows)
    if lines[0].strip() != expect:
        raise ConfigError(f"{path}:1: header {lines[0]!r} does not match the configured grid ({expect!r})")
    try:
        data = np.array([[float(v) for v in ln.split()] for ln in lines[1:] if ln.strip()])
    except ValueError as exc:
        raise ConfigError(f"{path}: bad number ({exc})") from None
    if data.shape != (rows, grid.space.m):
        raise ConfigError(f"{path}: expected {rows} rows of {grid.space.m} values, got {data.shape}")
    return data


TRIPLET_FILES = {"u": "u.txt", "y": "y.txt", "phi": "phi.txt", "mu_Q": "mu_Q.txt", "mu_Omega": "mu_Omega.txt"}


def write_triplet(directory: Path, grid: SpaceTimeGrid, triplet, formats=("txt",)) -> None:
    """Field files are always written (the checkers read them); npz is an optional extra."""
    if triplet.y is None or triplet.phi is None:
        raise ValueError("triplet needs its state and adjoint before it can be written")
    if "npz" in formats:
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz")
        os.close(fd)
        np.savez(tmp, u=triplet.u, y=triplet.y, phi=triplet.phi, mu_Q=triplet.mu.mass_Q,
                 mu_Omega=triplet.mu.mass_Omega)
        os.replace(tmp, directory / "triplet.npz")
    write_field(directory / TRIPLET_FILES["u"], grid, triplet.u)
    write_field(directory / TRIPLET_FILES["y"], grid, triplet.y)
    write_field(directory / TRIPLET_FILES["phi"], grid, triplet.phi)
    write_field(directory / TRIPLET_FILES["mu_Q"], grid, triplet.mu.mass_Q)
    write_field(directory / TRIPLET_FILES["mu_Omega"], grid, triplet.mu.mass_Omega[None, :])


def read_triplet(directory: Path, grid: SpaceTimeGrid, bilateral: bool):
    d = {k: read_field(Path(directory) / f, grid) for k, f in TRIPLET_FILES.items()}
    mq, mo = d["mu_Q"], d["mu_Omega"][0]
    signed = bilateral or bool(np.any(mq < 0) or np.any(mo < 0))
    try:
        mu = MeasurePair(mq, mo, signed)
    except (ValueError, SignViolation) as exc:
        raise ConfigError(f"{directory}: invalid multiplier files ({exc})") from None
    return conditions.TripletData(d["u"], mu, d["y"], d["phi"])


# --- commands ---------------------------------------------------------------------


class _Run:
    def __init__(self, args):
        self.args = args
        self.cfg = load_config(args.config)
        if args.seed is not None:
            self.cfg["conditions"]["seed"] = args.seed
        self.out = Path(args.out or self.cfg["output"]["directory"])

    def problem(self):
        spec, grid = build_problem(self.cfg)
        try:
            require_valid(spec, grid)
        except InvalidProblem as exc:
            raise ConfigError(f"problem fails validation: {exc}") from None
        return spec, grid

    def say(self, msg: str) -> None:
        if not self.args.quiet:
            print(msg)

    def report(self, name: str, body: dict) -> Path:
        body = dict(body)
        body["config"] = self.cfg
        body["command"] = self.args.command
        path = self.out / name
        write_report(path, body)
        return path


def cmd_solve(run: _Run) -> int:
    spec, grid = run.problem()
    opts = build_solver(run.cfg)
    try:
        triplet = solve_ocp(spec, grid, opts)
    except PathStalled as exc:
        body = {"status": "stalled", "message": str(exc),
                "history": exc.triplet.history if exc.triplet else []}
        if exc.triplet is not None:
            write_triplet(run.out, grid, exc.triplet, run.cfg["output"]["formats"])
        run.report("history.json", body)
        run.say(f"stalled: {exc}")
        return EXIT_STALLED
    write_triplet(run.out, grid, triplet, run.cfg["output"]["formats"])
    run.report("history.json", {"status": "converged", "history": triplet.history})
    last = triplet.history[-1]
    run.say(f"converged: lam={last['lam']:.1e} stationarity={last['stationarity']:.2e} "
            f"feasibility={last['feasibility']:.2e} -> {run.out}")
    return EXIT_OK


def _triplet_dir(run: _Run) -> Path:
    return Path(run.args.triplet) if run.args.triplet else run.out


def _u0(run: _Run, grid):
    src = run.cfg["conditions"].get("u0")
    if src is None:
        return None
    return grid.sample(compile_expression(src, grid.space.n))


def cmd_check_kkt(run: _Run) -> int:
    spec, grid = run.problem()
    triplet = read_triplet(_triplet_dir(run), grid, spec.bilateral)
    cond = run.cfg["conditions"]
    try:
        tol = conditions.KktTolerances(eps_act=float(cond["eps_act"]), **cond["tolerances"])
    except TypeError as exc:
        raise ConfigError(f"invalid tolerances: {exc}") from None
    report = conditions.check_kkt(spec, grid, triplet, tol, u0=_u0(run, grid))
    run.report("kkt_report.json", {"kkt": report.to_dict(), "tolerances": tol.__dict__})
    run.say(f"kkt {'pass' if report.passed else 'FAIL'}: " + ", ".join(
        f"{k}={'ok' if v else 'fail'}" for k, v in report.flags.items()))
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_check_ssc(run: _Run) -> int:
    spec, grid = run.problem()
    triplet = read_triplet(_triplet_dir(run), grid, spec.bilateral)
    cond = run.cfg["conditions"]
    eps = float(cond["eps_act"])
    ctx = conditions.ConeContext(spec, grid, triplet, eps)
    reports = []
    try:
        for tau in cond["tau"]:
            reports.append(conditions.check_ssc(spec, grid, triplet, float(tau), int(cond["n_samples"]),
                                                int(cond["seed"]), eps, context=ctx).to_dict())
    except conditions.EmptySample as exc:
        run.report("ssc_report.json", {"status": "empty_sample", "message": str(exc), "ssc": reports})
        run.say(f"empty sample: {exc}")
        return EXIT_EMPTY
    ok = all(r["ssc_supported"] for r in reports)
    run.report("ssc_report.json", {"status": "supported" if ok else "failed", "ssc": reports})
    for r in reports:
        run.say(f"tau={r['tau']:g}: min_ratio={r['min_ratio']:.6g} over {r['n_samples']} directions "
                f"(nu={r['nu']:g}, nu-limit probe {r['nu_limit_diagnostic']:.6g})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_gradcheck(run: _Run) -> int:
    spec, grid = run.problem()
    g = run.cfg["gradcheck"]
    u = grid.sample(compile_expression(g["control"], grid.space.n))
    u[0] = 0.0
    mu = None
    if g["measure_Q"] is not None or g["measure_Omega"] is not None:
        mq = grid.sample(compile_expression(g["measure_Q"] or "0", grid.space.n))
        mq[0] = 0.0
        mo = compile_expression(g["measure_Omega"] or "0", grid.space.n)(grid.space.coords, grid.time.T)
        mu = MeasurePair(mq, mo, signed=spec.bilateral or bool(np.any(mq < 0) or np.any(mo < 0)))
        if mu.signed and not spec.bilateral:
            raise ConfigError("gradcheck measure must be nonnegative for an upper bound")
    cases = {"J": calculus.gradient_check(spec, grid, u, None, int(g["directions"]), float(g["step"]),
                                          int(run.cfg["conditions"]["seed"]))}
    if mu is not None:
        cases["lagrangian"] = calculus.gradient_check(spec, grid, u, mu, int(g["directions"]),
                                                      float(g["step"]), int(run.cfg["conditions"]["seed"]))
    worst = max(c["max_relative_error"] for c in cases.values())
    ok = worst <= float(g["tol"])
    run.report("gradcheck.json", {"cases": cases, "max_relative_error": worst, "tol": g["tol"], "pass": ok})
    run.say(f"gradcheck {'pass' if ok else 'FAIL'}: max relative error {worst:.3e} (tol {g['tol']:g})")
    return EXIT_OK if ok else EXIT_CHECK


def _orders(errors, ratio=2.0):
    return [math.log(a / b) / math.log(ratio) if a > 0 and b > 0 else None for a, b in zip(errors, errors[1:])]


def _nested(levels) -> bool:
    return all(b - 1 == 2 * (a - 1) for a, b in zip(levels, levels[1:]))


def cmd_convergence(run: _Run) -> int:
    conv = run.cfg["convergence"]
    sp_nodes = [int(n) for n in conv["space"]["nodes"]]
    tm_steps = [int(n) for n in conv["time"]["nt"]]
    if not _nested(sp_nodes):
        raise ConfigError(f"spatial levels {sp_nodes} are not nested (each must be 2 (n-1) + 1 of the previous)")
    if not all(b == 2 * a for a, b in zip(tm_steps, tm_steps[1:])):
        raise ConfigError(f"temporal levels {tm_steps} are not nested (each must double the previous)")
    space_rows = []
    for n in sp_nodes:
        grid = SpaceTimeGrid.uniform(n, int(conv["space"]["nt"]))
        space_rows.append({"nodes": n, "h": 1.0 / (n - 1), "error": testbeds.manufactured_error(grid, "space")})
    time_rows = []
    for nt in tm_steps:
        grid = SpaceTimeGrid.uniform(int(conv["time"]["nodes"]), nt)
        time_rows.append({"nt": nt, "dt": 1.0 / nt, "error": testbeds.manufactured_error(grid, "time")})
    so = _orders([r["error"] for r in space_rows])
    to = _orders([r["error"] for r in time_rows])
    for r, o in zip(space_rows[1:], so):
        r["order"] = o
    for r, o in zip(time_rows[1:], to):
        r["order"] = o
    space_rows[0]["order"] = None
    time_rows[0]["order"] = None
    mins = conv["min_order"]
    ok = all(o is not None and o >= mins["space"] for o in so) and all(
        o is not None and o >= mins["time"] for o in to)
    run.report("convergence.json", {"space": space_rows, "time": time_rows, "pass": ok})
    run.say("space orders: " + (", ".join(f"{o:.3f}" for o in so) or "-")
            + "; time orders: " + (", ".join(f"{o:.3f}" for o in to) or "-"))
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"solve": cmd_solve, "check-kkt": cmd_check_kkt, "check-ssc": cmd_check_ssc,
            "gradcheck": cmd_gradcheck, "convergence": cmd_convergence}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parabolic-ssc", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--seed", type=int, help="overrides conditions.seed")
    parser.add_argument("--triplet", help="directory holding u/y/phi/mu files (default: output directory)")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        run = _Run(args)
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
