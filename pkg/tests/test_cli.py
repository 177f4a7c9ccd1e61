import json

import numpy as np
import pytest

from parabolic_ssc import calculus, cli


def write(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg, indent=2))
    return str(path)


def run(tmp_path, command, cfg, out="out", extra=()):
    return cli.main([command, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out), "--quiet", *extra])


LQ = {"problem": {"preset": "lq_interior_1d"}, "grid": {"nodes": 9, "nt": 8},
      "conditions": {"tau": [0.001], "n_samples": 20}}


@pytest.fixture(scope="module")
def solved_lq(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("lq")
    assert run(tmp, "solve", LQ) == 0
    return tmp


def test_solve_writes_triplet_and_history(solved_lq):
    out = solved_lq / "out"
    for name in ("u.txt", "y.txt", "phi.txt", "mu_Q.txt", "mu_Omega.txt", "history.json"):
        assert (out / name).exists()
    hist = json.loads((out / "history.json").read_text())
    assert hist["status"] == "converged" and hist["command"] == "solve"
    assert hist["config"]["conditions"]["n_samples"] == 20
    assert (out / "u.txt").read_text().startswith("# n 1")


def test_field_roundtrip_is_exact(tmp_path):
    from parabolic_ssc.grid import SpaceTimeGrid
    grid = SpaceTimeGrid.uniform(9, 4)
    vals = np.random.default_rng(0).standard_normal(grid.shape)
    cli.write_field(tmp_path / "f.txt", grid, vals)
    assert np.array_equal(cli.read_field(tmp_path / "f.txt", grid), vals)
    with pytest.raises(cli.ConfigError):
        cli.read_field(tmp_path / "f.txt", SpaceTimeGrid.uniform(9, 8))


def test_kkt_and_ssc_on_solved_triplet(solved_lq):
    cfg = write(solved_lq, LQ)
    out = str(solved_lq / "out")
    assert cli.main(["check-kkt", "--config", cfg, "--out", out, "--quiet"]) == 0
    assert cli.main(["check-ssc", "--config", cfg, "--out", out, "--quiet"]) == 0
    rep = json.loads((solved_lq / "out" / "ssc_report.json").read_text())
    assert rep["ssc"][0]["n_samples"] == 20 and rep["status"] == "supported"
    assert json.loads((solved_lq / "out" / "kkt_report.json").read_text())["kkt"]["pass"]


def test_tampered_multiplier_fails_kkt(solved_lq, tmp_path):
    src = solved_lq / "out"
    for f in src.iterdir():
        (tmp_path / f.name).write_bytes(f.read_bytes())
    lines = (tmp_path / "mu_Q.txt").read_text().splitlines()
    header, rows = lines[0], [r.split() for r in lines[1:]]
    rows[3][2] = "0.5"
    (tmp_path / "mu_Q.txt").write_text("\n".join([header] + [" ".join(r) for r in rows]) + "\n")
    assert run(tmp_path, "check-kkt", LQ, extra=("--triplet", str(tmp_path))) == 3


def test_broken_adjoint_fails_kkt(solved_lq, monkeypatch):
    real = calculus.pde_adjoint.solve_adjoint

    def broken(*a, **k):
        adj = real(*a, **k)
        adj.phi[1:] *= 1.01
        return adj

    monkeypatch.setattr(calculus.pde_adjoint, "solve_adjoint", broken)
    monkeypatch.setattr("parabolic_ssc.conditions.solve_adjoint", broken, raising=False)
    assert cli.main(["check-kkt", "--config", write(solved_lq, LQ), "--out", str(solved_lq / "out"),
                     "--quiet"]) == 3


def test_gradcheck_passes(tmp_path):
    cfg = dict(LQ, gradcheck={"control": "sin(pi*x)*t", "measure_Q": "0.1", "directions": 4})
    assert run(tmp_path, "gradcheck", cfg) == 0
    rep = json.loads((tmp_path / "out" / "gradcheck.json").read_text())
    assert set(rep["cases"]) == {"J", "lagrangian"} and rep["max_relative_error"] <= 1e-5


def test_malformed_json_names_line(tmp_path, capsys):
    assert run(tmp_path, "solve", '{\n  "problem": {"preset": "lq_interior_1d"},\n  oops\n}') == 1
    err = capsys.readouterr().err
    assert "run.json:3" in err


def test_unknown_key_names_line(tmp_path, capsys):
    text = '{\n  "problem": {\n    "preset": "lq_interior_1d",\n    "nuu": 1\n  }\n}'
    assert run(tmp_path, "solve", text) == 1
    err = capsys.readouterr().err
    assert "run.json:4" in err and "nuu" in err


@pytest.mark.parametrize("cfg", [
    {"problem": {"preset": "lq_interior_1d", "nu": 0}},
    {"problem": {"preset": "nope"}},
    {"problem": {"preset": "lq_interior_1d", "y0": "import os"}},
    {"problem": {"preset": "lq_interior_1d"}, "output": {"formats": ["hdf5"]}},
    {"problem": {"preset": "lq_interior_1d"}, "solver": {"method": "cg"}},
    {"problem": {"preset": "lq_interior_1d", "gamma": 1, "gamma_min": 0}},
    {"grid": {"nodes": 9, "nt": 8}},
])
def test_invalid_configs_exit_one(tmp_path, cfg):
    assert run(tmp_path, "solve", cfg) == 1


def test_missing_inputs_exit_one(tmp_path):
    assert cli.main(["solve", "--config", str(tmp_path / "absent.json")]) == 1
    assert run(tmp_path, "check-kkt", LQ, out="empty") == 1
    assert cli.main(["frobnicate", "--config", "x"]) == 1


def test_path_stall_exit_two(tmp_path):
    cfg = {"problem": {"preset": "state_active_1d"}, "grid": {"nodes": 9, "nt": 8}, "solver": {"max_stages": 0}}
    assert run(tmp_path, "solve", cfg) == 2
    assert json.loads((tmp_path / "out" / "history.json").read_text())["status"] == "stalled"


def test_empty_cone_exit_four(tmp_path):
    cfg = {"problem": {"dimension": 1, "cost": {"y_d": "0"}, "nu": 1, "alpha": -0.5000001, "beta": -0.5,
                       "gamma": 10},
           "grid": {"nodes": 9, "nt": 8}, "conditions": {"tau": [0.0], "n_samples": 5}}
    assert run(tmp_path, "solve", cfg) == 0
    assert run(tmp_path, "check-ssc", cfg) == 4
    assert json.loads((tmp_path / "out" / "ssc_report.json").read_text())["status"] == "empty_sample"


def test_indefinite_triplet_fails_ssc(tmp_path):
    from parabolic_ssc import testbeds
    from parabolic_ssc.conditions import TripletData
    from parabolic_ssc.pde_adjoint import solve_adjoint
    from parabolic_ssc.pde_forward import solve_state
    tb, tr = testbeds.indefinite_1d(9, 8)
    st = solve_state(tb.spec, tb.grid, tr.u)
    tr = TripletData(tr.u, tr.mu, st.y, solve_adjoint(tb.spec, tb.grid, st, tr.mu).phi)
    cfg = {"problem": {"dimension": 1, "cost": {"y_d": "0", "weight": -20}, "nu": 0.001},
           "grid": {"nodes": 9, "nt": 8}, "conditions": {"tau": [0.001], "n_samples": 10}}
    cli.write_triplet(tmp_path / "out", tb.grid, tr)
    assert run(tmp_path, "check-ssc", cfg) == 3


def test_convergence_single_and_bad_levels(tmp_path):
    one = {"convergence": {"space": {"nodes": [9], "nt": 4}, "time": {"nodes": 9, "nt": [8]}}}
    assert run(tmp_path, "convergence", one) == 0
    rep = json.loads((tmp_path / "out" / "convergence.json").read_text())
    assert rep["space"][0]["order"] is None and rep["time"][0]["order"] is None
    bad = {"convergence": {"space": {"nodes": [9, 16], "nt": 4}}}
    assert run(tmp_path, "convergence", bad) == 1


def test_convergence_orders(tmp_path):
    cfg = {"convergence": {"space": {"nodes": [9, 17, 33], "nt": 8}, "time": {"nodes": 9, "nt": [8, 16, 32]}}}
    assert run(tmp_path, "convergence", cfg) == 0
    rep = json.loads((tmp_path / "out" / "convergence.json").read_text())
    assert all(r["order"] >= 1.8 for r in rep["space"][1:])
    assert all(r["order"] >= 0.8 for r in rep["time"][1:])
