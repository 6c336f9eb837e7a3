import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polyprion import cli
from polyprion.config import ConfigError, RunConfig, load_config
from polyprion.dgspace import build_space, constant_coefficients
from polyprion.integrator import NumericalAbort
from polyprion.mesh import generate_structured, load_mesh, split_rule
from polyprion.writers import fmt, read_csv, read_numeric_csv, write_csv, write_vtk

from oracles import logistic

SMALL = """
[mesh]
nx = 3
ny = 3
[model]
model = "{model}"
protein = "{protein}"
{extra_model}
[solver]
degree = 1
dt = 0.05
T = {T}
[output]
snapshot_times = [0.0, {T}]
{extra}
"""


def write_config(tmp_path, name="cfg.toml", model="heterodimer", protein="tau", T=1.0, extra="", extra_model=""):
    path = tmp_path / name
    path.write_text(SMALL.format(model=model, protein=protein, T=T, extra=extra, extra_model=extra_model))
    return path


def run_ok(argv):
    assert cli.run([str(a) for a in argv]) == 0


def test_default_solver_settings():
    cfg = RunConfig()
    assert (cfg.solver.degree, cfg.solver.eta0, cfg.solver.dt, cfg.solver.T) == (5, 10.0, 0.025, 40.0)
    assert (cfg.model.k12, cfg.model.d_ext, cfg.model.d_axn) == (0.2, 8e-6, 8e-5)


def test_toml_and_json_equivalent(tmp_path):
    t = load_config(write_config(tmp_path))
    (tmp_path / "cfg.json").write_text(json.dumps(t.to_dict()))
    j = load_config(tmp_path / "cfg.json")
    assert j.to_dict() == t.to_dict()


@pytest.mark.parametrize("text", ["[mesh]\nnx = 'ten'\n", "[solver]\nfoo = 1\n", "bogus = 1\n",
                                  "[model]\nprotein = 'prion'\n", "[solver]\ndt = -1.0\n",
                                  "[model]\np_delta = 0.0\n", "[mesh\n"])
def test_config_errors(tmp_path, text):
    (tmp_path / "c.toml").write_text(text)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.toml")
    assert cli.run(["simulate", str(tmp_path / "c.toml"), "--out", str(tmp_path / "o")]) == 2


def test_tableau_table_in_config(tmp_path):
    text = "[solver]\ntableau = {name = 'euler', a = [[1.0]], b = [1.0], a_hat = [[0.0, 0.0], [1.0, 0.0]], " \
           "b_hat = [1.0, 0.0], order = 1}\n"
    (tmp_path / "c.toml").write_text(text)
    assert load_config(tmp_path / "c.toml").solver.tableau["order"] == 1


def test_fit_command(tmp_path, capsys):
    run_ok(["fit", "tau", "--out", tmp_path])
    cols, rows = read_csv(tmp_path / "distribution.csv")
    assert cols == ["param", "a", "b", "mean", "variance", "ks", "pass"]
    table = {"p_min": (5.5307, 1.4657), "p_delta": (5.7406, 1.9236), "q_max": (0.8772, 2.6189)}
    for r in rows:
        assert float(r[1]) == pytest.approx(table[r[0]][0], abs=5e-4)
        assert float(r[2]) == pytest.approx(table[r[0]][1], abs=5e-4)
    with pytest.raises(SystemExit) as exc:
        cli.run(["fit", "prion"])
    assert exc.value.code == 2


def test_bifurcation_command(tmp_path):
    expected = {("tau", "q_max"): 3.4541, ("amyloid", "q_max"): 2.7644,
                ("tau", "p_delta"): 1.1177, ("amyloid", "p_delta"): 17.6845}
    for (protein, axis), value in expected.items():
        out = tmp_path / f"{protein}_{axis}"
        run_ok(["bifurcation", "--protein", protein, "--axis", axis, "--out", out])
        cols, data = read_numeric_csv_rows(out / "bifurcation.csv")
        assert value == pytest.approx(max(data), abs=1e-3)
    out = tmp_path / "empty"
    run_ok(["bifurcation", "--axis", "p_delta", "--p-min", "1", "--q-max", "5", "--out", out])
    cols, rows = read_csv(out / "bifurcation.csv")
    assert cols == ["axis", "root"] and rows == []
    out = tmp_path / "surface"
    run_ok(["bifurcation", "--surface", "--p-min-grid", "1", "5", "4", "--p-delta-grid", "1", "9", "5", "--out", out])
    cols, data = read_numeric_csv(out / "bifurcation_surface.csv")
    assert cols == ["p_min", "p_delta", "q_max_star"] and data.shape == (20, 3)
    pm, pd, q = data.T
    assert np.all(np.abs((pd + pm) ** 2 * q - 4 * pm * pd**2) <= 1e-10 * (pd + pm) ** 2 * q)


def read_numeric_csv_rows(path):
    cols, rows = read_csv(path)
    return cols, [float(r[1]) for r in rows]


def test_simulate_logistic_limit(tmp_path):
    extra_model = "d_ext = 0.0\nd_axn = 0.0"
    extra = "[seed]\npolygon = [[-1, -1], [2, -1], [2, 2], [-1, 2]]\nwidth = 0.0\namplitude = 0.1"
    cfg = write_config(tmp_path, model="fk", T=5.0, extra=extra, extra_model=extra_model)
    run_ok(["simulate", cfg, "--out", tmp_path / "o"])
    cols, data = read_numeric_csv(tmp_path / "o" / "trajectory.csv")
    assert cols == ["t", "c_avg"]
    assert np.abs(data[:, 1] - logistic(0.1, 3.5042 * 0.2, data[:, 0])).max() < 1e-4


def test_simulate_equilibrium_stationary(tmp_path):
    cfg = write_config(tmp_path, extra="[seed]\namplitude = 0.0")
    run_ok(["simulate", cfg, "--out", tmp_path / "o"])
    cols, data = read_numeric_csv(tmp_path / "o" / "trajectory.csv")
    assert cols == ["t", "p_avg", "q_avg"]
    assert np.abs(data[:, 1] - (4.4557 + 3.5042)).max() < 1e-10 and np.all(data[:, 2] == 0)
    vtk = sorted((tmp_path / "o" / "vtk").iterdir())
    assert len(vtk) == 2


def test_simulate_missing_mesh(tmp_path, capsys):
    (tmp_path / "c.toml").write_text('[mesh]\nfile = "nowhere/mesh.txt"\n')
    assert cli.run(["simulate", str(tmp_path / "c.toml")]) == 2
    assert "nowhere/mesh.txt" in capsys.readouterr().err


def test_numerical_abort_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalAbort(12.5)
    monkeypatch.setattr(cli, "simulate", boom)
    assert cli.run(["simulate", str(write_config(tmp_path)), "--out", str(tmp_path / "o")]) == 3


def _files(d):
    return {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file() and p.name != "run.json"}


def test_sweep_manifest_and_determinism(tmp_path):
    cfg = write_config(tmp_path, model="fk", extra="[sweep]\naxis = 'p_delta'\nquantiles = [0.25, 0.75]")
    run_ok(["sweep", cfg, "--out", tmp_path / "a"])
    run_ok(["sweep", cfg, "--out", tmp_path / "b"])
    cols, rows = read_csv(tmp_path / "a" / "manifest.csv")
    assert cols == ["axis", "value", "kind", "traj_csv", "vtk_dir"] and len(rows) == 2
    for r in rows:
        assert (tmp_path / "a" / r[3]).is_file() and (tmp_path / "a" / r[4]).is_dir()
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    bad = write_config(tmp_path, name="bad.toml", model="fk", extra="[sweep]\naxis = 'q_max'")
    assert cli.run(["sweep", str(bad), "--out", str(tmp_path / "c")]) == 2


def test_replay_bitwise(tmp_path):
    cfg = write_config(tmp_path, extra="[sweep]\naxis = 'q_max'\nvalues = [0.5, 1.0]")
    runs = [["fit", "amyloid", "--seed", "7"], ["bifurcation", "--axis", "p_min"],
            ["simulate", cfg], ["sweep", cfg], ["meshgen", "--kind", "triangles", "--nx", "3", "--ny", "3"]]
    for i, argv in enumerate(runs):
        a, b = tmp_path / f"r{i}a", tmp_path / f"r{i}b"
        run_ok([*argv, "--out", a])
        run_ok(["replay", a / "run.json", "--out", b])
        assert _files(a) == _files(b) and _files(a)
        rec = json.loads((a / "run.json").read_text())
        assert rec["command"] == argv[0] and "version" in rec and "seed" in rec


def test_meshgen_and_agglomerate(tmp_path):
    run_ok(["meshgen", "--kind", "triangles", "--nx", "4", "--ny", "4", "--white-from", "0.5", "--out", tmp_path / "m"])
    tri = load_mesh(tmp_path / "m" / "mesh.txt")
    assert tri.n_elements == 32 and tri.element_region.sum() == 16
    run_ok(["agglomerate", tmp_path / "m" / "mesh.txt", "--target", "8", "--seed", "3", "--out", tmp_path / "g"])
    poly = load_mesh(tmp_path / "g" / "mesh.txt")
    assert poly.n_elements == 8
    run_ok(["replay", tmp_path / "g" / "run.json", "--out", tmp_path / "g2"])
    assert load_mesh(tmp_path / "g2" / "mesh.txt").same_as(poly)
    assert cli.run(["agglomerate", str(tmp_path / "none.txt"), "--target", "2"]) == 2


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trip(x):
    assert float(fmt(x)) == x


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    data = rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-300, 300, size=(20, 3))
    write_csv(tmp_path / "x.csv", ["t", "p_avg", "q_avg"], data.tolist())
    cols, back = read_numeric_csv(tmp_path / "x.csv")
    assert cols == ["t", "p_avg", "q_avg"] and np.array_equal(back, data)
    header = (tmp_path / "x.csv").read_text().splitlines()[0]
    assert header == "t [year],p_avg [ug/g],q_avg [ug/g]"


def test_vtk_writer(tmp_path):
    mesh = generate_structured(2, 2, region_rule=split_rule(0.5))
    S = build_space(mesh, 2)
    write_vtk(tmp_path / "s.vtk", S, {"q": 2.0 * constant_coefficients(S)})
    lines = (tmp_path / "s.vtk").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    i = lines.index("CELL_TYPES 4")
    assert lines[i + 1:i + 5] == ["7"] * 4
    j = lines.index("SCALARS q double 1")
    assert [float(v) for v in lines[j + 2:j + 6]] == pytest.approx([2.0] * 4)
    assert "POINT_DATA 9" in lines
