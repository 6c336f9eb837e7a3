"""Command-line front end: ``polyprion <command> ...``.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .integrator import NumericalAbort
from .mesh import MeshError, agglomerate, load_mesh, save_mesh
from .models import AXES, bifurcation_surface, bifurcation_value, classify_equilibrium
from .sensitivity import (PROTEIN_STATS, ecdf_compare, fit_gamma, gamma_sample, run_sweep, simulate)
from .writers import read_provenance, write_csv, write_provenance, write_trajectory, write_vtk

log = logging.getLogger("polyprion")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def _provenance(out: Path, command: str, opts: dict, config: RunConfig | None, seed) -> None:
    write_provenance(out / "run.json", {
        "command": command,
        "options": opts,
        "config": None if config is None else config.to_dict(),
        "version": __version__,
        "seed": seed,
    })


def _snapshot_name(t: float) -> str:
    return f"snapshot_t{t:010.4f}.vtk"


# ---------------------------------------------------------------------------
# commands; each takes JSON-able options so run.json can replay it


def cmd_fit(opts: dict, config: RunConfig | None, out: Path) -> Path:
    protein = opts["protein"]
    n = int(opts.get("samples", 500))
    seed = int(opts.get("seed", 0))
    rows = []
    for i, (axis, (mean, var)) in enumerate(PROTEIN_STATS[protein].items()):
        d = fit_gamma(mean, var)
        cmp = ecdf_compare(gamma_sample(d, n, seed + i), d)
        rows.append([axis, d.a, d.b, d.mean, d.variance, cmp.ks, cmp.passed])
        print(f"{protein} {axis}: a = {d.a:.4f}, b = {d.b:.4f}  (KS {cmp.ks:.4f} vs band {cmp.band:.4f})")
    path = write_csv(out / "distribution.csv", ["param", "a", "b", "mean", "variance", "ks", "pass"], rows)
    _provenance(out, "fit", opts, None, seed)
    return path


def cmd_bifurcation(opts: dict, config: RunConfig | None, out: Path) -> Path:
    if opts.get("surface"):
        pm = np.linspace(*opts["p_min_grid"][:2], int(opts["p_min_grid"][2]))
        pd = np.linspace(*opts["p_delta_grid"][:2], int(opts["p_delta_grid"][2]))
        rows = bifurcation_surface(pm, pd).tolist()
        path = write_csv(out / "bifurcation_surface.csv", ["p_min", "p_delta", "q_max_star"], rows)
    else:
        axis = opts["axis"]
        stats = PROTEIN_STATS[opts["protein"]]
        fixed = {a: (opts.get(a) if opts.get(a) is not None else stats[a][0]) for a in AXES if a != axis}
        roots = bifurcation_value(axis, **fixed)
        for r in roots:
            print(f"{axis}* = {r:.6g} ug/g")
        if not roots:
            print(f"no node/focus transition along {axis}")
        path = write_csv(out / "bifurcation.csv", ["axis", "root"], [[axis, r] for r in roots],
                         units={"root": "ug/g"})
    _provenance(out, "bifurcation", opts, None, None)
    return path


def cmd_simulate(opts: dict, config: RunConfig, out: Path) -> Path:
    mesh = config.build_mesh()
    params = config.params()
    seed = config.seed_region(mesh)
    report = classify_equilibrium(params)
    log.info("E2 is a %s; eigenvalues %s", report.kind.value, report.eigenvalues)
    t0 = time.perf_counter()
    space, traj = simulate(mesh, config.model.model, params, config.solver, seed, config.output.snapshot_times)
    log.info("solved in %.2f s", time.perf_counter() - t0)
    series = {f"{n}_avg": traj.average(n) for n in traj.names}
    path = write_trajectory(out / "trajectory.csv", traj.times, series)
    if config.output.vtk:
        for t, y in sorted(traj.snapshots.items()):
            fields = dict(zip(traj.names, np.split(y, len(traj.names))))
            write_vtk(out / "vtk" / _snapshot_name(t), space, fields, title=f"t = {t} year")
    _provenance(out, "simulate", opts, config, config.rng_seed)
    return path


def cmd_sweep(opts: dict, config: RunConfig, out: Path) -> Path:
    mesh = config.build_mesh()
    spec = config.sweep_spec(mesh)
    result = run_sweep(spec, mesh, workers=max(1, config.sweep.workers))
    rows = []
    space = None
    for i, rec in enumerate(result.records):
        traj_name = f"traj_{i:03d}.csv"
        series = {} if rec.p_avg is None else {"p_avg": rec.p_avg}
        series["q_avg"] = rec.q_avg
        write_trajectory(out / traj_name, rec.times, series)
        vtk_dir = ""
        if config.output.vtk and rec.snapshots:
            if space is None:
                from .dgspace import build_space
                space = build_space(mesh, config.solver.degree)
            vtk_dir = f"vtk_{i:03d}"
            names = ("c",) if spec.model == "fk" else ("p", "q")
            for t, y in sorted(rec.snapshots.items()):
                write_vtk(out / vtk_dir / _snapshot_name(t), space, dict(zip(names, np.split(y, len(names)))),
                          title=f"{spec.axis} = {rec.value}, t = {t} year")
        rows.append([spec.axis, rec.value, rec.kind.value, traj_name, vtk_dir])
    path = write_csv(out / "manifest.csv", ["axis", "value", "kind", "traj_csv", "vtk_dir"], rows,
                     units={"value": "ug/g"})
    _provenance(out, "sweep", opts, config, config.rng_seed)
    return path


def cmd_meshgen(opts: dict, config: RunConfig | None, out: Path) -> Path:
    mc = {k: v for k, v in opts.items() if v is not None}
    mc.setdefault("white_from", None)
    cfg = RunConfig.from_dict({"mesh": mc})
    mesh = cfg.build_mesh()
    path = out / "mesh.txt"
    out.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, path)
    print(f"{mesh.n_elements} elements written to {path}")
    _provenance(out, "meshgen", opts, None, opts.get("agglomerate_seed"))
    return path


def cmd_agglomerate(opts: dict, config: RunConfig | None, out: Path) -> Path:
    src = Path(opts["mesh"])
    if not src.is_file():
        raise FileNotFoundError(f"mesh file not found: {src}")
    mesh = agglomerate(load_mesh(src), int(opts["target"]), int(opts.get("seed", 0)))
    path = out / "mesh.txt"
    out.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, path)
    print(f"{mesh.n_elements} agglomerates written to {path}")
    _provenance(out, "agglomerate", opts, None, int(opts.get("seed", 0)))
    return path


COMMANDS = {
    "fit": cmd_fit,
    "bifurcation": cmd_bifurcation,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "meshgen": cmd_meshgen,
    "agglomerate": cmd_agglomerate,
}
NEEDS_CONFIG = {"simulate", "sweep"}


def replay(record_path, out: Path | None = None) -> Path:
    """Re-run a command from its run.json record."""
    rec = read_provenance(record_path)
    command = rec.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"{record_path}: unknown command {command!r}")
    config = RunConfig.from_dict(rec["config"]) if rec.get("config") is not None else None
    if out is None:
        out = Path(record_path).parent
    if config is not None:
        config.output.directory = str(out)
    return COMMANDS[command](rec.get("options", {}), config, Path(out))


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyprion", description="PolyDG prion-spreading simulations.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fit", help="fit Gamma laws to the protein statistics")
    s.add_argument("protein", choices=sorted(PROTEIN_STATS))
    s.add_argument("--samples", type=int, default=500, help="draws for the ECDF check")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out")

    s = sub.add_parser("bifurcation", help="node/focus thresholds or surface")
    s.add_argument("--protein", choices=sorted(PROTEIN_STATS), default="tau")
    s.add_argument("--axis", choices=AXES, default="q_max")
    s.add_argument("--p-min", type=float)
    s.add_argument("--p-delta", type=float)
    s.add_argument("--q-max", type=float)
    s.add_argument("--surface", action="store_true", help="sample q_max* over a (p_min, p_delta) grid")
    s.add_argument("--p-min-grid", type=float, nargs=3, default=[0.5, 10.0, 20], metavar=("LO", "HI", "N"))
    s.add_argument("--p-delta-grid", type=float, nargs=3, default=[0.5, 10.0, 20], metavar=("LO", "HI", "N"))
    s.add_argument("--out", default="out")

    for name, text in (("simulate", "solve one configuration"), ("sweep", "one-at-a-time parameter sweep")):
        s = sub.add_parser(name, help=text)
        s.add_argument("config", help="TOML or JSON configuration")
        s.add_argument("--out", help="output directory (overrides output.directory)")

    s = sub.add_parser("meshgen", help="generate a synthetic two-region mesh")
    s.add_argument("--kind", choices=("structured", "triangles", "disc"), default="structured")
    s.add_argument("--nx", type=int, default=10)
    s.add_argument("--ny", type=int, default=10)
    s.add_argument("--width", type=float, default=1.0)
    s.add_argument("--height", type=float, default=1.0)
    s.add_argument("--white-from", type=float, default=None, help="fraction of the width where white matter starts")
    s.add_argument("--axonal", type=float, nargs=2, default=[1.0, 0.0])
    s.add_argument("--agglomerate", type=int, default=None, help="agglomerate to this many elements")
    s.add_argument("--agglomerate-seed", type=int, default=0)
    s.add_argument("--out", default="out")

    s = sub.add_parser("agglomerate", help="merge a triangulation into polygonal agglomerates")
    s.add_argument("mesh")
    s.add_argument("--target", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out")

    s = sub.add_parser("replay", help="re-run a command from its run.json")
    s.add_argument("record")
    s.add_argument("--out")
    return p


def _options(args: argparse.Namespace) -> dict:
    d = dict(vars(args))
    for k in ("command", "verbose", "out", "config"):
        d.pop(k, None)
    if args.command == "agglomerate":
        d["mesh"] = str(Path(d["mesh"]).resolve())
    return d


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            replay(args.record, Path(args.out) if args.out else None)
            return EXIT_OK
        config = None
        if args.command in NEEDS_CONFIG:
            config = load_config(args.config)
            if args.out:
                config.output.directory = args.out
            out = Path(config.output.directory)
        else:
            out = Path(args.out)
        COMMANDS[args.command](_options(args), config, out)
        return EXIT_OK
    except NumericalAbort as exc:
        print(f"polyprion: numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (ConfigError, MeshError, FileNotFoundError, ValueError) as exc:
        print(f"polyprion: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())
