"""Command-line front end.

Commands::

    uqme run <config.toml>
    uqme compare <a.csv> <b.csv> [--tol X] [--se-factor K]
    uqme presets list
    uqme presets run <name>

Exit codes: 0 success, 1 compare threshold exceeded, 2 configuration or
schema error, 3 numerical failure, 4 I/O error.  Outputs go to
``$UQME_OUTPUT_ROOT/<output.directory>`` (current directory if unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .. import __version__
from ..analytic import solution_for
from ..bases import basis_by_name, bloch_map_batch, drive_vector, transform_model
from ..master import DegenerateSteadyStateError, NumericalError, assemble, evolve_array, slow_eigenvalue_terms, timescales
from ..models import ModelError, from_config, ground_state
from ..numkit import DefectiveSpectrumError, SolverError
from ..observables import observable_names, observables
from ..trajectories import GENERATOR_NAME, ensemble_average, simulate_ensemble
from .config import ConfigError, ScenarioConfig, initial_matrix, load_config
from .svg import Series, line_plot

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
OUTPUT_ROOT_ENV = "UQME_OUTPUT_ROOT"
PACKAGE_NAME = "artifact"

NUMERICAL_ERRORS = (NumericalError, SolverError, DefectiveSpectrumError, DegenerateSteadyStateError, np.linalg.LinAlgError)


class CompareError(ValueError):
    pass


def format_number(v) -> str:
    return f"{float(v):.12g}"


def csv_text(columns: dict[str, np.ndarray], int_columns: tuple[str, ...] = ()) -> str:
    names = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    n = len(next(iter(columns.values())))
    for i in range(n):
        w.writerow([str(int(columns[c][i])) if c in int_columns else format_number(columns[c][i]) for c in names])
    return buf.getvalue()


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CompareError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise CompareError(f"{path}: duplicate column names")
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise CompareError(f"{path}: malformed row ({exc})") from None
    return {name: data[:, k] for k, name in enumerate(header)}


# ---------------------------------------------------------------------------
# scenario execution


def _setup(cfg: ScenarioConfig):
    try:
        model = from_config(cfg.model)
        basis = basis_by_name(model, cfg.basis)
    except ModelError as exc:
        raise ConfigError("model", str(exc)) from None
    work = transform_model(model, basis)
    rho0 = initial_matrix(cfg.initial_state)
    if rho0 is None:
        rho0 = ground_state(work)
    return model, basis, work, rho0


def _plots(grid, solid: dict, dashed: dict, groups: list[tuple[str, list[str]]], markers, log_x, prefix) -> dict[str, str]:
    out = {}
    for title, names in groups:
        series = [Series(n, grid, solid[n]) for n in names if n in solid]
        series += [Series(f"{n} (ref)", grid, dashed[n], dashed=True) for n in names if n in dashed]
        if series:
            fname = f"{prefix}_{title}.svg"
            out[fname] = line_plot(series, title=f"{prefix}: {title}", log_x=log_x, markers=markers)
    return out


def _groups(names: list[str]) -> list[tuple[str, list[str]]]:
    pops = [n for n in names if not n.endswith(("_re", "_im"))]
    cohs = [n for n in names if n.endswith(("_re", "_im"))]
    return [("populations", pops), ("coherences", cohs)]


def _markers(liouvillian, rho0) -> dict[str, float]:
    rep = timescales(liouvillian, rho0)
    return {"tau1": rep.tau1, "tau2": rep.tau2}


def _master_solution(model, basis, rho0, grid):
    liou = assemble(model, basis)
    states = evolve_array(liou, rho0, grid)
    return liou, observables(states, liou.model.basis_labels)


def compute(cfg: ScenarioConfig) -> tuple[dict[str, str], dict]:
    """Run a scenario in memory; returns (file name -> text, manifest extras)."""
    model, basis, work, rho0 = _setup(cfg)
    labels = work.basis_labels
    names = observable_names(labels)
    files: dict[str, str] = {}
    extra: dict = {}
    grid = cfg.time_grid.values() if cfg.time_grid is not None else None
    log_x = cfg.time_grid is not None and cfg.time_grid.spacing == "log"
    ground_start = cfg.initial_state == "ground"

    if cfg.mode == "master":
        liou, obs = _master_solution(model, basis, rho0, grid)
        files["master.csv"] = csv_text({"t": grid, **obs})
        ref = {}
        sol = solution_for(model, cfg.basis) if ground_start else None
        if sol is not None:
            ref = sol.evaluate(grid)
            files["analytic.csv"] = csv_text({"t": grid, **ref})
            extra["analytic"] = {"basis": sol.basis, "tau1": sol.tau1, "tau2": sol.tau2, "note": sol.validity_note}
        files.update(_plots(grid, obs, ref, _groups(names), _markers(liou, rho0), log_x, "master"))

    elif cfg.mode == "timescales":
        liou = assemble(model, basis)
        report = timescales(liou, rho0).to_dict()
        try:
            slow = slow_eigenvalue_terms(model)
            report["perturbative_slow_eigenvalue"] = {
                "first_order": [slow.first_order.real, slow.first_order.imag],
                "second_order": [slow.second_order.real, slow.second_order.imag],
                "value": [slow.value.real, slow.value.imag],
            }
        except RuntimeError as exc:
            report["perturbative_slow_eigenvalue"] = None
            report["notes"].append(str(exc))
        sol = solution_for(model, "eigen")
        if sol is not None:
            report["analytic"] = {"tau1": sol.tau1, "tau2": sol.tau2}
        files["timescales.json"] = json.dumps(report, indent=2) + "\n"

    elif cfg.mode == "trajectory":
        e = cfg.ensemble
        recs = simulate_ensemble(model, basis, rho0, grid, e.count, e.base_seed, e.workers)
        logs = []
        for rec in recs:
            cols = {"t": grid, **rec.observables(), "jump_flag": rec.jump_flags()}
            files[f"trajectory_{rec.index:03d}.csv"] = csv_text(cols, int_columns=("jump_flag",))
            logs.append(rec.to_dict())
        files["jumps.json"] = json.dumps({"generator": GENERATOR_NAME, "trajectories": logs}, indent=2) + "\n"
        liou = assemble(model, basis)
        obs0 = recs[0].observables()
        files.update(_plots(grid, obs0, {}, _groups(names), _markers(liou, rho0), log_x, "trajectory_000"))

    elif cfg.mode == "ensemble":
        e = cfg.ensemble
        summary = ensemble_average(model, basis, rho0, grid, e.count, e.base_seed, e.workers)
        cols = {"t": grid}
        for n in names:
            cols[n] = summary.mean[n]
            cols[f"{n}_se"] = summary.std_error[n]
        files["ensemble.csv"] = csv_text(cols)
        liou, obs = _master_solution(model, basis, rho0, grid)
        files["master.csv"] = csv_text({"t": grid, **obs})
        files.update(_plots(grid, summary.mean, obs, _groups(names), _markers(liou, rho0), log_x, "ensemble"))
        extra["jumps_per_trajectory_mean"] = float(np.mean(summary.jump_counts))

    elif cfg.mode == "bloch":
        e = cfg.ensemble
        rec = simulate_ensemble(model, basis, rho0, grid, 1, e.base_seed, 1)[0]
        s = bloch_map_batch(rec.states)
        files["bloch.csv"] = csv_text(
            {"t": grid, "sx": s[:, 0], "sy": s[:, 1], "sz": s[:, 2], "jump_flag": rec.jump_flags()},
            int_columns=("jump_flag",),
        )
        omega = drive_vector(work)
        files["bloch.json"] = json.dumps({"drive_vector": omega.tolist(), **rec.to_dict()}, indent=2) + "\n"
        liou = assemble(model, basis)
        comps = {"sx": s[:, 0], "sy": s[:, 1], "sz": s[:, 2]}
        files.update(_plots(grid, comps, {}, [("components", ["sx", "sy", "sz"])], _markers(liou, rho0), log_x, "bloch"))
        files["bloch_xz.svg"] = line_plot(
            [Series("trajectory", s[:, 0], s[:, 2]), Series("drive axis", [0, omega[0] / np.linalg.norm(omega)], [0, omega[2] / np.linalg.norm(omega)], dashed=True)],
            title="Bloch vector, xz projection",
            xlabel="sx",
            ylabel="sz",
        )

    keep = set(cfg.formats)
    files = {k: v for k, v in files.items() if k.rsplit(".", 1)[-1] in keep or (k.endswith(".json") and cfg.mode == "timescales")}
    return files, extra


def output_directory(cfg: ScenarioConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV) or ".")
    return root / cfg.directory


def manifest(cfg: ScenarioConfig, files: list[str], extra: dict) -> str:
    doc = {
        "package": PACKAGE_NAME,
        "version": __version__,
        "scenario_file": "scenario.toml",
        "config": cfg.to_dict(),
        "outputs": sorted(files),
    }
    if cfg.mode in ("trajectory", "ensemble", "bloch"):
        doc["seeds"] = {
            "base_seed": cfg.ensemble.base_seed,
            "count": cfg.ensemble.count if cfg.mode != "bloch" else 1,
            "trajectory_streams": "index i uses SeedSequence(base_seed, spawn_key=(i,))",
        }
        doc["generator"] = GENERATOR_NAME
    doc.update(extra)
    return json.dumps(doc, indent=2, default=float) + "\n"


def run_scenario(cfg: ScenarioConfig, raw_text: str) -> Path:
    files, extra = compute(cfg)
    out = output_directory(cfg)
    out.mkdir(parents=True, exist_ok=True)
    files["scenario.toml"] = raw_text
    files["manifest.json"] = manifest(cfg, list(files) + ["manifest.json"], extra)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    return out


def _run_path(path) -> int:
    try:
        cfg, text = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = run_scenario(cfg, text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


def compare_tables(
    a: dict[str, np.ndarray], b: dict[str, np.ndarray], tol: float, se_factor: float, atol: float = 1e-10
) -> tuple[list[dict], bool]:
    """Per-column max-abs and RMS deviation over the columns both tables share.

    The data columns of one table (ignoring ``*_se`` and ``jump_flag``) must be
    a subset of the other's, and both must have the same ``t`` grid.  Columns
    with a ``<name>_se`` companion in either table pass when every deviation is
    within ``se_factor`` standard errors plus a rounding floor ``atol``;
    others pass when max-abs <= ``tol``.
    """
    if "t" not in a or "t" not in b:
        raise CompareError("both files need a 't' column")
    if a["t"].shape != b["t"].shape or not np.allclose(a["t"], b["t"], rtol=1e-11, atol=0):
        raise CompareError("time grids differ")

    def data_cols(tab):
        return {c for c in tab if c != "t" and c != "jump_flag" and not c.endswith("_se")}

    ca, cb = data_cols(a), data_cols(b)
    if not (ca <= cb or cb <= ca):
        raise CompareError(f"column schemas are incompatible: {sorted(ca ^ cb)}")
    shared = [c for c in a if c in ca & cb]
    if not shared:
        raise CompareError("no shared data columns")
    report, ok = [], True
    for c in shared:
        diff = a[c] - b[c]
        row = {"column": c, "max_abs": float(np.max(np.abs(diff))), "rms": float(np.sqrt(np.mean(diff**2)))}
        se_name = f"{c}_se"
        if se_name in a or se_name in b:
            se = np.hypot(a.get(se_name, 0.0), b.get(se_name, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(se > 0, np.abs(diff) / se, np.where(diff == 0, 0.0, np.inf))
            row["max_z"] = float(np.max(z))
            row["pass"] = bool(np.all(np.abs(diff) <= se_factor * se + atol))
        else:
            row["pass"] = row["max_abs"] <= tol
        ok &= row["pass"]
        report.append(row)
    return report, ok


def _compare(a_path, b_path, tol, se_factor, atol) -> int:
    try:
        a, b = read_csv(a_path), read_csv(b_path)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CompareError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, ok = compare_tables(a, b, tol, se_factor, atol)
    except CompareError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{'column':<16}{'max_abs':>14}{'rms':>14}{'max_z':>10}  status")
    for r in report:
        z = f"{r['max_z']:.3g}" if "max_z" in r else "-"
        print(f"{r['column']:<16}{r['max_abs']:>14.6g}{r['rms']:>14.6g}{z:>10}  {'ok' if r['pass'] else 'EXCEEDED'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# presets


def preset_names() -> list[str]:
    root = resources.files(__name__).joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name: str):
    return resources.files(__name__).joinpath("presets", f"{name}.toml")


def _preset_summary(name: str) -> str:
    first = preset_path(name).read_text(encoding="utf-8").splitlines()[0]
    return first.lstrip("# ").strip()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="uqme", description="Unified-QME relaxation and jump-trajectory scenarios")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("config")
    p_cmp = sub.add_parser("compare", help="compare two CSV outputs column by column")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("--tol", type=float, default=5e-3, help="max-abs threshold for columns without standard errors")
    p_cmp.add_argument("--se-factor", type=float, default=3.0, help="threshold in standard errors for *_se columns")
    p_cmp.add_argument("--atol", type=float, default=1e-10, help="rounding floor added to the standard-error threshold")
    p_pre = sub.add_parser("presets", help="bundled scenarios reproducing the figures")
    pre_sub = p_pre.add_subparsers(dest="action", required=True)
    pre_sub.add_parser("list")
    p_pr = pre_sub.add_parser("run")
    p_pr.add_argument("name")

    args = parser.parse_args(argv)
    if args.command == "run":
        return _run_path(args.config)
    if args.command == "compare":
        return _compare(args.a, args.b, args.tol, args.se_factor, args.atol)
    if args.action == "list":
        for name in preset_names():
            print(f"{name:<8}{_preset_summary(name)}")
        return EXIT_OK
    if args.name not in preset_names():
        print(f"config error: unknown preset {args.name!r}; available: {', '.join(preset_names())}", file=sys.stderr)
        return EXIT_CONFIG
    with resources.as_file(preset_path(args.name)) as path:
        return _run_path(path)
