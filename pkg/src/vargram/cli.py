"""Command-line front end over the analysis modules.

Eight subcommands mirror the library layout: simulate, energy, gramian,
residual, rank, pd-scan, verify, and example (a one-shot bundle around
the built-in cubic example).  All numeric output is written as CSV with
'.' decimals, ',' separators, and 17 significant digits, or as JSON with
sorted keys, so identical invocations produce byte-identical files.
Randomized sample points come from a seeded splitmix64 stream.

Exit codes: 0 on success, 1 when an analysis fails (divergence, blow-up,
bad field), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import re
import sys
from typing import Callable, Sequence

import numpy as np

from . import energy as energy_mod
from . import gramian as gramian_mod
from . import rank as rank_mod
from . import verify as verify_mod
from .expr import ExprError, parse_system_spec
from .integrate import IntegrationError, integrate_ivp
from .sampling import SplitMix64
from .systems import (SystemModel, closed_loop_prolonged, dual_closed_loop,
                      dual_open, from_spec, prolong, registry, registry_names,
                      two_copy)

DEFAULT_SEED = 1234567891


class CliError(RuntimeError):
    """Analysis-level failure: reported on stderr, exit code 1."""


# ---------------------------------------------------------------- parsing

def _parse_floats(text: str, label: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise CliError(f"{label}: expected comma-separated numbers, got {text!r}")


def _parse_region(text: str) -> list[tuple[float, float]]:
    vals = _parse_floats(text, "--region")
    if len(vals) % 2 != 0 or not vals:
        raise CliError("--region needs an even count: lo1,hi1,lo2,hi2,...")
    region = []
    for lo, hi in zip(vals[0::2], vals[1::2]):
        if not hi > lo:
            raise CliError(f"--region interval [{lo:g}, {hi:g}] is empty")
        region.append((lo, hi))
    return region


def _parse_grid(text: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(tok) for tok in text.lower().split("x"))
    except ValueError:
        raise CliError(f"--grid: expected counts like 21x21, got {text!r}")
    if not shape or any(g < 1 for g in shape):
        raise CliError("--grid counts must be positive")
    return shape


def _load_system(args) -> SystemModel:
    if getattr(args, "spec", None):
        try:
            with open(args.spec, "rb") as fh:
                return from_spec(parse_system_spec(fh.read()))
        except FileNotFoundError:
            raise CliError(f"spec file not found: {args.spec}")
        except ExprError as exc:
            raise CliError(f"bad system spec: {exc}")
    try:
        return registry(args.system)
    except ValueError as exc:
        raise CliError(str(exc))


def _system_source(args) -> tuple[str, str]:
    if getattr(args, "spec", None):
        return ("file", os.path.abspath(args.spec))
    return ("registry", args.system)


def _system_from_source(source: tuple[str, str]) -> SystemModel:
    kind, value = source
    if kind == "file":
        with open(value, "rb") as fh:
            return from_spec(parse_system_spec(fh.read()))
    return registry(value)


def _build_field(system: SystemModel, field_name: str, tol: float,
                 fixed_horizon: float | None):
    """Resolve a --field name to a pointwise matrix field."""
    if field_name.startswith("cert-"):
        key = field_name[len("cert-"):]
        if key not in system.certificates:
            known = ", ".join(sorted(system.certificates)) or "none"
            raise CliError(f"system {system.name!r} has no certificate {key!r} "
                           f"(available: {known})")
        return system.certificates[key]
    if field_name == "empirical-Q":
        return gramian_mod.EmpiricalGramianField(system, "obs", tol=tol,
                                                 fixed_horizon=fixed_horizon)
    if field_name == "empirical-R":
        return gramian_mod.EmpiricalGramianField(system, "ctrl", tol=tol,
                                                 fixed_horizon=fixed_horizon)
    raise CliError(f"unknown field {field_name!r}: use cert-<name>, "
                   f"empirical-Q, or empirical-R")


# ---------------------------------------------------------------- output

def _out_dir(args) -> str:
    out = getattr(args, "out", None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv_text(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell.replace(",", ";"))
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append(f"{float(cell):.17g}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_plot_script(csv_path: str, kind: str, script_path: str | None = None,
                     grid_shape: Sequence[int] | None = None,
                     value_column: int = 4, title: str = "") -> str:
    """Write a self-contained gnuplot script next to an existing CSV.

    kind 'timeseries' plots every column against the first; 'heatmap'
    renders one value column over the first two coordinates (grid_shape
    sets the dgrid3d resolution).  Returns the script path.
    """
    if not os.path.exists(csv_path):
        raise CliError(f"csv not found: {csv_path}")
    if kind not in ("timeseries", "heatmap"):
        raise ValueError(f"unknown plot kind {kind!r}: use timeseries or heatmap")
    base = os.path.basename(csv_path)
    if script_path is None:
        script_path = os.path.splitext(csv_path)[0] + ".gp"
    name = title or os.path.splitext(base)[0]
    if kind == "timeseries":
        text = (
            "set datafile separator ','\n"
            f"set title '{name}'\n"
            "set xlabel 't'\n"
            "set key outside\n"
            "set grid\n"
            f"plot for [i=2:*] '{base}' using 1:i with lines title columnheader(i)\n"
        )
    else:
        g1, g2 = (int(grid_shape[0]), int(grid_shape[1])) if grid_shape else (21, 21)
        text = (
            "set datafile separator ','\n"
            f"set title '{name}'\n"
            "set view map\n"
            f"set dgrid3d {g2},{g1}\n"
            "set pm3d at b\n"
            f"splot '{base}' using 1:2:{int(value_column)} with pm3d notitle\n"
        )
    return _write_text(script_path, text)


# ---------------------------------------------------------------- simulate

_MODES = ("open-loop", "closed-loop", "prolonged", "closed-loop-prolonged",
          "two-copy", "dual-closed-loop", "dual-open")


def _simulate_table(system: SystemModel, mode: str, x0, second, tf: float,
                    samples: int):
    """Run one simulation mode and tabulate states plus derived outputs."""
    n = system.n
    if len(x0) != n:
        raise CliError(f"--x0 needs {n} components for system {system.name!r}")

    if mode in ("open-loop", "closed-loop"):
        field = system.closed_loop_field() if mode == "closed-loop" else system.f
        traj = integrate_ivp(field, np.asarray(x0, dtype=float), (0.0, tf))
        header = ["t"] + [f"x{i + 1}" for i in range(n)]
        times = np.linspace(0.0, tf, samples)
        rows = [[t] + [float(v) for v in traj.at(t)] for t in times]
        return header, rows

    builders = {
        "prolonged": (prolong, "dx"),
        "closed-loop-prolonged": (closed_loop_prolonged, "dx"),
        "two-copy": (two_copy, "x2"),
        "dual-closed-loop": (dual_closed_loop, "dp"),
        "dual-open": (dual_open, "dp"),
    }
    build, block = builders[mode]
    aug = build(system)
    if second is None:
        raise CliError(f"mode {mode} needs --{'x0p' if block == 'x2' else block + '0'}")
    if len(second) != n:
        raise CliError(f"second initial vector needs {n} components")
    z0 = aug.pack(**{"x": x0, block: second})
    traj = integrate_ivp(aug.rhs, z0, (0.0, tf))

    out_names = sorted(aug.outputs)
    times = np.linspace(0.0, tf, samples)
    header = ["t"] + [f"x{i + 1}" for i in range(n)] \
        + [f"{block}{i + 1}" for i in range(n)]
    probe = traj.at(0.0)
    widths = {name: len(np.atleast_1d(aug.outputs[name](probe)))
              for name in out_names}
    for name in out_names:
        header += [f"{name}{i + 1}" for i in range(widths[name])]
    rows = []
    for t in times:
        z = traj.at(t)
        row = [t] + [float(v) for v in z]
        for name in out_names:
            row += [float(v) for v in np.atleast_1d(aug.outputs[name](z))]
        rows.append(row)
    return header, rows


def _cmd_simulate(args) -> int:
    system = _load_system(args)
    x0 = _parse_floats(args.x0, "--x0")
    second = None
    for flag in ("dx0", "dp0", "x0p"):
        value = getattr(args, flag)
        if value is not None:
            second = _parse_floats(value, f"--{flag}")
    header, rows = _simulate_table(system, args.mode, x0, second,
                                   args.tf, args.samples)
    out = _out_dir(args)
    csv_path = os.path.join(out, "trajectory.csv")
    _write_text(csv_path, _csv_text(header, rows))
    print(csv_path)
    if args.plot:
        print(emit_plot_script(csv_path, "timeseries"))
    return 0


# ---------------------------------------------------------------- energy

_ENERGY_KINDS = ("diff-obs", "diff-ctrl", "incr-obs", "incr-ctrl")


def _cmd_energy(args) -> int:
    system = _load_system(args)
    x0 = _parse_floats(args.x0, "--x0")
    if args.kind.startswith("diff"):
        if args.dx0 is None:
            raise CliError(f"kind {args.kind} needs --dx0")
        partner = _parse_floats(args.dx0, "--dx0")
    else:
        if args.x0p is None:
            raise CliError(f"kind {args.kind} needs --x0p")
        partner = _parse_floats(args.x0p, "--x0p")
    fn = {
        "diff-obs": energy_mod.diff_observability,
        "diff-ctrl": energy_mod.diff_controllability_fb,
        "incr-obs": energy_mod.incr_observability,
        "incr-ctrl": energy_mod.incr_controllability_fb,
    }[args.kind]
    ev = fn(system, x0, partner, tol=args.tol)
    payload = {"kind": args.kind, "system": system.name, "x0": x0,
               "partner": partner, "value": ev.value,
               "error_estimate": ev.error_estimate, "horizon": ev.horizon,
               "direction": ev.direction}
    text = _json_text(payload)
    sys.stdout.write(text)
    if args.out:
        _write_text(os.path.join(_out_dir(args), "energy.json"), text)
    return 0


# ---------------------------------------------------------------- gramian

def _cmd_gramian(args) -> int:
    system = _load_system(args)
    x = _parse_floats(args.x, "--x")
    fn = (gramian_mod.empirical_obs_gramian if args.kind == "obs"
          else gramian_mod.empirical_ctrl_gramian)
    res = fn(system, x, tol=args.tol)
    payload = {"kind": args.kind, "system": system.name, "x": x,
               "matrix": [[float(v) for v in row] for row in res.matrix],
               "truncation_error": res.truncation_error, "horizon": res.horizon}
    text = _json_text(payload)
    sys.stdout.write(text)
    if args.out:
        _write_text(os.path.join(_out_dir(args), "gramian.json"), text)
    return 0


# ---------------------------------------------------------------- residual

_EQUATIONS = ("dLya_ob", "dRicc", "dLya_con", "dLya_open")


def _residual_reports(system: SystemModel, equation: str, field_obj, x):
    if equation == "dLya_ob":
        return [gramian_mod.lyap_residual_obs(system, field_obj, x)]
    if equation == "dRicc":
        return list(gramian_mod.riccati_residual(system, field_obj, x))
    if equation == "dLya_con":
        return list(gramian_mod.lyap_residual_ctrl(system, field_obj, x))
    if equation == "dLya_open":
        return [gramian_mod.lyap_residual_open(system, field_obj, x)]
    raise CliError(f"unknown equation {equation!r}")


def _cmd_residual(args) -> int:
    system = _load_system(args)
    field_obj = _build_field(system, args.field, args.tol, fixed_horizon=40.0)
    if args.x is not None:
        x = _parse_floats(args.x, "--x")
        reports = _residual_reports(system, args.equation, field_obj, x)
        payload = {"system": system.name, "field": args.field, "x": x,
                   "residuals": [{"equation_id": r.equation_id,
                                  "frobenius_norm": r.frobenius_norm,
                                  "matrix": [[float(v) for v in row]
                                             for row in r.residual]}
                                 for r in reports]}
        text = _json_text(payload)
        sys.stdout.write(text)
        if args.out:
            _write_text(os.path.join(_out_dir(args), "residual.json"), text)
        return 0
    if args.region is None or args.grid is None:
        raise CliError("residual needs either --x or both --region and --grid")
    out = _out_dir(args)
    region = _parse_region(args.region)
    shape = _parse_grid(args.grid)
    points = gramian_mod.grid_points(region, shape)
    n = points.shape[1]
    rows = []
    for point in points:
        for rep in _residual_reports(system, args.equation, field_obj, point):
            rows.append([*point, rep.equation_id, rep.frobenius_norm])
    header = [f"x{i + 1}" for i in range(n)] + ["equation_id", "frobenius_norm"]
    csv_path = os.path.join(out, "residuals.csv")
    _write_text(csv_path, _csv_text(header, rows))
    print(csv_path)
    return 0


# ---------------------------------------------------------------- rank

_MATRICES = {"ctrl": rank_mod.ctrl_bracket_matrix,
             "access": rank_mod.strong_access_matrix,
             "obs": rank_mod.obs_codistribution}


def _cmd_rank(args) -> int:
    system = _load_system(args)
    builder = _MATRICES[args.matrix]
    if args.x is not None:
        x = _parse_floats(args.x, "--x")
        res = builder(system, x, depth=args.depth)
        payload = {"system": system.name, "matrix": args.matrix, "x": x,
                   "depth": res.depth, "rank": res.rank,
                   "note": "rank is at least this at the tested depth",
                   "singular_values": [float(s) for s in res.singular_values],
                   "columns_or_rows": [[float(v) for v in row]
                                       for row in res.matrix]}
        text = _json_text(payload)
        sys.stdout.write(text)
        if args.out:
            _write_text(os.path.join(_out_dir(args), "rank.json"), text)
        return 0
    if args.region is None or args.grid is None:
        raise CliError("rank needs either --x or both --region and --grid")
    out = _out_dir(args)
    region = _parse_region(args.region)
    shape = _parse_grid(args.grid)
    points = gramian_mod.grid_points(region, shape)
    results = rank_mod.rank_sweep(builder, system, points, depth=args.depth)
    csv_path = os.path.join(out, "rank.csv")
    _write_text(csv_path, rank_mod.sweep_to_csv(points, results))
    print(csv_path)
    return 0


# ---------------------------------------------------------------- pd-scan

_POOL_FIELD = None


def _scan_init(source, field_name, tol, fixed_horizon):
    global _POOL_FIELD
    system = _system_from_source(source)
    _POOL_FIELD = _build_field(system, field_name, tol, fixed_horizon)


def _scan_eval(point):
    try:
        return ("ok", np.asarray(_POOL_FIELD(list(point)), dtype=float).tolist())
    except Exception as exc:
        return ("error", f"{type(exc).__name__}: {exc}")


def _scan_values(args, source, points) -> list:
    """Evaluate the field per point, optionally across worker processes.

    Workers rebuild the system from its source name, so results are
    independent of how the grid is sharded; assembly order follows the
    grid either way.
    """
    if args.jobs > 1:
        with multiprocessing.Pool(
                args.jobs, initializer=_scan_init,
                initargs=(source, args.field, args.tol, None)) as pool:
            return pool.map(_scan_eval, [tuple(p) for p in points])
    _scan_init(source, args.field, args.tol, None)
    return [_scan_eval(tuple(p)) for p in points]


def _cmd_pd_scan(args) -> int:
    source = _system_source(args)
    system = _system_from_source(source)
    region = _parse_region(args.region)
    if len(region) != system.n:
        raise CliError(f"--region covers {len(region)} dims, system has {system.n}")
    shape = _parse_grid(args.grid)
    if len(shape) != system.n:
        raise CliError(f"--grid has {len(shape)} dims, system has {system.n}")
    points = gramian_mod.grid_points(region, shape)
    values = _scan_values(args, source, points)
    scan = gramian_mod.scan_from_values(region, shape, points, values)
    out = _out_dir(args)
    csv_path = os.path.join(out, "scan.csv")
    _write_text(csv_path, scan.to_csv())
    print(csv_path)
    print(f"positive definite everywhere: {scan.all_positive_definite()}")
    if args.plot:
        print(emit_plot_script(csv_path, "heatmap", grid_shape=shape,
                               value_column=len(region) + 2, title="det"))
    return 0


# ---------------------------------------------------------------- verify

_THEOREMS = ("thm1", "thm2", "thm3", "thm4", "thm5", "cor7", "all")


def _draw_pairs(rng: SplitMix64, region, count: int):
    return [(rng.point_in_box(region), rng.point_in_box(region))
            for _ in range(count)]


def _draw_tangent_samples(rng: SplitMix64, region, count: int):
    unit = [(-1.0, 1.0)] * len(region)
    return [(rng.point_in_box(region), rng.point_in_box(unit))
            for _ in range(count)]


def _run_one_theorem(system: SystemModel, theorem: str, region, rng,
                     args) -> verify_mod.Report:
    if theorem == "thm1":
        return verify_mod.check_thm1(system, _draw_pairs(rng, region, args.pairs),
                                     tol=args.tol)
    if theorem == "thm3":
        return verify_mod.check_thm3(system, _draw_pairs(rng, region, args.pairs),
                                     tol=args.tol)
    if theorem == "thm2":
        return verify_mod.check_thm2(
            system, _draw_tangent_samples(rng, region, args.samples), tol=args.tol)
    if theorem == "thm4":
        return verify_mod.check_thm4(
            system, _draw_tangent_samples(rng, region, args.samples), tol=args.tol)
    if theorem == "thm5":
        field_name = args.field or "empirical-Q"
        field_obj = _build_field(system, field_name, args.tol, fixed_horizon=40.0)
        return verify_mod.check_thm5(
            system, field_obj, region,
            _draw_tangent_samples(rng, region, min(args.samples, 5)),
            grid_shape=args.grid_shape, tol=args.tol)
    if theorem == "cor7":
        field_name = args.field or "cert-P"
        field_obj = _build_field(system, field_name, args.tol, fixed_horizon=40.0)
        return verify_mod.check_cor7(
            system, field_obj, region,
            _draw_tangent_samples(rng, region, min(args.samples, 5)),
            grid_shape=args.grid_shape)
    raise CliError(f"unknown theorem {theorem!r}")


def _cmd_verify(args) -> int:
    system = _load_system(args)
    region = _parse_region(args.region) if args.region \
        else system.meta.get("default_region")
    if region is None:
        raise CliError("--region is required (system declares no default)")
    if len(region) != system.n:
        raise CliError(f"--region covers {len(region)} dims, system has {system.n}")
    args.grid_shape = _parse_grid(args.grid) if args.grid else None
    out = _out_dir(args)
    names = [t for t in _THEOREMS if t != "all"] if args.theorem == "all" \
        else [args.theorem]
    verdicts = {}
    for name in names:
        rng = SplitMix64(args.seed)
        report = _run_one_theorem(system, name, region, rng, args)
        path = os.path.join(out, f"report_{name}.json" if len(names) > 1
                            else "report.json")
        _write_text(path, report.to_json())
        verdicts[name] = report.verdict
        print(f"{name}: {report.verdict} -> {path}")
    if len(names) > 1:
        _write_text(os.path.join(out, "summary.json"), _json_text(
            {"system": system.name, "seed": args.seed, "verdicts": verdicts}))
    if args.strict and any(v != "pass" for v in verdicts.values()):
        return 1
    return 0


# ---------------------------------------------------------------- example

def _cmd_example(args) -> int:
    args_system = "paper_sec5"
    system = registry(args_system)
    out = _out_dir(args)
    quick = args.quick
    grid = (5, 5) if quick else (21, 21)
    pair_count = 3 if quick else 10
    sample_count = 3 if quick else 10
    rng = SplitMix64(args.seed)
    files = []

    def record(path):
        files.append(os.path.basename(path))
        return path

    # Decaying dual and variational responses from (0.1, 0.1).
    for tag, mode, vec in (("fig1_dual_response", "dual-closed-loop", "dp"),
                           ("fig2_variational_response", "prolonged", "dx")):
        header, rows = _simulate_table(system, mode, [0.1, 0.1], [1.0, 0.0],
                                       10.0, 501)
        csv_path = os.path.join(out, f"{tag}.csv")
        record(_write_text(csv_path, _csv_text(header, rows)))
        record(emit_plot_script(csv_path, "timeseries"))

    # Gramian positivity scan over the example region.
    region = system.meta["default_region"]
    points = gramian_mod.grid_points(region, grid)
    scan_args = argparse.Namespace(jobs=args.jobs, field="empirical-Q", tol=args.tol)
    values = _scan_values(scan_args, ("registry", args_system), points)
    scan = gramian_mod.scan_from_values(region, grid, points, values)
    scan_path = os.path.join(out, "fig3_gramian_scan.csv")
    record(_write_text(scan_path, scan.to_csv()))
    record(emit_plot_script(scan_path, "heatmap", grid_shape=grid,
                            value_column=4, title="det"))

    # Bracket and codistribution rank sweeps.
    rank_region = [(-1.0, 1.0), (-1.0, 1.0)]
    rank_pts = gramian_mod.grid_points(rank_region, grid)
    ctrl = rank_mod.rank_sweep(rank_mod.ctrl_bracket_matrix, system, rank_pts,
                               depth=2)
    record(_write_text(os.path.join(out, "bracket_rank.csv"),
                       rank_mod.sweep_to_csv(rank_pts, ctrl)))
    obs = rank_mod.rank_sweep(rank_mod.obs_codistribution, system, rank_pts,
                              depth=1)
    record(_write_text(os.path.join(out, "obs_rank.csv"),
                       rank_mod.sweep_to_csv(rank_pts, obs)))

    # Certificate residuals on a 5x5 patch.
    res_pts = gramian_mod.grid_points([(-0.5, 0.5), (-0.5, 0.5)], (5, 5))
    rows = []
    for point in res_pts:
        for rep in (list(gramian_mod.lyap_residual_ctrl(
                system, system.certificates["P"], point))
                + list(gramian_mod.riccati_residual(
                    system, system.certificates["R"], point))):
            rows.append([*point, rep.equation_id, rep.frobenius_norm])
    record(_write_text(os.path.join(out, "certificate_residuals.csv"),
                       _csv_text(["x1", "x2", "equation_id", "frobenius_norm"],
                                 rows)))

    # Theorem reports near the origin.
    near = [(-0.1, 0.1), (-0.1, 0.1)]
    verdicts = {}
    checks: list[tuple[str, Callable[[], verify_mod.Report]]] = [
        ("thm1", lambda: verify_mod.check_thm1(
            system, _draw_pairs(rng, near, pair_count), tol=args.tol)),
        ("thm2", lambda: verify_mod.check_thm2(
            system, _draw_tangent_samples(rng, near, sample_count), tol=args.tol)),
        ("thm3", lambda: verify_mod.check_thm3(
            system, _draw_pairs(rng, near, pair_count), tol=args.tol)),
        ("thm4", lambda: verify_mod.check_thm4(
            system, _draw_tangent_samples(rng, near, sample_count), tol=args.tol)),
        ("thm5", lambda: verify_mod.check_thm5(
            system,
            gramian_mod.EmpiricalGramianField(system, "obs", tol=args.tol,
                                              fixed_horizon=40.0),
            region, _draw_tangent_samples(rng, near, 3),
            grid_shape=(3, 3) if quick else (5, 5), tol=args.tol)),
        ("cor7", lambda: verify_mod.check_cor7(
            system, system.certificates["P"], [(-0.5, 0.5), (-0.5, 0.5)],
            _draw_tangent_samples(rng, near, 3),
            grid_shape=(3, 3) if quick else (5, 5))),
    ]
    for name, run in checks:
        report = run()
        verdicts[name] = report.verdict
        record(_write_text(os.path.join(out, f"report_{name}.json"),
                           report.to_json()))
        print(f"{name}: {report.verdict}")

    summary = {"system": args_system, "seed": args.seed, "quick": quick,
               "grid": list(grid), "verdicts": verdicts,
               "positive_definite_everywhere": scan.all_positive_definite(),
               "bracket_rank_always_2": all(r.rank == 2 for r in ctrl),
               "files": sorted(files)}
    record(_write_text(os.path.join(out, "summary.json"), _json_text(summary)))
    print(os.path.join(out, "summary.json"))
    return 0


# ---------------------------------------------------------------- parser

def _add_system_args(p: argparse.ArgumentParser, with_spec: bool = True):
    p.add_argument("--system", default="paper_sec5",
                   help=f"registry name (one of: {', '.join(registry_names())})")
    if with_spec:
        p.add_argument("--spec", default=None,
                       help="JSON system description file (overrides --system)")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that accepts values like -0.5,0.5,-0.5,0.5.

    The stock negative-number heuristic only covers lone numbers, so
    comma-joined coordinate lists starting with a minus would be taken
    for option names.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-\d|^-\.\d")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vargram",
        description="Variational energy, Gramian, and rank analysis of "
                    "control-affine systems.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser(
        "simulate", help="integrate one system mode and write trajectory.csv",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram simulate --system paper_sec5 --mode dual-closed-loop"
               " --x0 0.1,0.1 --dp0 1,0 --tf 10\n"
               "  $ vargram simulate --system linear_2x2 --mode prolonged"
               " --x0 0,0 --dx0 1,0 --tf 5 --plot\n")
    _add_system_args(p)
    p.add_argument("--mode", choices=_MODES, default="prolonged")
    p.add_argument("--x0", required=True, help="initial state, comma-separated")
    p.add_argument("--dx0", default=None, help="variational initial vector")
    p.add_argument("--dp0", default=None, help="dual variational initial vector")
    p.add_argument("--x0p", default=None, help="second-copy initial state")
    p.add_argument("--tf", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=501)
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true",
                   help="also write a gnuplot script")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "energy", help="one energy functional value as JSON",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram energy --system paper_sec5 --kind diff-obs"
               " --x0 0,0 --dx0 1,0\n"
               "  $ vargram energy --system paper_sec5 --kind incr-ctrl"
               " --x0 0.05,0 --x0p 0.1,0.05\n")
    _add_system_args(p)
    p.add_argument("--kind", choices=_ENERGY_KINDS, required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--dx0", default=None)
    p.add_argument("--x0p", default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser(
        "gramian", help="empirical Gramian at one point as JSON",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram gramian --system paper_sec5 --kind obs --x 0,0\n"
               "  $ vargram gramian --system linear_2x2 --kind ctrl --x 0,0"
               " --tol 1e-10\n")
    _add_system_args(p)
    p.add_argument("--kind", choices=("obs", "ctrl"), required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gramian)

    p = sub.add_parser(
        "residual", help="matrix-equation residuals at a point or over a grid",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram residual --system paper_sec5 --equation dLya_con"
               " --field cert-P --x 0.3,-0.2\n"
               "  $ vargram residual --system paper_sec5 --equation dRicc"
               " --field cert-R --region -0.5,0.5,-0.5,0.5 --grid 5x5\n")
    _add_system_args(p)
    p.add_argument("--equation", choices=_EQUATIONS, required=True)
    p.add_argument("--field", required=True,
                   help="cert-<name>, empirical-Q, or empirical-R")
    p.add_argument("--x", default=None)
    p.add_argument("--region", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_residual)

    p = sub.add_parser(
        "rank", help="bracket or codistribution rank at a point or over a grid",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram rank --system paper_sec5 --matrix ctrl --x 0,0"
               " --depth 2\n"
               "  $ vargram rank --system paper_sec5 --matrix obs"
               " --region -1,1,-1,1 --grid 21x21 --depth 1\n")
    _add_system_args(p)
    p.add_argument("--matrix", choices=tuple(_MATRICES), required=True)
    p.add_argument("--x", default=None)
    p.add_argument("--region", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser(
        "pd-scan", help="positive-definiteness scan of a matrix field",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram pd-scan --system paper_sec5 --field empirical-Q"
               " --region -0.3,0.3,-0.3,0.3 --grid 21x21\n"
               "  $ vargram pd-scan --system paper_sec5 --field cert-P"
               " --region -0.5,0.5,-0.5,0.5 --grid 5x5 --plot\n")
    _add_system_args(p)
    p.add_argument("--field", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_pd_scan)

    p = sub.add_parser(
        "verify", help="run a theorem check and write report.json",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram verify --system paper_sec5 --theorem cor7"
               " --region -0.5,0.5,-0.5,0.5\n"
               "  $ vargram verify --system linear_2x2 --theorem all"
               " --region -0.2,0.2,-0.2,0.2 --pairs 3 --samples 3\n")
    _add_system_args(p)
    p.add_argument("--theorem", choices=_THEOREMS, required=True)
    p.add_argument("--region", default=None,
                   help="defaults to the system's declared region, if any")
    p.add_argument("--grid", default=None, help="grid for rank/pd items, like 5x5")
    p.add_argument("--pairs", type=int, default=10)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--field", default=None,
                   help="matrix field for thm5/cor7 (default empirical-Q/cert-P)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--strict", action="store_true",
                   help="exit 1 unless every verdict is pass")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser(
        "example", help="full built-in example bundle: figures, scans, reports",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="examples:\n"
               "  $ vargram example --out runs/example\n"
               "  $ vargram example --out runs/quick --quick --jobs 4\n")
    p.add_argument("--out", default="example_output")
    p.add_argument("--quick", action="store_true",
                   help="small grids and few samples, for smoke runs")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=_cmd_example)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, ExprError, ValueError) as exc:
        print(f"analysis failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
