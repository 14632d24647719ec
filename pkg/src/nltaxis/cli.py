"""Command-line front end: run, sweep, compare, opcheck, plot.

Exit codes: 0 success, 1 configuration/tooling error, 2 physics outcome
(ill-posed abort of a run or of the sweep reference), 3 failed operator
checks. CSV outputs are byte-deterministic for identical configs.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import boundary_layer_comparison, curve_between, MONOTONE_SLACK
from .config import (
    build_manifest,
    load_config,
    solver_config,
    write_manifest,
)
from .diagnostics import format_table, run_opcheck
from .errors import ConfigurationError
from .grid import interior_mask
from .operators import ADHESION_VELOCITY, BALL_AVERAGE, build_operator, gradient_values
from .solver import LOCAL, NONLOCAL_ADHESION, NONLOCAL_BALL, RunResult, integrate


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep 2 for physics
        raise _CliError(message)


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_profiles(path: Path, result: RunResult, centers: np.ndarray) -> None:
    rows = (
        (_fmt(t), _fmt(x), _fmt(c), _fmt(v))
        for k, t in enumerate(result.times)
        for x, c, v in zip(centers, result.c[k], result.v[k])
    )
    _write_rows(path, "t,x,c,v", rows)


def write_diagnostics(path: Path, result: RunResult) -> None:
    d = result.diagnostics
    rows = (
        (_fmt(t), _fmt(d["mass_c"][k]), _fmt(d["min_c"][k]), _fmt(d["max_c"][k]), _fmt(d["mass_v"][k]))
        for k, t in enumerate(result.times)
    )
    _write_rows(path, "t,mass_c,min_c,max_c,mass_v", rows)


def _diag_summary(result: RunResult) -> dict:
    if len(result.times) == 0:
        return {"samples": 0}
    return {
        "samples": int(len(result.times)),
        "final_sample_time": float(result.times[-1]),
        "final_mass_c": float(result.diagnostics["mass_c"][-1]),
        "min_c_over_samples": float(result.diagnostics["min_c"].min()),
        "max_c_over_samples": float(result.diagnostics["max_c"].max()),
    }


def _run_outputs(out_dir: Path, result: RunResult, centers, svg: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    profiles = out_dir / "profiles.csv"
    diagnostics = out_dir / "diagnostics.csv"
    write_profiles(profiles, result, centers)
    write_diagnostics(diagnostics, result)
    outputs = [profiles, diagnostics]
    if svg:
        outputs.extend(_plot_csv(profiles, out_dir))
        outputs.extend(_plot_csv(diagnostics, out_dir))
    return outputs


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    run_cfg = solver_config(cfg)
    started = time.monotonic()
    result = integrate(run_cfg)
    wall = time.monotonic() - started
    svg = "svg" in cfg.formats or args.format == "svg"
    outputs = _run_outputs(out_dir, result, run_cfg.grid.centers, svg)
    manifest = build_manifest(
        cfg,
        result.status,
        result.stats,
        outputs,
        wall,
        diagnostics=_diag_summary(result),
        extra={"t_final": result.t_final, "message": result.message},
    )
    write_manifest(out_dir / "manifest.json", manifest)
    return 0 if result.status == "completed" else 2


def _sweep_worker(config_path: str, kind: str, radius: float) -> RunResult:
    cfg = load_config(config_path)
    return integrate(solver_config(cfg, kind=kind, radius=radius))


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.radii:
        radii = tuple(float(tok) for tok in args.radii.split(","))
    elif cfg.sweep_radii:
        radii = cfg.sweep_radii
    else:
        raise ConfigurationError("no sweep radii given (config [sweep] or --radii)")
    if not radii:
        raise ConfigurationError("empty radii list")
    radii = tuple(sorted(set(radii), reverse=True))
    kind = cfg.formulation_kind if cfg.formulation_kind != LOCAL else NONLOCAL_ADHESION
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    base = solver_config(cfg)
    reference = integrate(solver_config(cfg, kind=LOCAL))
    ref_outputs = _run_outputs(out_dir / "reference", reference, base.grid.centers, False)

    results: list = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_sweep_worker, str(args.config), kind, r) for r in radii]
            for fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:
                    results.append(exc)
    else:
        for r in radii:
            try:
                results.append(_sweep_worker(str(args.config), kind, r))
            except Exception as exc:
                results.append(exc)

    outputs = list(ref_outputs)
    curves = []
    rows = []
    statuses = {}
    for r, res in zip(radii, results):
        label = f"r_{_fmt(r)}"
        if isinstance(res, Exception):
            statuses[label] = f"error: {res}"
            curves.append(None)
            continue
        statuses[label] = res.status
        outputs.extend(_run_outputs(out_dir / label, res, base.grid.centers, False))
        curve = curve_between(res, reference, base.grid.h, base.grid.length)
        curves.append(curve)
        for t, d in zip(curve.times, curve.values):
            rows.append((_fmt(t), _fmt(r), _fmt(d)))
    distances = out_dir / "distances.csv"
    _write_rows(distances, "t,r,d", rows)
    outputs.append(distances)
    if "svg" in cfg.formats or args.format == "svg":
        outputs.extend(_plot_csv(distances, out_dir))

    verdicts = {}
    for k, t in enumerate(reference.times):
        ds = [c.values[k] for c in curves if c is not None and len(c.values) > k]
        verdicts[_fmt(t)] = bool(
            len(ds) >= 2 and all(ds[i + 1] <= ds[i] * (1.0 + MONOTONE_SLACK) for i in range(len(ds) - 1))
        )

    completed = [s for s in statuses.values() if s == "completed"]
    manifest = build_manifest(
        cfg,
        reference.status,
        reference.stats,
        outputs,
        time.monotonic() - started,
        diagnostics=_diag_summary(reference),
        extra={
            "sweep_kind": kind,
            "sweep_radii": [float(r) for r in radii],
            "sweep_statuses": statuses,
            "monotone_verdicts": verdicts,
        },
    )
    write_manifest(out_dir / "manifest.json", manifest)
    if reference.status != "completed":
        return 2
    return 0 if completed else 2


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if not cfg.compare_kinds:
        raise ConfigurationError("config has no [compare] section")
    first, second = cfg.compare_kinds
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    base = solver_config(cfg)
    grid = base.grid

    pair = {first, second}
    if pair == {NONLOCAL_ADHESION, NONLOCAL_BALL} and cfg.radius is not None:
        report = boundary_layer_comparison(base, cfg.radius, epsilon=cfg.epsilon, quad_points=cfg.quad_points)
        run1, run2 = report.run_adhesion, report.run_ball
        header = "t,distance,interior_max,layer_max,op_interior_max,op_layer_max"
        rows = [
            (
                _fmt(t),
                _fmt(report.distance[k]),
                _fmt(report.solution_interior_max[k]),
                _fmt(report.solution_layer_max[k]),
                _fmt(report.operator_interior_max[k]),
                _fmt(report.operator_layer_max[k]),
            )
            for k, t in enumerate(report.times)
        ]
    else:
        run1 = integrate(solver_config(cfg, kind=first))
        run2 = integrate(solver_config(cfg, kind=second))
        n = min(len(run1.times), len(run2.times))
        r_mask = cfg.radius if cfg.radius is not None else 0.0
        flags = interior_mask(grid, r_mask).flags
        header = "t,distance,interior_max,layer_max"
        rows = []
        for k in range(n):
            diff = np.abs(run1.c[k] - run2.c[k])
            rows.append(
                (
                    _fmt(run1.times[k]),
                    _fmt(grid.h / grid.length * diff.sum()),
                    _fmt(diff[flags].max() if flags.any() else 0.0),
                    _fmt(diff[~flags].max() if (~flags).any() else 0.0),
                )
            )
    comparison = out_dir / "comparison.csv"
    _write_rows(comparison, header, rows)
    outputs = [comparison]
    outputs.extend(_run_outputs(out_dir / f"first_{first}", run1, grid.centers, False))
    outputs.extend(_run_outputs(out_dir / f"second_{second}", run2, grid.centers, False))

    if args.op_profiles and cfg.radius is not None:
        kernel = base.coefficients.kernel
        op_a = build_operator(ADHESION_VELOCITY, grid, cfg.radius, kernel=kernel, quad_points=cfg.quad_points)
        op_t = build_operator(BALL_AVERAGE, grid, cfg.radius, kernel=kernel, quad_points=cfg.quad_points)
        prows = []
        for k, t in enumerate(run1.times):
            g = base.coefficients.g(run1.c[k], run1.v[k])
            wa = op_a.apply_values(g)
            wt = op_t.apply_values(gradient_values(g, grid.h))
            for x, a_val, t_val in zip(grid.centers, wa, wt):
                prows.append((_fmt(t), _fmt(x), _fmt(a_val), _fmt(t_val)))
        op_path = out_dir / "operator_profiles.csv"
        _write_rows(op_path, "t,x,adhesion_velocity,ball_average_grad", prows)
        outputs.append(op_path)

    both_ok = run1.status == "completed" and run2.status == "completed"
    manifest = build_manifest(
        cfg,
        "completed" if both_ok else "ill-posed-abort",
        {"first": run1.stats, "second": run2.stats},
        outputs,
        time.monotonic() - started,
        extra={"first": {"kind": first, "status": run1.status}, "second": {"kind": second, "status": run2.status}},
    )
    write_manifest(out_dir / "manifest.json", manifest)
    return 0 if both_ok else 2


def cmd_opcheck(args) -> int:
    checks = run_opcheck(length=args.length, n_cells=args.n_cells, broken_kernel=args.broken_kernel)
    table = format_table(checks)
    print(table)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "opcheck_report.txt").write_text(table + "\n", encoding="utf-8")
    return 0 if all(c.passed for c in checks) else 3


def _read_csv(path: Path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    if not header or not rows:
        raise ConfigurationError(f"{path} is empty or has no data rows")
    try:
        data = np.array([[float(x) for x in row] for row in rows])
    except ValueError as exc:
        raise ConfigurationError(f"{path} has non-numeric data: {exc}") from exc
    if data.shape[1] != len(header):
        raise ConfigurationError(f"{path} rows do not match its header")
    return header, data


def _plot_csv(path: Path, out_dir: Path) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, data = _read_csv(path)
    stem = path.stem
    written = []

    def save(fig, name):
        target = out_dir / f"{name}.svg"
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(target)

    if header == ["t", "x", "c", "v"]:
        times = np.unique(data[:, 0])
        for col, field in ((2, "c"), (3, "v")):
            fig, ax = plt.subplots(figsize=(7, 4))
            for t in times:
                sel = data[:, 0] == t
                ax.plot(data[sel, 1], data[sel, col], label=f"t={t:g}")
            ax.set_xlabel("x")
            ax.set_ylabel(field)
            ax.legend()
            save(fig, f"{stem}_{field}")
    elif header == ["t", "r", "d"]:
        fig, ax = plt.subplots(figsize=(7, 4))
        for r in np.unique(data[:, 1])[::-1]:
            sel = data[:, 1] == r
            ax.plot(data[sel, 0], data[sel, 2], marker="o", label=f"r={r:g}")
        ax.set_xlabel("t")
        ax.set_ylabel("distance to reference")
        ax.legend()
        save(fig, stem)
    elif header[0] == "t":
        fig, ax = plt.subplots(figsize=(7, 4))
        for j, name in enumerate(header[1:], start=1):
            ax.plot(data[:, 0], data[:, j], label=name)
        ax.set_xlabel("t")
        ax.legend()
        save(fig, stem)
    else:
        raise ConfigurationError(f"unrecognized CSV header in {path}: {header}")
    return written


def cmd_plot(args) -> int:
    path = Path(args.csv)
    out_dir = Path(args.out) if args.out else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    written = _plot_csv(path, out_dir)
    for p in written:
        print(p)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="nltaxis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config (TOML)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "svg"), default=None, help="extra output format")
        p.add_argument("--jobs", type=int, default=1, help="parallel runs where applicable")

    p_run = sub.add_parser("run", help="run one simulation")
    add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="nonlocal-vs-local radius sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--radii", default=None, help="comma-separated radii (overrides config)")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="run and compare two formulations")
    add_common(p_cmp)
    p_cmp.add_argument("--op-profiles", action="store_true", help="dump operator output profiles")
    p_cmp.set_defaults(fn=cmd_compare)

    p_op = sub.add_parser("opcheck", help="operator property suite")
    p_op.add_argument("--length", type=float, default=20.0)
    p_op.add_argument("--n-cells", type=int, default=2000)
    p_op.add_argument("--out", default=None)
    p_op.add_argument("--broken-kernel", action="store_true", help="inject an invalid kernel")
    p_op.set_defaults(fn=cmd_opcheck)

    p_plot = sub.add_parser("plot", help="render CSV outputs to SVG")
    p_plot.add_argument("csv", help="CSV file produced by run/sweep/compare")
    p_plot.add_argument("--out", default=None)
    p_plot.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _CliError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
