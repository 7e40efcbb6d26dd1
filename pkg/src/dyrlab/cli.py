"""Batch command line: run, analyze, criteria, verify.

Exit codes: 0 clean, 1 config/usage/data error, 2 blow-up abort.
DYRL_THREADS (>= 1) caps internal parallelism; the current evaluation path
is serial, so any cap is honored.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as labio
from .diagnostics import (
    criteria_battery,
    kolmogorov_stats,
    render_criteria_report,
    sample_record,
    wavenumber,
)
from .littlewood_paley import besov_norm, partition_for
from .runner import run_simulation, wavenumber_config
from .solvers import make_state
from .spectral import Field, Grid, lp_norm
from .verify import DEFAULT_SEED, run_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2


def thread_cap() -> int:
    raw = os.environ.get("DYRL_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise labio.ConfigError([f"DYRL_THREADS: {exc}"]) from exc
    if cap < 1:
        raise labio.ConfigError(["DYRL_THREADS: must be >= 1"])
    return cap


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = labio.load_config(args.config)
    except FileNotFoundError:
        print(f"config error: no such file {args.config}", file=sys.stderr)
        return EXIT_ERROR
    except labio.ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_ERROR

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.config").write_text(labio.serialize_config(cfg))

    writer: labio.SeriesWriter | None = None

    def on_record(rec) -> None:
        nonlocal writer
        if writer is None:
            writer = labio.SeriesWriter(out / "series.csv", rec.columns)
        writer.write_row(rec.row())

    def on_snapshot(step_index: int, state) -> None:
        labio.write_snapshot(
            out / f"snapshot_{step_index:08d}.dyrl",
            state.system,
            state.t,
            labio.state_field_arrays(state),
            state.grid,
        )

    try:
        try:
            result = run_simulation(cfg, on_record=on_record, on_snapshot=on_snapshot)
        finally:
            if writer is not None:
                writer.close()
    except labio.ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        # Leave a marker next to whatever prefix of the series survived.
        try:
            (out / "aborted.marker").write_text(f"io failure: {exc}\n")
        except OSError:
            pass
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if result.aborted:
        (out / "blowup.marker").write_text(
            f"non-finite values at t = {result.abort_time!r}\n"
        )
        print(f"aborted: non-finite values at t = {result.abort_time}", file=sys.stderr)
        return EXIT_BLOWUP
    print(f"run complete: {len(result.records)} samples -> {out / 'series.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        system, t, arrays, grid = labio.read_snapshot(args.path)
    except (labio.SnapshotError, FileNotFoundError, ValueError) as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    fields = labio.fields_from_arrays(grid, arrays)
    state = make_state(
        system,
        grid,
        t=t,
        nu=args.nu,
        mu=args.mu,
        kappa=args.kappa,
        alpha=args.alpha,
        **fields,
    )
    part = partition_for(grid)
    r_set = tuple(labio._parse_r(x) for x in args.r_set.split(",")) if args.r_set else None
    from .diagnostics import default_wavenumber_config

    cfg = default_wavenumber_config(system, c=args.c, r_set=r_set, delta=args.delta)
    res = wavenumber(state, part, cfg)
    res_u, res_b = (res if isinstance(res, tuple) else (res, None))

    print(f"snapshot: system={system} dim={grid.dim} n={grid.n} t={t:.17g}")
    tag = "Lambda_u" if res_b is not None else "Lambda"
    sat = " (saturated: grid cannot certify the split)" if res_u.saturated else ""
    print(f"{tag} = {res_u.lam:g}  Q = {res_u.Q}{sat}")
    if res_b is not None:
        sat = " (saturated)" if res_b.saturated else ""
        print(f"Lambda_b = {res_b.lam:g}  Q_b = {res_b.Q}{sat}")

    primary = state.primary_field()
    print("\nshell norms of the primary field:")
    for q in part.shells:
        from .littlewood_paley import project_shell

        sh = project_shell(part, primary, q)
        print(f"  q={q:<3d} L2={lp_norm(sh, 2):.6e}  Linf={lp_norm(sh, np.inf):.6e}")
    print("\nbesov norms:")
    for s, p in ((1.0, np.inf), (0.0, np.inf), (0.0, 2.0)):
        print(f"  B^{s:g}_{'inf' if p == np.inf else int(p)},inf = "
              f"{besov_norm(part, primary, s, p):.6e}")

    def table(res, label):
        print(f"\nsmallness tests for {label} (failing rows marked *):")
        for row in res.tests:
            mark = " " if row.passed else "*"
            qpart = f"q={row.q:<3d} " if row.q is not None else ""
            rr = "inf" if row.r == np.inf else f"{row.r:g}"
            print(
                f" {mark} {qpart}p={row.p:<3d} r={rr:<4} value={row.value:.6e} "
                f"threshold={row.threshold:.6e}"
            )

    table(res_u, tag)
    if res_b is not None:
        table(res_b, "Lambda_b")
    return EXIT_OK


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def _load_run_context(series_path: Path, config_path: str | None):
    if config_path is not None:
        cfg = labio.load_config(config_path)
    else:
        candidate = series_path.parent / "run.config"
        if not candidate.exists():
            raise labio.ConfigError(
                ["no run.config next to the series; pass --config"]
            )
        cfg = labio.load_config(candidate)
    return cfg


def _collect_snapshots(series_dir: Path):
    snaps = []
    for path in sorted(series_dir.glob("snapshot_*.dyrl")):
        system, t, arrays, grid = labio.read_snapshot(path)
        fields = labio.fields_from_arrays(grid, arrays)
        primary = fields["theta"] if system == "sqg" else fields["u"]
        snaps.append((t, primary))
    return snaps


def cmd_criteria(args: argparse.Namespace) -> int:
    series_path = Path(args.path)
    try:
        header, series = labio.read_series(series_path)
        cfg = _load_run_context(series_path, args.config)
        wcfg = wavenumber_config(cfg)
        snapshots = _collect_snapshots(series_path.parent)
        constants = dict(nu=cfg.nu, mu=cfg.mu, kappa=cfg.kappa, alpha=cfg.alpha)
        report = criteria_battery(
            series, wcfg, cfg.system, constants, snapshots=snapshots or None
        )
    except (labio.ConfigError, labio.SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (KeyError, ValueError) as exc:
        print(f"series error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = render_criteria_report(report)
    print(text, end="")
    if args.plots:
        _write_plots(Path(args.plots), series, report, cfg)
    return EXIT_OK


def _write_plots(plot_dir: Path, series, report, cfg) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dyrlab"
    plot_dir.mkdir(parents=True, exist_ok=True)
    t = series["t"]

    def save(fig, name):
        fig.savefig(plot_dir / f"{name}.svg", metadata={"Date": None})
        plt.close(fig)

    if cfg.system != "sqg" and cfg.nu > 0:
        stats = kolmogorov_stats(
            t, series["enstrophy_u"], series["Lambda"], cfg.nu
        )
        fig, ax = plt.subplots()
        ax.plot(t, series["Lambda"], drawstyle="steps-post", label="Lambda(t)")
        ax.axhline(stats.kappa_d, color="k", linestyle="--", label="kappa_d")
        ax.set_xlabel("t")
        ax.set_yscale("log", base=2)
        ax.legend()
        save(fig, "lambda_vs_kappa")

    integrands = {
        "bkm": "vort_sup",
        "lowmodes_vorticity": "low_vort_besov0",
        "sqg_lowmodes": "low_grad_besov0",
    }
    for name, col in integrands.items():
        if col in series:
            fig, ax = plt.subplots()
            ax.plot(t, series[col])
            ax.set_xlabel("t")
            ax.set_ylabel(col)
            save(fig, f"integrand_{name}")

    if report.fq:
        qs = sorted(report.fq)
        fig, ax = plt.subplots()
        ax.bar([str(q) for q in qs], [report.fq[q] for q in qs])
        ax.set_xlabel("q")
        ax.set_ylabel("F(q)")
        save(fig, "shell_tail_Fq")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        result = run_suite(args.suite, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for line in result.lines:
        print(line)
    print(f"suite {result.name}: {'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_ERROR


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyrlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a configured system")
    run.add_argument("--config", required=True)
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze", help="one-shot diagnostics on a snapshot")
    an.add_argument("path")
    an.add_argument("--r-set", default="")
    an.add_argument("--nu", type=float, default=0.1)
    an.add_argument("--mu", type=float, default=0.1)
    an.add_argument("--kappa", type=float, default=0.1)
    an.add_argument("--alpha", type=float, default=0.5)
    an.add_argument("--c", type=float, default=0.1)
    an.add_argument("--delta", type=float, default=3.0)
    an.set_defaults(func=cmd_analyze)

    cr = sub.add_parser("criteria", help="criteria battery over a series file")
    cr.add_argument("path")
    cr.add_argument("--config", default=None)
    cr.add_argument("--plots", default=None)
    cr.set_defaults(func=cmd_criteria)

    ve = sub.add_parser("verify", help="randomized property suites")
    ve.add_argument("--suite", required=True)
    ve.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ve.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
