"""Run orchestration: initial state, integration loop, sampling, snapshots.

The loop is deterministic given the config: the only randomness is the
seeded initial spectrum.  Blow-up (first non-finite value) aborts the run
and reports the failure time together with the last valid sample.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import io as labio
from .diagnostics import (
    DiagnosticsRecord,
    WavenumberConfig,
    default_wavenumber_config,
    sample_record,
)
from .littlewood_paley import partition_for
from .paraproduct import cancellation_suite
from .solvers import (
    BlowupError,
    SolverState,
    cfl_limit,
    make_state,
    random_spectrum,
    single_mode,
    step,
    taylor_green,
)
from .spectral import Field, Grid, riesz_perp_multiplier


@dataclass
class RunResult:
    columns: list[str]
    records: list[DiagnosticsRecord]
    final_state: SolverState
    aborted: bool = False
    abort_time: float | None = None
    snapshots: list[tuple[float, Field]] | None = None

    def series(self) -> dict[str, np.ndarray]:
        data = np.array([r.row() for r in self.records])
        return {name: data[:, i] for i, name in enumerate(self.columns)}


def wavenumber_config(cfg: labio.RunConfig) -> WavenumberConfig:
    return default_wavenumber_config(
        cfg.system,
        c=cfg.c,
        r_set=cfg.r_set or None,
        delta=cfg.delta,
        tail_offset=cfg.tail_offset,
        rl_pairs=cfg.rl_pairs,
    )


def build_initial_state(cfg: labio.RunConfig) -> SolverState:
    grid = Grid(cfg.dim, cfg.n)
    constants = dict(nu=cfg.nu, mu=cfg.mu, kappa=cfg.kappa, alpha=cfg.alpha)
    kind = cfg.init_kind
    if kind == "from_snapshot":
        system, t, arrays, sgrid = labio.read_snapshot(cfg.init_path)
        if sgrid.n != cfg.n or sgrid.dim != cfg.dim:
            raise labio.ConfigError(
                [
                    f"init.path: snapshot grid (dim={sgrid.dim}, n={sgrid.n}) does not "
                    f"match config (dim={cfg.dim}, n={cfg.n})"
                ]
            )
        fields = labio.fields_from_arrays(sgrid, arrays)
        return make_state(cfg.system, sgrid, t=0.0, **fields, **constants)

    if kind == "taylor_green":
        if cfg.system == "sqg":
            theta = Field.from_function(grid, lambda x, y: np.sin(x) * np.sin(y))
            return make_state("sqg", grid, theta=theta, **constants)
        u = taylor_green(grid)
        if cfg.system in ("mhd", "hallmhd"):
            return make_state(cfg.system, grid, u=u, b=u, **constants)
        return make_state(cfg.system, grid, u=u, **constants)

    if kind == "single_mode":
        if cfg.system == "sqg":
            theta = single_mode(grid, cfg.init_k, cfg.init_amplitude, components=1)
            return make_state("sqg", grid, theta=theta, **constants)
        u = single_mode(grid, cfg.init_k, cfg.init_amplitude, components=grid.dim)
        if cfg.system in ("mhd", "hallmhd"):
            return make_state(cfg.system, grid, u=u, b=Field.zeros(grid, grid.dim), **constants)
        return make_state(cfg.system, grid, u=u, **constants)

    # random_spectrum
    rng = np.random.default_rng(cfg.effective_init_seed())
    if cfg.system == "sqg":
        theta = random_spectrum(
            grid, cfg.init_slope, cfg.init_k_peak, rng, 1, solenoidal=False
        )
        return make_state("sqg", grid, theta=theta, **constants)
    u = random_spectrum(grid, cfg.init_slope, cfg.init_k_peak, rng, grid.dim, solenoidal=True)
    if cfg.system in ("mhd", "hallmhd"):
        b = random_spectrum(
            grid, cfg.init_slope, cfg.init_k_peak, rng, grid.dim, solenoidal=True
        )
        return make_state(cfg.system, grid, u=u, b=b, **constants)
    return make_state(cfg.system, grid, u=u, **constants)


def _check_cancellations(state: SolverState, part) -> None:
    if state.system == "sqg":
        u = riesz_perp_multiplier(state.theta)
        report = cancellation_suite(part, u=u)
    else:
        report = cancellation_suite(part, u=state.u, b=state.b)
    if not report.passed:
        raise RuntimeError(
            f"cancellation identity violated at t = {state.t}: "
            f"max normalized value {report.max_normalized:.3e}"
        )


def run_simulation(
    cfg: labio.RunConfig,
    *,
    on_record: Callable[[DiagnosticsRecord], None] | None = None,
    on_snapshot: Callable[[int, SolverState], None] | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """Integrate to T (or abort on blow-up), sampling diagnostics every
    sample_stride steps and emitting snapshots every snapshot_stride steps
    plus at the final step."""
    state = build_initial_state(cfg)
    part = partition_for(state.grid)
    wcfg = wavenumber_config(cfg)
    n_steps = cfg.n_steps

    records: list[DiagnosticsRecord] = []
    snaps: list[tuple[float, Field]] = [] if keep_snapshots else None

    def sample(st: SolverState) -> None:
        rec = sample_record(st, part, wcfg)
        if cfg.check_cancellation:
            _check_cancellations(st, part)
        if cfg.dt > cfl_limit(st):
            warnings.warn(
                f"dt = {cfg.dt} exceeds the advective CFL limit at t = {st.t}",
                RuntimeWarning,
                stacklevel=2,
            )
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    def snapshot(step_index: int, st: SolverState) -> None:
        if on_snapshot is not None:
            on_snapshot(step_index, st)
        if snaps is not None:
            snaps.append((st.t, st.primary_field()))

    sample(state)
    snapshot(0, state)
    aborted = False
    abort_time = None
    for s in range(1, n_steps + 1):
        try:
            state = step(state, cfg.dt)
        except BlowupError as exc:
            aborted = True
            abort_time = exc.t
            break
        if s % cfg.sample_stride == 0:
            sample(state)
        if s % cfg.snapshot_stride == 0 or s == n_steps:
            snapshot(s, state)
    columns = records[0].columns if records else []
    return RunResult(
        columns=columns,
        records=records,
        final_state=state,
        aborted=aborted,
        abort_time=abort_time,
        snapshots=snaps,
    )
