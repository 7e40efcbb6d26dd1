"""Regularity diagnostics along simulated trajectories.

The central object is the dissipation wavenumber: the smallest dyadic scale
2^q such that every shell above it passes a viscosity-weighted smallness
test.  Frequencies above it are dissipation-dominated; the low-mode
regularity criteria integrate norms of the projection below it.

Discrete surrogates used throughout (each labeled in reports):
  * the limsup over shell index is replaced by a sup over the resolved tail
    q >= q0 (default q_max - 3);
  * the vanishing-window limit at the final time is replaced by the last 10%
    of the sampled window;
  * when no shell index passes the smallness scan the wavenumber saturates
    at 2^(q_max + 1) and is flagged, never silently clamped: saturation
    means the grid cannot certify the split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .littlewood_paley import (
    DyadicPartition,
    besov_norm,
    lam,
    project_low,
    project_shell,
    shell_decompose,
)
from .solvers import SolverState, dissipation_rate, energy
from .spectral import (
    Field,
    FieldError,
    curl,
    gradient,
    grad_sq_l2,
    lp_norm,
    riesz_perp_multiplier,
)

try:  # numpy >= 2.0
    from numpy import trapezoid as _trapz
except ImportError:  # pragma: no cover
    _trapz = np.trapz


class DiagnosticsError(ValueError):
    """Invalid diagnostics configuration or series."""


def _rtag(r: float) -> str:
    if r == np.inf:
        return "inf"
    if float(r).is_integer():
        return str(int(r))
    return f"{r:g}"


_DEFAULT_R_SET = {
    "nse2d": (2.0, 3.0, 4.0, 6.0, 12.0, np.inf),
    "nse3d": (2.0, 3.0, 4.0, 6.0, 12.0, np.inf),
    "mhd": (2.0, 3.0, 4.0, 6.0),
    "hallmhd": (np.inf,),
    "sqg": (np.inf,),
}

_R_RANGE = {
    "nse2d": (2.0, np.inf),
    "nse3d": (2.0, np.inf),
    "mhd": (2.0, 6.0),
    "hallmhd": (2.0, np.inf),
    "sqg": (np.inf, np.inf),
}


@dataclass(frozen=True)
class WavenumberConfig:
    """Exponent set, smallness constants and kernel exponent for the
    dissipation-wavenumber tests."""

    r_set: tuple[float, ...]
    c: dict[float, float]
    delta: float = 3.0
    tail_offset: int = 3
    rl_pairs: tuple[tuple[float, float], ...] = ((2.0, 2.0), (np.inf, 1.0))

    def c_of(self, r: float) -> float:
        return self.c[r]

    @property
    def c_inf(self) -> float:
        return self.c.get(np.inf, next(iter(self.c.values())))


def default_wavenumber_config(
    system: str,
    c: float = 0.1,
    r_set: tuple[float, ...] | None = None,
    delta: float = 3.0,
    tail_offset: int = 3,
    rl_pairs: tuple[tuple[float, float], ...] = ((2.0, 2.0), (np.inf, 1.0)),
) -> WavenumberConfig:
    rs = tuple(r_set) if r_set is not None else _DEFAULT_R_SET[system]
    if not rs:
        raise DiagnosticsError("r_set must not be empty")
    lo, hi = _R_RANGE[system]
    for r in rs:
        if not (lo <= r <= hi):
            raise DiagnosticsError(
                f"r = {r} outside the admissible range [{lo}, {hi}] for {system}"
            )
    if c <= 0:
        raise DiagnosticsError("smallness constant must be positive")
    cmap = {r: c for r in rs}
    cmap.setdefault(np.inf, c)
    for r, _l in rl_pairs:
        cmap.setdefault(r, c)
    return WavenumberConfig(
        r_set=rs, c=cmap, delta=delta, tail_offset=tail_offset, rl_pairs=tuple(rl_pairs)
    )


# ---------------------------------------------------------------------------
# The dissipation wavenumber
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallnessTest:
    """One row of the test table that determined the wavenumber."""

    p: int
    r: float
    value: float
    threshold: float
    passed: bool
    q: int | None = None  # set when the test depends on the candidate index


@dataclass(frozen=True)
class WavenumberResult:
    lam: float
    Q: int
    saturated: bool
    tests: tuple[SmallnessTest, ...]


def shell_norms(
    part: DyadicPartition, f: Field, rs: tuple[float, ...]
) -> dict[float, np.ndarray]:
    """||shell_q f||_r for q = -1..q_max (array index q + 1), per r."""
    shells = shell_decompose(part, f)
    return {
        r: np.array([lp_norm(s, r) for s in shells], dtype=np.float64) for r in rs
    }


def _scan(part: DyadicPartition, passes) -> tuple[float, int, bool]:
    """Smallest q in [0, q_max - 1] whose tests all pass; otherwise the
    saturated value 2^(q_max + 1)."""
    for q in range(part.q_max):
        if passes(q):
            return lam(q), q, False
    return lam(part.q_max + 1), part.q_max + 1, True


def _fixed_test_result(
    part: DyadicPartition,
    values: dict[tuple[int, float], float],
    thresholds: dict[float, float],
) -> WavenumberResult:
    """Scan for q-independent per-(p, r) tests."""
    tests = tuple(
        SmallnessTest(
            p=p,
            r=r,
            value=v,
            threshold=thresholds[r],
            passed=v < thresholds[r],
        )
        for (p, r), v in sorted(values.items(), key=lambda kv: (kv[0][0], kv[0][1]))
    )
    fails = {t.p for t in tests if not t.passed}

    def passes(q: int) -> bool:
        return all(p <= q for p in fails)

    lam_val, Q, sat = _scan(part, passes)
    return WavenumberResult(lam=lam_val, Q=Q, saturated=sat, tests=tests)


def wavenumber(
    state: SolverState, part: DyadicPartition, cfg: WavenumberConfig
) -> WavenumberResult | tuple[WavenumberResult, WavenumberResult]:
    """Evaluate the per-system smallness scan.

    Velocity systems test lambda_p**(-1+3/r) ||u_p||_r < c_r * nu over every
    configured r; the fractional-transport system tests
    lambda_p**(1-alpha) ||theta_p||_inf < c * kappa; the Hall system returns
    the pair (velocity, magnetic) where the magnetic test carries the kernel
    factor 2**(delta (p - q)) and both use c * min(nu, mu).
    """
    if state.system == "sqg":
        norms = shell_norms(part, state.theta, (np.inf,))
        thr = cfg.c_inf * state.kappa
        values = {
            (p, np.inf): lam(p) ** (1.0 - state.alpha) * norms[np.inf][p + 1]
            for p in range(1, part.q_max + 1)
        }
        return _fixed_test_result(part, values, {np.inf: thr})

    if state.system in ("nse2d", "nse3d", "mhd"):
        norms = shell_norms(part, state.u, cfg.r_set)
        thresholds = {r: cfg.c_of(r) * state.nu for r in cfg.r_set}
        values = {}
        for r in cfg.r_set:
            e = -1.0 + (0.0 if r == np.inf else 3.0 / r)
            for p in range(1, part.q_max + 1):
                values[(p, r)] = lam(p) ** e * norms[r][p + 1]
        return _fixed_test_result(part, values, thresholds)

    # Hall-MHD: velocity part at r = inf, magnetic part with the dyadic kernel.
    floor = cfg.c_inf * min(state.nu, state.mu)
    u_norms = shell_norms(part, state.u, (np.inf,))[np.inf]
    u_values = {
        (p, np.inf): lam(p) ** (-1.0) * u_norms[p + 1]
        for p in range(1, part.q_max + 1)
    }
    res_u = _fixed_test_result(part, u_values, {np.inf: floor})

    b_norms = shell_norms(part, state.b, (np.inf,))[np.inf]
    rows: list[SmallnessTest] = []

    def passes_b(q: int) -> bool:
        ok = True
        for p in range(q + 1, part.q_max + 1):
            v = 2.0 ** (cfg.delta * (p - q)) * b_norms[p + 1]
            good = v < floor
            rows.append(
                SmallnessTest(p=p, r=np.inf, value=v, threshold=floor, passed=good, q=q)
            )
            ok = ok and good
        return ok

    lam_b, Qb, sat_b = _scan(part, passes_b)
    res_b = WavenumberResult(lam=lam_b, Q=Qb, saturated=sat_b, tests=tuple(rows))
    return res_u, res_b


# ---------------------------------------------------------------------------
# Sampled records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One sampled time point, flattened to named scalar columns."""

    system: str
    q_max: int
    values: dict[str, float]

    def row(self) -> list[float]:
        return list(self.values.values())

    @property
    def columns(self) -> list[str]:
        return list(self.values.keys())


def _clamped_Q(res: WavenumberResult, part: DyadicPartition) -> int:
    return min(res.Q, part.q_max)


def sample_record(
    state: SolverState, part: DyadicPartition, cfg: WavenumberConfig
) -> DiagnosticsRecord:
    """Compute every per-sample diagnostic the criteria battery consumes."""
    vals: dict[str, float] = {"t": state.t}
    q_range = range(-1, part.q_max + 1)

    if state.system == "hallmhd":
        res_u, res_b = wavenumber(state, part, cfg)
        res = res_u
    else:
        res = wavenumber(state, part, cfg)
        res_b = None

    vals["Lambda"] = res.lam
    vals["Q"] = float(res.Q)
    vals["saturated"] = 1.0 if res.saturated else 0.0
    if res_b is not None:
        vals["Lambda_b"] = res_b.lam
        vals["Q_b"] = float(res_b.Q)
        vals["saturated_b"] = 1.0 if res_b.saturated else 0.0

    vals["energy"] = energy(state)
    vals["dissipation"] = dissipation_rate(state)

    if state.system == "sqg":
        th = state.theta
        vals["grad_sq"] = grad_sq_l2(th)
        gth = gradient(th)
        vals["grad_sup"] = lp_norm(gth, np.inf)
        vals["u_sup"] = lp_norm(riesz_perp_multiplier(th), np.inf)
        low_g = project_low(part, gth, _clamped_Q(res, part))
        vals["low_grad_besov0"] = besov_norm(part, low_g, 0.0, np.inf)
        sup = shell_norms(part, th, (np.inf,))[np.inf]
        for q in q_range:
            vals[f"shell_th_rinf_q{q}"] = sup[q + 1]
        return DiagnosticsRecord(system=state.system, q_max=part.q_max, values=vals)

    u = state.u
    vals["enstrophy_u"] = grad_sq_l2(u)
    if state.b is not None:
        vals["enstrophy_b"] = grad_sq_l2(state.b)
    vort = curl(u)
    vals["vort_sup"] = lp_norm(vort, np.inf)
    vals["u_sup"] = lp_norm(u, np.inf)

    Qc = _clamped_Q(res, part)
    low_u = project_low(part, u, Qc)
    low_vort = project_low(part, vort, Qc)
    vals["low_besov1"] = besov_norm(part, low_u, 1.0, np.inf)
    vals["low_vort_besov0"] = besov_norm(part, low_vort, 0.0, np.inf)
    for r, ell in cfg.rl_pairs:
        s = -1.0 + (0.0 if r == np.inf else 3.0 / r) + 2.0 / ell
        vals[f"low_besov_r{_rtag(r)}_l{_rtag(ell)}"] = besov_norm(part, low_u, s, r)
    for r in sorted({r for r, _ in cfg.rl_pairs}):
        vals[f"norm_u_r{_rtag(r)}"] = lp_norm(u, r)

    rs_all = tuple(sorted(set(cfg.r_set) | {2.0, np.inf}))
    norms_u = shell_norms(part, u, rs_all)
    for r in rs_all:
        for q in q_range:
            vals[f"shell_u_r{_rtag(r)}_q{q}"] = norms_u[r][q + 1]
    vort_sup = shell_norms(part, vort, (np.inf,))[np.inf]
    for q in q_range:
        vals[f"shell_vort_rinf_q{q}"] = vort_sup[q + 1]

    if res_b is not None:
        low_b = project_low(part, state.b, _clamped_Q(res_b, part))
        vals["low_b_besov0"] = besov_norm(part, low_b, 0.0, np.inf)
        b_sup = shell_norms(part, state.b, (np.inf,))[np.inf]
        for q in q_range:
            vals[f"shell_b_rinf_q{q}"] = b_sup[q + 1]

    return DiagnosticsRecord(system=state.system, q_max=part.q_max, values=vals)


# ---------------------------------------------------------------------------
# Kolmogorov-scale statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KolmogorovStats:
    epsilon: float
    kappa_d: float
    kappa_d_sigma: float
    sigma: float
    mean_lam: float
    mean_lam_active: float


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    w[0] = 0.5 * (t[1] - t[0])
    w[-1] = 0.5 * (t[-1] - t[-2])
    if t.size > 2:
        w[1:-1] = 0.5 * (t[2:] - t[:-2])
    return w


def kolmogorov_stats(
    t: np.ndarray,
    grad_sq_series: np.ndarray,
    lam_series: np.ndarray,
    nu: float,
    sigma: float = 0.0,
) -> KolmogorovStats:
    """Time-averaged dissipation rate, the dimensional dissipation wavenumber
    epsilon**(1/4) nu**(-3/4), its intermittency-corrected variant
    (epsilon/nu^3)**(1/(4-sigma)), and the time averages of the dissipation
    wavenumber (full window, and restricted to times where it exceeds 1)."""
    if not 0.0 <= sigma <= 3.0:
        raise DiagnosticsError(f"sigma must lie in [0, 3], got {sigma}")
    if nu <= 0:
        raise DiagnosticsError("nu must be positive for Kolmogorov statistics")
    t = np.asarray(t, dtype=np.float64)
    if t.size < 2:
        raise DiagnosticsError("need at least two samples")
    T = t[-1] - t[0]
    eps = float(_trapz(np.asarray(grad_sq_series, dtype=np.float64), t) / T)
    kappa_d = eps**0.25 * nu**-0.75
    kappa_sigma = (eps / nu**3) ** (1.0 / (4.0 - sigma))
    w = _trapezoid_weights(t)
    lam_arr = np.asarray(lam_series, dtype=np.float64)
    mean_lam = float(np.sum(w * lam_arr) / T)
    active = lam_arr > 1.0
    mean_lam_active = float(np.sum(w[active] * lam_arr[active]) / T)
    return KolmogorovStats(
        epsilon=eps,
        kappa_d=kappa_d,
        kappa_d_sigma=kappa_sigma,
        sigma=sigma,
        mean_lam=mean_lam,
        mean_lam_active=mean_lam_active,
    )


# ---------------------------------------------------------------------------
# Criteria battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriterionRow:
    name: str
    value: float
    threshold: float
    threshold_expr: str
    status: str  # satisfied | violated | indeterminate


@dataclass(frozen=True)
class CriteriaReport:
    system: str
    rows: tuple[CriterionRow, ...]
    fq: dict[int, float]
    tq: dict[int, float]
    meta: dict[str, float]

    def row(self, name: str) -> CriterionRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def _status(value: float, threshold: float) -> str:
    if not math.isfinite(value) and math.isnan(value):
        return "indeterminate"
    if threshold == np.inf:
        return "satisfied" if math.isfinite(value) else "violated"
    return "satisfied" if value < threshold else "violated"


def _infer_q_max(series: dict[str, np.ndarray], prefix: str) -> int:
    qs = []
    for name in series:
        if name.startswith(prefix):
            qs.append(int(name[len(prefix):]))
    if not qs:
        raise DiagnosticsError(f"series lacks {prefix}* columns")
    return max(qs)


def _entry_times(t: np.ndarray, Q: np.ndarray, q: int) -> float:
    """Latest time up to which Q stayed below q on the second half-window."""
    T = t[-1]
    half = t[0] + 0.5 * (T - t[0])
    for ti, Qi in zip(t, Q):
        if ti <= half + 1e-12 * max(abs(T), 1.0):
            continue
        if Qi >= q:
            return float(ti)
    return float(T)


def criteria_battery(
    series: dict[str, np.ndarray],
    cfg: WavenumberConfig,
    system: str,
    constants: dict[str, float],
    snapshots: list[tuple[float, Field]] | None = None,
) -> CriteriaReport:
    """Evaluate the low-mode criteria over a sampled trajectory.

    `series` maps column names (as produced by sample_record) to arrays;
    `snapshots` optionally supplies (time, primary field) pairs so the
    final-time Besov-distance criterion can be evaluated -- without them
    that row is reported as indeterminate.
    """
    t = np.asarray(series["t"], dtype=np.float64)
    if t.size < 4:
        raise DiagnosticsError("series shorter than 4 samples")
    T = float(t[-1])
    t0 = float(t[0])
    eps_t = 1e-12 * max(abs(T), 1.0)
    half = t0 + 0.5 * (T - t0)
    late = T - 0.1 * (T - t0)
    Q = np.asarray(series["Q"], dtype=np.float64)
    nu = float(constants.get("nu", 0.0))

    rows: list[CriterionRow] = []

    def add(name, value, threshold, expr):
        rows.append(
            CriterionRow(
                name=name,
                value=float(value),
                threshold=float(threshold),
                threshold_expr=expr,
                status=_status(float(value), float(threshold)),
            )
        )

    def integral(values: np.ndarray, t_from: float | None = None) -> float:
        if t_from is None:
            return float(_trapz(values, t))
        sel = t >= t_from - eps_t
        if np.sum(sel) < 2:
            return 0.0
        return float(_trapz(values[sel], t[sel]))

    if system == "sqg":
        add(
            "sqg_lowmodes",
            integral(series["low_grad_besov0"]),
            np.inf,
            "< inf",
        )
        q_max = _infer_q_max(series, "shell_th_rinf_q")
        fq: dict[int, float] = {}
        tq: dict[int, float] = {}
    else:
        q_max = _infer_q_max(series, "shell_vort_rinf_q")
        q0 = max(0, q_max - cfg.tail_offset)
        c0 = cfg.c_inf

        add("bkm", integral(series["vort_sup"]), np.inf, "< inf")
        add("lowmodes_vorticity", integral(series["low_vort_besov0"]), np.inf, "< inf")

        # Shell-flux tail statistic over the second half-window.
        fq = {}
        for q in range(0, q_max + 1):
            ind = (q <= Q + 1e-9).astype(np.float64)
            vals = ind * lam(q) * series[f"shell_u_rinf_q{q}"]
            fq[q] = integral(vals, half)
        add("shell_tail", max(fq[q] for q in range(q0, q_max + 1)), c0, "c_inf")

        tq = {q: _entry_times(t, Q, q) for q in range(0, q_max + 1)}

        def tail(values_of_q) -> float:
            return max(values_of_q(q) for q in range(q0, q_max + 1))

        add(
            "i",
            tail(lambda q: integral(series[f"shell_vort_rinf_q{q}"], tq[q])),
            c0,
            "c_inf",
        )
        add(
            "ii",
            tail(lambda q: integral(series[f"shell_vort_rinf_q{q}"], late)),
            c0,
            "c_inf",
        )
        sup_low = np.zeros_like(t)
        for i in range(t.size):
            vals = [
                series[f"shell_vort_rinf_q{q}"][i]
                for q in range(-1, q_max + 1)
                if q <= Q[i] + 1e-9
            ]
            sup_low[i] = max(vals) if vals else 0.0
        add("iii", integral(sup_low), np.inf, "< inf")

        for r, ell in cfg.rl_pairs:
            rt, lt = _rtag(r), _rtag(ell)
            cr = cfg.c_of(r)
            thr = nu ** (ell - 1.0) * cr**ell
            expr = f"nu^(l-1) c_r^l [r={rt}, l={lt}]"
            e = -1.0 + (0.0 if r == np.inf else 3.0 / r) + 2.0 / ell
            unorm = series[f"norm_u_r{rt}"]

            def powered(q: int) -> np.ndarray:
                return (lam(q) ** e * unorm) ** ell

            add(
                f"iv_r{rt}_l{lt}",
                tail(lambda q: integral((q <= Q + 1e-9) * powered(q))),
                thr,
                expr,
            )
            add(
                f"v_r{rt}_l{lt}",
                tail(lambda q: integral(powered(q), tq[q])),
                thr,
                expr,
            )
            add(
                f"vi_r{rt}_l{lt}",
                tail(lambda q: integral(powered(q), late)),
                thr,
                expr,
            )
            add(
                f"vii_r{rt}_l{lt}",
                integral(series[f"low_besov_r{rt}_l{lt}"] ** ell),
                thr,
                expr,
            )

            # Besov distance to the final state over the last tenth of the
            # window; needs stored snapshots.
            value = math.nan
            if snapshots:
                snaps = sorted(snapshots, key=lambda p: p[0])
                t_fin, f_fin = snaps[-1]
                if abs(t_fin - T) <= eps_t + 1e-9:
                    from .littlewood_paley import partition_for

                    part = partition_for(f_fin.grid)
                    s = -1.0 + (0.0 if r == np.inf else 3.0 / r)
                    dists = []
                    for ts, fs in snaps[:-1]:
                        if ts >= late - eps_t:
                            diff = Field(
                                f_fin.grid, fs.data - f_fin.data, fs.rep
                            )
                            dists.append(besov_norm(part, diff, s, r))
                    if dists:
                        value = max(dists)
            add(f"viii_r{rt}_l{lt}", value, cr / 2.0, "c_r/2")

        if system == "hallmhd":
            add(
                "hall_lowmodes",
                integral(
                    series["low_besov1"]
                    + series["Lambda_b"] * series["low_b_besov0"]
                ),
                np.inf,
                "< inf",
            )

    meta = {
        "samples": float(t.size),
        "t_start": t0,
        "t_end": T,
        "q_max": float(q_max),
        "q_tail": float(max(0, q_max - cfg.tail_offset)),
        "nu": nu,
        "mu": float(constants.get("mu", 0.0)),
        "kappa": float(constants.get("kappa", 0.0)),
        "alpha": float(constants.get("alpha", 0.0)),
    }
    return CriteriaReport(system=system, rows=tuple(rows), fq=fq, tq=tq, meta=meta)


def render_criteria_report(report: CriteriaReport) -> str:
    """Deterministic plain-text rendering, 12 significant digits."""
    g = lambda x: f"{x:.12g}"
    lines = []
    lines.append("criteria report")
    lines.append(
        f"system: {report.system}  samples: {int(report.meta['samples'])}  "
        f"t: [{g(report.meta['t_start'])}, {g(report.meta['t_end'])}]"
    )
    lines.append(
        "constants: nu=" + g(report.meta["nu"]) + " mu=" + g(report.meta["mu"])
        + " kappa=" + g(report.meta["kappa"]) + " alpha=" + g(report.meta["alpha"])
    )
    lines.append(
        f"shells: q_max={int(report.meta['q_max'])}  tail from q0={int(report.meta['q_tail'])}"
    )
    lines.append("")
    name_w = max([len(r.name) for r in report.rows] + [9])
    expr_w = max([len(r.threshold_expr) for r in report.rows] + [9])
    header = (
        f"{'criterion':<{name_w}}  {'value':>20}  {'threshold':>20}  "
        f"{'expr':<{expr_w}}  status"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for r in report.rows:
        lines.append(
            f"{r.name:<{name_w}}  {g(r.value):>20}  {g(r.threshold):>20}  "
            f"{r.threshold_expr:<{expr_w}}  {r.status}"
        )
    if report.fq:
        lines.append("")
        lines.append("shell-flux table F(q) over the second half-window:")
        for q in sorted(report.fq):
            lines.append(f"  q={q:<3d} F={g(report.fq[q])}")
    if report.tq:
        lines.append("")
        lines.append("entry times T_q (first time Q reaches q after T/2):")
        for q in sorted(report.tq):
            lines.append(f"  q={q:<3d} T_q={g(report.tq[q])}")
    lines.append("")
    return "\n".join(lines)
