"""dyrlab: a pseudo-spectral laboratory for dissipative fluid PDEs with
dyadic-shell regularity diagnostics on the periodic torus."""

from .spectral import (
    PHYSICAL,
    SPECTRAL,
    Field,
    FieldError,
    Grid,
    curl,
    dealias,
    differentiate,
    divergence,
    fractional_laplacian,
    gradient,
    grad_sq_l2,
    inverse_sqrt_laplacian,
    jacobian_sup,
    l2_inner,
    leray_project,
    lp_norm,
    random_field,
    random_solenoidal_field,
    riesz_perp,
    spectral_l2_sq,
    transform,
)
from .littlewood_paley import (
    DyadicPartition,
    bernstein_ratio,
    besov_norm,
    build_partition,
    lam,
    partition_for,
    project_band,
    project_low,
    project_shell,
    shell_decompose,
    smooth_chi,
    sobolev_norm,
    sobolev_norm_exact,
)
from .paraproduct import (
    CancellationReport,
    ParaproductTriple,
    bony_decompose,
    cancellation_suite,
    commutator_hall_cross,
    commutator_hall_curl,
    commutator_transport,
)
from .solvers import (
    BlowupError,
    SolverError,
    SolverState,
    cfl_limit,
    dissipation_rate,
    energy,
    energy_budget,
    make_state,
    random_spectrum,
    rhs,
    single_mode,
    step,
    taylor_green,
)
from .diagnostics import (
    CriteriaReport,
    DiagnosticsError,
    DiagnosticsRecord,
    KolmogorovStats,
    WavenumberConfig,
    WavenumberResult,
    criteria_battery,
    default_wavenumber_config,
    kolmogorov_stats,
    render_criteria_report,
    sample_record,
    wavenumber,
)
from .io import (
    ConfigError,
    RunConfig,
    SnapshotError,
    load_config,
    parse_config,
    read_series,
    read_snapshot,
    serialize_config,
    write_snapshot,
)
from .runner import RunResult, build_initial_state, run_simulation, wavenumber_config

__version__ = "0.1.0"
