"""Pseudo-spectral time integrators for the lab's dissipative systems.

Systems: 2D/3D incompressible Navier-Stokes, supercritical surface
quasi-geostrophic transport (fractional dissipation, Riesz-perp velocity),
incompressible MHD and Hall-MHD.  Pressure is never solved for: the
divergence-free projection applied to the nonlinear tendency eliminates it.

Time stepping is classical RK4 on the nonlinear part with the exact
integrating factor exp(-nu |k|^2 dt) (exp(-kappa |k|^alpha dt) for the
fractional case) for the stiff linear dissipation, so linear decay is exact
and truncation error is purely nonlinear.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .spectral import (
    PHYSICAL,
    SPECTRAL,
    Field,
    FieldError,
    Grid,
    curl,
    dealias,
    grad_sq_l2,
    leray_project,
    lp_norm,
    random_field,
    random_solenoidal_field,
    riesz_perp_multiplier,
    spectral_l2_sq,
    transform,
)

SYSTEMS = ("nse2d", "nse3d", "sqg", "mhd", "hallmhd")

_DIM = {"nse2d": 2, "nse3d": 3, "sqg": 2, "mhd": 3, "hallmhd": 3}


class BlowupError(RuntimeError):
    """A non-finite value appeared in the state; carries the failure time."""

    def __init__(self, t: float):
        super().__init__(f"non-finite field values at t = {t}")
        self.t = t


class SolverError(ValueError):
    """Inconsistent system/state configuration."""


@dataclass(frozen=True)
class SolverState:
    """Immutable per-system bundle of spectral fields, time and constants."""

    system: str
    grid: Grid
    t: float
    u: Field | None = None
    b: Field | None = None
    theta: Field | None = None
    nu: float = 0.0
    mu: float = 0.0
    kappa: float = 0.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.system not in SYSTEMS:
            raise SolverError(f"unknown system {self.system!r}")
        if self.grid.dim != _DIM[self.system]:
            raise SolverError(
                f"{self.system} needs dim {_DIM[self.system]}, grid has {self.grid.dim}"
            )
        if self.system == "sqg":
            if self.theta is None or not self.theta.is_scalar:
                raise SolverError("sqg state needs a scalar theta")
            if not 0.0 < self.alpha < 1.0:
                raise SolverError("sqg requires alpha in (0, 1)")
        else:
            if self.u is None or not self.u.is_vector:
                raise SolverError(f"{self.system} state needs a vector u")
            if self.system in ("mhd", "hallmhd") and (
                self.b is None or not self.b.is_vector
            ):
                raise SolverError(f"{self.system} state needs a vector b")
        for c in ("nu", "mu", "kappa"):
            if getattr(self, c) < 0:
                raise SolverError(f"{c} must be non-negative")

    def fields(self) -> dict[str, Field]:
        out = {}
        if self.u is not None:
            out["u"] = self.u
        if self.b is not None:
            out["b"] = self.b
        if self.theta is not None:
            out["theta"] = self.theta
        return out

    def primary_field(self) -> Field:
        return self.theta if self.system == "sqg" else self.u


def _finite(data: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(data)))


def make_state(
    system: str,
    grid: Grid,
    *,
    u: Field | None = None,
    b: Field | None = None,
    theta: Field | None = None,
    t: float = 0.0,
    nu: float = 0.0,
    mu: float = 0.0,
    kappa: float = 0.0,
    alpha: float = 0.0,
) -> SolverState:
    """Normalize fields (spectral + dealiased) and wrap them in a state."""

    def prep(f: Field | None) -> Field | None:
        return None if f is None else dealias(f)

    return SolverState(
        system=system,
        grid=grid,
        t=t,
        u=prep(u),
        b=prep(b),
        theta=prep(theta),
        nu=nu,
        mu=mu,
        kappa=kappa,
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# Canonical initial data
# ---------------------------------------------------------------------------


def taylor_green(grid: Grid) -> Field:
    """The classical vortex: a steady Euler flow in 2D (pure viscous decay
    exp(-2 nu t)), a genuinely nonlinear flow in 3D."""
    if grid.dim == 2:
        f = Field.from_function(
            grid,
            lambda x, y: np.sin(x) * np.cos(y),
            lambda x, y: -np.cos(x) * np.sin(y),
        )
    else:
        f = Field.from_function(
            grid,
            lambda x, y, z: np.sin(x) * np.cos(y) * np.cos(z),
            lambda x, y, z: -np.cos(x) * np.sin(y) * np.cos(z),
            lambda x, y, z: np.zeros_like(x),
        )
    return dealias(f)


def single_mode(grid: Grid, k: tuple[int, ...], amplitude: float, components: int) -> Field:
    """amplitude * cos(k.x): a scalar, or a solenoidal vector polarized
    perpendicular to k."""
    if len(k) != grid.dim:
        raise SolverError(f"mode needs {grid.dim} integer components")
    if any(3 * abs(int(ki)) >= grid.n for ki in k):
        raise SolverError(f"mode {k} falls outside the dealiased lattice")
    mesh = grid.mesh()
    phase = sum(float(ki) * xi for ki, xi in zip(k, mesh))
    wave = amplitude * np.cos(phase)
    if components == 1:
        return dealias(Field.physical(grid, wave[np.newaxis]))
    kv = np.array(k, dtype=np.float64)
    if np.allclose(kv[:2], 0.0):
        e = np.zeros(grid.dim)
        e[0] = 1.0
    else:
        e = np.zeros(grid.dim)
        e[0], e[1] = -kv[1], kv[0]
        e /= np.linalg.norm(e)
    data = np.stack([e[c] * wave for c in range(grid.dim)])
    return dealias(Field.physical(grid, data))


def spectrum_envelope(grid: Grid, slope: float, k_peak: float) -> np.ndarray:
    """|k|**slope * exp(-(|k|/k_peak)**2) with the mean mode zeroed."""
    kabs = grid.k_abs
    env = np.zeros_like(kabs)
    nz = kabs > 0
    env[nz] = kabs[nz] ** slope * np.exp(-((kabs[nz] / k_peak) ** 2))
    return env


def random_spectrum(
    grid: Grid,
    slope: float,
    k_peak: float,
    rng: np.random.Generator,
    components: int,
    *,
    solenoidal: bool,
    target_rms: float = 1.0,
) -> Field:
    """Seeded turbulence-like field: Gaussian modes under the envelope,
    optionally projected divergence-free, normalized to the requested
    root-mean-square amplitude."""
    env = spectrum_envelope(grid, slope, k_peak)
    if solenoidal:
        f = random_solenoidal_field(grid, rng, envelope=env)
    else:
        f = random_field(grid, components, rng, envelope=env)
    nrm = np.sqrt(spectral_l2_sq(f))
    if nrm == 0.0:
        return f
    target = target_rms * (2.0 * np.pi) ** (grid.dim / 2.0)
    return Field(grid, f.data * (target / nrm), SPECTRAL)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


def _grad_tensor_divergence(grid: Grid, tensor_hat: np.ndarray) -> np.ndarray:
    """For T_hat of shape (dim, dim, ...) return (div T)_i = i k_j T_hat[i, j]."""
    k = grid.k_deriv
    return np.stack(
        [
            sum(1j * k[j] * tensor_hat[i, j] for j in range(grid.dim))
            for i in range(grid.dim)
        ]
    )


def _fft(grid: Grid, phys: np.ndarray) -> np.ndarray:
    return np.fft.fftn(phys, axes=tuple(range(phys.ndim - grid.dim, phys.ndim))) / grid.npoints


def _ifft(grid: Grid, spec: np.ndarray) -> np.ndarray:
    return (
        np.fft.ifftn(spec, axes=tuple(range(spec.ndim - grid.dim, spec.ndim)))
        * grid.npoints
    ).real


def _nse_tendency(grid: Grid, u_hat: np.ndarray) -> np.ndarray:
    """Projected -div(u (x) u), dealiased (divergence form; u is solenoidal)."""
    mask = grid.dealias_mask
    u = _ifft(grid, u_hat)
    d = grid.dim
    tensor = np.empty((d, d) + grid.shape, dtype=np.complex128)
    for i in range(d):
        for j in range(i, d):
            tij = _fft(grid, u[i] * u[j]) * mask
            tensor[i, j] = tij
            tensor[j, i] = tij
    tend = -_grad_tensor_divergence(grid, tensor)
    return leray_project(Field(grid, tend, SPECTRAL)).data


def _mhd_tendencies(
    grid: Grid, u_hat: np.ndarray, b_hat: np.ndarray, hall: bool
) -> tuple[np.ndarray, np.ndarray]:
    mask = grid.dealias_mask
    u = _ifft(grid, u_hat)
    b = _ifft(grid, b_hat)
    d = grid.dim
    # Momentum: -div(u (x) u - b (x) b), then projection.
    stress = np.empty((d, d) + grid.shape, dtype=np.complex128)
    for i in range(d):
        for j in range(i, d):
            tij = _fft(grid, u[i] * u[j] - b[i] * b[j]) * mask
            stress[i, j] = tij
            stress[j, i] = tij
    du = leray_project(
        Field(grid, -_grad_tensor_divergence(grid, stress), SPECTRAL)
    ).data
    # Induction: -u.grad b + b.grad u = d_j (b_j u_i - u_j b_i).
    anti = np.zeros((d, d) + grid.shape, dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            anti[i, j] = _fft(grid, b[j] * u[i] - u[j] * b[i]) * mask
    db = _grad_tensor_divergence(grid, anti)
    if hall:
        # + curl((curl b) x b), moved to the right-hand side.
        jb = _ifft(grid, curl(Field(grid, b_hat, SPECTRAL)).data)
        jxb = np.stack(
            [
                jb[1] * b[2] - jb[2] * b[1],
                jb[2] * b[0] - jb[0] * b[2],
                jb[0] * b[1] - jb[1] * b[0],
            ]
        )
        hall_hat = _fft(grid, jxb) * mask
        db = db + curl(Field(grid, hall_hat, SPECTRAL)).data
    db = leray_project(Field(grid, db, SPECTRAL)).data
    return du, db


def _sqg_tendency(grid: Grid, th_hat: np.ndarray) -> np.ndarray:
    """-div(u theta) with u the perpendicular Riesz velocity of theta."""
    mask = grid.dealias_mask
    u_hat = riesz_perp_multiplier(Field(grid, th_hat, SPECTRAL)).data
    u = _ifft(grid, u_hat)
    th = _ifft(grid, th_hat)[0]
    k = grid.k_deriv
    flux0 = _fft(grid, u[0] * th) * mask
    flux1 = _fft(grid, u[1] * th) * mask
    return (-(1j * k[0] * flux0 + 1j * k[1] * flux1))[np.newaxis]


def _nonlinear(state: SolverState, spectra: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    grid = state.grid
    if state.system in ("nse2d", "nse3d"):
        return {"u": _nse_tendency(grid, spectra["u"])}
    if state.system in ("mhd", "hallmhd"):
        du, db = _mhd_tendencies(
            grid, spectra["u"], spectra["b"], hall=state.system == "hallmhd"
        )
        return {"u": du, "b": db}
    return {"theta": _sqg_tendency(grid, spectra["theta"])}


def _dissipation_symbols(state: SolverState) -> dict[str, np.ndarray]:
    grid = state.grid
    if state.system == "sqg":
        kabs = grid.k_abs
        sym = np.zeros_like(kabs)
        nz = kabs > 0
        sym[nz] = -state.kappa * kabs[nz] ** state.alpha
        return {"theta": sym}
    out = {"u": -state.nu * grid.k_sq}
    if state.system in ("mhd", "hallmhd"):
        out["b"] = -state.mu * grid.k_sq
    return out


def rhs(state: SolverState) -> dict[str, Field]:
    """Full tendencies (nonlinear + dissipation), pressure eliminated."""
    spectra = {name: f.data for name, f in state.fields().items()}
    for name, a in spectra.items():
        if not _finite(a):
            raise BlowupError(state.t)
    nl = _nonlinear(state, spectra)
    syms = _dissipation_symbols(state)
    out = {}
    for name, tend in nl.items():
        out[name] = Field(state.grid, tend + syms[name] * spectra[name], SPECTRAL)
    return out


def cfl_limit(state: SolverState) -> float:
    """Advisory advective limit 0.5 * dx / ||u||_inf (inf when u == 0)."""
    if state.system == "sqg":
        vel = riesz_perp_multiplier(state.theta)
    else:
        vel = state.u
    sup = lp_norm(vel, np.inf)
    if sup == 0.0:
        return np.inf
    return 0.5 * state.grid.spacing / sup


def step(state: SolverState, dt: float, *, warn_cfl: bool = False) -> SolverState:
    """One integrating-factor RK4 step of size dt; deterministic and
    dissipation-exact.  Raises BlowupError on the first non-finite value."""
    if dt <= 0:
        raise SolverError("dt must be positive")
    if warn_cfl:
        limit = cfl_limit(state)
        if dt > limit:
            warnings.warn(
                f"dt = {dt} exceeds advective CFL limit {limit:.3e} at t = {state.t}",
                RuntimeWarning,
                stacklevel=2,
            )
    syms = _dissipation_symbols(state)
    E = {f: np.exp(0.5 * dt * s) for f, s in syms.items()}
    E2 = {f: np.exp(dt * s) for f, s in syms.items()}
    a = {name: f.data for name, f in state.fields().items()}

    def at(spectra: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        return _nonlinear(state, spectra)

    n1 = at(a)
    s1 = {f: E[f] * (a[f] + 0.5 * dt * n1[f]) for f in a}
    n2 = at(s1)
    s2 = {f: E[f] * a[f] + 0.5 * dt * n2[f] for f in a}
    n3 = at(s2)
    s3 = {f: E2[f] * a[f] + dt * E[f] * n3[f] for f in a}
    n4 = at(s3)
    new = {
        f: E2[f] * a[f]
        + dt / 6.0 * (E2[f] * n1[f] + 2.0 * E[f] * (n2[f] + n3[f]) + n4[f])
        for f in a
    }
    t_new = state.t + dt
    for f, arr in new.items():
        if not _finite(arr):
            raise BlowupError(t_new)
    kwargs = {name: Field(state.grid, arr, SPECTRAL) for name, arr in new.items()}
    return replace(state, t=t_new, **kwargs)


# ---------------------------------------------------------------------------
# Energy bookkeeping
# ---------------------------------------------------------------------------


def energy(state: SolverState) -> float:
    """||u||_2^2 (+ ||b||_2^2) for velocity systems, ||theta||_2^2 for sqg."""
    if state.system == "sqg":
        return spectral_l2_sq(state.theta)
    e = spectral_l2_sq(state.u)
    if state.b is not None:
        e += spectral_l2_sq(state.b)
    return e


def dissipation_rate(state: SolverState) -> float:
    """Instantaneous energy dissipation: nu ||grad u||_2^2 (+ mu ||grad b||_2^2),
    or kappa * the fractional analogue for sqg."""
    if state.system == "sqg":
        return state.kappa * grad_sq_l2(state.theta, alpha=state.alpha)
    d = state.nu * grad_sq_l2(state.u)
    if state.b is not None:
        d += state.mu * grad_sq_l2(state.b)
    return d


@dataclass(frozen=True)
class EnergyBudget:
    """Discrete energy-identity residuals along a sampled trajectory."""

    t: np.ndarray
    residual: np.ndarray
    max_relative_residual: float
    nonincreasing: bool


def energy_budget(
    t: np.ndarray, energy_series: np.ndarray, dissipation_series: np.ndarray
) -> EnergyBudget:
    """Residual E(t) + 2 * int_0^t D ds - E(0) with trapezoid quadrature.

    For every system here the nonlinear terms are energy-neutral, so the
    residual measures time-integration plus quadrature error only.
    """
    t = np.asarray(t, dtype=np.float64)
    e = np.asarray(energy_series, dtype=np.float64)
    d = np.asarray(dissipation_series, dtype=np.float64)
    if t.shape != e.shape or t.shape != d.shape or t.size < 2:
        raise SolverError("energy budget needs matching series of length >= 2")
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(t))]
    )
    residual = e + 2.0 * cum - e[0]
    scale = max(abs(e[0]), 1e-300)
    slack = 1e-10 * scale
    nonincreasing = bool(np.all(np.diff(e) <= slack))
    return EnergyBudget(
        t=t,
        residual=residual,
        max_relative_residual=float(np.max(np.abs(residual)) / scale),
        nonincreasing=nonincreasing,
    )
