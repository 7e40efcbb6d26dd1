"""Fields on the 2*pi-periodic torus and their Fourier-multiplier calculus.

Everything in the lab lives on a uniform n**dim collocation grid with
integer wavenumbers.  Spectral coefficients use the mean-preserving
normalization: the forward transform divides by n**dim, so the k=0
coefficient equals the field mean and cos(x1) carries 1/2 at k=(+-1,0,...).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

PHYSICAL = "physical"
SPECTRAL = "spectral"

# Relative mean tolerance for operators that require mean-free input.
_MEAN_TOL = 1e-8


class FieldError(ValueError):
    """Malformed field or operator/argument mismatch."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: `dim` in {2, 3}, `n` points per axis, length 2*pi.

    Equality and hashing use (dim, n) only; the wavenumber tables are derived
    and cached lazily.
    """

    dim: int
    n: int

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise FieldError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or not _is_power_of_two(self.n):
            raise FieldError(f"n must be a power of two >= 8, got {self.n}")

    # -- derived geometry ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def npoints(self) -> int:
        return self.n**self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def k1d(self) -> np.ndarray:
        """Integer wavenumbers along one axis, FFT order, in [-n/2, n/2)."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavevector components, shape (dim, n, ..., n)."""
        axes = np.meshgrid(*([self.k1d] * self.dim), indexing="ij")
        return np.stack(axes).astype(np.float64)

    @cached_property
    def k_deriv(self) -> np.ndarray:
        """Wavevectors for first derivatives: the unmatched -n/2 mode is zeroed
        so that i*k multipliers preserve Hermitian symmetry."""
        k = self.k.copy()
        k[np.abs(k) == self.n // 2] = 0.0
        return k

    @cached_property
    def k_sq(self) -> np.ndarray:
        return np.sum(self.k * self.k, axis=0)

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_sq)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep a mode iff every |k_i| < n/3."""
        keep = np.ones(self.shape, dtype=bool)
        for j in range(self.dim):
            keep &= 3 * np.abs(self.k[j]) < self.n
        return keep

    @cached_property
    def k_max_retained(self) -> float:
        """Largest |k| surviving the two-thirds truncation."""
        return float(np.max(self.k_abs[self.dealias_mask]))

    def mesh(self) -> list[np.ndarray]:
        """Collocation coordinates, one array of shape (n, ..., n) per axis."""
        x1 = np.arange(self.n) * self.spacing
        return list(np.meshgrid(*([x1] * self.dim), indexing="ij"))


@dataclass(frozen=True)
class Field:
    """A scalar or vector field on a Grid, in physical or spectral form.

    data has shape (components, n, ..., n); float64 in physical form,
    complex128 in spectral form.  The buffer is frozen after construction,
    so fields are safe to share.
    """

    grid: Grid
    data: np.ndarray
    rep: str

    def __post_init__(self) -> None:
        if self.rep not in (PHYSICAL, SPECTRAL):
            raise FieldError(f"unknown representation {self.rep!r}")
        expected = self.grid.shape
        if self.data.ndim != self.grid.dim + 1 or self.data.shape[1:] != expected:
            raise FieldError(
                f"data shape {self.data.shape} does not match grid {expected}"
            )
        want = np.complex128 if self.rep == SPECTRAL else np.float64
        if self.data.dtype != want:
            raise FieldError(f"{self.rep} data must be {want}, got {self.data.dtype}")
        self.data.setflags(write=False)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    @property
    def is_vector(self) -> bool:
        return self.components == self.grid.dim

    # -- constructors -------------------------------------------------------

    @staticmethod
    def physical(grid: Grid, data: np.ndarray) -> "Field":
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == grid.dim:
            arr = arr[np.newaxis]
        return Field(grid, arr, PHYSICAL)

    @staticmethod
    def spectral(grid: Grid, data: np.ndarray) -> "Field":
        arr = np.asarray(data, dtype=np.complex128)
        if arr.ndim == grid.dim:
            arr = arr[np.newaxis]
        return Field(grid, arr, SPECTRAL)

    @staticmethod
    def zeros(grid: Grid, components: int = 1, rep: str = PHYSICAL) -> "Field":
        dtype = np.complex128 if rep == SPECTRAL else np.float64
        return Field(grid, np.zeros((components,) + grid.shape, dtype=dtype), rep)

    @staticmethod
    def from_function(grid: Grid, *funcs: Callable[..., np.ndarray]) -> "Field":
        """Sample one callable per component on the collocation mesh."""
        mesh = grid.mesh()
        data = np.stack([np.broadcast_to(f(*mesh), grid.shape) for f in funcs])
        return Field.physical(grid, data)

    def to_physical(self) -> "Field":
        return transform(self, PHYSICAL)

    def to_spectral(self) -> "Field":
        return transform(self, SPECTRAL)


def _spatial_axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(1, grid.dim + 1))


def transform(f: Field, to: str) -> Field:
    """Change representation; idempotent.  Forward divides by n**dim."""
    if to not in (PHYSICAL, SPECTRAL):
        raise FieldError(f"unknown representation {to!r}")
    if f.rep == to:
        return f
    axes = _spatial_axes(f.grid)
    if to == SPECTRAL:
        data = np.fft.fftn(f.data, axes=axes) / f.grid.npoints
        return Field(f.grid, data, SPECTRAL)
    data = (np.fft.ifftn(f.data, axes=axes) * f.grid.npoints).real
    return Field(f.grid, np.ascontiguousarray(data), PHYSICAL)


def hermitian_defect(f: Field) -> float:
    """Max |u_hat(-k) - conj(u_hat(k))| over the lattice (0 for real fields)."""
    a = transform(f, SPECTRAL).data
    rev = a
    for ax in _spatial_axes(f.grid):
        rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
    return float(np.max(np.abs(a - np.conj(rev))))


# ---------------------------------------------------------------------------
# Differential operators (exact Fourier multipliers)
# ---------------------------------------------------------------------------


def gradient(f: Field) -> Field:
    """Gradient of a scalar; returns a dim-component spectral field."""
    if not f.is_scalar:
        raise FieldError("gradient expects a scalar field")
    a = transform(f, SPECTRAL).data[0]
    grid = f.grid
    out = np.stack([1j * grid.k_deriv[j] * a for j in range(grid.dim)])
    return Field(grid, out, SPECTRAL)


def divergence(v: Field) -> Field:
    if not v.is_vector:
        raise FieldError(
            f"divergence expects a {v.grid.dim}-component vector field, got {v.components}"
        )
    a = transform(v, SPECTRAL).data
    grid = v.grid
    out = sum(1j * grid.k_deriv[j] * a[j] for j in range(grid.dim))
    return Field(grid, out[np.newaxis], SPECTRAL)


def curl(v: Field) -> Field:
    """Curl: a vector in 3D, the scalar d1 v2 - d2 v1 in 2D."""
    if not v.is_vector:
        raise FieldError(
            f"curl expects a {v.grid.dim}-component vector field, got {v.components}"
        )
    grid = v.grid
    a = transform(v, SPECTRAL).data
    k = grid.k_deriv
    if grid.dim == 2:
        out = 1j * (k[0] * a[1] - k[1] * a[0])
        return Field(grid, out[np.newaxis], SPECTRAL)
    out = np.stack(
        [
            1j * (k[1] * a[2] - k[2] * a[1]),
            1j * (k[2] * a[0] - k[0] * a[2]),
            1j * (k[0] * a[1] - k[1] * a[0]),
        ]
    )
    return Field(grid, out, SPECTRAL)


def fractional_laplacian(f: Field, alpha: float) -> Field:
    """Multiply each coefficient by |k|**alpha; the k=0 mode maps to 0
    (to itself for alpha == 0)."""
    a = transform(f, SPECTRAL).data
    grid = f.grid
    if alpha == 0.0:
        return Field(grid, a.copy(), SPECTRAL)
    kabs = grid.k_abs
    mult = np.zeros_like(kabs)
    nz = kabs > 0
    mult[nz] = kabs[nz] ** alpha
    return Field(grid, a * mult, SPECTRAL)


def inverse_sqrt_laplacian(f: Field) -> Field:
    """Multiplier |k|**-1 with the mean mode sent to zero."""
    return fractional_laplacian(f, -1.0)


def differentiate(f: Field, op: str, alpha: float | None = None) -> Field:
    """Dispatch on the operator name; `alpha` only applies to
    fractional_laplacian."""
    if op == "gradient":
        return gradient(f)
    if op == "divergence":
        return divergence(f)
    if op == "curl":
        return curl(f)
    if op == "fractional_laplacian":
        if alpha is None:
            raise FieldError("fractional_laplacian requires alpha")
        return fractional_laplacian(f, alpha)
    if op == "inverse_sqrt_laplacian":
        return inverse_sqrt_laplacian(f)
    raise FieldError(f"unknown differential operator {op!r}")


def relative_mean(f: Field) -> float:
    """|mean| relative to the spectral magnitude, used for mean-free checks."""
    a = transform(f, SPECTRAL).data
    total = np.sqrt(np.sum(np.abs(a) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.max(np.abs(a[(slice(None),) + (0,) * f.grid.dim])) / total)


def riesz_perp(theta: Field) -> Field:
    """Perpendicular Riesz transform of a mean-free 2D scalar:
    |k|**-1 * (-d2, d1) theta.  The result is divergence-free."""
    grid = theta.grid
    if grid.dim != 2:
        raise FieldError("riesz_perp is defined on 2D grids")
    if not theta.is_scalar:
        raise FieldError("riesz_perp expects a scalar field")
    if relative_mean(theta) > _MEAN_TOL:
        raise FieldError("riesz_perp requires a mean-free field")
    return riesz_perp_multiplier(theta)


def riesz_perp_multiplier(theta: Field) -> Field:
    """The multiplier part of riesz_perp, with no mean check (k=0 -> 0)."""
    grid = theta.grid
    a = transform(theta, SPECTRAL).data[0]
    kabs = grid.k_abs
    inv = np.zeros_like(kabs)
    nz = kabs > 0
    inv[nz] = 1.0 / kabs[nz]
    k = grid.k_deriv
    out = np.stack([1j * (-k[1]) * inv * a, 1j * k[0] * inv * a])
    return Field(grid, out, SPECTRAL)


def leray_project(v: Field) -> Field:
    """Remove the gradient part: v_hat - k (k . v_hat) / |k|^2 per mode.

    Idempotent; annihilates gradients; leaves the mean mode untouched
    (constants are divergence-free)."""
    if not v.is_vector:
        raise FieldError("leray_project expects a vector field")
    grid = v.grid
    a = transform(v, SPECTRAL).data
    k = grid.k
    ksq = grid.k_sq.copy()
    ksq[(0,) * grid.dim] = 1.0
    kdotv = sum(k[j] * a[j] for j in range(grid.dim)) / ksq
    out = np.stack([a[j] - k[j] * kdotv for j in range(grid.dim)])
    return Field(grid, out, SPECTRAL)


def dealias(f: Field) -> Field:
    """Two-thirds truncation: zero every mode with any |k_i| >= n/3.
    Returns a spectral field."""
    a = transform(f, SPECTRAL).data
    return Field(f.grid, a * f.grid.dealias_mask, SPECTRAL)


# ---------------------------------------------------------------------------
# Norms and quadrature
# ---------------------------------------------------------------------------


def pointwise_magnitude(f: Field) -> np.ndarray:
    """Euclidean magnitude over components at each collocation point."""
    a = transform(f, PHYSICAL).data
    if a.shape[0] == 1:
        return np.abs(a[0])
    return np.sqrt(np.sum(a * a, axis=0))


def lp_norm(f: Field, r: float) -> float:
    """Discrete L^r norm with quadrature weight (2*pi/n)**dim; r=inf is the
    collocation max of the pointwise magnitude."""
    if r != np.inf and r < 1:
        raise FieldError(f"lp_norm requires r >= 1, got {r}")
    mag = pointwise_magnitude(f)
    if r == np.inf:
        return float(np.max(mag))
    w = f.grid.cell_volume
    return float((np.sum(mag**r) * w) ** (1.0 / r))


def l2_inner(f: Field, g: Field) -> float:
    """L^2 pairing sum(f . g) * cell_volume in physical space."""
    if f.grid != g.grid or f.components != g.components:
        raise FieldError("l2_inner requires matching fields")
    a = transform(f, PHYSICAL).data
    b = transform(g, PHYSICAL).data
    return float(np.sum(a * b) * f.grid.cell_volume)


def spectral_l2_sq(f: Field) -> float:
    """||f||_2^2 evaluated spectrally: (2*pi)^dim * sum |f_hat|^2."""
    a = transform(f, SPECTRAL).data
    return float((2.0 * np.pi) ** f.grid.dim * np.sum(np.abs(a) ** 2))


def grad_sq_l2(f: Field, alpha: float = 2.0) -> float:
    """(2*pi)^dim * sum |k|**alpha |f_hat|^2: alpha=2 gives ||grad f||_2^2
    (summed over components), fractional alpha gives the corresponding
    dissipation integrand."""
    a = transform(f, SPECTRAL).data
    kabs = f.grid.k_abs
    mult = np.zeros_like(kabs)
    nz = kabs > 0
    mult[nz] = kabs[nz] ** alpha
    return float((2.0 * np.pi) ** f.grid.dim * np.sum(mult * np.abs(a) ** 2))


def jacobian_sup(v: Field) -> float:
    """Collocation max of the Frobenius norm of the Jacobian of a vector field."""
    grid = v.grid
    a = transform(v, SPECTRAL).data
    total = np.zeros(grid.shape)
    for c in range(v.components):
        comp = Field(grid, a[c][np.newaxis], SPECTRAL)
        g = transform(gradient(comp), PHYSICAL).data
        total += np.sum(g * g, axis=0)
    return float(np.sqrt(np.max(total)))


# ---------------------------------------------------------------------------
# Random fields (seeded; used by sweeps, tests and initial data)
# ---------------------------------------------------------------------------


def random_field(
    grid: Grid,
    components: int,
    rng: np.random.Generator,
    *,
    envelope: np.ndarray | None = None,
    dealiased: bool = True,
    zero_mean: bool = True,
) -> Field:
    """White noise in physical space, optionally shaped by a spectral
    envelope, truncated and mean-freed."""
    data = rng.standard_normal((components,) + grid.shape)
    f = transform(Field.physical(grid, data), SPECTRAL)
    a = f.data.copy()
    if envelope is not None:
        a *= envelope
    if zero_mean:
        a[(slice(None),) + (0,) * grid.dim] = 0.0
    out = Field(grid, a, SPECTRAL)
    if dealiased:
        out = dealias(out)
    return out


def random_solenoidal_field(
    grid: Grid,
    rng: np.random.Generator,
    *,
    envelope: np.ndarray | None = None,
) -> Field:
    """Divergence-free random vector field, dealiased and mean-free."""
    return leray_project(
        random_field(grid, grid.dim, rng, envelope=envelope)
    )
