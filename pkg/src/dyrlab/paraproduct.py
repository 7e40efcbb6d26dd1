"""Frequency-split products: Bony decomposition, transport and cross-product
commutators, and the exact cancellation checks they imply.

Every product is formed pointwise in physical space with the two-thirds
truncation applied to each factor and to the product.  Both orderings inside
a commutator go through the identical product pipeline, so the difference is
the genuine commutator and not an aliasing artifact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .littlewood_paley import (
    DyadicPartition,
    lam,
    project_low,
    project_shell,
)
from .spectral import (
    PHYSICAL,
    SPECTRAL,
    Field,
    FieldError,
    curl,
    dealias,
    divergence,
    gradient,
    grad_sq_l2,
    lp_norm,
    transform,
)

_SOLENOIDAL_TOL = 1e-8


def require_solenoidal(v: Field, tol: float = _SOLENOIDAL_TOL) -> None:
    """Raise unless ||div v||_2 <= tol * (||grad v||_2 + tiny)."""
    div = lp_norm(divergence(v), 2)
    scale = np.sqrt(grad_sq_l2(v)) + 1e-300
    if div > tol * scale:
        raise FieldError(f"field is not divergence-free: |div|_2 = {div:.3e}")


def _product(a: Field, b: Field) -> Field:
    """Dealiased pointwise product; a scalar factor broadcasts over the
    other's components."""
    if a.grid != b.grid:
        raise FieldError("product factors live on different grids")
    pa = transform(dealias(a), PHYSICAL).data
    pb = transform(dealias(b), PHYSICAL).data
    if pa.shape[0] == pb.shape[0]:
        data = pa * pb
    elif pa.shape[0] == 1:
        data = pa[0] * pb
    elif pb.shape[0] == 1:
        data = pa * pb[0]
    else:
        raise FieldError("component mismatch in product")
    return dealias(Field.physical(a.grid, data))


def transport(a: Field, w: Field) -> Field:
    """Advection a . grad w, componentwise in w, dealiased; a must be a
    vector field on w's grid."""
    grid = w.grid
    if a.components != grid.dim:
        raise FieldError("advecting field must be a vector")
    a_phys = transform(dealias(a), PHYSICAL).data
    w_spec = transform(dealias(w), SPECTRAL).data
    out = np.empty_like(w_spec)
    for c in range(w.components):
        comp = Field(grid, w_spec[c][np.newaxis], SPECTRAL)
        g = transform(gradient(comp), PHYSICAL).data
        adv = np.sum(a_phys * g, axis=0)
        out[c] = np.fft.fftn(adv) / grid.npoints
    return dealias(Field(grid, out, SPECTRAL))


def cross(a: Field, b: Field) -> Field:
    """Dealiased 3D cross product a x b."""
    if a.grid.dim != 3 or a.components != 3 or b.components != 3:
        raise FieldError("cross product requires 3D vector fields")
    pa = transform(dealias(a), PHYSICAL).data
    pb = transform(dealias(b), PHYSICAL).data
    data = np.stack(
        [
            pa[1] * pb[2] - pa[2] * pb[1],
            pa[2] * pb[0] - pa[0] * pb[2],
            pa[0] * pb[1] - pa[1] * pb[0],
        ]
    )
    return dealias(Field.physical(a.grid, data))


def _sub(a: Field, b: Field) -> Field:
    return Field(
        a.grid, transform(a, SPECTRAL).data - transform(b, SPECTRAL).data, SPECTRAL
    )


# ---------------------------------------------------------------------------
# Bony decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParaproductTriple:
    """The three frequency-interaction parts of a product u*v."""

    low_high: Field
    high_low: Field
    resonant: Field

    def total(self) -> Field:
        a = self.low_high.data + self.high_low.data + self.resonant.data
        return Field(self.low_high.grid, a, SPECTRAL)


def bony_decompose(part: DyadicPartition, u: Field, v: Field) -> ParaproductTriple:
    """Split u*v into low-high, high-low and resonant parts:
    sum_q of u_{<=q-2} v_q, u_q v_{<=q-2} and utilde_q v_q, where utilde_q
    sums the shells within distance 1 of q.  The parts add up to the
    dealiased product."""
    if u.grid != v.grid:
        raise FieldError("bony_decompose requires a common grid")
    grid = u.grid
    ncomp = max(u.components, v.components)
    shape = (ncomp,) + grid.shape
    low_high = np.zeros(shape, dtype=np.complex128)
    high_low = np.zeros(shape, dtype=np.complex128)
    resonant = np.zeros(shape, dtype=np.complex128)
    for q in part.shells:
        uq = project_shell(part, u, q)
        vq = project_shell(part, v, q)
        u_low = project_low(part, u, q - 2)
        v_low = project_low(part, v, q - 2)
        u_near_data = sum(
            project_shell(part, u, p).data
            for p in range(max(-1, q - 1), min(part.q_max, q + 1) + 1)
        )
        u_near = Field(grid, u_near_data, SPECTRAL)
        low_high += _product(u_low, vq).data
        high_low += _product(uq, v_low).data
        resonant += _product(u_near, vq).data
    return ParaproductTriple(
        low_high=Field(grid, low_high, SPECTRAL),
        high_low=Field(grid, high_low, SPECTRAL),
        resonant=Field(grid, resonant, SPECTRAL),
    )


# ---------------------------------------------------------------------------
# Commutators
# ---------------------------------------------------------------------------


def commutator_transport(
    part: DyadicPartition, q: int, u: Field, p: int, v: Field
) -> Field:
    """Shell-projection/advection commutator
    [shell_q, u_{<=p-2} . grad] v_p: project-then-advect minus
    advect-then-project, with identical dealiasing on both paths."""
    require_solenoidal(u)
    advector = project_low(part, u, p - 2)
    vp = project_shell(part, v, p)
    first = project_shell(part, transport(advector, vp), q)
    second = transport(advector, project_shell(part, vp, q))
    return _sub(first, second)


def commutator_hall_cross(part: DyadicPartition, q: int, F: Field, G: Field) -> Field:
    """[shell_q, F x curl] G = shell_q(F x curl G) - F x curl(G_q)."""
    if F.grid.dim != 3:
        raise FieldError("hall commutators require dim = 3")
    first = project_shell(part, cross(F, curl(G)), q)
    second = cross(F, curl(project_shell(part, G, q)))
    return _sub(first, second)


def commutator_hall_curl(part: DyadicPartition, q: int, F: Field, G: Field) -> Field:
    """[shell_q, (curl F) x] G = shell_q(curl(F x G)) - (curl F) x G_q."""
    if F.grid.dim != 3:
        raise FieldError("hall commutators require dim = 3")
    first = project_shell(part, curl(cross(F, G)), q)
    second = cross(curl(F), project_shell(part, G, q))
    return _sub(first, second)


def transport_commutator_bound(
    part: DyadicPartition, u: Field, p: int, v: Field, r2: float, r3: float
) -> float:
    """Right-hand side of the commutator estimate:
    ||v_p||_{r2} * sum_{p' <= p-2} lambda_{p'} ||u_{p'}||_{r3}."""
    vp_norm = lp_norm(project_shell(part, v, p), r2)
    acc = 0.0
    for pp in range(-1, p - 1):
        acc += lam(pp) * lp_norm(project_shell(part, u, pp), r3)
    return vp_norm * acc


# ---------------------------------------------------------------------------
# Cancellation identities
# ---------------------------------------------------------------------------


def transport_self_interaction(part: DyadicPartition, u: Field, q: int) -> float:
    """integral of u_{<=q-2} . grad(u_q) . u_q  -- vanishes (up to roundoff)
    because the low-pass advector is divergence-free."""
    grid = u.grid
    advector = transform(project_low(part, u, q - 2), PHYSICAL).data
    uq = transform(project_shell(part, u, q), SPECTRAL).data
    total = 0.0
    for c in range(u.components):
        comp = Field(grid, uq[c][np.newaxis], SPECTRAL)
        g = transform(gradient(comp), PHYSICAL).data
        adv = np.sum(advector * g, axis=0)
        wq = (np.fft.ifftn(uq[c]) * grid.npoints).real
        total += float(np.sum(adv * wq))
    return total * grid.cell_volume


def hall_self_interaction(part: DyadicPartition, b: Field, q: int) -> float:
    """integral of (b_{<=q-2} x curl(b_q)) . curl(b_q)  -- a scalar triple
    product with a repeated factor, zero pointwise before quadrature."""
    low = transform(project_low(part, b, q - 2), PHYSICAL).data
    c = transform(curl(project_shell(part, b, q)), PHYSICAL).data
    triple = (
        (low[1] * c[2] - low[2] * c[1]) * c[0]
        + (low[2] * c[0] - low[0] * c[2]) * c[1]
        + (low[0] * c[1] - low[1] * c[0]) * c[2]
    )
    return float(np.sum(triple) * b.grid.cell_volume)


@dataclass(frozen=True)
class CancellationRow:
    q: int
    kind: str  # "transport" or "hall"
    value: float
    scale: float

    @property
    def normalized(self) -> float:
        if self.scale == 0.0:
            return 0.0 if self.value == 0.0 else np.inf
        return abs(self.value) / self.scale


@dataclass(frozen=True)
class CancellationReport:
    rows: tuple[CancellationRow, ...]
    tolerance: float

    @property
    def max_normalized(self) -> float:
        return max((r.normalized for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_normalized <= self.tolerance


def cancellation_suite(
    part: DyadicPartition,
    u: Field | None = None,
    b: Field | None = None,
    tolerance: float = 1e-10,
) -> CancellationReport:
    """Evaluate both cancellation identities shell by shell.

    The transport term is scaled by lambda_q ||u_q||_2^2, the cross-product
    term by ||curl b_q||_2^2; both normalized values must sit at roundoff.
    """
    rows: list[CancellationRow] = []
    if u is not None:
        require_solenoidal(u)
        for q in part.shells:
            uq = project_shell(part, u, q)
            scale = lam(q) * lp_norm(uq, 2) ** 2
            val = transport_self_interaction(part, u, q)
            rows.append(CancellationRow(q=q, kind="transport", value=val, scale=scale))
    if b is not None:
        require_solenoidal(b)
        for q in part.shells:
            cq = curl(project_shell(part, b, q))
            scale = lp_norm(cq, 2) ** 2
            val = hall_self_interaction(part, b, q)
            rows.append(CancellationRow(q=q, kind="hall", value=val, scale=scale))
    return CancellationReport(rows=tuple(rows), tolerance=tolerance)
