"""Randomized property sweeps with frozen regression constants.

The inequalities behind the shell calculus hide constants; these sweeps
measure them over seeded random fields and freeze the results so any drift
fails loudly.  Norm-interchange bounds are frozen at the measured maximum
(same seed, zero drift allowed); commutator bounds carry a 2x safety margin
since their samples explore a rougher configuration space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .littlewood_paley import (
    bernstein_ratio,
    build_partition,
    lam,
    partition_for,
    project_shell,
)
from .paraproduct import (
    cancellation_suite,
    commutator_hall_cross,
    commutator_hall_curl,
    commutator_transport,
    cross,
    transport,
    transport_commutator_bound,
)
from .spectral import (
    Field,
    Grid,
    curl,
    jacobian_sup,
    lp_norm,
    random_field,
    random_solenoidal_field,
)

DEFAULT_SEED = 74250

# Measured maxima over the seeded sweeps below; regenerate with
# `dyrlab verify --suite bernstein` / `--suite commutator` after any change
# to the transition profile or the product pipeline.
BERNSTEIN_SWEEP = dict(n=32, dim=2, samples=1000, seed=DEFAULT_SEED)
FROZEN_BERNSTEIN: dict[tuple[float, float], float] = {
    # measured maxima at the default seed; zero drift allowed
    (2.0, np.inf): 3.5002,
    (2.0, 4.0): 2.1874,
    (1.0, 2.0): 5.5448,
}

COMMUTATOR_SWEEP = dict(samples=500, seed=DEFAULT_SEED)
FROZEN_COMMUTATOR: dict[str, float] = {
    # measured 1.1014 / 0.126021 / 0.260942 at the default seed, frozen 2x
    "transport": 2.203,
    "hall_cross": 0.2521,
    "hall_curl": 0.5219,
}


def bernstein_sweep(
    pairs: tuple[tuple[float, float], ...] = ((2.0, np.inf), (2.0, 4.0), (1.0, 2.0)),
    n: int = 32,
    dim: int = 2,
    samples: int = 1000,
    seed: int = DEFAULT_SEED,
) -> dict[tuple[float, float], float]:
    """Max measured norm-interchange ratio per (r, s) pair over random
    shell-localized fields with random shell index."""
    grid = Grid(dim, n)
    part = partition_for(grid)
    rng = np.random.default_rng(seed)
    out = {pair: 0.0 for pair in pairs}
    for _ in range(samples):
        f = random_field(grid, 1, rng)
        q = int(rng.integers(0, part.q_max + 1))
        fq = project_shell(part, f, q)
        for r, s in pairs:
            out[(r, s)] = max(out[(r, s)], bernstein_ratio(part, fq, q, r, s))
    return out


def transport_commutator_sweep(
    n: int = 32, dim: int = 2, samples: int = 500, seed: int = DEFAULT_SEED
) -> float:
    """Max ratio ||[shell_q, u_low . grad] v_p||_2 over the product bound
    ||v_p||_2 sum lambda_p' ||u_p'||_inf, for (r1, r2, r3) = (2, 2, inf)."""
    grid = Grid(dim, n)
    part = partition_for(grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = random_solenoidal_field(grid, rng)
        v = random_field(grid, 1, rng)
        p = int(rng.integers(2, part.q_max + 1))
        q = int(rng.integers(max(0, p - 2), min(part.q_max, p + 2) + 1))
        comm = commutator_transport(part, q, u, p, v)
        bound = transport_commutator_bound(part, u, p, v, 2.0, np.inf)
        if bound > 0:
            worst = max(worst, lp_norm(comm, 2) / bound)
    return worst


def hall_commutator_sweep(
    n: int = 16, samples: int = 500, seed: int = DEFAULT_SEED
) -> dict[str, float]:
    """Max ratios ||commutator||_2 / (||grad F||_inf ||G||_2) for both
    cross-product commutators over random solenoidal F and random G."""
    grid = Grid(3, n)
    part = partition_for(grid)
    rng = np.random.default_rng(seed)
    worst = {"hall_cross": 0.0, "hall_curl": 0.0}
    for _ in range(samples):
        F = random_solenoidal_field(grid, rng)
        G = random_field(grid, 3, rng)
        q = int(rng.integers(0, part.q_max + 1))
        denom = jacobian_sup(F) * lp_norm(G, 2)
        if denom == 0:
            continue
        c1 = commutator_hall_cross(part, q, F, G)
        c2 = commutator_hall_curl(part, q, F, G)
        worst["hall_cross"] = max(worst["hall_cross"], lp_norm(c1, 2) / denom)
        worst["hall_curl"] = max(worst["hall_curl"], lp_norm(c2, 2) / denom)
    return worst


def cancellation_sweep(
    samples: int = 50, seed: int = DEFAULT_SEED, n2: int = 32, n3: int = 16
) -> float:
    """Max normalized cancellation defect over random solenoidal states
    (2D transport identity, 3D cross-product identity)."""
    rng = np.random.default_rng(seed)
    grid2 = Grid(2, n2)
    grid3 = Grid(3, n3)
    part2 = partition_for(grid2)
    part3 = partition_for(grid3)
    worst = 0.0
    for _ in range(samples):
        u = random_solenoidal_field(grid2, rng)
        b = random_solenoidal_field(grid3, rng)
        worst = max(worst, cancellation_suite(part2, u=u).max_normalized)
        worst = max(worst, cancellation_suite(part3, b=b).max_normalized)
    return worst


# ---------------------------------------------------------------------------
# Suite drivers for the command line
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    lines: tuple[str, ...]


def run_suite(name: str, seed: int = DEFAULT_SEED) -> SuiteResult:
    if name == "partition":
        lines = []
        ok = True
        for dim, n in ((2, 32), (2, 64), (3, 32)):
            part = build_partition(Grid(dim, n))
            dev = part.partition_defect()
            good = dev < 1e-12
            ok = ok and good
            lines.append(
                f"partition dim={dim} n={n}: max deviation {dev:.3e} "
                f"{'PASS' if good else 'FAIL'}"
            )
        return SuiteResult("partition", ok, tuple(lines))

    if name == "bernstein":
        measured = bernstein_sweep(seed=seed)
        lines = []
        ok = True
        for pair, val in measured.items():
            bound = FROZEN_BERNSTEIN[pair]
            good = val <= bound
            ok = ok and good
            r, s = pair
            lines.append(
                f"bernstein (r={r:g}, s={s:g}): max ratio {val:.6g} "
                f"(frozen {bound:.6g}) {'PASS' if good else 'FAIL'}"
            )
        return SuiteResult("bernstein", ok, tuple(lines))

    if name == "commutator":
        lines = []
        ok = True
        t = transport_commutator_sweep(seed=seed)
        good = t <= FROZEN_COMMUTATOR["transport"]
        ok = ok and good
        lines.append(
            f"transport commutator: max ratio {t:.6g} "
            f"(frozen {FROZEN_COMMUTATOR['transport']:.6g}) {'PASS' if good else 'FAIL'}"
        )
        hall = hall_commutator_sweep(seed=seed)
        for key, val in hall.items():
            good = val <= FROZEN_COMMUTATOR[key]
            ok = ok and good
            lines.append(
                f"{key} commutator: max ratio {val:.6g} "
                f"(frozen {FROZEN_COMMUTATOR[key]:.6g}) {'PASS' if good else 'FAIL'}"
            )
        return SuiteResult("commutator", ok, tuple(lines))

    if name == "cancellation":
        worst = cancellation_sweep(seed=seed)
        good = worst <= 1e-10
        return SuiteResult(
            "cancellation",
            good,
            (
                f"cancellation identities: max normalized defect {worst:.3e} "
                f"{'PASS' if good else 'FAIL'}",
            ),
        )

    raise ValueError(f"unknown suite {name!r}")
