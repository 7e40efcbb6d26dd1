"""File formats: flat key-value run configs, delimited series tables, and
the binary snapshot container.

Config files are flat `section.key = value` lines (one dot of nesting, `#`
comments).  Series files are comma-delimited with a single header row and
floats printed to 17 significant digits, so they round-trip exactly.
Snapshots are little-endian binary with a self-describing header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .solvers import SYSTEMS, _DIM
from .spectral import Field, Grid

SNAPSHOT_MAGIC = b"DYRL"
SNAPSHOT_VERSION = 1


class ConfigError(ValueError):
    """Invalid run configuration; carries one message per violated field."""

    def __init__(self, errors: list[str]):
        super().__init__("config error: " + "; ".join(errors))
        self.errors = errors


class SnapshotError(ValueError):
    """Corrupt or mismatched snapshot file."""


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_INF_TOKENS = {"inf", "Inf", "INF", "infinity"}


def _parse_r(token: str) -> float:
    if token.strip() in _INF_TOKENS:
        return float("inf")
    return float(token)


def _fmt_r(r: float) -> str:
    if r == float("inf"):
        return "inf"
    if float(r).is_integer():
        return str(int(r))
    return repr(float(r))


@dataclass(frozen=True)
class RunConfig:
    """Everything one batch run needs; parses from / serializes to the flat
    key-value format documented in the README."""

    system: str
    n: int
    dt: float
    T: float
    init_kind: str
    out_dir: str = "runs/out"
    nu: float = 0.0
    mu: float = 0.0
    kappa: float = 0.0
    alpha: float = 0.0
    init_amplitude: float = 1.0
    init_k: tuple[int, ...] = ()
    init_slope: float = 2.0
    init_k_peak: float = 4.0
    init_seed: int = -1  # -1: fall back to the run seed
    init_path: str = ""
    sample_stride: int = 1
    snapshot_stride: int = 100
    seed: int = 0
    r_set: tuple[float, ...] = ()  # empty: per-system default
    c: float = 0.1
    delta: float = 3.0
    tail_offset: int = 3
    rl_pairs: tuple[tuple[float, float], ...] = ((2.0, 2.0), (float("inf"), 1.0))
    check_cancellation: bool = True

    @property
    def dim(self) -> int:
        return _DIM[self.system]

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def effective_init_seed(self) -> int:
        return self.seed if self.init_seed < 0 else self.init_seed


_KEYMAP = {
    "system": "system",
    "grid.n": "n",
    "constants.nu": "nu",
    "constants.mu": "mu",
    "constants.kappa": "kappa",
    "constants.alpha": "alpha",
    "time.dt": "dt",
    "time.T": "T",
    "init.kind": "init_kind",
    "init.amplitude": "init_amplitude",
    "init.k": "init_k",
    "init.slope": "init_slope",
    "init.k_peak": "init_k_peak",
    "init.seed": "init_seed",
    "init.path": "init_path",
    "output.dir": "out_dir",
    "sampling.sample_stride": "sample_stride",
    "sampling.snapshot_stride": "snapshot_stride",
    "seed": "seed",
    "wavenumber.r_set": "r_set",
    "wavenumber.c": "c",
    "wavenumber.delta": "delta",
    "criteria.tail_offset": "tail_offset",
    "criteria.rl_pairs": "rl_pairs",
    "solver.check_cancellation": "check_cancellation",
}

_ATTR_TO_KEY = {v: k for k, v in _KEYMAP.items()}

_REQUIRED = ("system", "grid.n", "time.dt", "time.T", "init.kind")


def _parse_value(attr: str, raw: str, errors: list[str]):
    raw = raw.strip()
    try:
        if attr == "system":
            return raw
        if attr in ("n", "init_seed", "seed", "sample_stride", "snapshot_stride", "tail_offset"):
            return int(raw)
        if attr in ("nu", "mu", "kappa", "alpha", "dt", "T", "init_amplitude",
                    "init_slope", "init_k_peak", "c", "delta"):
            return float(raw)
        if attr in ("init_kind", "init_path", "out_dir"):
            return raw
        if attr == "init_k":
            if not raw:
                return ()
            return tuple(int(x) for x in raw.split(","))
        if attr == "r_set":
            if not raw:
                return ()
            return tuple(_parse_r(x) for x in raw.split(","))
        if attr == "rl_pairs":
            pairs = []
            for chunk in raw.split(","):
                r_str, l_str = chunk.split(":")
                pairs.append((_parse_r(r_str), float(l_str)))
            return tuple(pairs)
        if attr == "check_cancellation":
            if raw in ("true", "True", "1", "yes"):
                return True
            if raw in ("false", "False", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw}")
    except ValueError as exc:
        errors.append(f"{_ATTR_TO_KEY[attr]}: {exc}")
        return None
    errors.append(f"unhandled key for {attr}")
    return None


def validate_config(cfg: RunConfig) -> list[str]:
    """All violations, one message per field (empty when valid)."""
    errors: list[str] = []
    if cfg.system not in SYSTEMS:
        errors.append(f"system: unknown system {cfg.system!r}")
        return errors
    if cfg.n < 8 or (cfg.n & (cfg.n - 1)) != 0:
        errors.append(f"grid.n: must be a power of two >= 8, got {cfg.n}")
    if cfg.dt <= 0:
        errors.append(f"time.dt: must be positive, got {cfg.dt}")
    if cfg.T <= 0:
        errors.append(f"time.T: must be positive, got {cfg.T}")
    if cfg.dt > 0 and cfg.T > 0:
        steps = cfg.T / cfg.dt
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            errors.append("time.T: must be an integer multiple of time.dt")
    for name in ("nu", "mu", "kappa"):
        if getattr(cfg, name) < 0:
            errors.append(f"constants.{name}: must be non-negative")
    if cfg.system == "sqg":
        if not 0.0 < cfg.alpha < 1.0:
            errors.append(f"constants.alpha: must lie in (0, 1) for sqg, got {cfg.alpha}")
    elif cfg.alpha != 0.0:
        errors.append("constants.alpha: only meaningful for sqg; set it to 0")
    if cfg.sample_stride < 1:
        errors.append("sampling.sample_stride: must be >= 1")
    if cfg.snapshot_stride < 1:
        errors.append("sampling.snapshot_stride: must be >= 1")
    if cfg.init_kind not in ("taylor_green", "single_mode", "random_spectrum", "from_snapshot"):
        errors.append(f"init.kind: unknown kind {cfg.init_kind!r}")
    if cfg.init_kind == "single_mode":
        if len(cfg.init_k) != _DIM[cfg.system]:
            errors.append(
                f"init.k: need {_DIM[cfg.system]} integer components for {cfg.system}"
            )
        elif any(3 * abs(k) >= cfg.n for k in cfg.init_k):
            errors.append(f"init.k: mode {cfg.init_k} outside the dealiased lattice")
    if cfg.init_kind == "random_spectrum" and cfg.init_k_peak <= 0:
        errors.append("init.k_peak: must be positive")
    if cfg.init_kind == "from_snapshot" and not cfg.init_path:
        errors.append("init.path: required for init.kind = from_snapshot")
    if cfg.c <= 0:
        errors.append("wavenumber.c: must be positive")
    if cfg.delta < 0:
        errors.append("wavenumber.delta: must be non-negative")
    for r, ell in cfg.rl_pairs:
        if r != float("inf") and r < 2:
            errors.append(f"criteria.rl_pairs: r must be >= 2, got {r}")
        if ell < 1 or ell == float("inf"):
            errors.append(f"criteria.rl_pairs: l must be finite and >= 1, got {ell}")
    return errors


def parse_config(text: str) -> RunConfig:
    """Parse the flat format; raises ConfigError listing every violation."""
    errors: list[str] = []
    seen: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw_line!r}")
            continue
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _KEYMAP:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        attr = _KEYMAP[key]
        val = _parse_value(attr, raw, errors)
        if val is not None:
            seen[attr] = val
    for key in _REQUIRED:
        if _KEYMAP[key] not in seen:
            errors.append(f"{key}: required key missing")
    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(**seen)
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Emit the flat format; parse_config(serialize_config(c)) == c."""
    lines = []
    for f in dc_fields(cfg):
        key = _ATTR_TO_KEY[f.name]
        v = getattr(cfg, f.name)
        if f.name == "init_k":
            s = ",".join(str(x) for x in v)
        elif f.name == "r_set":
            s = ",".join(_fmt_r(x) for x in v)
        elif f.name == "rl_pairs":
            s = ",".join(f"{_fmt_r(r)}:{_fmt_r(l)}" for r, l in v)
        elif isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        lines.append(f"{key} = {s}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# Series files
# ---------------------------------------------------------------------------


class SeriesWriter:
    """Append-only delimited writer; every flushed prefix parses on its own."""

    def __init__(self, path: str | Path, columns: list[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self._fh = open(self.path, "w", newline="\n")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def write_row(self, values: list[float]) -> None:
        if len(values) != len(self.columns):
            raise ValueError("row length does not match header")
        self._fh.write(",".join(f"{v:.17g}" for v in values) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "SeriesWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_series(path: str | Path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Header list plus column arrays; ignores a trailing partial line."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"empty series file {path}")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            continue  # unflushed partial tail
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            continue
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return header, {name: data[:, i] for i, name in enumerate(header)}


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


def write_snapshot(
    path: str | Path,
    system: str,
    t: float,
    fields: dict[str, np.ndarray],
    grid: Grid,
) -> None:
    """Binary layout (all little-endian):
    magic 'DYRL' | u32 version | u16 taglen + system tag | u32 dim | u32 n |
    f64 t | u32 nfields | per field (u16 len + name) | payload: per field
    n**dim float64 samples in row-major order."""
    buf = bytearray()
    buf += SNAPSHOT_MAGIC
    buf += struct.pack("<I", SNAPSHOT_VERSION)
    tag = system.encode()
    buf += struct.pack("<H", len(tag)) + tag
    buf += struct.pack("<II", grid.dim, grid.n)
    buf += struct.pack("<d", t)
    names = list(fields.keys())
    buf += struct.pack("<I", len(names))
    for name in names:
        nb = name.encode()
        buf += struct.pack("<H", len(nb)) + nb
    for name in names:
        arr = np.ascontiguousarray(fields[name], dtype=np.float64)
        if arr.shape != grid.shape:
            raise SnapshotError(f"field {name} has shape {arr.shape}, grid {grid.shape}")
        buf += arr.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_snapshot(path: str | Path) -> tuple[str, float, dict[str, np.ndarray], Grid]:
    raw = Path(path).read_bytes()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(raw):
            raise SnapshotError(f"corrupt snapshot {path}: truncated")
        chunk = raw[off : off + n]
        off += n
        return chunk

    if take(4) != SNAPSHOT_MAGIC:
        raise SnapshotError(f"corrupt snapshot {path}: bad magic")
    (version,) = struct.unpack("<I", take(4))
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"corrupt snapshot {path}: unknown version {version}")
    (taglen,) = struct.unpack("<H", take(2))
    system = take(taglen).decode()
    dim, n = struct.unpack("<II", take(8))
    (t,) = struct.unpack("<d", take(8))
    (nfields,) = struct.unpack("<I", take(4))
    names = []
    for _ in range(nfields):
        (ln,) = struct.unpack("<H", take(2))
        names.append(take(ln).decode())
    grid = Grid(dim, n)
    count = grid.npoints
    fields = {}
    for name in names:
        data = np.frombuffer(take(count * 8), dtype="<f8").reshape(grid.shape)
        fields[name] = data.astype(np.float64)
    if off != len(raw):
        raise SnapshotError(f"corrupt snapshot {path}: trailing bytes")
    return system, t, fields, grid


def state_field_arrays(state) -> dict[str, np.ndarray]:
    """Flatten a solver state to named physical component arrays."""
    out: dict[str, np.ndarray] = {}
    for name, f in state.fields().items():
        phys = f.to_physical().data
        if name == "theta":
            out["theta"] = phys[0]
        else:
            for c in range(phys.shape[0]):
                out[f"{name}{c}"] = phys[c]
    return out


def fields_from_arrays(
    grid: Grid, arrays: dict[str, np.ndarray]
) -> dict[str, Field]:
    """Regroup named component arrays into Fields (inverse of
    state_field_arrays)."""
    out: dict[str, Field] = {}
    if "theta" in arrays:
        out["theta"] = Field.physical(grid, arrays["theta"][np.newaxis])
    for base in ("u", "b"):
        comps = [k for k in arrays if k.startswith(base) and k[len(base):].isdigit()]
        if comps:
            comps.sort(key=lambda k: int(k[len(base):]))
            data = np.stack([arrays[k] for k in comps])
            out[base] = Field.physical(grid, data)
    return out
