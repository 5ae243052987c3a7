"""Finite-volume solver for periodic 1-D scalar conservation laws

    u_t + q1 * (f(u))_x = q2 * u_xx,   f in {u^2, u^3, sin(u)}

using the local Lax-Friedrichs (Rusanov) flux with central second-difference
viscosity. Time stepping is Heun's method (RK2) built from forward-Euler
substeps under a CFL bound with safety factor 0.4. Everything is pure and
deterministic: identical inputs give bit-identical outputs.

The module also owns the ``PDEGRID1`` binary trajectory format: magic bytes
``PDEGRID1``, a little-endian uint32 header length, a UTF-8 JSON header
``{"nt", "nx", "t", "x0", "dx"}``, then nt*nx float64 little-endian values
in time-major order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CFLViolation, NonFiniteState

CFL_SAFETY = 0.4
DT_MAX_DEFAULT = 0.1

FLUX_KINDS = ("quadratic", "cubic", "sine")

_MAGIC = b"PDEGRID1"


@dataclass(frozen=True)
class ConservationLaw:
    """Flux kind plus coefficients; ``q2 = 0`` means inviscid."""

    flux_kind: str
    q1: float
    q2: float = 0.0

    def __post_init__(self):
        if self.flux_kind not in FLUX_KINDS:
            raise ValueError(f"flux_kind must be one of {FLUX_KINDS}")
        if self.q2 < 0.0:
            raise ValueError("viscosity q2 must be >= 0")

    def flux(self, u: np.ndarray) -> np.ndarray:
        if self.flux_kind == "quadratic":
            return self.q1 * u * u
        if self.flux_kind == "cubic":
            return self.q1 * u * u * u
        return self.q1 * np.sin(u)

    def wave_speed(self, u: np.ndarray) -> np.ndarray:
        """|q1 * f'(u)| pointwise."""
        if self.flux_kind == "quadratic":
            return np.abs(self.q1 * 2.0 * u)
        if self.flux_kind == "cubic":
            return np.abs(self.q1 * 3.0 * u * u)
        return np.abs(self.q1 * np.cos(u))


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid of nx cells starting at x0."""

    nx: int
    dx: float
    x0: float = 0.0
    periodic: bool = True

    def __post_init__(self):
        if self.nx < 8:
            raise ValueError("nx must be >= 8")
        if self.dx <= 0.0:
            raise ValueError("dx must be positive")
        if not self.periodic:
            raise ValueError("only periodic grids are supported")

    @property
    def length(self) -> float:
        return self.nx * self.dx

    def cells(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)


@dataclass
class SpaceTimeField:
    """nt x nx samples of u on a grid at strictly increasing times."""

    grid: Grid1D
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.grid.nx):
            raise ValueError("values must have shape (nt, nx)")
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteState("field values must be finite")


def _rhs(law: ConservationLaw, u: np.ndarray, dx: float) -> np.ndarray:
    up = np.roll(u, -1)
    f = law.flux(u)
    fp = law.flux(up)
    a = np.maximum(law.wave_speed(u), law.wave_speed(up))
    # F_{i+1/2} = (f_i + f_{i+1})/2 - a_{i+1/2} (u_{i+1} - u_i)/2
    flux = 0.5 * (f + fp) - 0.5 * a * (up - u)
    out = -(flux - np.roll(flux, 1)) / dx
    if law.q2 > 0.0:
        out += law.q2 * (up - 2.0 * u + np.roll(u, 1)) / (dx * dx)
    return out


def cfl_dt(law: ConservationLaw, u: np.ndarray, grid: Grid1D,
           dt_max: float = DT_MAX_DEFAULT) -> float:
    """Stable step 0.4 * min(dx/max|q1 f'|, dx^2/(2 q2)).

    Returns ``dt_max`` when both the wave speed and the viscosity vanish.
    """
    speed = float(np.max(law.wave_speed(np.asarray(u))))
    limits = []
    if speed > 0.0:
        limits.append(grid.dx / speed)
    if law.q2 > 0.0:
        limits.append(grid.dx * grid.dx / (2.0 * law.q2))
    if not limits:
        return dt_max
    return CFL_SAFETY * min(limits)


def step(law: ConservationLaw, u: np.ndarray, dt: float, grid: Grid1D) -> np.ndarray:
    """One conservative forward-Euler update; enforces the CFL bound."""
    u = np.asarray(u, dtype=float)
    bound = cfl_dt(law, u, grid)
    if dt > bound * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds stable bound {bound:g}")
    out = u + dt * _rhs(law, u, grid.dx)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("state became non-finite during step")
    return out


def _advance(law: ConservationLaw, u: np.ndarray, dt_total: float,
             grid: Grid1D) -> np.ndarray:
    """Integrate over dt_total with Heun substeps at the CFL limit."""
    remaining = float(dt_total)
    dx = grid.dx
    while remaining > 0.0:
        dt = cfl_dt(law, u, grid)
        if not np.isfinite(dt) or dt <= 0.0:
            raise NonFiniteState("state became non-finite during integration")
        if dt >= remaining:
            dt = remaining
            remaining = 0.0
        else:
            remaining -= dt
        k1 = _rhs(law, u, dx)
        um = u + dt * k1
        u = u + (0.5 * dt) * (k1 + _rhs(law, um, dx))
    if not np.all(np.isfinite(u)):
        raise NonFiniteState("state became non-finite during integration")
    return u


def solve(law: ConservationLaw, u0: np.ndarray, grid: Grid1D, t_final: float,
          nt_out: int) -> SpaceTimeField:
    """Integrate to t_final, sampling nt_out uniformly spaced frames.

    ``values[0]`` is the initial state; internal steps are clipped so every
    output timestamp is hit exactly.
    """
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    if nt_out < 2:
        raise ValueError("nt_out must be >= 2")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (grid.nx,):
        raise ValueError("u0 must have shape (nx,)")
    if not np.all(np.isfinite(u0)):
        raise NonFiniteState("initial state must be finite")
    times = np.linspace(0.0, t_final, nt_out)
    values = np.empty((nt_out, grid.nx))
    values[0] = u0
    u = u0.copy()
    for k in range(1, nt_out):
        u = _advance(law, u, times[k] - times[k - 1], grid)
        values[k] = u
    return SpaceTimeField(grid, times, values)


# ---------------------------------------------------------------------------
# PDEGRID1 file format

def write_grid_file(field: SpaceTimeField, path) -> None:
    header = {
        "nt": int(field.times.size),
        "nx": int(field.grid.nx),
        "t": [float(t) for t in field.times],
        "x0": float(field.grid.x0),
        "dx": float(field.grid.dx),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_grid_file(path) -> SpaceTimeField:
    data = Path(path).read_bytes()
    if data[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path}: not a PDEGRID1 file")
    (hlen,) = struct.unpack_from("<I", data, len(_MAGIC))
    start = len(_MAGIC) + 4
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    nt, nx = header["nt"], header["nx"]
    values = np.frombuffer(
        data, dtype="<f8", count=nt * nx, offset=start + hlen
    ).reshape(nt, nx)
    grid = Grid1D(nx=nx, dx=header["dx"], x0=header["x0"])
    return SpaceTimeField(grid, np.asarray(header["t"]), values.copy())
