"""Dataset generation for the six conservation-law families.

For every (family, parameter draw, initial condition) triple the generator
solves the law on the family grid, writes one ``traj_<id>.grid`` trajectory
(PDEGRID1) and one ``eq_<id>.json`` equation file, and finally an index
``manifest.json``. Output is fully deterministic given the manifest seed;
regenerating produces byte-identical files.

Coefficients are jittered by Unif(0.9, 1.1) per nonzero base value and
rounded to three significant digits, matching the float-token grid of the
canonical serializer. Initial conditions are random five-mode Fourier
profiles rescaled to unit amplitude.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonFiniteState
from .expr import FIELD, Binary, Const, Deriv, Equation, Expr, Int, Unary, to_infix
from .solver import ConservationLaw, Grid1D, solve, write_grid_file
from .tokens import round_sig3, to_canonical_tokens

logger = logging.getLogger(__name__)

_SPLIT_CODES = {"train": 0, "test": 1}
DEFAULT_COUNTS = {"train": (64, 8), "test": (16, 4)}


@dataclass(frozen=True)
class FamilySpec:
    name: str
    flux_kind: str
    q1: float
    q2: float
    t_f: float = 1.0
    x_f: float = 1.0
    nx: int = 128
    nt: int = 32


FAMILIES = {
    spec.name: spec
    for spec in (
        FamilySpec("burgers", "quadratic", 0.5, 0.05),
        FamilySpec("inviscid_burgers", "quadratic", 0.5, 0.0),
        FamilySpec("cl_cubic", "cubic", 0.33, 0.05),
        FamilySpec("icl_cubic", "cubic", 0.33, 0.0),
        FamilySpec("cl_sine", "sine", 1.0, 0.05),
        FamilySpec("icl_sine", "sine", 1.0, 0.0),
    )
}


@dataclass
class DatasetManifest:
    families: list[str] = field(default_factory=lambda: list(FAMILIES))
    params_per_family: int = 4
    ics_per_param: int = 2
    seed: int = 0
    split: str = "train"

    def __post_init__(self):
        if self.params_per_family < 1 or self.ics_per_param < 1:
            raise ValueError("counts must be >= 1")
        if self.split not in _SPLIT_CODES:
            raise ValueError(f"split must be one of {sorted(_SPLIT_CODES)}")
        for name in self.families:
            if name not in FAMILIES:
                raise ValueError(f"unknown family {name!r}")


def grid_for(spec: FamilySpec) -> Grid1D:
    return Grid1D(nx=spec.nx, dx=spec.x_f / spec.nx)


def law_for(spec: FamilySpec, q1: float, q2: float) -> ConservationLaw:
    return ConservationLaw(spec.flux_kind, q1, q2)


_FLUX_EXPRS = {
    "quadratic": Binary("pow", FIELD, Int(2)),
    "cubic": Binary("pow", FIELD, Int(3)),
    "sine": Unary("sin", FIELD),
}


def equation_for(spec: FamilySpec, q1: float, q2: float) -> Equation:
    """Residual u_t + q1*(f(u))_x - q2*u_xx as an expression tree."""
    residual: Expr = Binary(
        "add",
        Deriv(FIELD, "t", 1),
        Binary("mul", Const(q1), Deriv(_FLUX_EXPRS[spec.flux_kind], "x", 1)),
    )
    if q2 != 0.0:
        residual = Binary(
            "sub", residual, Binary("mul", Const(q2), Deriv(FIELD, "x", 2))
        )
    return Equation(residual)


def sample_params(spec: FamilySpec, rng) -> tuple[float, float]:
    """Jitter each nonzero base coefficient by Unif(0.9, 1.1), 3 sig digits."""
    q1 = round_sig3(spec.q1 * rng.uniform(0.9, 1.1)) if spec.q1 != 0.0 else 0.0
    q2 = round_sig3(spec.q2 * rng.uniform(0.9, 1.1)) if spec.q2 != 0.0 else 0.0
    return q1, q2


def fourier_profile(xs: np.ndarray, amps, phases, x_f: float) -> np.ndarray:
    u = np.zeros_like(xs)
    for j, (a, phi) in enumerate(zip(amps, phases), start=1):
        u = u + a * np.sin(2.0 * np.pi * j * xs / x_f + phi)
    return u


def sample_ic(spec: FamilySpec, rng) -> np.ndarray:
    """Random five-mode profile rescaled so max|u0| = 1."""
    xs = grid_for(spec).cells()
    while True:
        amps = rng.uniform(-0.5, 0.5, 5)
        phases = rng.uniform(0.0, 2.0 * np.pi, 5)
        u0 = fourier_profile(xs, amps, phases, spec.x_f)
        peak = float(np.max(np.abs(u0)))
        if peak > 1e-12:
            return u0 / peak


def equation_record(entry_id: str, spec: FamilySpec, q1: float, q2: float) -> dict:
    eq = equation_for(spec, q1, q2)
    return {
        "id": entry_id,
        "family": spec.name,
        "flux_kind": spec.flux_kind,
        "q1": q1,
        "q2": q2,
        "t_f": spec.t_f,
        "x_f": spec.x_f,
        "infix": f"{to_infix(eq.residual)} = 0",
        "canonical_tokens": list(to_canonical_tokens(eq).tokens),
    }


def generate(manifest: DatasetManifest, outdir) -> dict:
    """Write the dataset directory and return the index mapping."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    split_code = _SPLIT_CODES[manifest.split]
    for fam_idx, name in enumerate(manifest.families):
        spec = FAMILIES[name]
        grid = grid_for(spec)
        for p in range(manifest.params_per_family):
            seq = np.random.SeedSequence((manifest.seed, split_code, fam_idx, p))
            children = seq.spawn(1 + manifest.ics_per_param)
            q1, q2 = sample_params(spec, np.random.default_rng(children[0]))
            law = law_for(spec, q1, q2)
            for i in range(manifest.ics_per_param):
                entry_id = f"{name}_{p:03d}_{i:03d}"
                u0 = sample_ic(spec, np.random.default_rng(children[1 + i]))
                try:
                    field_out = solve(law, u0, grid, spec.t_f, spec.nt)
                except NonFiniteState:
                    logger.warning("skipping %s: solver state blew up", entry_id)
                    continue
                record = equation_record(entry_id, spec, q1, q2)
                eq_path = outdir / f"eq_{entry_id}.json"
                traj_path = outdir / f"traj_{entry_id}.grid"
                eq_path.write_text(
                    json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False)
                    + "\n",
                    encoding="utf-8",
                )
                write_grid_file(field_out, traj_path)
                entries.append(
                    {
                        "id": entry_id,
                        "family": name,
                        "q1": q1,
                        "q2": q2,
                        "equation": eq_path.name,
                        "trajectory": traj_path.name,
                    }
                )
    index = {
        "seed": manifest.seed,
        "split": manifest.split,
        "families": list(manifest.families),
        "params_per_family": manifest.params_per_family,
        "ics_per_param": manifest.ics_per_param,
        "entries": entries,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(index, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return index


def load_equation_record(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def law_from_record(record: dict) -> ConservationLaw:
    return ConservationLaw(record["flux_kind"], record["q1"], record["q2"])
