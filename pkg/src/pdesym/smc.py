"""Sequential Monte Carlo refinement of conservation-law coefficients.

The filter tracks an ensemble of coefficient vectors. Each refinement step
is propagate -> reweight -> resample:

* propagate adds zero-mean Gaussian process noise (variance
  ``process_var``) to every coordinate;
* reweight simulates each particle one observation interval forward with
  the deterministic solver and scores it against the observed frame under
  the observation model ``u_obs = H(alpha, u_prev) + sigma`` with iid
  per-point Gaussian noise of scale ``eps = obs_scale * ||u(., t=0)||_2``,
  so ``log w_i = -sum_j (u_obs_j - u_hat_ij)^2 / (2 eps^2)``; the
  ``likelihood="norm"`` switch instead treats the dx-weighted residual
  norm as a single scalar Gaussian (a flatter, more conservative update);
* resample draws M particles from the weighted empirical CDF
  (multinomial, inverse-CDF), restoring uniform weights.

After the configured number of steps the unweighted ensemble mean is the
refined coefficient vector. One-coefficient laws refine q1; two-coefficient
laws refine (q1, q2) jointly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllWeightsDegenerate, ZeroCoefficient
from .solver import (
    CFL_SAFETY,
    DT_MAX_DEFAULT,
    ConservationLaw,
    Grid1D,
    SpaceTimeField,
)

LIKELIHOODS = ("norm", "pointwise")


@dataclass
class FilterConfig:
    particles: int = 500
    steps: int = 10
    process_var: float = 1e-5
    obs_scale: float = 0.05
    init_rel_halfwidth: float = 0.1
    seed: int = 0
    likelihood: str = "pointwise"

    def __post_init__(self):
        if self.particles < 2:
            raise ValueError("particles must be >= 2")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.process_var <= 0.0:
            raise ValueError("process_var must be positive")
        if self.obs_scale <= 0.0:
            raise ValueError("obs_scale must be positive")
        if self.init_rel_halfwidth < 0.0:
            raise ValueError("init_rel_halfwidth must be >= 0")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"likelihood must be one of {LIKELIHOODS}")


@dataclass
class ParticleEnsemble:
    """M coefficient vectors with normalized importance weights."""

    particles: np.ndarray  # (M, d)
    weights: np.ndarray  # (M,)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)


@dataclass
class ObservationSeq:
    """Observed frames (timestamp, state) on a fixed grid."""

    times: np.ndarray
    states: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (self.times.size, self.grid.nx):
            raise ValueError("states must have shape (n_frames, nx)")
        if self.times.size < 2 or not np.all(np.diff(self.times) > 0):
            raise ValueError("need >= 2 frames with strictly increasing times")

    @classmethod
    def from_field(cls, field: SpaceTimeField, n_frames: int | None = None):
        n = field.times.size if n_frames is None else n_frames
        return cls(field.times[:n].copy(), field.values[:n].copy(), field.grid)


@dataclass
class RefineResult:
    alpha: np.ndarray
    ess: np.ndarray  # effective sample size 1/sum(p^2) per step
    spread: np.ndarray  # post-resample ensemble std per step, (steps, d)


def discrete_l2(u: np.ndarray, dx: float) -> float:
    """sqrt(sum(u^2) * dx)."""
    return float(np.sqrt(np.sum(u * u) * dx))


def init_ensemble(alpha0, cfg: FilterConfig, rng=None) -> ParticleEnsemble:
    """Uniform cloud on [(1-h) a0_j, (1+h) a0_j] per coordinate."""
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    if np.any(alpha0 == 0.0):
        raise ZeroCoefficient(
            "relative initialization interval degenerates for a zero coefficient"
        )
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    lo = np.minimum((1.0 - cfg.init_rel_halfwidth) * alpha0,
                    (1.0 + cfg.init_rel_halfwidth) * alpha0)
    hi = np.maximum((1.0 - cfg.init_rel_halfwidth) * alpha0,
                    (1.0 + cfg.init_rel_halfwidth) * alpha0)
    particles = rng.uniform(lo, hi, size=(cfg.particles, alpha0.size))
    weights = np.full(cfg.particles, 1.0 / cfg.particles)
    return ParticleEnsemble(particles, weights)


def propagate(ens: ParticleEnsemble, cfg: FilterConfig, rng=None) -> ParticleEnsemble:
    """Add N(0, process_var) noise to every coordinate; weights unchanged."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    noise = rng.normal(0.0, np.sqrt(cfg.process_var), size=ens.particles.shape)
    return ParticleEnsemble(ens.particles + noise, ens.weights.copy())


def _coefficient_arrays(particles: np.ndarray, template: ConservationLaw):
    """Per-particle (q1, q2, valid): 1-D particles refine q1 only, 2-D
    particles refine (q1, q2) jointly. Negative viscosity is invalid."""
    q1 = particles[:, 0].astype(float)
    if particles.shape[1] == 1:
        q2 = np.full(particles.shape[0], template.q2)
    else:
        q2 = particles[:, 1].astype(float)
    valid = np.all(np.isfinite(particles), axis=1) & (q2 >= 0.0)
    return q1, q2, valid


def _rhs_batch(flux_kind: str, q1c: np.ndarray, q2c, U: np.ndarray,
               dx: float) -> np.ndarray:
    """Row-wise copy of ``solver._rhs``: same operations in the same order,
    with per-row coefficients broadcast as columns, so each row is
    bit-identical to the scalar path."""
    up = np.roll(U, -1, axis=1)
    if flux_kind == "quadratic":
        f = q1c * U * U
        fp = q1c * up * up
        a = np.maximum(np.abs(q1c * 2.0 * U), np.abs(q1c * 2.0 * up))
    elif flux_kind == "cubic":
        f = q1c * U * U * U
        fp = q1c * up * up * up
        a = np.maximum(np.abs(q1c * 3.0 * U * U), np.abs(q1c * 3.0 * up * up))
    else:
        f = q1c * np.sin(U)
        fp = q1c * np.sin(up)
        a = np.maximum(np.abs(q1c * np.cos(U)), np.abs(q1c * np.cos(up)))
    flux = 0.5 * (f + fp) - 0.5 * a * (up - U)
    out = -(flux - np.roll(flux, 1, axis=1)) / dx
    if q2c is not None:
        out = out + q2c * (up - 2.0 * U + np.roll(U, 1, axis=1)) / (dx * dx)
    return out


def _max_speed_batch(flux_kind: str, q1c: np.ndarray, U: np.ndarray) -> np.ndarray:
    if flux_kind == "quadratic":
        return np.max(np.abs(q1c * 2.0 * U), axis=1)
    if flux_kind == "cubic":
        return np.max(np.abs(q1c * 3.0 * U * U), axis=1)
    return np.max(np.abs(q1c * np.cos(U)), axis=1)


def advance_ensemble(flux_kind: str, q1: np.ndarray, q2: np.ndarray,
                     u_start: np.ndarray, dt_total: float, grid: Grid1D):
    """Advance one state under many coefficient vectors simultaneously.

    Batched twin of ``solver._advance``: every row follows exactly the
    forward map the scalar integrator would apply for that row's
    coefficients (same CFL substeps, same floating-point operation order),
    so results agree bit for bit. Rows whose state stops being finite (or
    whose step size degenerates) are frozen and reported as failed.

    Returns ``(states, ok)`` with ``states`` of shape (M, nx) and ``ok`` a
    boolean mask of rows that completed with finite values.
    """
    m = q1.size
    dx = grid.dx
    q1c = q1[:, None]
    has_diffusion = bool(np.any(q2 > 0.0))
    q2c = q2[:, None] if has_diffusion else None
    U = np.broadcast_to(np.asarray(u_start, dtype=float), (m, grid.nx)).copy()
    remaining = np.full(m, float(dt_total))
    alive = np.ones(m, dtype=bool)
    with np.errstate(all="ignore"):
        while True:
            alive &= np.isfinite(U).all(axis=1)
            run = alive & (remaining > 0.0)
            if not run.any():
                break
            speed = _max_speed_batch(flux_kind, q1c, U)
            adv = np.where(speed > 0.0, dx / speed, np.inf)
            dif = np.where(q2 > 0.0, dx * dx / (2.0 * q2), np.inf)
            lim = np.minimum(adv, dif)
            dt = np.where(np.isfinite(lim), CFL_SAFETY * lim, DT_MAX_DEFAULT)
            bad = run & ~((dt > 0.0) & np.isfinite(dt))
            if bad.any():
                alive &= ~bad
                run &= ~bad
                if not run.any():
                    break
            clip = dt >= remaining
            dt = np.where(clip, remaining, dt)
            remaining = np.where(run, np.where(clip, 0.0, remaining - dt), remaining)
            dtc = dt[:, None]
            k1 = _rhs_batch(flux_kind, q1c, q2c, U, dx)
            um = U + dtc * k1
            k2 = _rhs_batch(flux_kind, q1c, q2c, um, dx)
            stepped = U + (0.5 * dtc) * (k1 + k2)
            U = np.where(run[:, None], stepped, U)
    ok = alive & (remaining == 0.0) & np.isfinite(U).all(axis=1)
    return U, ok


def weights_from_sq_residuals(sq_residuals: np.ndarray, eps: float) -> np.ndarray:
    """Normalized softmax of -r^2/(2 eps^2); -inf entries get weight zero."""
    logw = -np.asarray(sq_residuals, dtype=float) / (2.0 * eps * eps)
    m = np.max(logw)
    if not np.isfinite(m):
        raise AllWeightsDegenerate("no particle produced a finite simulation")
    w = np.exp(logw - m)
    return w / np.sum(w)


def reweight(ens: ParticleEnsemble, u_prev: np.ndarray, u_obs: np.ndarray,
             law_template: ConservationLaw, cfg: FilterConfig, dt_obs: float,
             grid: Grid1D, ref_norm: float) -> ParticleEnsemble:
    """Score every particle against one observed transition.

    Each particle's coefficients are substituted into the law template and
    advanced from ``u_prev`` over ``dt_obs``; ``ref_norm`` is the discrete
    L2 norm of the initial frame, fixing ``eps = obs_scale * ref_norm``.
    Particles whose simulation blows up receive weight zero.
    """
    eps = cfg.obs_scale * ref_norm
    if eps <= 0.0:
        raise ZeroCoefficient("observation noise scale vanishes (zero initial norm)")
    sq = np.full(ens.size, np.inf)
    scale = grid.dx if cfg.likelihood == "norm" else 1.0
    q1, q2, valid = _coefficient_arrays(ens.particles, law_template)
    idx = np.flatnonzero(valid)
    if idx.size:
        states, ok = advance_ensemble(
            law_template.flux_kind, q1[idx], q2[idx], u_prev, dt_obs, grid
        )
        diff = u_obs[None, :] - states[ok]
        sq[idx[ok]] = np.sum(diff * diff, axis=1) * scale
    weights = weights_from_sq_residuals(sq, eps)
    return ParticleEnsemble(ens.particles.copy(), weights)


def resample(ens: ParticleEnsemble, cfg: FilterConfig, rng=None) -> ParticleEnsemble:
    """Multinomial resampling through the weighted empirical CDF."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    cdf = np.cumsum(ens.weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(ens.size), side="right")
    idx = np.minimum(idx, ens.size - 1)
    particles = ens.particles[idx].copy()
    weights = np.full(ens.size, 1.0 / ens.size)
    return ParticleEnsemble(particles, weights)


def refine(alpha0, obs: ObservationSeq, law_template: ConservationLaw,
           cfg: FilterConfig) -> RefineResult:
    """Run the full propagate/reweight/resample loop and return the mean.

    Consumes observation frames 0..steps consecutively; requires at least
    ``steps + 1`` frames.
    """
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    if obs.times.size < cfg.steps + 1:
        raise ValueError(
            f"need at least steps+1={cfg.steps + 1} frames, got {obs.times.size}"
        )
    rng = np.random.default_rng(cfg.seed)
    ens = init_ensemble(alpha0, cfg, rng)
    ref_norm = discrete_l2(obs.states[0], obs.grid.dx)
    ess = np.empty(cfg.steps)
    spread = np.empty((cfg.steps, alpha0.size))
    for k in range(1, cfg.steps + 1):
        ens = propagate(ens, cfg, rng)
        ens = reweight(
            ens,
            obs.states[k - 1],
            obs.states[k],
            law_template,
            cfg,
            float(obs.times[k] - obs.times[k - 1]),
            obs.grid,
            ref_norm,
        )
        ess[k - 1] = 1.0 / float(np.sum(ens.weights**2))
        ens = resample(ens, cfg, rng)
        spread[k - 1] = ens.particles.std(axis=0)
    return RefineResult(alpha=ens.mean(), ess=ess, spread=spread)
