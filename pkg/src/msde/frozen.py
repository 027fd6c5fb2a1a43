"""Frozen fast dynamics: invariant laws, averaged coefficients, correctors.

With the slow state pinned at x, the fast variable follows

    dY = B(x, Y) ds + g(x, Y) dW2

whose invariant law mu^x is sampled here by one long strided trajectory.
On top of the sampler sit the averaged drift (the mu^x-mean of f, then a
time average over the rescaled forcing), the averaged diffusion, and a
Monte Carlo estimate of the corrector that solves the frozen-generator
equation for a centered observable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .integrate import step_semi_implicit, step_tamed
from .models import ModelSpec
from .noise import SUBSTREAM_W2, NoisePath
from . import kernels


class FrozenError(ValueError):
    """Raised for invalid frozen-dynamics requests."""


@dataclass(frozen=True)
class FrozenSpec:
    """Sampling plan for the invariant law of the frozen fast dynamics.

    ``burn_in`` must cover at least 5 relaxation times 1/eta; shorter values
    are refused rather than silently accepted, since an under-burned chain
    biases every moment downstream.
    """

    model: ModelSpec
    x: np.ndarray
    dt: float = 2e-3
    burn_in: float | None = None
    stride: float = 0.25

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if x.shape != (self.model.d1,):
            raise FrozenError(
                f"x must have shape ({self.model.d1},), got {np.shape(self.x)}"
            )
        object.__setattr__(self, "x", x)
        eta = self.model.meta.eta
        floor = 5.0 / eta
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", floor)
        elif self.burn_in < floor * (1.0 - 1e-12):
            raise FrozenError(
                f"burn_in = {self.burn_in:g} is below the required 5/eta = "
                f"{floor:g} for eta = {eta:g}"
            )
        if self.dt <= 0.0 or self.stride <= 0.0:
            raise FrozenError("dt and stride must be positive")
        if self.stride < self.dt:
            raise FrozenError(
                f"stride = {self.stride:g} must be at least dt = {self.dt:g}"
            )


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted sample cloud standing in for a probability measure."""

    samples: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise FrozenError("samples must be a nonempty (n, d) array")
        object.__setattr__(self, "samples", samples)
        n = samples.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
            w /= w.sum()
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (n,):
                raise FrozenError(f"weights must have shape ({n},), got {w.shape}")
            if np.any(w < 0.0):
                raise FrozenError("weights must be nonnegative")
            if abs(float(w.sum()) - 1.0) > 1e-12:
                raise FrozenError(
                    f"weights must sum to 1 within 1e-12, got {float(w.sum())!r}"
                )
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def mean(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        vals = np.asarray(fn(self.samples), dtype=float)
        return np.tensordot(self.weights, vals, axes=(0, 0))

    def draw(self, n: int, seed: int = 0) -> np.ndarray:
        """Resample n rows with replacement according to the weights."""
        rng = np.random.Generator(np.random.Philox(key=[seed, 0xD4A], counter=[0, 0, 0, 0]))
        idx = rng.choice(self.n, size=n, p=self.weights)
        return self.samples[idx]


def moment(measure: EmpiricalMeasure, order) -> float:
    """E[y**k] for one-dimensional measures, E[|y|**k] otherwise; or E[fn(y)]."""
    if callable(order):
        return float(np.asarray(measure.mean(order)).squeeze())
    k = float(order)
    if measure.dim == 1:
        return float(np.dot(measure.weights, measure.samples[:, 0] ** k))
    norms = np.sqrt(np.sum(measure.samples**2, axis=1))
    return float(np.dot(measure.weights, norms**k))


def _chain_setup(spec: FrozenSpec, n_samples: int):
    burn_steps = int(math.ceil(spec.burn_in / spec.dt))
    stride_steps = max(1, int(round(spec.stride / spec.dt)))
    total_steps = burn_steps + n_samples * stride_steps
    return burn_steps, stride_steps, total_steps


def sample_invariant(
    spec: FrozenSpec, n_samples: int, seed: int = 0, stream_id: int = 0
) -> EmpiricalMeasure:
    """Strided records of one long frozen trajectory started at y = 0.

    Uses the linearly-implicit scheme with the declared eta as stiff rate.
    Models exposing a polynomial fast drift (d2 = 1, constant scalar g) run
    through the compiled chain kernel; anything else falls back to a generic
    stepping loop with identical semantics.
    """
    if n_samples < 1:
        raise FrozenError(f"n_samples must be >= 1, got {n_samples}")
    model = spec.model
    burn_steps, stride_steps, total_steps = _chain_setup(spec, n_samples)
    noise = NoisePath(seed=seed, stream_id=stream_id)
    stiff = model.meta.eta
    h = spec.dt
    p = 1.0

    poly = None
    if model.fast_drift_poly is not None and model.d2 == 1 and model.g_is_constant:
        poly = np.asarray(model.fast_drift_poly(spec.x), dtype=float)
        gval = float(model.g(spec.x[None, :], np.zeros((1, 1)))[0, 0, 0])

    if poly is not None:
        out = np.empty(n_samples)
        n_out = 0
        y = 0.0
        phase = burn_steps + stride_steps  # steps until first record
        done = 0
        chunk = 1 << 16
        block = 0
        while done < total_steps:
            m = min(chunk, total_steps - done)
            z = noise.normals(SUBSTREAM_W2, block, (m,))
            y, phase, wrote = kernels.chain_poly(
                y, poly, stiff, gval, h, p, z, stride_steps, phase, out[n_out:]
            )
            n_out += wrote
            done += m
            block += 1
        assert n_out == n_samples
        return EmpiricalMeasure(out[:, None])

    # Generic fallback: batched arrays of size one, same scheme.
    x = spec.x[None, :]
    y = np.zeros((1, model.d2))
    g_const = model.g(x, y) if model.g_is_constant else None
    out = np.empty((n_samples, model.d2))
    n_out = 0
    phase = burn_steps + stride_steps
    chunk = 1 << 12
    block = 0
    done = 0
    sqh = math.sqrt(h)
    while done < total_steps:
        m = min(chunk, total_steps - done)
        z = noise.normals(SUBSTREAM_W2, block, (m, model.d2))
        for i in range(m):
            drift = model.B(x, y)
            gmat = g_const if g_const is not None else model.g(x, y)
            noise_term = np.einsum("...ij,...j->...i", gmat, sqh * z[i][None, :])
            residual = drift + stiff * y
            y = step_semi_implicit(y, stiff, residual, noise_term, h, p)
            phase -= 1
            if phase == 0:
                out[n_out] = y[0]
                n_out += 1
                phase = stride_steps
        done += m
        block += 1
    assert n_out == n_samples
    return EmpiricalMeasure(out)


def frozen_ensemble(
    model: ModelSpec,
    x: np.ndarray,
    y0: np.ndarray,
    horizon: float,
    dt: float,
    noise: NoisePath,
    substream: int = SUBSTREAM_W2,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Advance a batch of frozen trajectories, invoking ``observer`` per step.

    ``y0`` has shape (n, d2); the observer receives (step index, time after
    the step, current batch) and is the hook used for on-line functionals
    (occupation integrals, correlation accumulators) without storing paths.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xb = np.broadcast_to(x, (y0.shape[0], model.d1))
    y = np.array(y0, dtype=float)
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise FrozenError(
            f"horizon {horizon} is not an integer multiple of dt {dt}"
        )
    stiff = model.meta.eta
    g_const = model.g(xb[:1], y[:1]) if model.g_is_constant else None
    for k in range(n_steps):
        drift = model.B(xb, y)
        gmat = g_const if g_const is not None else model.g(xb, y)
        dW = noise.increments(substream, k, y.shape, dt)
        noise_term = np.einsum("...ij,...j->...i", gmat, dW)
        residual = drift + stiff * y
        y = step_semi_implicit(y, stiff, residual, noise_term, dt, 1.0)
        if observer is not None:
            observer(k, (k + 1) * dt, y)
    return y


# ---------------------------------------------------------------------------
# averaged coefficients
# ---------------------------------------------------------------------------


def averaged_drift_hat(
    model: ModelSpec, t: float, x, measure: EmpiricalMeasure
) -> np.ndarray:
    """mu^x-average of the slow drift at rescaled time t: integral f(t,x,y) mu^x(dy)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xb = np.broadcast_to(x, (measure.n, model.d1))
    vals = model.f(float(t), xb, measure.samples)
    return np.tensordot(measure.weights, vals, axes=(0, 0))


@dataclass(frozen=True)
class TimeAverageReport:
    value: np.ndarray
    t_window: float
    n_nodes: int
    richardson_gap: float


def averaged_drift_bar(
    model: ModelSpec,
    x,
    measure: EmpiricalMeasure | None = None,
    t_window: float | None = None,
    nodes_per_period: int = 20,
    n_samples: int = 20_000,
    seed: int = 0,
) -> TimeAverageReport:
    """Time-averaged averaged drift: (1/T) integral of f_hat(s, x) ds.

    The trapezoid grid places at least ``nodes_per_period`` nodes per
    shortest declared forcing period; the integral is recomputed at twice
    the resolution and the gap between the two reported (a Richardson-style
    consistency check; the finer value is returned).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if measure is None:
        measure = sample_invariant(FrozenSpec(model, x), n_samples, seed=seed)
    if not model.f_is_time_dependent:
        val = averaged_drift_hat(model, 0.0, x, measure)
        return TimeAverageReport(value=val, t_window=0.0, n_nodes=1, richardson_gap=0.0)

    if t_window is None:
        t_window = 200.0 * math.pi
    freqs = model.forcing_frequencies or (1.0,)
    shortest_period = 2.0 * math.pi / max(freqs)

    def trapezoid(n_nodes: int) -> np.ndarray:
        ts = np.linspace(0.0, t_window, n_nodes)
        vals = np.stack([averaged_drift_hat(model, t, x, measure) for t in ts])
        return np.trapezoid(vals, ts, axis=0) / t_window

    n_nodes = max(int(math.ceil(nodes_per_period * t_window / shortest_period)), 21)
    coarse = trapezoid(n_nodes)
    fine = trapezoid(2 * n_nodes - 1)
    gap = float(np.max(np.abs(fine - coarse)))
    return TimeAverageReport(
        value=fine, t_window=t_window, n_nodes=2 * n_nodes - 1, richardson_gap=gap
    )


@dataclass(frozen=True)
class DiffusionAverageReport:
    value: np.ndarray
    mismatch: float
    t_window: float


def averaged_diffusion_bar(
    model: ModelSpec, x, t_window: float | None = None, nodes_per_period: int = 20
) -> DiffusionAverageReport:
    """Time average of sigma(s, x) plus the mean squared deviation from it."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xb = x[None, :]
    if model.sigma_is_constant or not model.f_is_time_dependent:
        val = model.sigma(0.0, xb)[0]
        return DiffusionAverageReport(value=val, mismatch=0.0, t_window=0.0)
    if t_window is None:
        t_window = 200.0 * math.pi
    freqs = model.forcing_frequencies or (1.0,)
    shortest_period = 2.0 * math.pi / max(freqs)
    n_nodes = max(int(math.ceil(nodes_per_period * t_window / shortest_period)), 21)
    ts = np.linspace(0.0, t_window, n_nodes)
    vals = np.stack([model.sigma(float(t), xb)[0] for t in ts])
    mean = np.trapezoid(vals, ts, axis=0) / t_window
    dev = np.sum((vals - mean) ** 2, axis=(1, 2))
    mismatch = float(np.trapezoid(dev, ts) / t_window)
    return DiffusionAverageReport(value=mean, mismatch=mismatch, t_window=t_window)


# ---------------------------------------------------------------------------
# corrector (frozen-generator equation)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonReport:
    """Monte Carlo corrector estimates at the requested fast states.

    Both sign conventions of the frozen-generator equation are reported:
    ``u_source`` solves Lu = -(phi - mean), ``u_sink`` the opposite sign.
    Only the product phi * u enters integrated-covariance formulas, where the
    convention cancels; downstream code states which field it consumes.
    """

    y_points: np.ndarray
    u_source: np.ndarray
    u_sink: np.ndarray
    se: np.ndarray
    t_cut: float
    phi_mean: float


def poisson_solution_estimate(
    model: ModelSpec,
    x,
    y_points,
    phi: Callable[[np.ndarray], np.ndarray] | None = None,
    t_cut: float | None = None,
    n_rep: int = 256,
    dt: float = 2e-3,
    seed: int = 0,
    measure: EmpiricalMeasure | None = None,
) -> PoissonReport:
    """Estimate the corrector u at given fast states.

    u_source(y) = integral over s in [0, t_cut] of E_y[ phi(Y_s) - phi_mean ],
    with phi_mean the invariant mean of phi.  Requires t_cut >= 10/eta so the
    truncated tail is exponentially negligible; default 15/eta.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eta = model.meta.eta
    floor = 10.0 / eta
    if t_cut is None:
        t_cut = 15.0 / eta
    if t_cut < floor * (1.0 - 1e-12):
        raise FrozenError(
            f"t_cut = {t_cut:g} is below the required 10/eta = {floor:g}; "
            "the truncated corrector would carry an uncontrolled tail"
        )
    if phi is None:
        if model.d2 != 1:
            raise FrozenError("default observable phi(y) = y needs d2 = 1")

        def phi(y):
            return y[..., 0]

    if measure is None:
        measure = sample_invariant(FrozenSpec(model, x), 10_000, seed=seed)
    phi_mean = float(np.dot(measure.weights, np.asarray(phi(measure.samples), dtype=float)))

    y_points = np.asarray(y_points, dtype=float)
    if y_points.ndim == 1:
        y_points = y_points[:, None]
    n_pts = y_points.shape[0]
    # Round t_cut to a step multiple.
    n_steps = int(math.ceil(t_cut / dt))
    t_cut_eff = n_steps * dt

    u = np.empty(n_pts)
    se = np.empty(n_pts)
    for i in range(n_pts):
        y0 = np.tile(y_points[i], (n_rep, 1))
        acc = np.zeros(n_rep)
        prev = np.asarray(phi(y0), dtype=float) - phi_mean

        def observer(k, t, y, acc=acc, state={"prev": prev}):
            cur = np.asarray(phi(y), dtype=float) - phi_mean
            acc += 0.5 * dt * (state["prev"] + cur)
            state["prev"] = cur

        frozen_ensemble(
            model,
            x,
            y0,
            t_cut_eff,
            dt,
            NoisePath(seed=seed, stream_id=1000 + i),
            observer=observer,
        )
        u[i] = float(np.mean(acc))
        se[i] = float(np.std(acc, ddof=1) / math.sqrt(n_rep))
    return PoissonReport(
        y_points=y_points,
        u_source=u,
        u_sink=-u,
        se=se,
        t_cut=t_cut_eff,
        phi_mean=phi_mean,
    )
