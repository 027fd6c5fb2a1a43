"""Averaged slow dynamics and strong convergence experiments.

The averaged equation replaces the fast variable by its frozen invariant
law and the explicit time dependence by its long-window mean:

    dXbar = f_bar(Xbar) dt + sigma_bar(Xbar) dW1.

`averaged_model` builds this either from a registered closed form or from a
tabulated quadrature + cubic spline (one-dimensional slow state only, with
hard range guards).  `strong_error` couples the full system and the averaged
one through the identical slow Brownian path and measures
sup over the record grid of E |X_eps(t) - Xbar(t)|^2; `fit_rate` turns a
sweep of such errors into a log-log rate estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .frozen import FrozenSpec, averaged_drift_bar, averaged_diffusion_bar, sample_invariant
from .integrate import (
    IntegrationError,
    IntegratorConfig,
    OverflowAbort,
    _broadcast_ic,
    _finite_mask,
    _steps_for,
    integrate_multiscale,
    max_macro_dt,
    step_tamed,
)
from .models import ModelSpec
from .noise import SUBSTREAM_W1, NoisePath
from .paths import PathBundle
from .stats import loglog_fit


class AveragingError(ValueError):
    """Raised for invalid averaged-model construction or use."""


@dataclass(frozen=True)
class AveragedModel:
    model_id: str
    d1: int
    f_bar: Callable[[np.ndarray], np.ndarray]
    sigma_bar: np.ndarray
    f_bar_grad: Callable[[np.ndarray], np.ndarray] | None
    dissipation_rate: float | None
    source: str  # "analytic" or "table"
    x_range: tuple[float, float] | None = None


def averaged_model(
    model: ModelSpec,
    source: str = "auto",
    grid: tuple[float, float, int] = (-3.0, 3.0, 41),
    n_samples: int = 20_000,
    seed: int = 0,
) -> AveragedModel:
    """Averaged equation for ``model``.

    ``source='auto'`` prefers a registered closed-form averaged drift and
    otherwise tabulates the quadrature values of the averaged drift on the
    given grid, interpolating with a cubic spline.  Tabulation supports
    d1 = 1 only; evaluations outside the tabulated range raise instead of
    extrapolating.
    """
    if source not in ("auto", "analytic", "table"):
        raise AveragingError(f"unknown source '{source}'")
    if source in ("auto", "analytic") and model.f_bar is not None:
        sig = model.sigma_bar
        if sig is None:
            sig = averaged_diffusion_bar(model, np.zeros(model.d1)).value
        return AveragedModel(
            model_id=model.model_id,
            d1=model.d1,
            f_bar=model.f_bar,
            sigma_bar=np.asarray(sig, dtype=float),
            f_bar_grad=model.f_bar_grad,
            dissipation_rate=model.averaged_dissipation_rate,
            source="analytic",
        )
    if source == "analytic":
        raise AveragingError(
            f"model '{model.model_id}' registers no closed-form averaged drift"
        )
    if model.d1 != 1:
        raise AveragingError(
            "tabulated averaged drift supports d1 = 1 only; supply a "
            "closed-form f_bar on the model"
        )
    lo, hi, n_nodes = grid
    if not (lo < hi) or n_nodes < 8:
        raise AveragingError(f"invalid table grid {grid}; need lo < hi and >= 8 nodes")
    xs = np.linspace(lo, hi, int(n_nodes))
    vals = np.empty_like(xs)
    for i, xi in enumerate(xs):
        x = np.array([xi])
        measure = sample_invariant(FrozenSpec(model, x), n_samples, seed=seed + i)
        vals[i] = averaged_drift_bar(model, x, measure=measure).value[0]
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(xs, vals)
    dspline = spline.derivative()

    def f_bar(xb: np.ndarray) -> np.ndarray:
        v = xb[..., 0]
        if np.any(v < lo) or np.any(v > hi):
            bad = float(v[np.argmax((v < lo) | (v > hi))])
            raise AveragingError(
                f"x = {bad:g} lies outside the tabulated range [{lo:g}, {hi:g}]; "
                "rebuild the table with a wider grid"
            )
        return spline(v)[..., None]

    def f_bar_grad(xb: np.ndarray) -> np.ndarray:
        v = xb[..., 0]
        if np.any(v < lo) or np.any(v > hi):
            bad = float(v[np.argmax((v < lo) | (v > hi))])
            raise AveragingError(
                f"x = {bad:g} lies outside the tabulated range [{lo:g}, {hi:g}]; "
                "rebuild the table with a wider grid"
            )
        return dspline(v)[..., None, None]

    sig = model.sigma_bar
    if sig is None:
        sig = averaged_diffusion_bar(model, np.zeros(1)).value
    return AveragedModel(
        model_id=model.model_id,
        d1=1,
        f_bar=f_bar,
        sigma_bar=np.asarray(sig, dtype=float),
        f_bar_grad=f_bar_grad,
        dissipation_rate=model.averaged_dissipation_rate,
        source="table",
        x_range=(float(lo), float(hi)),
    )


def simulate_averaged(
    avg: AveragedModel,
    x0,
    horizon: float,
    cfg: IntegratorConfig | None = None,
    noise: NoisePath | None = None,
    n_paths: int = 1,
    base_div: int = 1,
    record_stride: int = 1,
    on_overflow: str = "raise",
) -> PathBundle:
    """Integrate the averaged equation, drawing the same slow-noise blocks as
    a multiscale run with identical (seed, stream, dt, batch shape)."""
    cfg = cfg or IntegratorConfig()
    noise = noise or NoisePath(seed=0, stream_id=0)
    if on_overflow not in ("raise", "flag"):
        raise IntegrationError("on_overflow must be 'raise' or 'flag'")
    n_steps = _steps_for(horizon, cfg.dt)
    if record_stride < 1 or n_steps % record_stride != 0:
        raise IntegrationError(
            f"record_stride must divide the number of steps {n_steps}, got {record_stride}"
        )
    d1 = avg.d1
    x = _broadcast_ic(x0, n_paths, d1, "x0")
    plain = cfg.scheme == "euler-maruyama"
    smat = avg.sigma_bar

    n_rec = n_steps // record_stride + 1
    t_rec = np.empty(n_rec)
    x_rec = np.empty((n_paths, n_rec, d1))
    t_rec[0] = 0.0
    x_rec[:, 0] = x
    alive = np.ones(n_paths, dtype=bool)
    explosion_step = np.full(n_paths, -1, dtype=np.int64)

    for k in range(n_steps):
        F = avg.f_bar(x)
        dW1 = noise.coarse_increment(SUBSTREAM_W1, k, (n_paths, d1), cfg.dt, base_div)
        noise_term = dW1 @ smat.T
        if plain:
            x_new = x + cfg.dt * F + noise_term
        else:
            x_new = step_tamed(x, F, noise_term, cfg.dt, cfg.taming_exponent)
        ok = _finite_mask(x_new, None)
        newly_dead = alive & ~ok
        if np.any(newly_dead):
            if on_overflow == "raise":
                idx = int(np.argmax(newly_dead))
                raise OverflowAbort(
                    f"averaged state overflow at t = {(k + 1) * cfg.dt:g} (path {idx})",
                    t=k * cfg.dt,
                    x=x[idx].copy(),
                    y=None,
                )
            explosion_step[newly_dead] = k + 1
            alive &= ok
        x = np.where(alive[:, None], x_new, x)
        if (k + 1) % record_stride == 0:
            r = (k + 1) // record_stride
            t_rec[r] = (k + 1) * cfg.dt
            x_rec[:, r] = x

    return PathBundle(
        t=t_rec,
        x=x_rec,
        y=None,
        model_id=f"{avg.model_id}:averaged",
        epsilon=None,
        seed=noise.seed,
        stream_id=noise.stream_id,
        dt=cfg.dt,
        scheme=cfg.scheme,
        exploded=explosion_step >= 0,
        explosion_step=explosion_step,
    )


def default_multiscale_cfg(
    model: ModelSpec, epsilon: float, horizon: float, n_records: int = 100
) -> IntegratorConfig:
    """Macro step resolving the fast scale with the horizon an exact multiple.

    The step count is inflated to a multiple of ``n_records`` so a shared
    record stride exists.
    """
    limit = max_macro_dt(model, epsilon, 1)
    n_steps = max(int(math.ceil(horizon / limit)), n_records)
    n_steps = int(math.ceil(n_steps / n_records)) * n_records
    return IntegratorConfig(dt=horizon / n_steps)


@dataclass(frozen=True)
class StrongErrorRow:
    epsilon: float
    sup_mean_sq: float
    se: float
    t_at_sup: float
    n_paths: int
    n_exploded: int
    explosion_flagged: bool


def strong_error(
    model: ModelSpec,
    epsilon: float,
    x0,
    y0,
    horizon: float,
    n_paths: int = 1000,
    cfg: IntegratorConfig | None = None,
    seed: int = 0,
    avg: AveragedModel | None = None,
    n_records: int = 100,
) -> StrongErrorRow:
    """sup_t E|X_eps(t) - Xbar(t)|^2 under the identical slow Brownian path.

    Exploded paths (on either side) are excluded from the mean and counted;
    the row is flagged when they exceed 0.1% of the batch.  The standard
    error is the batch standard error of |X_eps - Xbar|^2 at the supremum
    time.
    """
    avg = avg or averaged_model(model)
    cfg = cfg or default_multiscale_cfg(model, epsilon, horizon, n_records)
    n_steps = _steps_for(horizon, cfg.dt)
    stride = max(1, n_steps // n_records)
    if n_steps % stride != 0:
        stride = 1
    noise = NoisePath(seed=seed, stream_id=0)
    ms = integrate_multiscale(
        model,
        epsilon,
        x0,
        y0,
        horizon,
        cfg=cfg,
        noise=noise,
        n_paths=n_paths,
        record_stride=stride,
        on_overflow="flag",
    )
    av = simulate_averaged(
        avg,
        x0,
        horizon,
        cfg=cfg,
        noise=noise,
        n_paths=n_paths,
        record_stride=stride,
        on_overflow="flag",
    )
    good = ~(ms.exploded | av.exploded)
    n_exploded = int(np.count_nonzero(~good))
    if not np.any(good):
        raise AveragingError(
            f"every path exploded at epsilon = {epsilon:g}; reduce dt or check the model"
        )
    diff_sq = np.sum((ms.x[good] - av.x[good]) ** 2, axis=-1)
    mean_t = diff_sq.mean(axis=0)
    k = int(np.argmax(mean_t))
    n_good = int(np.count_nonzero(good))
    se = float(np.std(diff_sq[:, k], ddof=1) / math.sqrt(n_good)) if n_good > 1 else float("inf")
    return StrongErrorRow(
        epsilon=float(epsilon),
        sup_mean_sq=float(mean_t[k]),
        se=se,
        t_at_sup=float(ms.t[k]),
        n_paths=n_paths,
        n_exploded=n_exploded,
        explosion_flagged=n_exploded > 0.001 * n_paths,
    )


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_se: float
    n_used: int
    excluded: tuple[float, ...]
    warnings: tuple[str, ...]


def fit_rate(eps_values, errors) -> RateFit:
    """Log-log OLS rate of error against epsilon.

    Nonpositive error entries cannot enter a log fit; they are dropped and
    reported in ``excluded`` with a warning rather than silently clamped.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if eps_values.shape != errors.shape or eps_values.ndim != 1:
        raise AveragingError("fit_rate expects two equal-length 1-d arrays")
    keep = errors > 0.0
    excluded = tuple(float(e) for e in eps_values[~keep])
    warns: tuple[str, ...] = ()
    if excluded:
        warns = (
            f"excluded {len(excluded)} nonpositive error value(s) at epsilon = "
            f"{excluded}: log fit undefined there",
        )
    if np.count_nonzero(keep) < 2:
        raise AveragingError("fit_rate needs at least two positive error values")
    slope, intercept, slope_se = loglog_fit(eps_values[keep], errors[keep])
    return RateFit(
        slope=slope,
        intercept=intercept,
        slope_se=slope_se,
        n_used=int(np.count_nonzero(keep)),
        excluded=excluded,
        warnings=warns,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[StrongErrorRow, ...]
    fit: RateFit | None


def averaging_sweep(
    model: ModelSpec,
    eps_list,
    x0,
    y0,
    horizon: float,
    n_paths: int = 1000,
    seed: int = 0,
    avg: AveragedModel | None = None,
) -> ConvergenceReport:
    """strong_error across an epsilon sweep plus the fitted rate."""
    avg = avg or averaged_model(model)
    rows = tuple(
        strong_error(model, eps, x0, y0, horizon, n_paths=n_paths, seed=seed, avg=avg)
        for eps in eps_list
    )
    fit = None
    if len(rows) >= 2:
        fit = fit_rate([r.epsilon for r in rows], [r.sup_mean_sq for r in rows])
    return ConvergenceReport(rows=rows, fit=fit)
