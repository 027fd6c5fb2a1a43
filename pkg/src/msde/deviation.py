"""Normal deviations of the slow variable around its averaged limit.

The rescaled deviation Z_eps(t) = (X_eps(t) - Xbar(t)) / eps**rho, with
rho = min(alpha, 2*alpha - beta, gamma), converges weakly to the Gaussian
process

    dZbar = grad f_bar(Xbar) Zbar dt + G(Xbar) dWtilde,

where Wtilde is independent of the slow noise and G collects the integrated
autocovariance of the centered slow drift under the frozen law.  This module
estimates G two independent ways, simulates both sides, and measures the
weak gap over a family of bounded test functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .averaging import AveragedModel, averaged_model, simulate_averaged
from .integrate import (
    IntegratorConfig,
    _broadcast_ic,
    _steps_for,
    integrate_multiscale,
    step_semi_implicit,
    step_tamed,
)
from .models import ModelSpec, ScaleExponents
from .noise import (
    SUBSTREAM_AUX,
    SUBSTREAM_LIMIT,
    SUBSTREAM_W1,
    SUBSTREAM_W2,
    NoisePath,
)
from .paths import PathBundle
from .stats import mean_and_se


class DeviationError(ValueError):
    """Raised for invalid deviation-analysis requests."""


def deviation_exponent(scales: ScaleExponents) -> float:
    """Normalization exponent rho: Z_eps = (X_eps - Xbar) / eps**rho."""
    return min(scales.alpha, 2.0 * scales.alpha - scales.beta, scales.gamma)


def deviation_path(
    model: ModelSpec,
    epsilon: float,
    x0,
    y0,
    horizon: float,
    cfg: IntegratorConfig | None = None,
    noise: NoisePath | None = None,
    n_paths: int = 1,
    record_stride: int = 1,
    avg: AveragedModel | None = None,
) -> PathBundle:
    """Rescaled deviation trajectories (X_eps - Xbar) / eps**rho.

    The multiscale and averaged runs share the identical slow Brownian
    path, so the returned bundle really is the deviation of one coupled
    realization, not the difference of two independent ones.
    """
    avg = avg or averaged_model(model)
    noise = noise or NoisePath(seed=0, stream_id=0)
    cfg = cfg or IntegratorConfig()
    ms = integrate_multiscale(
        model,
        epsilon,
        x0,
        y0,
        horizon,
        cfg=cfg,
        noise=noise,
        n_paths=n_paths,
        record_stride=record_stride,
        on_overflow="flag",
    )
    av = simulate_averaged(
        avg,
        x0,
        horizon,
        cfg=cfg,
        noise=noise,
        n_paths=n_paths,
        record_stride=record_stride,
        on_overflow="flag",
    )
    rho = deviation_exponent(model.scales)
    z = (ms.x - av.x) / epsilon**rho
    exploded = ms.exploded | av.exploded
    explosion_step = np.where(
        ms.explosion_step >= 0, ms.explosion_step, av.explosion_step
    )
    return PathBundle(
        t=ms.t,
        x=z,
        y=None,
        model_id=f"{model.model_id}:deviation",
        epsilon=float(epsilon),
        seed=noise.seed,
        stream_id=noise.stream_id,
        dt=cfg.dt,
        scheme=cfg.scheme,
        exploded=exploded,
        explosion_step=explosion_step,
    )


# ---------------------------------------------------------------------------
# G estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GEstimate:
    """Integrated-autocovariance estimate of the deviation noise.

    ``gg_t`` is the one-sided symmetrized integral over [0, t_cut] of the
    stationary autocovariance of the centered slow drift; the weak-limit
    driving covariance is its two-sided completion ``limit_covariance``
    (= 2 * gg_t).
    """

    gg_t: np.ndarray
    se: np.ndarray
    n_draws: int
    t_cut: float
    method: str
    psd_clipped: bool

    @property
    def limit_covariance(self) -> np.ndarray:
        return self.gg_t + self.gg_t.T

    def noise_factor(self) -> np.ndarray:
        """Matrix square root L with L L^T = limit_covariance (PSD-clipped)."""
        cov = self.limit_covariance
        vals, vecs = np.linalg.eigh(cov)
        vals = np.clip(vals, 0.0, None)
        return vecs @ np.diag(np.sqrt(vals)) @ vecs.T


def estimate_G(
    model: ModelSpec,
    x,
    t: float = 0.0,
    n_draws: int = 10_000,
    t_cut: float | None = None,
    dt: float = 5e-3,
    seed: int = 0,
    method: str = "autocovariance",
    measure=None,
) -> GEstimate:
    """Estimate the deviation noise matrix at frozen slow state x.

    Both methods draw starting points from the frozen invariant law and form
    the mean of phi(Y_0) integral_0^t_cut phi(Y_s)^T ds with
    phi(y) = f(t, x, y) - f_hat(t, x):

    * ``autocovariance``: the integral runs along a continuation of each
      draw, averaged over a mirrored pair of drivers (+z and -z), so the
      per-draw value is a two-point smoothing of the conditional occupation
      integral and the mean estimates the integrated stationary
      autocovariance with most of the driving-noise variance cancelled.
    * ``poisson-rep``: the integral runs along a single independently driven
      trajectory, i.e. a one-sample Monte Carlo value of the corrector
      u(Y_0) solving the frozen-generator equation; the mean estimates
      E[phi u].  No mirroring is applied, so this route keeps randomness
      (starts and driver) fully disjoint from the autocovariance route and
      the two results are statistically independent given the model.

    When ``measure`` is None (the default), starting points are generated as
    ``n_draws`` mutually independent relaxation paths run from the origin
    for time 15/eta, and the centering f_hat is their sample mean of phi.
    A supplied measure is trusted as-is: starts are drawn from it and f_hat
    uses its weights.

    ``t_cut`` must be at least 10/eta (default 15/eta).  The estimate is
    symmetrized; negative eigenvalues within 2 standard errors are clipped
    to zero (flagged), beyond that the estimate is rejected as not PSD.
    """
    if method not in ("autocovariance", "poisson-rep"):
        raise DeviationError(f"unknown method '{method}'")
    if n_draws < 2:
        raise DeviationError("n_draws must be at least 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eta = model.meta.eta
    if t_cut is None:
        t_cut = 15.0 / eta
    if t_cut < 10.0 / eta * (1.0 - 1e-12):
        raise DeviationError(
            f"t_cut = {t_cut:g} is below the required 10/eta = {10.0 / eta:g}"
        )
    xb = np.broadcast_to(x, (n_draws, model.d1))

    def phi(y: np.ndarray) -> np.ndarray:
        return np.asarray(model.f(float(t), np.broadcast_to(x, y.shape[:-1] + (model.d1,)), y))

    stream = 0 if method == "autocovariance" else 7
    noise = NoisePath(seed=seed, stream_id=stream)
    stiff = model.meta.eta
    g_const = (
        model.g(xb[:1], np.zeros((1, model.d2))) if model.g_is_constant else None
    )

    def fast_step(y: np.ndarray, dW: np.ndarray) -> np.ndarray:
        drift = model.B(xb, y)
        gmat = g_const if g_const is not None else model.g(xb, y)
        noise_term = np.einsum("...ij,...j->...i", gmat, dW)
        return step_semi_implicit(y, stiff, drift + stiff * y, noise_term, dt, 1.0)

    if measure is not None:
        y0 = measure.draw(n_draws, seed=seed + 1)
        f_hat = np.tensordot(measure.weights, phi(measure.samples), axes=(0, 0))
    else:
        # n_draws independent relaxation paths from the origin: after time
        # 15/eta the endpoints are independent draws from the frozen
        # invariant law up to an e^{-15} transient, so the reported standard
        # error needs no correction for start-cloud correlation.
        y0 = np.zeros((n_draws, model.d2))
        n_burn = int(math.ceil(15.0 / eta / dt))
        for k in range(n_burn):
            y0 = fast_step(y0, noise.increments(SUBSTREAM_W2, k, y0.shape, dt))
        f_hat = phi(y0).mean(axis=0)

    n_steps = int(math.ceil(t_cut / dt))
    t_cut_eff = n_steps * dt
    phi0 = phi(y0) - f_hat

    # Occupation integral of phi along continuations of each start,
    # trapezoid in time.  The driver lives on its own substream (and, for
    # the corrector route, its own stream), so it is independent of the
    # noise that produced the starting points.
    substream = SUBSTREAM_AUX if method == "autocovariance" else SUBSTREAM_LIMIT
    signs = (1.0, -1.0) if method == "autocovariance" else (1.0,)
    accs = [0.5 * dt * phi0.copy() for _ in signs]
    ys = [y0.copy() for _ in signs]
    for k in range(n_steps):
        dW = noise.increments(substream, k, y0.shape, dt)
        w = 1.0 if k < n_steps - 1 else 0.5
        for i, sign in enumerate(signs):
            ys[i] = fast_step(ys[i], sign * dW)
            accs[i] += w * dt * (phi(ys[i]) - f_hat)

    acc = sum(accs) / float(len(signs))
    outer = phi0[:, :, None] * acc[:, None, :]
    # Symmetrize per draw so the reported SE is the SE of the symmetrized
    # estimator itself, diagonal included.
    outer = 0.5 * (outer + np.transpose(outer, (0, 2, 1)))
    m_hat = outer.mean(axis=0)
    gg_t = 0.5 * (m_hat + m_hat.T)
    se = outer.std(axis=0, ddof=1) / math.sqrt(n_draws)

    sym_gap = float(np.max(np.abs(gg_t - gg_t.T)))
    if sym_gap > 1e-10:
        raise DeviationError(f"symmetrization failed, gap {sym_gap:g}")

    vals = np.linalg.eigvalsh(gg_t)
    max_se = float(np.max(se))
    psd_clipped = False
    if vals[0] < -2.0 * max_se:
        raise DeviationError(
            f"estimated quadratic variation has eigenvalue {vals[0]:g} below "
            f"-2 * SE = {-2.0 * max_se:g}: not positive semidefinite beyond "
            "noise; increase n_draws or t_cut"
        )
    if vals[0] < 0.0:
        w_, v_ = np.linalg.eigh(gg_t)
        gg_t = v_ @ np.diag(np.clip(w_, 0.0, None)) @ v_.T
        gg_t = 0.5 * (gg_t + gg_t.T)
        psd_clipped = True

    return GEstimate(
        gg_t=gg_t,
        se=se,
        n_draws=n_draws,
        t_cut=t_cut_eff,
        method=method,
        psd_clipped=psd_clipped,
    )


# ---------------------------------------------------------------------------
# gradient of the averaged drift
# ---------------------------------------------------------------------------


def grad_f_bar(avg: AveragedModel, x, h: float | None = None) -> np.ndarray:
    """Jacobian of the averaged drift at x.

    Uses the registered exact gradient when available, validated against a
    central finite difference; otherwise the finite difference alone.  The
    step is h = 1e-4 * (1 + |x_j|) per coordinate unless supplied; steps
    below 1000 machine epsilons of |x| are refused as pure cancellation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = avg.d1
    if x.shape != (d,):
        raise DeviationError(f"x must have shape ({d},), got {x.shape}")

    def fd() -> np.ndarray:
        jac = np.empty((d, d))
        for j in range(d):
            hj = h if h is not None else 1e-4 * (1.0 + abs(float(x[j])))
            floor = 1e3 * np.finfo(float).eps * max(1.0, abs(float(x[j])))
            if hj < floor:
                raise DeviationError(
                    f"finite-difference step {hj:g} is below the cancellation "
                    f"floor {floor:g} at x[{j}] = {x[j]:g}; use a larger h"
                )
            xp = x.copy()
            xm = x.copy()
            xp[j] += hj
            xm[j] -= hj
            jac[:, j] = (avg.f_bar(xp[None, :])[0] - avg.f_bar(xm[None, :])[0]) / (2.0 * hj)
        return jac

    if avg.f_bar_grad is not None:
        exact = np.asarray(avg.f_bar_grad(x[None, :]))[0]
        approx = fd()
        scale = 1.0 + float(np.max(np.abs(exact)))
        if float(np.max(np.abs(exact - approx))) > 1e-3 * scale:
            import warnings

            warnings.warn(
                "registered averaged-drift gradient disagrees with the finite "
                f"difference by more than 0.1% at x = {x}",
                stacklevel=2,
            )
        return exact
    return fd()


# ---------------------------------------------------------------------------
# limit process and weak gap
# ---------------------------------------------------------------------------


def simulate_limit(
    avg: AveragedModel,
    G: GEstimate | np.ndarray,
    x0,
    horizon: float,
    cfg: IntegratorConfig | None = None,
    noise: NoisePath | None = None,
    n_paths: int = 1,
    record_stride: int = 1,
    limit_substream: int = SUBSTREAM_LIMIT,
    grad: Callable[[np.ndarray], np.ndarray] | None = None,
) -> PathBundle:
    """Simulate the Gaussian deviation limit along a fresh averaged path.

    Zbar starts at 0 and follows dZbar = J(Xbar) Zbar dt + L dWtilde with
    J the averaged-drift Jacobian and L L^T the two-sided integrated
    autocovariance (GEstimate.noise_factor(), or the Cholesky-like factor of
    the matrix passed directly).  Wtilde draws from ``limit_substream``,
    which must differ from the slow substream: the limit noise is
    independent of W1 by construction.
    """
    if limit_substream == SUBSTREAM_W1:
        raise DeviationError(
            "stream collision: the deviation driver must use a substream "
            "distinct from the slow noise W1"
        )
    cfg = cfg or IntegratorConfig()
    noise = noise or NoisePath(seed=0, stream_id=0)
    if isinstance(G, GEstimate):
        L = G.noise_factor()
    else:
        G = np.asarray(G, dtype=float)
        vals, vecs = np.linalg.eigh(0.5 * (G + G.T))
        if vals[0] < -1e-12:
            raise DeviationError("limit covariance matrix must be PSD")
        L = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T

    d1 = avg.d1
    n_steps = _steps_for(horizon, cfg.dt)
    if record_stride < 1 or n_steps % record_stride != 0:
        raise DeviationError(
            f"record_stride must divide the number of steps {n_steps}, got {record_stride}"
        )
    x = _broadcast_ic(x0, n_paths, d1, "x0")
    z = np.zeros((n_paths, d1))
    grad_fn = grad
    if grad_fn is None:
        if avg.f_bar_grad is not None:

            def grad_fn(xb: np.ndarray) -> np.ndarray:
                return np.asarray(avg.f_bar_grad(xb))

        else:

            def grad_fn(xb: np.ndarray) -> np.ndarray:
                return np.stack([grad_f_bar(avg, xi) for xi in xb])

    n_rec = n_steps // record_stride + 1
    t_rec = np.empty(n_rec)
    x_rec = np.empty((n_paths, n_rec, d1))
    z_rec = np.empty((n_paths, n_rec, d1))
    t_rec[0] = 0.0
    x_rec[:, 0] = x
    z_rec[:, 0] = z

    for k in range(n_steps):
        jac = grad_fn(x)
        dW1 = noise.increments(SUBSTREAM_W1, k, (n_paths, d1), cfg.dt)
        dWt = noise.increments(limit_substream, k, (n_paths, d1), cfg.dt)
        z = z + cfg.dt * np.einsum("...ij,...j->...i", jac, z) + dWt @ L.T
        F = avg.f_bar(x)
        x = step_tamed(x, F, dW1 @ avg.sigma_bar.T, cfg.dt, cfg.taming_exponent)
        if (k + 1) % record_stride == 0:
            r = (k + 1) // record_stride
            t_rec[r] = (k + 1) * cfg.dt
            x_rec[:, r] = x
            z_rec[:, r] = z

    exploded = np.zeros(n_paths, dtype=bool)
    return PathBundle(
        t=t_rec,
        x=x_rec,
        y=z_rec,
        model_id=f"{avg.model_id}:limit",
        epsilon=None,
        seed=noise.seed,
        stream_id=noise.stream_id,
        dt=cfg.dt,
        scheme=cfg.scheme,
        exploded=exploded,
        explosion_step=np.full(n_paths, -1, dtype=np.int64),
    )


def _test_functions(d: int):
    """Fixed bounded test family: three tanh ridges, a Gaussian bump, a sine."""
    v = np.zeros(d)
    v[0] = 1.0

    def make_tanh(scale):
        return lambda z: np.tanh(scale * (z @ v))

    return {
        "tanh-half": make_tanh(0.5),
        "tanh-one": make_tanh(1.0),
        "tanh-two": make_tanh(2.0),
        "gauss-bump": lambda z: np.exp(-0.5 * np.sum(z**2, axis=-1)),
        "sine": lambda z: np.sin(z @ v),
    }


@dataclass(frozen=True)
class WeakGapRow:
    t: float
    phi: str
    gap: float
    se: float


@dataclass(frozen=True)
class WeakGapReport:
    epsilon: float
    sup_gap: float
    sup_se: float
    at_t: float
    at_phi: str
    rows: tuple[WeakGapRow, ...]
    n_paths_each: int
    n_exploded: int


def weak_gap(
    model: ModelSpec,
    epsilon: float,
    x0,
    y0,
    horizon: float,
    n_paths_each: int = 5000,
    cfg: IntegratorConfig | None = None,
    seed: int = 0,
    avg: AveragedModel | None = None,
    G: GEstimate | None = None,
    n_records: int = 10,
) -> WeakGapReport:
    """sup over (t, phi) of |E phi(Z_eps(t)) - E phi(Zbar(t))|.

    The two ensembles are independent (distinct stream ids); the test family
    is fixed and permutation-invariant.  Needs at least 500 paths per side
    for the standard errors to mean anything.
    """
    if n_paths_each < 500:
        raise DeviationError(
            f"weak_gap needs at least 500 paths per side, got {n_paths_each}"
        )
    avg = avg or averaged_model(model)
    if G is None:
        G = estimate_G(model, np.atleast_1d(np.asarray(x0, dtype=float)), seed=seed)
    if cfg is None:
        from .averaging import default_multiscale_cfg

        cfg = default_multiscale_cfg(model, epsilon, horizon, n_records)
    n_steps = _steps_for(horizon, cfg.dt)
    stride = max(1, n_steps // n_records)
    while stride > 1 and n_steps % stride != 0:
        stride -= 1

    dev = deviation_path(
        model,
        epsilon,
        x0,
        y0,
        horizon,
        cfg=cfg,
        noise=NoisePath(seed=seed, stream_id=0),
        n_paths=n_paths_each,
        record_stride=stride,
        avg=avg,
    )
    lim = simulate_limit(
        avg,
        G,
        x0,
        horizon,
        cfg=cfg,
        noise=NoisePath(seed=seed, stream_id=1),
        n_paths=n_paths_each,
        record_stride=stride,
    )
    good = ~dev.exploded
    n_exploded = int(np.count_nonzero(~good))
    z_eps = dev.x[good]
    z_bar = lim.y

    fns = _test_functions(model.d1)
    rows = []
    best = (-1.0, 0.0, 0.0, "")
    for r in range(1, dev.t.shape[0]):  # skip t = 0 where both sides are 0
        for name, fn in fns.items():
            a, se_a = mean_and_se(np.asarray(fn(z_eps[:, r, :])))
            b, se_b = mean_and_se(np.asarray(fn(z_bar[:, r, :])))
            gap = abs(a - b)
            se = math.hypot(se_a, se_b)
            rows.append(WeakGapRow(t=float(dev.t[r]), phi=name, gap=gap, se=se))
            if gap > best[0]:
                best = (gap, se, float(dev.t[r]), name)
    return WeakGapReport(
        epsilon=float(epsilon),
        sup_gap=best[0],
        sup_se=best[1],
        at_t=best[2],
        at_phi=best[3],
        rows=tuple(rows),
        n_paths_each=n_paths_each,
        n_exploded=n_exploded,
    )
