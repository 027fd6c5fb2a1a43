"""Long-run laws and the bounded-Lipschitz (Fortet-Mourier) distance.

d_BL(mu, nu) = sup { |mu(f) - nu(f)| : Lip(f) + sup|f| <= 1 }.

On finite supports the supremum is an exact linear program in the function
values plus two budget variables (Lipschitz allowance L and sup allowance m
with L + m <= 1).  In one dimension only adjacent-point constraints are
needed after sorting, which keeps the LP small; in higher dimension all
pairs enter.  A cheap one-dimensional upper bound via the Wasserstein-1
quantile formula is available for large supports and is explicitly tagged
as an upper bound, never silently substituted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .averaging import AveragedModel, averaged_model, default_multiscale_cfg, simulate_averaged
from .frozen import EmpiricalMeasure
from .integrate import IntegratorConfig, integrate_multiscale
from .models import ModelSpec
from .noise import NoisePath

LP_SUPPORT_CAP = 2000


class LongtimeError(ValueError):
    """Raised for invalid long-time analysis requests."""


@dataclass(frozen=True)
class LawSnapshot:
    """Empirical law of the slow state at one time."""

    t: float
    samples: np.ndarray

    @property
    def measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.samples)


@dataclass(frozen=True)
class DblResult:
    value: float
    method: str
    upper_bound: bool
    n_support: int


def _as_measure(obj) -> EmpiricalMeasure:
    if isinstance(obj, EmpiricalMeasure):
        return obj
    if isinstance(obj, LawSnapshot):
        return obj.measure
    return EmpiricalMeasure(np.asarray(obj, dtype=float))


def _combined_support(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    """Deduplicated union support and the signed weight vector mu - nu."""
    pts = np.concatenate([mu.samples, nu.samples], axis=0)
    signed = np.concatenate([mu.weights, -nu.weights])
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    c = np.zeros(uniq.shape[0])
    np.add.at(c, inverse.ravel(), signed)
    return uniq, c


def _dbl_lp(points: np.ndarray, c: np.ndarray) -> float:
    """Exact d_BL on a finite support via linear programming.

    Variables: function values f_1..f_n, Lipschitz budget L, sup budget m.
    maximize c.f subject to |f_i - f_j| <= L d(x_i, x_j), |f_i| <= m,
    L + m <= 1.
    """
    n, dim = points.shape
    if n == 1:
        return 0.0
    rows_i: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    rhs: list[float] = []
    row = 0

    def add_row(entries, bound):
        nonlocal row
        for j, v in entries:
            rows_i.append(row)
            cols.append(j)
            vals.append(v)
        rhs.append(bound)
        row += 1

    iL = n
    im = n + 1
    if dim == 1:
        order = np.argsort(points[:, 0])
        xs = points[order, 0]
        for a in range(n - 1):
            i, j = int(order[a]), int(order[a + 1])
            d = float(xs[a + 1] - xs[a])
            add_row([(i, 1.0), (j, -1.0), (iL, -d)], 0.0)
            add_row([(j, 1.0), (i, -1.0), (iL, -d)], 0.0)
    else:
        for i in range(n):
            diff = points[i + 1 :] - points[i]
            dists = np.sqrt(np.sum(diff**2, axis=1))
            for off, d in enumerate(dists):
                j = i + 1 + off
                add_row([(i, 1.0), (j, -1.0), (iL, -float(d))], 0.0)
                add_row([(j, 1.0), (i, -1.0), (iL, -float(d))], 0.0)
    for i in range(n):
        add_row([(i, 1.0), (im, -1.0)], 0.0)
        add_row([(i, -1.0), (im, -1.0)], 0.0)
    add_row([(iL, 1.0), (im, 1.0)], 1.0)

    a_ub = sparse.coo_matrix((vals, (rows_i, cols)), shape=(row, n + 2)).tocsr()
    obj = np.concatenate([-c, [0.0, 0.0]])
    bounds = [(-1.0, 1.0)] * n + [(0.0, 1.0), (0.0, 1.0)]
    res = linprog(obj, A_ub=a_ub, b_ub=np.asarray(rhs), bounds=bounds, method="highs")
    if not res.success:
        raise LongtimeError(f"bounded-Lipschitz LP failed: {res.message}")
    return float(-res.fun)


def _w1_upper_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Wasserstein-1 on the line via the CDF-difference integral."""
    xs = np.concatenate([mu.samples[:, 0], nu.samples[:, 0]])
    ws = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(xs)
    xs = xs[order]
    ws = ws[order]
    cdf_gap = np.cumsum(ws)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(xs)))


def dbl_distance(mu, nu, method: str = "auto") -> DblResult:
    """Bounded-Lipschitz distance between two finitely supported measures.

    ``lp-exact`` solves the distance exactly but caps the combined support
    at 2000 points; for larger inputs it refuses and names the ways out
    (subsample, or the tagged 'w1-1d' upper bound: d_BL <= min(W1, 2) in one
    dimension).  ``auto`` picks lp-exact whenever it fits.
    """
    mu = _as_measure(mu)
    nu = _as_measure(nu)
    if mu.dim != nu.dim:
        raise LongtimeError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    n_comb = mu.n + nu.n
    if method == "auto":
        if n_comb <= LP_SUPPORT_CAP:
            method = "lp-exact"
        elif mu.dim == 1:
            method = "w1-1d"
        else:
            raise LongtimeError(
                f"combined support {n_comb} exceeds the exact-LP cap "
                f"{LP_SUPPORT_CAP} and no one-dimensional bound applies; "
                "subsample the measures first (EmpiricalMeasure.draw)"
            )
    if method == "lp-exact":
        if n_comb > LP_SUPPORT_CAP:
            raise LongtimeError(
                f"combined support {n_comb} exceeds the exact-LP cap "
                f"{LP_SUPPORT_CAP}; subsample the measures "
                "(EmpiricalMeasure.draw) or use method='w1-1d'"
            )
        points, c = _combined_support(mu, nu)
        value = _dbl_lp(points, c)
        return DblResult(
            value=value, method="lp-exact", upper_bound=False, n_support=points.shape[0]
        )
    if method == "w1-1d":
        if mu.dim != 1:
            raise LongtimeError("method 'w1-1d' needs one-dimensional supports")
        w1 = _w1_upper_1d(mu, nu)
        return DblResult(
            value=min(w1, 2.0), method="w1-1d", upper_bound=True, n_support=n_comb
        )
    raise LongtimeError(f"unknown method '{method}'; use lp-exact, w1-1d or auto")


# ---------------------------------------------------------------------------
# stationary law of the averaged equation
# ---------------------------------------------------------------------------


def stationary_law(
    avg: AveragedModel,
    n_samples: int = 1000,
    seed: int = 0,
    dt: float = 0.01,
    relax_multiplier: float = 15.0,
) -> EmpiricalMeasure:
    """Terminal ensemble of a long averaged run as a stationary-law proxy.

    Refuses when the averaged model declares no dissipation rate: without
    it there is no guarantee a stationary law exists, and no principled
    relaxation horizon.
    """
    if avg.dissipation_rate is None:
        raise LongtimeError(
            "stationary law needs a declared dissipation rate on the averaged "
            "model (averaged_dissipation_rate); none is present"
        )
    lam = avg.dissipation_rate
    horizon = relax_multiplier / lam
    n_steps = max(1, int(math.ceil(horizon / dt)))
    horizon = n_steps * dt
    cfg = IntegratorConfig(dt=dt)
    bundle = simulate_averaged(
        avg,
        np.zeros(avg.d1),
        horizon,
        cfg=cfg,
        noise=NoisePath(seed=seed, stream_id=0xE),
        n_paths=n_samples,
        record_stride=n_steps,
        on_overflow="raise",
    )
    return EmpiricalMeasure(bundle.x[:, -1, :])


# ---------------------------------------------------------------------------
# quasi-periodic long-time sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    max_dbl: float
    se: float
    replicate_values: tuple[float, ...]
    t_grid: tuple[float, ...]


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    trend_decreasing: bool | None
    trend_z: float | None


def quasi_periodic_sweep(
    model: ModelSpec,
    eps_list,
    x0=0.0,
    y0=0.0,
    n_paths: int = 1000,
    replicates: int = 4,
    n_grid: int = 9,
    quasi_periods: float = 4.0,
    seed: int = 0,
    reference_n: int = 1000,
) -> SweepReport:
    """Distance of the slow law to the averaged stationary law, swept in eps.

    For each epsilon, after a dissipation-based absorption pre-run of
    10 / lambda1, the slow law is snapshotted on a grid spanning
    ``quasi_periods`` quasi-periods of the rescaled forcing (period
    2 pi / min frequency, contracted by eps**gamma in physical time) and
    compared to the averaged stationary law by exact d_BL; the row value is
    the grid maximum, averaged over independent replicates.

    Refuses models that do not declare the slow-pair-dissipativity
    inequality: without that contraction the law has no reason to track the
    averaged stationary one, and the comparison would be noise.
    """
    if not model.meta.pair_dissipative:
        raise LongtimeError(
            "model does not declare the slow-pair-dissipativity inequality "
            "(pair_dissipative flag with lambda1/lambda2); the long-time "
            "comparison is refused without that contraction"
        )
    lam1 = model.meta.lambda1
    if lam1 is None:
        raise LongtimeError("slow-pair-dissipativity declared but lambda1 missing")
    if n_paths + reference_n > LP_SUPPORT_CAP:
        raise LongtimeError(
            f"n_paths + reference_n = {n_paths + reference_n} exceeds the "
            f"exact-LP cap {LP_SUPPORT_CAP}; reduce one of them"
        )
    eps_sorted = sorted(set(float(e) for e in eps_list), reverse=True)
    if not eps_sorted:
        raise LongtimeError("eps_list must not be empty")

    avg = averaged_model(model)
    reference = stationary_law(avg, n_samples=reference_n, seed=seed + 0xBEEF)

    freqs = model.forcing_frequencies or (1.0,)
    t_qp_scaled = 2.0 * math.pi / min(freqs)
    t_pre = 10.0 / lam1
    gamma = model.scales.gamma

    rows = []
    for eps in eps_sorted:
        window = quasi_periods * t_qp_scaled * eps**gamma
        horizon = t_pre + window
        cfg = default_multiscale_cfg(model, eps, horizon, n_records=800)
        n_steps = int(round(horizon / cfg.dt))
        stride = n_steps // 800
        grid_times = np.linspace(t_pre, horizon, n_grid)
        rec_times = np.arange(0, n_steps // stride + 1) * (stride * cfg.dt)
        grid_idx = [int(np.argmin(np.abs(rec_times - tg))) for tg in grid_times]

        values = []
        for rep in range(replicates):
            bundle = integrate_multiscale(
                model,
                eps,
                x0,
                y0,
                horizon,
                cfg=cfg,
                noise=NoisePath(seed=seed, stream_id=100 + rep),
                n_paths=n_paths,
                record_stride=stride,
                on_overflow="flag",
            )
            good = ~bundle.exploded
            best = 0.0
            for idx in grid_idx:
                snap = EmpiricalMeasure(bundle.x[good, idx, :])
                d = dbl_distance(snap, reference, method="lp-exact").value
                best = max(best, d)
            values.append(best)
        values = np.asarray(values)
        se = (
            float(np.std(values, ddof=1) / math.sqrt(len(values)))
            if len(values) > 1
            else float("inf")
        )
        rows.append(
            SweepRow(
                epsilon=eps,
                max_dbl=float(values.mean()),
                se=se,
                replicate_values=tuple(float(v) for v in values),
                t_grid=tuple(float(rec_times[i]) for i in grid_idx),
            )
        )

    trend_decreasing = None
    trend_z = None
    if len(rows) >= 2:
        first, last = rows[0], rows[-1]
        denom = math.hypot(first.se, last.se)
        trend_z = (first.max_dbl - last.max_dbl) / denom if denom > 0 else float("inf")
        trend_decreasing = first.max_dbl > last.max_dbl
    return SweepReport(rows=tuple(rows), trend_decreasing=trend_decreasing, trend_z=trend_z)
