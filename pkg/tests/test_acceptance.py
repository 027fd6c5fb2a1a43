"""End-to-end release gate: ten criteria with stated tolerances and budgets.

Each test is one criterion.  It asserts the statistical target first, then
its own wall-clock ceiling, and finishes by printing a single PASS line with
the measured numbers (visible with ``pytest -v -rA`` or on failure).  Seeds
are fixed throughout, so the whole gate is deterministic.
"""

import json
import math
import time

import numpy as np
import pytest
import scipy.integrate as sciint

from msde.averaging import averaged_model, averaging_sweep, strong_error
from msde.cli import main as cli_main
from msde.deviation import estimate_G, weak_gap
from msde.frozen import FrozenSpec, frozen_ensemble, sample_invariant
from msde.integrate import IntegratorConfig, integrate_multiscale, strong_order_probe
from msde.longtime import dbl_distance, quasi_periodic_sweep
from msde.models import (
    AssumptionMeta,
    ModelSpec,
    ScaleExponents,
    get_model,
    linear_ou_model,
)
from msde.noise import SUBSTREAM_W1, NoisePath


def _report(name: str, elapsed: float, ceiling: float, detail: str) -> None:
    assert elapsed <= ceiling, (
        f"{name}: took {elapsed:.1f}s, over the {ceiling:.0f}s budget"
    )
    print(f"PASS {name}: {detail} [{elapsed:.1f}s / {ceiling:.0f}s]")


def _corrected_se(series: np.ndarray) -> float:
    """Batch standard error inflated by the AR(1) autocorrelation factor.

    Strided records of one chain are not independent; the usual sqrt(n)
    error would overstate the precision, so the lag-1 correlation feeds the
    standard (1+rho)/(1-rho) effective-sample-size correction.
    """
    series = np.asarray(series, dtype=float)
    n = series.size
    se = float(series.std(ddof=1)) / math.sqrt(n)
    centered = series - series.mean()
    denom = float(np.dot(centered, centered))
    rho = float(np.dot(centered[:-1], centered[1:]) / denom) if denom > 0.0 else 0.0
    rho = min(max(rho, 0.0), 0.95)
    return se * math.sqrt((1.0 + rho) / (1.0 - rho))


# ---------------------------------------------------------------------------
# 1. strong averaging rate on the bistable sextic-well model
# ---------------------------------------------------------------------------


def test_c01_strong_averaging_rate():
    t0 = time.perf_counter()
    model = get_model("cubic-sine")
    eps_list = [2.0**-k for k in range(4, 10)]
    report = averaging_sweep(
        model, eps_list, x0=0.5, y0=0.0, horizon=1.0, n_paths=1000, seed=0
    )
    fit = report.fit
    assert fit is not None and fit.n_used == len(eps_list)
    assert not fit.excluded
    for row in report.rows:
        assert row.n_exploded == 0
    assert 0.7 <= fit.slope <= 1.3, f"rate {fit.slope:.3f} outside [0.7, 1.3]"
    _report(
        "c01 strong-averaging-rate",
        time.perf_counter() - t0,
        600.0,
        f"slope {fit.slope:.3f} +- {fit.slope_se:.3f} over eps 2^-4..2^-9, "
        f"1000 paths/cell",
    )


# ---------------------------------------------------------------------------
# 2. averaging error trend under quasi-periodic forcing
# ---------------------------------------------------------------------------


def test_c02_oscillatory_forcing_error_trend():
    t0 = time.perf_counter()
    model = get_model("forced-cubic")
    avg = averaged_model(model)
    rows = {
        eps: strong_error(model, eps, 0.5, 0.0, 1.0, n_paths=1000, seed=0, avg=avg)
        for eps in (0.04, 0.01)
    }
    e04, e01 = rows[0.04], rows[0.01]
    assert e04.sup_mean_sq > 0.0 and e01.sup_mean_sq > 0.0
    band = 2.0 * math.hypot(e04.se, e01.se)
    assert e01.sup_mean_sq <= e04.sup_mean_sq + band, (
        f"{e01.sup_mean_sq:.4g} at eps=0.01 not below {e04.sup_mean_sq:.4g} "
        f"at eps=0.04 (+{band:.2g})"
    )
    _report(
        "c02 oscillatory-forcing-trend",
        time.perf_counter() - t0,
        600.0,
        f"sup-t mean-square gap {e04.sup_mean_sq:.4g} (eps=0.04) -> "
        f"{e01.sup_mean_sq:.4g} (eps=0.01), 2*SE band {band:.2g}",
    )


# ---------------------------------------------------------------------------
# 3. deviation noise matrix against the closed form, with cross-check
# ---------------------------------------------------------------------------


def test_c03_noise_matrix_oracle_and_cross_check():
    t0 = time.perf_counter()
    model = linear_ou_model()  # rate 1, fast diffusion sqrt(2): GG^T = 1 exactly
    primary = estimate_G(
        model, np.array([0.0]), n_draws=10_000, t_cut=15.0, seed=0,
        method="autocovariance",
    )
    value = float(primary.gg_t[0, 0])
    assert abs(value - 1.0) <= 0.05, f"GG^T = {value:.4f} misses 1.0 by > 5%"

    cross = estimate_G(
        model, np.array([0.0]), n_draws=10_000, t_cut=15.0, seed=0,
        method="poisson-rep",
    )
    other = float(cross.gg_t[0, 0])
    band = 3.0 * math.hypot(float(primary.se[0, 0]), float(cross.se[0, 0]))
    assert abs(value - other) <= band, (
        f"estimators disagree: {value:.4f} vs {other:.4f}, band {band:.4f}"
    )
    _report(
        "c03 noise-matrix-oracle",
        time.perf_counter() - t0,
        120.0,
        f"autocovariance {value:.4f} +- {float(primary.se[0, 0]):.4f} vs exact 1, "
        f"independent-route gap {abs(value - other):.4f} <= {band:.4f}",
    )


# ---------------------------------------------------------------------------
# 4. normal deviations: rescaled error matches its Gaussian limit weakly
# ---------------------------------------------------------------------------


def test_c04_normal_deviation_weak_gap():
    t0 = time.perf_counter()
    model = linear_ou_model()
    avg = averaged_model(model)
    G = estimate_G(model, np.array([0.0]), n_draws=10_000, t_cut=15.0, seed=0)
    reports = {
        eps: weak_gap(
            model, eps, 0.0, 0.0, 1.0, n_paths_each=5000, seed=0, avg=avg, G=G
        )
        for eps in (0.04, 0.01)
    }
    r04, r01 = reports[0.04], reports[0.01]
    cap = max(0.02, 4.0 * r01.sup_se)
    assert r01.sup_gap <= cap, f"weak gap {r01.sup_gap:.4f} above {cap:.4f}"
    band = 2.0 * math.hypot(r04.sup_se, r01.sup_se)
    assert r01.sup_gap <= r04.sup_gap + band, (
        f"gap did not shrink: {r04.sup_gap:.4f} -> {r01.sup_gap:.4f} (+{band:.4f})"
    )
    assert r04.n_exploded == 0 and r01.n_exploded == 0
    _report(
        "c04 normal-deviation-weak-gap",
        time.perf_counter() - t0,
        600.0,
        f"sup gap {r04.sup_gap:.4f} (eps=0.04) -> {r01.sup_gap:.4f} (eps=0.01) "
        f"at phi={r01.at_phi!r}, cap {cap:.4f}, 5000 paths/side",
    )


# ---------------------------------------------------------------------------
# 5. frozen fast dynamics contract synchronized pairs under exp(-eta t)
# ---------------------------------------------------------------------------


def test_c05_frozen_pair_contraction():
    t0 = time.perf_counter()
    model = get_model("cubic-sine")
    eta = model.meta.eta
    x = np.array([0.7])
    n_pairs = 1000
    dt = 2e-4
    horizon = 4.0
    targets = {int(round(t / dt)): t for t in (1.0, 2.0, 4.0)}

    def run(y_start: float, store: dict):
        def observer(k, t, y):
            if (k + 1) in targets:
                store[targets[k + 1]] = y.copy()

        y0 = np.full((n_pairs, 1), y_start)
        frozen_ensemble(
            model, x, y0, horizon, dt, NoisePath(seed=11, stream_id=0),
            observer=observer,
        )

    upper: dict[float, np.ndarray] = {}
    lower: dict[float, np.ndarray] = {}
    run(1.5, upper)   # identical seed => identical driving noise: coupled pairs
    run(-1.5, lower)
    d0_sq = 3.0**2
    details = []
    for t in (1.0, 2.0, 4.0):
        ratio_per_pair = np.sum((upper[t] - lower[t]) ** 2, axis=1) / d0_sq
        ratio = float(ratio_per_pair.mean())
        se = float(ratio_per_pair.std(ddof=1)) / math.sqrt(n_pairs)
        envelope = math.exp(-eta * t)
        assert ratio <= envelope + 3.0 * se, (
            f"t={t}: mean-square ratio {ratio:.3e} above exp(-{eta:g}*{t:g}) = "
            f"{envelope:.3e} + 3*SE ({se:.1e})"
        )
        details.append(f"t={t:g}: {ratio:.2e} <= {envelope:.2e}+3*{se:.1e}")
    _report(
        "c05 frozen-pair-contraction",
        time.perf_counter() - t0,
        60.0,
        "; ".join(details) + f" over {n_pairs} coupled pairs",
    )


# ---------------------------------------------------------------------------
# 6. invariant-measure sampler against closed-form and quadrature moments
# ---------------------------------------------------------------------------


def test_c06_invariant_measure_oracles():
    t0 = time.perf_counter()
    # linear fast drift at rate 2 with diffusion sqrt(2): variance = 2/(2*2)
    ou = sample_invariant(
        FrozenSpec(linear_ou_model(rate=2.0), np.array([0.0]), stride=2.0),
        n_samples=4000,
        seed=7,
    )
    squares = ou.samples[:, 0] ** 2
    var = float(squares.mean())  # the law is centered, so E y^2 is the variance
    var_se = _corrected_se(squares)
    assert abs(var - 0.5) <= 3.0 * var_se, (
        f"variance {var:.4f} misses 0.5 by more than 3*SE ({var_se:.4f})"
    )

    # gradient diffusion in a double well: moments against direct quadrature
    dw = sample_invariant(
        FrozenSpec(get_model("double-well"), np.array([0.0]), stride=4.0),
        n_samples=4000,
        seed=7,
    )

    def dens(y: float) -> float:
        return math.exp(y * y / 2.0 - y**4 / 4.0)

    z = sciint.quad(dens, 0.0, 12.0, limit=200)[0]
    m2_ref = sciint.quad(lambda y: y * y * dens(y), 0.0, 12.0, limit=200)[0] / z
    m4_ref = sciint.quad(lambda y: y**4 * dens(y), 0.0, 12.0, limit=200)[0] / z
    checks = []
    for order, ref in ((2, m2_ref), (4, m4_ref)):
        series = dw.samples[:, 0] ** order
        got = float(series.mean())
        se = _corrected_se(series)
        assert abs(got - ref) <= 3.0 * se, (
            f"double-well m{order} = {got:.4f} vs quadrature {ref:.4f}, "
            f"3*SE = {3 * se:.4f}"
        )
        checks.append(f"m{order} {got:.3f}~{ref:.3f}")
    _report(
        "c06 invariant-measure-oracles",
        time.perf_counter() - t0,
        120.0,
        f"linear-drift variance {var:.4f}~0.5 (3*SE {3 * var_se:.4f}); "
        + ", ".join(checks),
    )


# ---------------------------------------------------------------------------
# 7. bounded-Lipschitz distance: exact values, metric axioms, W1 bound
# ---------------------------------------------------------------------------


def _point(a: float) -> np.ndarray:
    return np.array([[float(a)]])


def test_c07_dbl_metric_properties():
    t0 = time.perf_counter()
    assert dbl_distance(_point(0.0), _point(0.0)).value == pytest.approx(0.0, abs=1e-12)
    assert dbl_distance(_point(0.0), _point(1.0)).value == pytest.approx(
        2.0 / 3.0, abs=1e-9
    )
    assert dbl_distance(_point(0.0), _point(2.0)).value == pytest.approx(1.0, abs=1e-9)

    rng = np.random.default_rng(2024)
    worst_w1_margin = math.inf
    for _ in range(100):
        clouds = [
            rng.uniform(-3.0, 3.0, size=(int(rng.integers(3, 9)), 1))
            for _ in range(3)
        ]
        a, b, c = clouds
        dab = dbl_distance(a, b).value
        dba = dbl_distance(b, a).value
        dac = dbl_distance(a, c).value
        dbc = dbl_distance(b, c).value
        assert dab >= 0.0
        assert abs(dab - dba) <= 1e-9, "symmetry"
        assert dac <= dab + dbc + 1e-9, "triangle inequality"
        assert dbl_distance(a, a).value <= 1e-9, "identity"

        n = 40
        u = np.sort(rng.normal(size=n))
        v = np.sort(rng.normal(loc=rng.uniform(-1, 1), size=n))
        w1 = float(np.mean(np.abs(u - v)))  # equal-weight sorted coupling is optimal in 1d
        d = dbl_distance(u[:, None], v[:, None]).value
        assert d <= min(w1, 2.0) + 1e-9
        worst_w1_margin = min(worst_w1_margin, min(w1, 2.0) - d)
    _report(
        "c07 dbl-metric-properties",
        time.perf_counter() - t0,
        60.0,
        f"exact 0, 2/3, 1; axioms on 100 random triples; "
        f"W1 bound slack >= {worst_w1_margin:.3f}",
    )


# ---------------------------------------------------------------------------
# 8. long-time law approaches the averaged stationary law as eps shrinks
# ---------------------------------------------------------------------------


def test_c08_longtime_law_trend():
    t0 = time.perf_counter()
    model = get_model("forced-cubic")
    report = quasi_periodic_sweep(
        model,
        [0.04, 0.01],
        n_paths=600,
        replicates=4,
        n_grid=9,
        seed=0,
        reference_n=1000,
    )
    r04, r01 = report.rows
    assert r04.epsilon == 0.04 and r01.epsilon == 0.01
    band = 2.0 * math.hypot(r04.se, r01.se)
    assert r01.max_dbl <= r04.max_dbl + band, (
        f"law distance did not shrink: {r04.max_dbl:.4f} -> {r01.max_dbl:.4f} "
        f"(band {band:.4f})"
    )
    _report(
        "c08 longtime-law-trend",
        time.perf_counter() - t0,
        600.0,
        f"max d_BL {r04.max_dbl:.4f} (eps=0.04) -> {r01.max_dbl:.4f} (eps=0.01), "
        f"2*SE band {band:.4f}, 600 paths x 4 replicates",
    )


# ---------------------------------------------------------------------------
# 9. scheme self-tests: strong order, deterministic order, exact refinement
# ---------------------------------------------------------------------------


def _const_matrix(value, d):
    m = np.eye(d) * value

    def fn(*args):
        lead = np.shape(args[-1])[:-1]
        return np.broadcast_to(m, lead + m.shape)

    return fn


def _slow_probe_model(f, sigma) -> ModelSpec:
    return ModelSpec(
        model_id="probe",
        d1=1,
        d2=1,
        scales=ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5),
        meta=AssumptionMeta(eta=1.0),
        f=f,
        sigma=sigma,
        B=lambda x, y: -y,
        b=None,
        g=_const_matrix(1.0, 1),
        g_is_constant=True,
    )


def test_c09_scheme_self_tests():
    t0 = time.perf_counter()
    # stochastic: bounded drift, multiplicative noise, strong order near 1/2
    noisy = _slow_probe_model(
        lambda t, x, y: np.tanh(x),
        lambda t, x: 0.5 * x[..., :, None],
    )
    stoch = strong_order_probe(
        noisy, 1.0, 1.0, 0.0, 1.0, [0.02, 0.01, 0.005, 0.0025], n_paths=400, seed=0
    )
    assert 0.4 <= stoch.slope <= 0.6, f"stochastic order {stoch.slope:.3f}"

    # deterministic: no diffusion anywhere on the slow side, order near 1
    quiet = _slow_probe_model(
        lambda t, x, y: -x,
        _const_matrix(0.0, 1),
    )
    det = strong_order_probe(
        quiet, 1.0, 1.0, 0.0, 1.0, [0.02, 0.01, 0.005, 0.0025], n_paths=8, seed=0
    )
    assert 0.8 <= det.slope <= 1.2, f"deterministic order {det.slope:.3f}"

    # refinement consistency: coarse increments equal fine sums bit for bit
    noise = NoisePath(seed=123, stream_id=4)
    for div in (2, 4, 8):
        for step in (0, 1, 5):
            coarse = noise.coarse_increment(SUBSTREAM_W1, step, (64, 3), 0.01, div)
            fine = sum(
                noise.increments(SUBSTREAM_W1, step * div + j, (64, 3), 0.01 / div)
                for j in range(div)
            )
            assert np.array_equal(coarse, fine), f"div={div}, step={step}"

    # and the integrator itself is bitwise deterministic under a fixed seed
    model = get_model("forced-cubic")
    runs = [
        integrate_multiscale(
            model, 0.05, 0.5, 0.0, 0.3,
            cfg=IntegratorConfig(dt=1e-3), noise=NoisePath(seed=9, stream_id=0),
            n_paths=4,
            record_stride=30,
        )
        for _ in range(2)
    ]
    assert np.array_equal(runs[0].x, runs[1].x)
    assert np.array_equal(runs[0].y, runs[1].y)
    _report(
        "c09 scheme-self-tests",
        time.perf_counter() - t0,
        120.0,
        f"stochastic order {stoch.slope:.3f} in [0.4, 0.6], deterministic "
        f"{det.slope:.3f} in [0.8, 1.2], refinement sums exact",
    )


# ---------------------------------------------------------------------------
# 10. command line reruns are byte-identical, checked by hash
# ---------------------------------------------------------------------------


def _outputs(out_dir) -> list[dict]:
    manifest = json.loads((out_dir / "manifest.json").read_text())
    entries = manifest["outputs"]
    assert entries, "command produced no files"
    return entries


def test_c10_cli_reproducibility(tmp_path, capsys):
    t0 = time.perf_counter()
    commands = {
        "run": ["run", "--model", "forced-cubic", "--eps", "0.1", "--horizon", "0.4",
                "--paths", "3", "--records", "20", "--seed", "3", "--averaged",
                "--plot"],
        "average": ["average", "--model", "forced-cubic", "--grid=-1.5:1.5:7",
                    "--seed", "2"],
        "deviation": ["deviation", "--model", "linear-ou", "--draws", "400",
                      "--dt", "0.02", "--seed", "0"],
        "longtime": ["longtime", "--model", "forced-cubic", "--eps-list", "0.1",
                     "--paths", "80", "--replicates", "2", "--grid-points", "3",
                     "--quasi-periods", "2", "--reference-n", "200", "--seed", "1"],
    }
    n_files = 0
    for name, argv in commands.items():
        dirs = [tmp_path / f"{name}-{i}" for i in (1, 2)]
        for out in dirs:
            assert cli_main(argv + ["--out", str(out)]) == 0, f"{name} failed"
        first, second = (_outputs(d) for d in dirs)
        assert first == second, f"{name}: outputs differ between identical reruns"
        n_files += len(first)

    svgs = []
    for i in (1, 2):
        target = tmp_path / f"plot-{i}.svg"
        code = cli_main(
            ["plot", "--input", str(tmp_path / "run-1" / "multiscale.csv"),
             "--out", str(target)]
        )
        assert code == 0
        svgs.append(target.read_bytes())
    assert svgs[0] == svgs[1], "plot rerun produced different bytes"
    capsys.readouterr()  # swallow the CLI chatter; the verdict line follows
    _report(
        "c10 cli-reproducibility",
        time.perf_counter() - t0,
        300.0,
        f"{len(commands)} commands x 2 runs: {n_files} hashed files identical; "
        f"plot SVG byte-identical",
    )
