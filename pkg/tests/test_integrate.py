import numpy as np
import pytest

from msde.integrate import (
    IntegrationError,
    IntegratorConfig,
    OverflowAbort,
    integrate_multiscale,
    max_macro_dt,
    step_semi_implicit,
    step_tamed,
    strong_order_probe,
)
from msde.models import AssumptionMeta, ModelSpec, ScaleExponents, get_model
from msde.noise import NoisePath


def _const_matrix(value, d):
    m = np.eye(d) * value

    def fn(*args):
        lead = np.shape(args[-1])[:-1]
        return np.broadcast_to(m, lead + m.shape)

    return fn


def _probe_model(f, sigma):
    return ModelSpec(
        model_id="probe",
        d1=1,
        d2=1,
        scales=ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5),
        meta=AssumptionMeta(eta=1.0),
        f=f,
        sigma=sigma,
        B=lambda x, y: -y,
        b=lambda x, y: np.zeros_like(y),
        g=_const_matrix(1.0, 1),
        g_is_constant=True,
    )


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def test_step_tamed_hand_value():
    # x=1, drift -1, dt=0.01, p=1: x + dt*F/(1+dt|F|) = 1 - 0.01/1.01
    got = step_tamed(np.array([1.0]), np.array([-1.0]), np.array([0.0]), 0.01)
    assert got[0] == pytest.approx(1.0 - 0.01 / 1.01, abs=1e-15)


def test_step_semi_implicit_hand_value():
    # y / (1 + dt * rate) with no residual drift or noise
    got = step_semi_implicit(np.array([1.0]), 2.0, np.array([0.0]), np.array([0.0]), 0.1)
    assert got[0] == pytest.approx(1.0 / 1.2, abs=1e-15)


def test_taming_keeps_huge_drift_bounded():
    got = step_tamed(np.array([1.0]), np.array([-1e12]), np.array([0.0]), 0.01)
    # the tamed increment magnitude is capped near 1 regardless of drift size
    assert abs(got[0] - 1.0) <= 1.0 + 1e-9


# ---------------------------------------------------------------------------
# configuration and validation
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(IntegrationError, match="unknown scheme"):
        IntegratorConfig(scheme="milstein")
    with pytest.raises(IntegrationError, match="dt must be positive"):
        IntegratorConfig(dt=0.0)
    with pytest.raises(IntegrationError, match="fast_substeps"):
        IntegratorConfig(fast_substeps=0)
    with pytest.raises(IntegrationError, match="taming_exponent"):
        IntegratorConfig(taming_exponent=1.5)


def test_horizon_must_be_multiple_of_dt():
    model = get_model("linear-ou")
    with pytest.raises(IntegrationError, match="integer multiple"):
        integrate_multiscale(model, 0.1, 0.0, 0.0, 1.0005, cfg=IntegratorConfig(dt=1e-3))


def test_macro_step_must_resolve_fast_scale():
    model = get_model("linear-ou")
    eps = 0.01
    cap = max_macro_dt(model, eps, 1)
    assert cap == pytest.approx(0.1 * eps, rel=1e-12)
    with pytest.raises(IntegrationError, match="does not resolve the fast scale"):
        integrate_multiscale(model, eps, 0.0, 0.0, 1.0, cfg=IntegratorConfig(dt=0.1))


def test_epsilon_range_enforced():
    model = get_model("linear-ou")
    with pytest.raises(IntegrationError):
        integrate_multiscale(model, 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(IntegrationError):
        integrate_multiscale(model, 1.5, 0.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def test_bundle_shapes_and_recording():
    model = get_model("linear-ou")
    cfg = IntegratorConfig(dt=1e-3)
    bundle = integrate_multiscale(
        model, 0.1, 0.25, 0.0, 0.5, cfg=cfg, n_paths=7, record_stride=100
    )
    assert bundle.x.shape == (7, 6, 1)
    assert bundle.y.shape == (7, 6, 1)
    assert bundle.t.shape == (6,)
    assert bundle.t[0] == 0.0 and bundle.t[-1] == pytest.approx(0.5)
    assert np.all(bundle.x[:, 0, 0] == 0.25)
    assert not bundle.exploded.any()


def test_bitwise_reproducibility():
    model = get_model("cubic-sine")
    kwargs = dict(cfg=IntegratorConfig(dt=2e-3), n_paths=5, record_stride=50)
    a = integrate_multiscale(model, 0.1, 0.5, 0.0, 1.0, noise=NoisePath(seed=4, stream_id=2), **kwargs)
    b = integrate_multiscale(model, 0.1, 0.5, 0.0, 1.0, noise=NoisePath(seed=4, stream_id=2), **kwargs)
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.y, b.y)
    c = integrate_multiscale(model, 0.1, 0.5, 0.0, 1.0, noise=NoisePath(seed=5, stream_id=2), **kwargs)
    assert not np.array_equal(a.x, c.x)


def test_refinement_shares_the_brownian_path():
    # Sanity check of the coupling used by strong_order_probe: halving dt
    # while doubling base_div leaves the driving increments' totals equal,
    # so terminal states converge to each other as dt shrinks.
    model = _probe_model(
        f=lambda t, x, y: -x, sigma=lambda t, x: 0.5 * np.ones(x.shape + (1,))
    )
    terminals = []
    # base_div anchors every run to the same fine lattice (h = 0.000625),
    # which is what makes the three resolutions share one Brownian path.
    for dt, div in [(0.01, 16), (0.005, 8), (0.0025, 4)]:
        bundle = integrate_multiscale(
            model,
            1.0,
            1.0,
            0.0,
            1.0,
            cfg=IntegratorConfig(dt=dt),
            noise=NoisePath(seed=8, stream_id=0),
            n_paths=16,
            base_div=div,
            record_stride=int(round(1.0 / dt)),
        )
        terminals.append(bundle.terminal_x())
    gap01 = float(np.max(np.abs(terminals[0] - terminals[1])))
    gap12 = float(np.max(np.abs(terminals[1] - terminals[2])))
    assert gap12 < gap01 < 0.05


def test_explosion_flagging_and_raising():
    # Plain Euler-Maruyama on a superlinear drift with a huge step explodes;
    # 'flag' freezes the path, 'raise' aborts.
    stiff = _probe_model(
        f=lambda t, x, y: -(x**3), sigma=lambda t, x: np.zeros(x.shape + (1,))
    )
    cfg = IntegratorConfig(scheme="euler-maruyama", dt=0.05)
    bundle = integrate_multiscale(
        stiff, 0.9, 10.0, 0.0, 1.0, cfg=cfg, n_paths=2, on_overflow="flag"
    )
    assert bundle.exploded.all()
    assert (bundle.explosion_step >= 0).all()
    # frozen rows stay finite
    assert np.isfinite(bundle.x).all()
    with pytest.raises(OverflowAbort):
        integrate_multiscale(stiff, 0.9, 10.0, 0.0, 1.0, cfg=cfg, n_paths=2, on_overflow="raise")


def test_tamed_scheme_survives_where_euler_explodes():
    stiff = _probe_model(
        f=lambda t, x, y: -(x**3), sigma=lambda t, x: np.zeros(x.shape + (1,))
    )
    cfg = IntegratorConfig(scheme="tamed-euler", dt=0.05)
    bundle = integrate_multiscale(
        stiff, 0.9, 10.0, 0.0, 1.0, cfg=cfg, n_paths=2, on_overflow="flag"
    )
    assert not bundle.exploded.any()
    assert np.all(np.abs(bundle.terminal_x()) < 3.0)


# ---------------------------------------------------------------------------
# strong order probe
# ---------------------------------------------------------------------------


def test_strong_order_probe_deterministic_slope_near_one():
    det = _probe_model(
        f=lambda t, x, y: -x, sigma=lambda t, x: np.zeros(x.shape + (1,))
    )
    report = strong_order_probe(
        det, 1.0, 1.0, 0.0, 1.0, [0.02, 0.01, 0.005, 0.0025], n_paths=4, seed=0
    )
    assert 0.85 <= report.slope <= 1.25
    assert report.errors[0] > report.errors[-1]


def test_strong_order_probe_needs_three_resolutions():
    det = _probe_model(
        f=lambda t, x, y: -x, sigma=lambda t, x: np.zeros(x.shape + (1,))
    )
    with pytest.raises(IntegrationError, match="at least 3"):
        strong_order_probe(det, 1.0, 1.0, 0.0, 1.0, [0.02, 0.01], n_paths=4)
