import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msde.averaging import averaged_model
from msde.frozen import EmpiricalMeasure
from msde.longtime import (
    LongtimeError,
    dbl_distance,
    quasi_periodic_sweep,
    stationary_law,
)
from msde.models import get_model


def _point(v):
    return EmpiricalMeasure(np.array([[float(v)]]))


# ---------------------------------------------------------------------------
# the distance itself
# ---------------------------------------------------------------------------


def test_point_mass_hand_values():
    # Between delta_0 and delta_a the optimal test function is affine with
    # slope L and sup m, L + m <= 1; balancing L a = 2 m gives 2a / (a + 2).
    assert dbl_distance(_point(0), _point(0)).value == pytest.approx(0.0, abs=1e-12)
    assert dbl_distance(_point(0), _point(1)).value == pytest.approx(2.0 / 3.0, abs=1e-9)
    assert dbl_distance(_point(0), _point(2)).value == pytest.approx(1.0, abs=1e-9)
    assert dbl_distance(_point(0), _point(50)).value == pytest.approx(100.0 / 52.0, abs=1e-9)
    # the bounded part caps the distance at 2 no matter how far apart
    assert dbl_distance(_point(0), _point(1e6)).value <= 2.0 + 1e-9


def test_dbl_accepts_raw_arrays():
    d = dbl_distance(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    assert d.value == pytest.approx(0.0, abs=1e-12)


def test_dbl_bounded_by_w1_and_two():
    rng = np.random.Generator(np.random.Philox(key=[21, 0], counter=[0, 0, 0, 0]))
    for trial in range(5):
        a = np.sort(rng.normal(0.0, 1.0 + trial, size=60))
        b = np.sort(rng.normal(0.5 * trial, 1.0, size=60))
        d = dbl_distance(a, b).value
        w1 = float(np.mean(np.abs(a - b)))  # equal-size sorted clouds: exact W1
        assert d <= min(w1, 2.0) + 1e-9
        assert d >= 0.0


@given(
    a=st.floats(min_value=-5.0, max_value=5.0),
    b=st.floats(min_value=-5.0, max_value=5.0),
    c=st.floats(min_value=-5.0, max_value=5.0),
)
@settings(max_examples=60, deadline=None, derandomize=True)
def test_dbl_metric_axioms_on_point_masses(a, b, c):
    dab = dbl_distance(_point(a), _point(b)).value
    dba = dbl_distance(_point(b), _point(a)).value
    dac = dbl_distance(_point(a), _point(c)).value
    dcb = dbl_distance(_point(c), _point(b)).value
    assert dab == pytest.approx(dba, abs=1e-9)  # symmetry
    assert dab <= dac + dcb + 1e-9  # triangle inequality
    if a == b:
        assert dab <= 1e-9
    elif abs(a - b) > 1e-6:  # separation, away from solver tolerance
        assert dab > 1e-8


def test_lp_support_cap_enforced():
    big = EmpiricalMeasure(np.zeros((3000, 1)))
    with pytest.raises(LongtimeError, match="cap"):
        dbl_distance(big, big, method="lp-exact")


# ---------------------------------------------------------------------------
# stationary law and the sweep
# ---------------------------------------------------------------------------


def test_stationary_law_needs_dissipation_rate():
    avg = averaged_model(get_model("linear-ou"))
    assert avg.dissipation_rate is None
    with pytest.raises(LongtimeError, match="dissipation rate"):
        stationary_law(avg)


def test_stationary_law_concentrates_for_strong_contraction():
    avg = averaged_model(get_model("forced-cubic"))
    law = stationary_law(avg, n_samples=400, seed=1)
    assert law.n == 400
    # -x - x^3 with sigma = 1: stationary mass concentrates near the origin
    assert abs(float(law.samples.mean())) < 0.2
    assert float((law.samples**2).mean()) < 1.5


def test_sweep_refuses_models_without_pair_dissipativity():
    model = get_model("linear-ou")
    assert not model.meta.pair_dissipative
    with pytest.raises(LongtimeError, match="pair-dissipativity"):
        quasi_periodic_sweep(model, [0.1])


def test_sweep_rows_and_trend_fields():
    model = get_model("forced-cubic")
    report = quasi_periodic_sweep(
        model, [0.08, 0.04], n_paths=150, replicates=2, n_grid=3, reference_n=300, seed=5
    )
    assert [r.epsilon for r in report.rows] == [0.08, 0.04]
    for row in report.rows:
        assert row.max_dbl >= 0.0
        assert len(row.replicate_values) == 2
        assert len(row.t_grid) == 3
    assert report.trend_decreasing in (True, False)
    assert np.isfinite(report.trend_z)
