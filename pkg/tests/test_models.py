import numpy as np
import pytest

from msde.models import (
    AssumptionMeta,
    ModelError,
    ModelSpec,
    ScaleExponents,
    get_model,
    model_ids,
    probe_assumption,
    supported_assumptions,
)


def test_registry_contents():
    assert model_ids() == [
        "cubic-sine",
        "double-well",
        "forced-cubic",
        "linear-ou",
        "vanderpol",
    ]


def test_unknown_model_id_lists_known_ones():
    with pytest.raises(ModelError, match="registered ids"):
        get_model("no-such-model")


def test_factory_rejects_unknown_parameter():
    with pytest.raises(TypeError):
        get_model("linear-ou", not_a_param=3)


def test_scale_exponent_validation():
    ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5)  # valid
    with pytest.raises(ModelError):
        ScaleExponents(alpha=0.5, beta=1.2, gamma=0.5)  # beta >= 2 alpha
    with pytest.raises(ModelError):
        ScaleExponents(alpha=0.5, beta=0.0, gamma=0.0)  # gamma must be positive
    with pytest.raises(ModelError):
        ScaleExponents(alpha=0.5, beta=-0.1, gamma=0.5)


def test_meta_requires_positive_eta():
    with pytest.raises(ModelError):
        AssumptionMeta(eta=0.0)
    with pytest.raises(ModelError):
        AssumptionMeta(eta=-1.0)


def test_meta_require_reports_missing_constant():
    meta = AssumptionMeta(eta=1.0)
    with pytest.raises(ModelError, match="K1"):
        meta.require("fast-dissipativity", "K1")
    meta2 = AssumptionMeta(eta=1.0, K1=0.5)
    assert meta2.require("fast-dissipativity", "K1") == {"K1": 0.5}
    meta3 = AssumptionMeta(eta=1.0, extras={"C_f": 2.0})
    assert meta3.require("slow-coercivity", "C_f") == {"C_f": 2.0}


def test_slow_drift_hand_values():
    cubic = get_model("cubic-sine")
    got = cubic.f(0.0, np.array([1.0]), np.array([1.0]))
    assert got[0] == pytest.approx(1.0 + np.sin(1.0), abs=1e-12)
    forced = get_model("forced-cubic")
    got = forced.f(0.0, np.array([1.0]), np.array([1.0]))
    assert got[0] == pytest.approx(-1.0, abs=1e-12)  # cos 0 + sin 0 = 1 forcing


def test_batched_and_single_evaluation_agree():
    model = get_model("cubic-sine")
    x = np.array([[0.5], [1.5], [-0.25]])
    y = np.array([[0.1], [-0.2], [2.0]])
    batched = model.f(0.3, x, y)
    single = np.stack([model.f(0.3, x[i], y[i]) for i in range(3)])
    assert np.allclose(batched, single, rtol=0.0, atol=0.0)
    bb = model.B(x, y)
    bs = np.stack([model.B(x[i], y[i]) for i in range(3)])
    assert np.array_equal(bb, bs)


def test_supported_assumptions_contains_core_inequalities():
    ids = supported_assumptions()
    for needed in (
        "fast-dissipativity",
        "fast-ellipticity",
        "fast-pair-contraction",
        "slow-local-monotonicity",
    ):
        assert needed in ids


def test_probe_passes_on_well_posed_model():
    model = get_model("cubic-sine")
    report = probe_assumption(model, "fast-dissipativity", n_points=2000, seed=0)
    assert report.passed
    assert report.n_fail == 0
    assert report.n_points == 2000


def test_probe_catches_false_declaration():
    # An overclaimed dissipativity bound (K1 far below the true noise
    # contribution) must produce witnesses.
    import dataclasses

    model = get_model("linear-ou")
    bad = dataclasses.replace(
        model,
        model_id="linear-ou-overclaimed",
        meta=dataclasses.replace(model.meta, K1=0.01),
    )
    report = probe_assumption(bad, "fast-dissipativity", n_points=2000, seed=0)
    assert not report.passed
    assert report.witness is not None


def test_probe_unknown_assumption_lists_supported():
    model = get_model("linear-ou")
    with pytest.raises(ModelError, match="supported"):
        probe_assumption(model, "no-such-inequality")


def test_probe_is_deterministic():
    model = get_model("double-well")
    a = probe_assumption(model, "fast-dissipativity", n_points=1000, seed=3)
    b = probe_assumption(model, "fast-dissipativity", n_points=1000, seed=3)
    assert a.worst_margin == b.worst_margin
