"""Multi-scale SDE toolkit.

Slow-fast systems with polynomial nonlinearities: structural-assumption
probes, tamed and semi-implicit integration with refinement-coupled noise,
frozen-fast invariant measures, averaged equations, normal deviations with
their Gaussian limit, and long-time laws under quasi-periodic forcing.

Submodules import lazily so the command line can configure thread pools
before numpy loads; ``import msde`` alone stays cheap.
"""
from __future__ import annotations

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    # models
    "AssumptionMeta": "models",
    "ModelError": "models",
    "ModelSpec": "models",
    "ProbeReport": "models",
    "ScaleExponents": "models",
    "eval_fast_drift": "models",
    "eval_slow_diffusion": "models",
    "eval_slow_drift": "models",
    "get_model": "models",
    "model_ids": "models",
    "probe_assumption": "models",
    "register_model": "models",
    "supported_assumptions": "models",
    "vanderpol_to_system": "models",
    # noise
    "NoiseError": "noise",
    "NoisePath": "noise",
    # integration
    "IntegrationError": "integrate",
    "IntegratorConfig": "integrate",
    "OverflowAbort": "integrate",
    "StrongOrderReport": "integrate",
    "integrate_multiscale": "integrate",
    "max_macro_dt": "integrate",
    "step_semi_implicit": "integrate",
    "step_tamed": "integrate",
    "strong_order_probe": "integrate",
    # trajectories
    "PathBundle": "paths",
    # frozen fast dynamics
    "EmpiricalMeasure": "frozen",
    "FrozenError": "frozen",
    "FrozenSpec": "frozen",
    "PoissonReport": "frozen",
    "averaged_diffusion_bar": "frozen",
    "averaged_drift_bar": "frozen",
    "averaged_drift_hat": "frozen",
    "moment": "frozen",
    "poisson_solution_estimate": "frozen",
    "sample_invariant": "frozen",
    # averaging
    "AveragedModel": "averaging",
    "AveragingError": "averaging",
    "ConvergenceReport": "averaging",
    "averaged_model": "averaging",
    "averaging_sweep": "averaging",
    "default_multiscale_cfg": "averaging",
    "fit_rate": "averaging",
    "simulate_averaged": "averaging",
    "strong_error": "averaging",
    # deviations
    "DeviationError": "deviation",
    "GEstimate": "deviation",
    "WeakGapReport": "deviation",
    "deviation_exponent": "deviation",
    "deviation_path": "deviation",
    "estimate_G": "deviation",
    "grad_f_bar": "deviation",
    "simulate_limit": "deviation",
    "weak_gap": "deviation",
    # long-time behavior
    "DblResult": "longtime",
    "LawSnapshot": "longtime",
    "LongtimeError": "longtime",
    "SweepReport": "longtime",
    "dbl_distance": "longtime",
    "quasi_periodic_sweep": "longtime",
    "stationary_law": "longtime",
    # expression language and model files
    "ConfigError": "config",
    "DslError": "dsl",
    "compile_expression": "dsl",
    "load_model_config": "config",
    "model_from_mapping": "config",
    # reference values
    "OracleResult": "oracles",
    "oracle_names": "oracles",
    "run_oracle_suite": "oracles",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    try:
        module_name = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module 'msde' has no attribute {name!r}") from None
    value = getattr(import_module(f".{module_name}", __name__), name)
    globals()[name] = value
    return value


def __dir__() -> list[str]:
    return __all__
