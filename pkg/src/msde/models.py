"""Model descriptions for two-time-scale SDE systems.

A model couples a slow equation

    dX = f(s, X, Y) dt + sigma(s, X) dW1,      s = eps**(-gamma) * t

to a fast one

    dY = [eps**(-2*alpha) * B(X, Y) + eps**(-beta) * b(X, Y)] dt
         + eps**(-alpha) * g(X, Y) dW2,

with independent Brownian motions W1, W2.  Coefficients are plain callables
operating on batched numpy arrays; the exponents live in
:class:`ScaleExponents` and the quantitative structural constants (dissipation
rates, Lipschitz and growth constants) in :class:`AssumptionMeta`.

Structural inequalities are never trusted silently: :func:`probe_assumption`
samples state space and reports where a declared inequality holds, where it
fails, and the worst observed margin.
"""
from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy import integrate as _sciint
from scipy.stats import qmc as _qmc


class ModelError(ValueError):
    """Raised for invalid model definitions or probe requests."""


# ---------------------------------------------------------------------------
# scale exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleExponents:
    """Exponents (alpha, beta, gamma) and the current scale parameter epsilon.

    Validity requires 0 <= beta < 2*alpha, 0 < gamma < 2*alpha and
    epsilon in (0, 1].
    """

    alpha: float
    beta: float = 0.0
    gamma: float = 0.5
    epsilon: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0):
            raise ModelError(f"alpha must be positive, got {self.alpha}")
        if not (0.0 <= self.beta < 2.0 * self.alpha):
            raise ModelError(
                f"beta must satisfy 0 <= beta < 2*alpha, got beta={self.beta}, "
                f"alpha={self.alpha}"
            )
        if not (0.0 < self.gamma < 2.0 * self.alpha):
            raise ModelError(
                f"gamma must satisfy 0 < gamma < 2*alpha, got gamma={self.gamma}, "
                f"alpha={self.alpha}"
            )
        if not (0.0 < self.epsilon <= 1.0):
            raise ModelError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    def with_epsilon(self, epsilon: float) -> "ScaleExponents":
        return replace(self, epsilon=float(epsilon))

    # Scale factors at the current epsilon.
    @property
    def fast_drift_scale(self) -> float:
        return self.epsilon ** (-2.0 * self.alpha)

    @property
    def intermediate_drift_scale(self) -> float:
        return self.epsilon ** (-self.beta)

    @property
    def fast_diffusion_scale(self) -> float:
        return self.epsilon ** (-self.alpha)

    @property
    def time_scale(self) -> float:
        return self.epsilon ** (-self.gamma)


# ---------------------------------------------------------------------------
# structural constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionMeta:
    """Declared structural constants for a model.

    Only ``eta`` (the fast dissipation rate, i.e. the rate in the linear part
    of B) is mandatory; every probe and long-run heuristic states explicitly
    which of the optional constants it needs and refuses, by name, when one
    is missing.

    Conventions:

    * ``eta``: drift-rate convention.  For B(x, y) = -eta * y + (higher order)
      the frozen dynamics contracts pairs at rate eta and an additive-noise
      linear model has stationary variance g**2 / (2 * eta).
    * ``theta1``/``theta2``: polynomial growth powers of the slow drift in x
      and y; ``theta``: power appearing in the fast dissipation balance.
    * ``lambda1``/``lambda2``: slow dissipation (and pair-dissipation)
      rates; ``pair_dissipative`` declares that the slow/fast pair inequality
      2<f(t,x1,y1)-f(t,x2,y2), x1-x2> + |sigma(t,x1)-sigma(t,x2)|_HS^2
      <= -lambda1 |x1-x2|^2 + lambda2 |y1-y2|^2 holds.
    """

    eta: float
    eta_prime: float = 0.0
    eta_tilde: float | None = None
    theta: float = 2.0
    theta1: float = 2.0
    theta2: float = 2.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    lambda1: float | None = None
    lambda2: float | None = None
    K1: float | None = None
    K2: float | None = None
    K3: float | None = None
    K4: float | None = None
    K5: float | None = None
    K6: float | None = None
    K7: float | None = None
    K8: float | None = None
    M: float | None = None
    L_sigma: float | None = None
    L_g: float | None = None
    L_b: float | None = None
    pair_dissipative: bool = False
    extras: Mapping[str, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (self.eta > 0.0):
            raise ModelError(f"eta must be positive, got {self.eta}")

    def require(self, assumption_id: str, *names: str) -> dict[str, float]:
        """Fetch constants by name, refusing with a precise message if absent."""
        out: dict[str, float] = {}
        for name in names:
            value = getattr(self, name, None)
            if value is None:
                value = self.extras.get(name)
            if value is None:
                raise ModelError(
                    f"probe of '{assumption_id}' needs the constant '{name}'; "
                    f"declare it on AssumptionMeta (or in AssumptionMeta.extras)"
                )
            out[name] = float(value)
        return out


# ---------------------------------------------------------------------------
# model container
# ---------------------------------------------------------------------------

SlowDrift = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
SlowDiffusion = Callable[[float, np.ndarray], np.ndarray]
FastCoefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """A complete two-time-scale system.

    Coefficient callables are batched: ``x`` has shape (..., d1), ``y`` shape
    (..., d2); ``f`` and ``B``/``b`` return the same leading shape with a
    trailing state dimension, ``sigma`` returns (..., d1, d1) and ``g``
    (..., d2, d2).  ``t`` is the already-rescaled time argument
    eps**(-gamma) * physical_time.
    """

    model_id: str
    d1: int
    d2: int
    f: SlowDrift
    sigma: SlowDiffusion
    B: FastCoefficient
    g: FastCoefficient
    scales: ScaleExponents
    meta: AssumptionMeta
    b: FastCoefficient | None = None
    # For d2 = 1 models whose fast drift is polynomial in y: x -> coefficient
    # array (lowest power first).  Purely a fast-path hint for the chain
    # kernels; B stays authoritative.
    fast_drift_poly: Callable[[np.ndarray], np.ndarray] | None = None
    f_bar: Callable[[np.ndarray], np.ndarray] | None = None
    f_bar_grad: Callable[[np.ndarray], np.ndarray] | None = None
    sigma_bar: np.ndarray | None = None
    averaged_dissipation_rate: float | None = None
    sigma_is_constant: bool = False
    g_is_constant: bool = False
    f_is_time_dependent: bool = True
    forcing_frequencies: tuple[float, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.d1 < 1 or self.d2 < 1:
            raise ModelError("state dimensions d1, d2 must be >= 1")

    def with_epsilon(self, epsilon: float) -> "ModelSpec":
        return replace(self, scales=self.scales.with_epsilon(epsilon))


def _ravel_state(value, d: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    if arr.shape[-1] != d:
        raise ModelError(f"{name} must have trailing dimension {d}, got shape {arr.shape}")
    return arr


def eval_slow_drift(model: ModelSpec, t: float, x, y):
    """Evaluate f(t, x, y); scalar in, scalar out for one-dimensional models."""
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0 and model.d1 == 1
    xv = _ravel_state(x, model.d1, "x")
    yv = _ravel_state(y, model.d2, "y")
    out = model.f(float(t), xv, yv)
    return float(out[0]) if scalar else out


def eval_slow_diffusion(model: ModelSpec, t: float, x):
    scalar = np.ndim(x) == 0 and model.d1 == 1
    xv = _ravel_state(x, model.d1, "x")
    out = model.sigma(float(t), xv)
    return float(out[0, 0]) if scalar else out


def eval_fast_drift(model: ModelSpec, x, y):
    """Evaluate B(x, y) + b(x, y) without any epsilon scaling."""
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0 and model.d2 == 1
    xv = _ravel_state(x, model.d1, "x")
    yv = _ravel_state(y, model.d2, "y")
    out = model.B(xv, yv)
    if model.b is not None:
        out = out + model.b(xv, yv)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., ModelSpec]] = {}


def register_model(model_id: str):
    def deco(factory: Callable[..., ModelSpec]):
        _REGISTRY[model_id] = factory
        return factory

    return deco


def model_ids() -> list[str]:
    return sorted(_REGISTRY)


def get_model(model_id: str, **params) -> ModelSpec:
    try:
        factory = _REGISTRY[model_id]
    except KeyError:
        raise ModelError(
            f"unknown model id '{model_id}'; registered ids: {', '.join(model_ids())}"
        ) from None
    return factory(**params)


def _const_matrix(value: float, d: int):
    base = float(value) * np.eye(d)

    def mat(*args) -> np.ndarray:
        lead = np.shape(args[-1])[:-1]
        return np.broadcast_to(base, lead + (d, d))

    return mat


@register_model("linear-ou")
def linear_ou_model(
    rate: float = 1.0,
    fast_diffusion: float = math.sqrt(2.0),
    slow_diffusion: float = 0.0,
) -> ModelSpec:
    """Slow drift fed by a fast Ornstein-Uhlenbeck process.

        f(t, x, y) = y,   sigma = slow_diffusion,
        B(x, y) = -rate * y,   g = fast_diffusion.

    Everything is known in closed form (stationary variance
    fast_diffusion**2 / (2*rate), autocorrelation exp(-rate*s), averaged
    drift 0), which makes this the main calibration model.
    """
    if rate <= 0.0:
        raise ModelError(f"rate must be positive, got {rate}")
    r = float(rate)
    gval = float(fast_diffusion)

    def f(t, x, y):
        return y.copy()

    def B(x, y):
        return -r * y

    zero = np.zeros(1)

    def f_bar(x):
        return np.zeros_like(x)

    def f_bar_grad(x):
        lead = np.shape(x)[:-1]
        return np.zeros(lead + (1, 1))

    return ModelSpec(
        model_id="linear-ou",
        d1=1,
        d2=1,
        f=f,
        sigma=_const_matrix(slow_diffusion, 1),
        B=B,
        g=_const_matrix(gval, 1),
        scales=ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5),
        meta=AssumptionMeta(
            eta=r,
            eta_prime=0.0,
            theta=2.0,
            theta1=2.0,
            theta2=1.0,
            lambda1=None,
            K1=gval**2,
            K2=max(gval**2 / 2.0, 2.0 / gval**2) if gval != 0.0 else None,
            K3=0.0,
            K4=1.0 + slow_diffusion**2,
            K5=1.0,
            K6=1.0,
            K7=abs(slow_diffusion),
            M=1.0,
            L_sigma=0.0,
            L_g=0.0,
            extras={"C_f": 1.0},
        ),
        b=None,
        fast_drift_poly=lambda x: np.array([0.0, -r]),
        f_bar=f_bar,
        f_bar_grad=f_bar_grad,
        sigma_bar=np.array([[slow_diffusion]]),
        averaged_dissipation_rate=None,
        sigma_is_constant=True,
        g_is_constant=True,
        f_is_time_dependent=False,
        params={"rate": r, "fast_diffusion": gval, "slow_diffusion": float(slow_diffusion)},
    )


@register_model("double-well")
def double_well_model(fast_diffusion: float = math.sqrt(2.0)) -> ModelSpec:
    """Fast gradient diffusion in the double-well potential y**4/4 - y**2/2.

        B(x, y) = y - y**3,  g = fast_diffusion,  f = 0,  sigma = 0.

    The frozen invariant law has density proportional to
    exp(2 * (y**2/2 - y**4/4) / fast_diffusion**2); used to exercise the
    invariant-measure sampler away from the linear regime.
    """
    gval = float(fast_diffusion)
    if gval <= 0.0:
        raise ModelError("fast_diffusion must be positive")

    def f(t, x, y):
        return np.zeros_like(x)

    def B(x, y):
        return y - y**3

    return ModelSpec(
        model_id="double-well",
        d1=1,
        d2=1,
        f=f,
        sigma=_const_matrix(0.0, 1),
        B=B,
        g=_const_matrix(gval, 1),
        scales=ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5),
        meta=AssumptionMeta(
            eta=2.0,
            eta_prime=1.0,
            theta=4.0,
            K1=6.0 + gval**2,
            K2=max(gval**2 / 2.0, 2.0 / gval**2),
            K3=0.0,
            L_g=0.0,
            warnings=("fast-pair-contraction fails between the wells",),
        ),
        b=None,
        fast_drift_poly=lambda x: np.array([0.0, 1.0, 0.0, -1.0]),
        sigma_is_constant=True,
        g_is_constant=True,
        f_is_time_dependent=False,
        params={"fast_diffusion": gval},
    )


def _cubic_sine_mean_square_table() -> tuple[np.ndarray, np.ndarray]:
    """Second moment of the frozen law of the cubic-sine model on a grid of s = sin(x)**2.

    The frozen density at slow state x is proportional to
    exp(-s*y**6/3 - y**4/2 - y**2) with s = sin(x)**2, so the conditional
    second moment depends on x only through s in [0, 1].
    """
    s_grid = np.linspace(0.0, 1.0, 41)
    vals = np.empty_like(s_grid)
    for i, s in enumerate(s_grid):

        def dens(y, s=s):
            return math.exp(-s * y**6 / 3.0 - y**4 / 2.0 - y**2)

        z, _ = _sciint.quad(dens, 0.0, 12.0, limit=200)
        m2, _ = _sciint.quad(lambda y, s=s: y**2 * dens(y, s), 0.0, 12.0, limit=200)
        vals[i] = m2 / z
    return s_grid, vals


_CUBIC_SINE_TABLE: tuple[np.ndarray, np.ndarray] | None = None


def _cubic_sine_mean_square(s: np.ndarray) -> np.ndarray:
    global _CUBIC_SINE_TABLE
    if _CUBIC_SINE_TABLE is None:
        _CUBIC_SINE_TABLE = _cubic_sine_mean_square_table()
    from scipy.interpolate import CubicSpline

    grid, vals = _CUBIC_SINE_TABLE
    return CubicSpline(grid, vals)(s)


@register_model("cubic-sine")
def cubic_sine_model() -> ModelSpec:
    """Bistable slow equation driven by a fast sextic-well diffusion.

        f(t, x, y) = x - x**3 + y**2 * sin(x) + y,  sigma = 1,
        B(x, y) = -sin(x)**2 * y**5 - y**3 - y,     g = 1.

    The frozen law is even in y, so the averaged drift is
    x - x**3 + E[y**2 | x] * sin(x) with the conditional moment computed by
    quadrature; the averaged diffusion stays 1.
    """

    def f(t, x, y):
        xv = x[..., 0]
        yv = y[..., 0]
        return (xv - xv**3 + yv**2 * np.sin(xv) + yv)[..., None]

    def B(x, y):
        s = np.sin(x[..., 0]) ** 2
        yv = y[..., 0]
        return (-s * yv**5 - yv**3 - yv)[..., None]

    def f_bar(x):
        xv = x[..., 0]
        v = _cubic_sine_mean_square(np.sin(xv) ** 2)
        return (xv - xv**3 + v * np.sin(xv))[..., None]

    return ModelSpec(
        model_id="cubic-sine",
        d1=1,
        d2=1,
        f=f,
        sigma=_const_matrix(1.0, 1),
        B=B,
        g=_const_matrix(1.0, 1),
        scales=ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5),
        meta=AssumptionMeta(
            eta=2.0,
            eta_prime=2.0,
            theta=4.0,
            theta1=3.0,
            theta2=2.0,
            kappa2=5.0,
            lambda1=1.0,
            K1=1.0,
            K2=2.0,
            K3=1.0,
            K4=6.0,
            K5=2.0,
            K6=3.0,
            K7=1.0,
            M=1.0,
            L_sigma=0.0,
            L_g=0.0,
            extras={"C_f": 2.0},
        ),
        b=None,
        fast_drift_poly=lambda x: np.array(
            [0.0, -1.0, 0.0, -1.0, 0.0, -math.sin(x[0]) ** 2]
        ),
        f_bar=f_bar,
        sigma_bar=np.array([[1.0]]),
        averaged_dissipation_rate=1.0,
        sigma_is_constant=True,
        g_is_constant=True,
        f_is_time_dependent=False,
        params={},
    )


_DW_M2_M4: dict[float, tuple[float, float]] = {}


def _quartic_well_moments() -> tuple[float, float]:
    """Moments m2, m4 of the density proportional to exp(-y**4/2 - y**2)."""

    def dens(y):
        return math.exp(-y**4 / 2.0 - y**2)

    z, _ = _sciint.quad(dens, 0.0, 10.0, limit=200)
    m2, _ = _sciint.quad(lambda y: y**2 * dens(y), 0.0, 10.0, limit=200)
    m4, _ = _sciint.quad(lambda y: y**4 * dens(y), 0.0, 10.0, limit=200)
    return m2 / z, m4 / z


@register_model("forced-cubic")
def forced_cubic_model(
    a1: float = 1.0, a2: float = 1.0, a3: float = 0.0, a4: float = 0.0
) -> ModelSpec:
    """Quasi-periodically forced slow equation over a fast quartic well.

        f(t, x, y) = -a1*x - x**3 + (a2*y + a3*y**3)*(cos t + sin(sqrt(2) t))
                     - a4 * x * y**4 * sin(t)**2,
        sigma = 1,  B(y) = -y**3 - y,  b(x, y) = x + y,  g = 1,

    with exponents alpha = 1/2, beta = 1/3, gamma = 1/2 (t above is the
    rescaled time).  The frozen law is even, so the averaged drift is
    -a1*x - x**3 - a4 * m4 * x * sin(t)**2 time-averaged to
    -a1*x - x**3 - a4 * m4 * x / 2 with m4 the frozen fourth moment.
    """
    if a1 <= 0.0:
        raise ModelError(f"a1 must be positive, got {a1}")
    if a4 < 0.0:
        raise ModelError(f"a4 must be nonnegative, got {a4}")
    a1 = float(a1)
    a2 = float(a2)
    a3 = float(a3)
    a4 = float(a4)
    sqrt2 = math.sqrt(2.0)

    def f(t, x, y):
        xv = x[..., 0]
        yv = y[..., 0]
        forcing = math.cos(t) + math.sin(sqrt2 * t)
        out = -a1 * xv - xv**3 + (a2 * yv + a3 * yv**3) * forcing
        if a4 != 0.0:
            out = out - a4 * xv * yv**4 * math.sin(t) ** 2
        return out[..., None]

    def B(x, y):
        yv = y[..., 0]
        return (-(yv**3) - yv)[..., None]

    def b(x, y):
        return x + y

    m2, m4 = _quartic_well_moments()
    drift_slope = a1 + 0.5 * a4 * m4

    def f_bar(x):
        xv = x[..., 0]
        return (-drift_slope * xv - xv**3)[..., None]

    def f_bar_grad(x):
        xv = x[..., 0]
        return (-drift_slope - 3.0 * xv**2)[..., None, None]

    pair_ok = a4 == 0.0 and a3 == 0.0
    return ModelSpec(
        model_id="forced-cubic",
        d1=1,
        d2=1,
        f=f,
        sigma=_const_matrix(1.0, 1),
        B=B,
        g=_const_matrix(1.0, 1),
        scales=ScaleExponents(alpha=0.5, beta=1.0 / 3.0, gamma=0.5),
        meta=AssumptionMeta(
            eta=2.0,
            eta_prime=2.0,
            eta_tilde=3.0,
            theta=4.0,
            theta1=3.0,
            theta2=3.0,
            kappa1=1.0,
            kappa2=1.0,
            lambda1=max(2.0 * a1 - 1.0, 0.5) if pair_ok else None,
            lambda2=4.0 * a2**2 + 1.0 if pair_ok else None,
            K1=26.0,
            K2=2.0,
            K3=1.0 + a4 * 1.0,
            K4=6.0 + 8.0 * (abs(a2) + abs(a3)) ** 2,
            K5=2.0,
            K6=a1 + 3.0 + 2.0 * (abs(a2) + abs(a3)) + a4,
            K7=1.0,
            M=1.0,
            L_sigma=0.0,
            L_g=0.0,
            L_b=1.0,
            pair_dissipative=pair_ok,
            extras={"C_f": 2.0 * (abs(a2) + 3.0 * abs(a3)) + 2.0} if a4 == 0.0 else {},
        ),
        b=b,
        fast_drift_poly=lambda x: np.array([0.0, -1.0, 0.0, -1.0]),
        f_bar=f_bar,
        f_bar_grad=f_bar_grad,
        sigma_bar=np.array([[1.0]]),
        averaged_dissipation_rate=2.0 * a1,
        sigma_is_constant=True,
        g_is_constant=True,
        f_is_time_dependent=True,
        forcing_frequencies=(1.0, sqrt2),
        params={"a1": a1, "a2": a2, "a3": a3, "a4": a4},
    )


@register_model("vanderpol")
def vanderpol_model(mu: float, a: float = 0.0, nu: float = 1.0) -> ModelSpec:
    """Forced Van der Pol oscillator written as a slow-fast pair.

    Starting from y'' + mu*(y**2 - 1)*y' + y = a*sin(2*pi*nu*t) and passing
    to the Lienard plane on the slow time t = mu*tau, the system becomes

        dx/dtau = a*sin(2*pi*nu*tau/sqrt(eps)) - y,
        dy/dtau = (x - y**3/3 + y) / eps,          eps = 1/mu**2.

    Both noises vanish (sigma = g = 0), the fast drift is expansive near
    y = 0 and g = 0 is degenerate, so the standard structural inequalities
    fail; the meta block records this and probes report the violations.
    """
    return vanderpol_to_system(mu, forcing_amplitude=a, forcing_frequency=nu)


def vanderpol_to_system(
    mu: float, forcing_amplitude: float = 0.0, forcing_frequency: float = 1.0
) -> ModelSpec:
    """Build the slow-fast form of the Van der Pol oscillator (see above).

    Requires mu > 1 so that eps = 1/mu**2 < 1; values of mu barely above 1
    are accepted with a recorded warning since the scale separation is then
    nominal only.
    """
    if not (mu > 1.0):
        raise ModelError(f"mu must exceed 1 (eps = 1/mu**2 must be < 1), got mu={mu}")
    eps = 1.0 / float(mu) ** 2
    a = float(forcing_amplitude)
    nu = float(forcing_frequency)

    warn: tuple[str, ...] = (
        "fast-pair-contraction fails near y = 0 (self-excitation region)",
        "fast-ellipticity fails: g = 0 is degenerate",
    )
    if eps > 0.9:
        warn = warn + (f"epsilon = {eps:.6g} is close to 1; scale separation is nominal",)
        _warnings.warn(
            f"vanderpol: mu = {mu} gives epsilon = {eps:.6g}, close to 1; "
            "scale separation is nominal",
            stacklevel=2,
        )

    def f(t, x, y):
        if a == 0.0:
            return -y
        return a * math.sin(2.0 * math.pi * nu * t) - y

    def B(x, y):
        yv = y[..., 0]
        return (x[..., 0] - yv**3 / 3.0 + yv)[..., None]

    return ModelSpec(
        model_id="vanderpol",
        d1=1,
        d2=1,
        f=f,
        sigma=_const_matrix(0.0, 1),
        B=B,
        g=_const_matrix(0.0, 1),
        scales=ScaleExponents(alpha=0.5, beta=0.0, gamma=0.5, epsilon=eps),
        meta=AssumptionMeta(
            eta=1.0,
            theta=4.0,
            theta1=1.0,
            theta2=1.0,
            kappa2=1.0,
            K1=40.0,
            K3=1.0,
            K6=1.0 + a,
            K7=0.0,
            M=1.0,
            L_sigma=0.0,
            L_g=0.0,
            extras={"C_f": 1.0},
            warnings=warn,
        ),
        b=None,
        fast_drift_poly=lambda x: np.array([x[0], 1.0, 0.0, -1.0 / 3.0]),
        sigma_is_constant=True,
        g_is_constant=True,
        f_is_time_dependent=a != 0.0,
        forcing_frequencies=(2.0 * math.pi * nu,) if a != 0.0 else (),
        params={"mu": float(mu), "a": a, "nu": nu},
    )


# ---------------------------------------------------------------------------
# assumption probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    assumption_id: str
    n_points: int
    n_pass: int
    n_fail: int
    worst_margin: float
    witness: dict[str, float] | None
    vacuous: bool
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.n_fail == 0


def _sample_cloud(dim: int, n_points: int, lo: float, hi: float, seed: int) -> np.ndarray:
    """Half scrambled-Sobol, half uniform points in the box [lo, hi]**dim."""
    if n_points == 0:
        return np.empty((0, dim))
    n_lds = n_points // 2
    n_uni = n_points - n_lds
    parts = []
    if n_lds:
        sob = _qmc.Sobol(d=dim, scramble=True, seed=seed)
        # Draw the next power of two and slice: Sobol wants 2**m draws.
        pts = sob.random_base2(max(1, (n_lds - 1).bit_length()))[:n_lds]
        parts.append(lo + (hi - lo) * pts)
    if n_uni:
        rng = np.random.Generator(np.random.Philox(key=[seed, 0xA5], counter=[0, 0, 0, 0]))
        parts.append(rng.uniform(lo, hi, size=(n_uni, dim)))
    return np.concatenate(parts, axis=0)


def _hs_norm_sq(mat: np.ndarray) -> np.ndarray:
    return np.sum(mat**2, axis=(-2, -1))


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sum(u * v, axis=-1)


def _norm(u: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(u**2, axis=-1))


_TIME_BOX = (0.0, 20.0)


def _split_columns(pts: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    out = []
    at = 0
    for w in widths:
        out.append(pts[:, at : at + w])
        at += w
    return out


def _probe_margins(model: ModelSpec, assumption_id: str, pts_unit: np.ndarray):
    """Return (margins, witness_builder) for the given assumption.

    ``pts_unit`` holds points in [0, 1]**k; each branch maps the columns it
    needs onto the state (and time) box.  Margins are lhs - rhs of the
    declared inequality, so nonpositive means the inequality holds there.
    """
    meta = model.meta
    d1, d2 = model.d1, model.d2

    def box(cols: np.ndarray, lo: float, hi: float) -> np.ndarray:
        return lo + (hi - lo) * cols

    lo, hi = -5.0, 5.0
    t_lo, t_hi = _TIME_BOX

    if assumption_id == "fast-dissipativity":
        c = meta.require(assumption_id, "eta", "eta_prime", "theta", "K1")
        x, y = _split_columns(pts_unit, [d1, d2])
        x = box(x, lo, hi)
        y = box(y, lo, hi)
        lhs = 2.0 * _dot(model.B(x, y), y) + _hs_norm_sq(model.g(x, y))
        ny = _norm(y)
        rhs = -c["eta"] * ny**2 - c["eta_prime"] * ny ** c["theta"] + c["K1"]
        margins = lhs - rhs
        if model.b is not None:
            cb = meta.require(assumption_id, "eta_tilde", "K1")
            lhs_b = 2.0 * _dot(model.b(x, y), y)
            rhs_b = cb["eta_tilde"] * ny**2 + cb["K1"]
            margins = np.maximum(margins, lhs_b - rhs_b)

        def witness(i):
            return {"x": x[i].tolist(), "y": y[i].tolist()}

        return margins, witness

    if assumption_id == "fast-ellipticity":
        c = meta.require(assumption_id, "K2")
        x, y = _split_columns(pts_unit, [d1, d2])
        x = box(x, lo, hi)
        y = box(y, lo, hi)
        gmat = np.asarray(model.g(x, y))
        a = 0.5 * gmat @ np.swapaxes(gmat, -1, -2)
        eig = np.linalg.eigvalsh(a)
        margins = np.maximum(eig[..., -1] - c["K2"], 1.0 / c["K2"] - eig[..., 0])

        def witness(i):
            return {"x": x[i].tolist(), "y": y[i].tolist()}

        return margins, witness

    if assumption_id == "fast-pair-contraction":
        c = meta.require(assumption_id, "eta")
        x, y1, y2 = _split_columns(pts_unit, [d1, d2, d2])
        x = box(x, lo, hi)
        y1 = box(y1, lo, hi)
        y2 = box(y2, lo, hi)
        diff = y1 - y2
        lhs = 2.0 * _dot(model.B(x, y1) - model.B(x, y2), diff) + _hs_norm_sq(
            model.g(x, y1) - model.g(x, y2)
        )
        margins = lhs + c["eta"] * _norm(diff) ** 2

        def witness(i):
            return {"x": x[i].tolist(), "y1": y1[i].tolist(), "y2": y2[i].tolist()}

        return margins, witness

    if assumption_id == "fast-g-lipschitz":
        c = meta.require(assumption_id, "L_g")
        x1, y1, x2, y2 = _split_columns(pts_unit, [d1, d2, d1, d2])
        x1, y1, x2, y2 = (box(v, lo, hi) for v in (x1, y1, x2, y2))
        lhs = np.sqrt(_hs_norm_sq(model.g(x1, y1) - model.g(x2, y2)))
        rhs = c["L_g"] * (_norm(x1 - x2) + _norm(y1 - y2))
        margins = lhs - rhs

        def witness(i):
            return {
                "x1": x1[i].tolist(),
                "y1": y1[i].tolist(),
                "x2": x2[i].tolist(),
                "y2": y2[i].tolist(),
            }

        return margins, witness

    if assumption_id == "fast-x-lipschitz":
        c = meta.require(assumption_id, "K3", "kappa2")
        x1, x2, y = _split_columns(pts_unit, [d1, d1, d2])
        x1, x2, y = (box(v, lo, hi) for v in (x1, x2, y))
        grow = 1.0 + _norm(y) ** c["kappa2"]
        dx = _norm(x1 - x2)
        margins = _norm(model.B(x1, y) - model.B(x2, y)) - c["K3"] * grow * dx
        if model.b is not None:
            c1 = meta.require(assumption_id, "K3", "kappa1")
            grow1 = 1.0 + _norm(y) ** c1["kappa1"]
            mb = _norm(model.b(x1, y) - model.b(x2, y)) - c1["K3"] * grow1 * dx
            margins = np.maximum(margins, mb)

        def witness(i):
            return {"x1": x1[i].tolist(), "x2": x2[i].tolist(), "y": y[i].tolist()}

        return margins, witness

    if assumption_id == "slow-coercivity":
        c = meta.require(assumption_id, "K4", "K5", "theta")
        t, x, y = _split_columns(pts_unit, [1, d1, d2])
        t = box(t[:, 0], t_lo, t_hi)
        x = box(x, lo, hi)
        y = box(y, lo, hi)
        margins = np.empty(len(t))
        for i in range(len(t)):
            fv = model.f(t[i], x[i : i + 1], y[i : i + 1])[0]
            sv = model.sigma(t[i], x[i : i + 1])[0]
            lhs = 2.0 * float(np.dot(fv, x[i])) + float(np.sum(sv**2))
            rhs = c["K4"] * (1.0 + float(np.dot(x[i], x[i]))) + c["K5"] * float(
                np.dot(y[i], y[i])
            ) ** (c["theta"] / 2.0)
            margins[i] = lhs - rhs

        def witness(i):
            return {"t": float(t[i]), "x": x[i].tolist(), "y": y[i].tolist()}

        return margins, witness

    if assumption_id == "slow-dissipativity":
        c = meta.require(assumption_id, "lambda1", "K4", "K5", "theta")
        t, x, y = _split_columns(pts_unit, [1, d1, d2])
        t = box(t[:, 0], t_lo, t_hi)
        x = box(x, lo, hi)
        y = box(y, lo, hi)
        margins = np.empty(len(t))
        for i in range(len(t)):
            fv = model.f(t[i], x[i : i + 1], y[i : i + 1])[0]
            sv = model.sigma(t[i], x[i : i + 1])[0]
            lhs = 2.0 * float(np.dot(fv, x[i])) + float(np.sum(sv**2))
            rhs = (
                -c["lambda1"] * float(np.dot(x[i], x[i]))
                + c["K5"] * float(np.dot(y[i], y[i])) ** (c["theta"] / 2.0)
                + c["K4"]
            )
            margins[i] = lhs - rhs

        def witness(i):
            return {"t": float(t[i]), "x": x[i].tolist(), "y": y[i].tolist()}

        return margins, witness

    if assumption_id == "slow-pair-dissipativity":
        c = meta.require(assumption_id, "lambda1", "lambda2")
        t, x1, y1, x2, y2 = _split_columns(pts_unit, [1, d1, d2, d1, d2])
        t = box(t[:, 0], t_lo, t_hi)
        x1, y1, x2, y2 = (box(v, lo, hi) for v in (x1, y1, x2, y2))
        margins = np.empty(len(t))
        for i in range(len(t)):
            df = model.f(t[i], x1[i : i + 1], y1[i : i + 1])[0] - model.f(
                t[i], x2[i : i + 1], y2[i : i + 1]
            )[0]
            ds = model.sigma(t[i], x1[i : i + 1])[0] - model.sigma(t[i], x2[i : i + 1])[0]
            dx = x1[i] - x2[i]
            dy = y1[i] - y2[i]
            lhs = 2.0 * float(np.dot(df, dx)) + float(np.sum(ds**2))
            rhs = -c["lambda1"] * float(np.dot(dx, dx)) + c["lambda2"] * float(np.dot(dy, dy))
            margins[i] = lhs - rhs

        def witness(i):
            return {
                "t": float(t[i]),
                "x1": x1[i].tolist(),
                "y1": y1[i].tolist(),
                "x2": x2[i].tolist(),
                "y2": y2[i].tolist(),
            }

        return margins, witness

    if assumption_id == "slow-local-monotonicity":
        c = meta.require(assumption_id, "M", "theta2")
        t, x1, x2, y = _split_columns(pts_unit, [1, d1, d1, d2])
        t = box(t[:, 0], t_lo, t_hi)
        x1, x2, y = (box(v, lo, hi) for v in (x1, x2, y))
        margins = np.empty(len(t))
        for i in range(len(t)):
            df = model.f(t[i], x1[i : i + 1], y[i : i + 1])[0] - model.f(
                t[i], x2[i : i + 1], y[i : i + 1]
            )[0]
            dx = x1[i] - x2[i]
            lhs = float(np.dot(df, dx))
            rhs = c["M"] * (1.0 + float(np.dot(y[i], y[i])) ** (c["theta2"] / 2.0)) * float(
                np.dot(dx, dx)
            )
            margins[i] = lhs - rhs

        def witness(i):
            return {"t": float(t[i]), "x1": x1[i].tolist(), "x2": x2[i].tolist(), "y": y[i].tolist()}

        return margins, witness

    if assumption_id == "slow-y-lipschitz":
        c = meta.require(assumption_id, "C_f", "theta2")
        t, x, y1, y2 = _split_columns(pts_unit, [1, d1, d2, d2])
        t = box(t[:, 0], t_lo, t_hi)
        x, y1, y2 = (box(v, lo, hi) for v in (x, y1, y2))
        margins = np.empty(len(t))
        for i in range(len(t)):
            df = model.f(t[i], x[i : i + 1], y1[i : i + 1])[0] - model.f(
                t[i], x[i : i + 1], y2[i : i + 1]
            )[0]
            n1 = float(np.dot(y1[i], y1[i])) ** 0.5
            n2 = float(np.dot(y2[i], y2[i])) ** 0.5
            grow = 1.0 + n1 ** c["theta2"] + n2 ** c["theta2"]
            margins[i] = float(np.dot(df, df)) ** 0.5 - c["C_f"] * grow * float(
                np.dot(y1[i] - y2[i], y1[i] - y2[i])
            ) ** 0.5

        def witness(i):
            return {"t": float(t[i]), "x": x[i].tolist(), "y1": y1[i].tolist(), "y2": y2[i].tolist()}

        return margins, witness

    if assumption_id == "slow-sigma-lipschitz":
        c = meta.require(assumption_id, "L_sigma", "K7")
        t, x1, x2 = _split_columns(pts_unit, [1, d1, d1])
        t = box(t[:, 0], t_lo, t_hi)
        x1, x2 = (box(v, lo, hi) for v in (x1, x2))
        margins = np.empty(len(t))
        for i in range(len(t)):
            ds = model.sigma(t[i], x1[i : i + 1])[0] - model.sigma(t[i], x2[i : i + 1])[0]
            lip = float(np.sum(ds**2)) ** 0.5 - c["L_sigma"] * float(
                np.dot(x1[i] - x2[i], x1[i] - x2[i])
            ) ** 0.5
            origin = float(np.sum(model.sigma(t[i], np.zeros((1, d1)))[0] ** 2)) ** 0.5 - c["K7"]
            margins[i] = max(lip, origin)

        def witness(i):
            return {"t": float(t[i]), "x1": x1[i].tolist(), "x2": x2[i].tolist()}

        return margins, witness

    if assumption_id == "intermediate-lipschitz":
        if model.b is None:
            raise ModelError(
                "probe of 'intermediate-lipschitz' requires the model to declare "
                "an intermediate drift b"
            )
        c = meta.require(assumption_id, "L_b")
        x1, y1, x2, y2 = _split_columns(pts_unit, [d1, d2, d1, d2])
        x1, y1, x2, y2 = (box(v, lo, hi) for v in (x1, y1, x2, y2))
        lhs = _norm(model.b(x1, y1) - model.b(x2, y2))
        rhs = c["L_b"] * (_norm(x1 - x2) + _norm(y1 - y2))
        margins = lhs - rhs

        def witness(i):
            return {
                "x1": x1[i].tolist(),
                "y1": y1[i].tolist(),
                "x2": x2[i].tolist(),
                "y2": y2[i].tolist(),
            }

        return margins, witness

    raise ModelError(
        f"unsupported assumption id '{assumption_id}'; supported ids: "
        "fast-dissipativity, fast-ellipticity, fast-pair-contraction, "
        "fast-g-lipschitz, fast-x-lipschitz, slow-coercivity, "
        "slow-dissipativity, slow-pair-dissipativity, slow-local-monotonicity, "
        "slow-y-lipschitz, slow-sigma-lipschitz, intermediate-lipschitz"
    )


_PROBE_DIMS: dict[str, Callable[[int, int], int]] = {
    "fast-dissipativity": lambda d1, d2: d1 + d2,
    "fast-ellipticity": lambda d1, d2: d1 + d2,
    "fast-pair-contraction": lambda d1, d2: d1 + 2 * d2,
    "fast-g-lipschitz": lambda d1, d2: 2 * (d1 + d2),
    "fast-x-lipschitz": lambda d1, d2: 2 * d1 + d2,
    "slow-coercivity": lambda d1, d2: 1 + d1 + d2,
    "slow-dissipativity": lambda d1, d2: 1 + d1 + d2,
    "slow-pair-dissipativity": lambda d1, d2: 1 + 2 * (d1 + d2),
    "slow-local-monotonicity": lambda d1, d2: 1 + 2 * d1 + d2,
    "slow-y-lipschitz": lambda d1, d2: 1 + d1 + 2 * d2,
    "slow-sigma-lipschitz": lambda d1, d2: 1 + 2 * d1,
    "intermediate-lipschitz": lambda d1, d2: 2 * (d1 + d2),
}


def supported_assumptions() -> tuple[str, ...]:
    """Identifiers accepted by :func:`probe_assumption`."""
    return tuple(_PROBE_DIMS)


def probe_assumption(
    model: ModelSpec,
    assumption_id: str,
    n_points: int = 10_000,
    seed: int = 0,
) -> ProbeReport:
    """Sample the state box [-5, 5]^(d1+d2) and test a declared inequality.

    Half the points come from a scrambled low-discrepancy sequence, half are
    uniform.  The report carries pass/fail counts, the worst margin
    (lhs - rhs, nonpositive everywhere means the inequality held at every
    sampled point) and a witness for the worst violation.  ``n_points = 0``
    yields a vacuous pass explicitly flagged as carrying no evidence.
    """
    if assumption_id not in _PROBE_DIMS:
        # Trigger the informative unsupported-id error.
        _probe_margins(model, assumption_id, np.empty((0, 1)))
    if n_points < 0:
        raise ModelError(f"n_points must be nonnegative, got {n_points}")
    if n_points == 0:
        return ProbeReport(
            assumption_id=assumption_id,
            n_points=0,
            n_pass=0,
            n_fail=0,
            worst_margin=float("-inf"),
            witness=None,
            vacuous=True,
            note="no sample points: vacuous pass, no evidence",
        )
    dim = _PROBE_DIMS[assumption_id](model.d1, model.d2)
    pts = _sample_cloud(dim, n_points, 0.0, 1.0, seed)
    margins, witness_at = _probe_margins(model, assumption_id, pts)
    margins = np.asarray(margins, dtype=float)
    scale = 1.0 + np.abs(margins)
    fail_mask = margins > 1e-9 * scale
    n_fail = int(np.count_nonzero(fail_mask))
    worst_idx = int(np.argmax(margins))
    witness = witness_at(worst_idx) if n_fail else None
    return ProbeReport(
        assumption_id=assumption_id,
        n_points=n_points,
        n_pass=n_points - n_fail,
        n_fail=n_fail,
        worst_margin=float(margins[worst_idx]),
        witness=witness,
        vacuous=False,
    )
