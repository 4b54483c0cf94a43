"""Built-in dynamic systems and observation models behind one ModelSpec.

Ships the three published benchmark systems (SIR epidemic with Poisson
removal counts, melt-phase nylon polycondensation, the Dow catalyzed
batch-reactor DAE) plus small synthetic testbeds with closed-form
behavior used by the estimability and profile acceptance checks.

All dynamic models start at t = 0.  A model is "static" when it has no
vector field; its observation means are computed directly from the
parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Optional

import numpy as np

from .integrate import (
    IntegrationError,
    IntegratorConfig,
    RootSolveError,
    adaptive_integrate,
    rk4_integrate,
    solve_scalar_root,
)

__all__ = [
    "ModelEvalError",
    "ExperimentContext",
    "ModelSpec",
    "sir_rhs",
    "nylon_coefficients",
    "nylon_rhs",
    "dow_algebraic",
    "dow_rhs",
    "solve_states",
    "simulate",
    "build_model",
    "available_models",
    "register_model",
]

GAS_CONSTANT = 8.3145e-3
NYLON_REF_TEMP = 549.15
DOW_REF_TEMP = 340.15
MASS_TRANSFER_COEF = 24.3

_EXP_OVERFLOW = 700.0


class ModelEvalError(RuntimeError):
    """Model evaluation left its numeric domain (overflow, no root, ...)."""


@dataclass(frozen=True)
class ExperimentContext:
    """Per-experiment fixed quantities (temperature, catalyst load, ...).

    ``init_params`` maps a state name to the parameter supplying that
    state's initial value for this experiment, for models whose initial
    conditions are estimated.
    """

    id: str
    conditions: Mapping[str, float] = dc_field(default_factory=dict)
    init_params: Mapping[str, str] = dc_field(default_factory=dict)

    def require(self, name: str) -> float:
        if name not in self.conditions:
            raise ValueError(f"experiment {self.id!r} is missing condition {name!r}")
        return float(self.conditions[name])


@dataclass(frozen=True)
class ModelSpec:
    """A dynamic system plus its observation model.

    ``field_factory(params, ctx)`` returns the derivative function
    ``f(t, y)`` with all per-evaluation constants folded in; it is None
    for static models.  ``observe_fn(times, states, params, ctx)`` maps a
    solved trajectory (states is None for static models) to predicted
    observation means per observable variable.
    """

    name: str
    state_names: tuple
    param_names: tuple
    observed: tuple
    obs_model: str  # "gaussian" or "poisson"
    observe_fn: Callable
    discrete_param_names: tuple = ()
    constants: Mapping[str, float] = dc_field(default_factory=dict)
    positive_params: frozenset = frozenset()
    field_factory: Optional[Callable] = None
    init_fn: Optional[Callable] = None
    obs_variance_fn: Optional[Callable] = None
    domain_fn: Optional[Callable] = None
    default_integrator: IntegratorConfig = IntegratorConfig(method="fixed_rk4", step=0.1)
    kernel: Optional[str] = None
    require_nonneg_states: bool = False
    registry_name: Optional[str] = None
    build_config: Optional[dict] = None

    def __post_init__(self):
        if self.obs_model not in ("gaussian", "poisson"):
            raise ValueError(f"unknown obs_model {self.obs_model!r}")
        if self.obs_model == "gaussian" and self.obs_variance_fn is None:
            raise ValueError("gaussian models need an obs_variance_fn")
        overlap = set(self.param_names) & set(self.discrete_param_names)
        if overlap:
            raise ValueError(f"parameters declared both continuous and discrete: {sorted(overlap)}")

    @property
    def is_static(self) -> bool:
        return self.field_factory is None

    @property
    def all_param_names(self) -> tuple:
        return tuple(self.param_names) + tuple(self.discrete_param_names)

    def check_domain(self, params: Mapping[str, float]) -> bool:
        if self.domain_fn is None:
            return True
        return bool(self.domain_fn(params))


# ---------------------------------------------------------------------------
# SIR epidemic model


def sir_rhs(state, beta: float, alpha: float):
    """(dS, dI, dR) for the susceptible/infectious/removed system."""
    s, i, _ = state
    infection = beta * s * i
    removal = alpha * i
    return (-infection, infection - removal, removal)


def _build_sir(config: dict) -> ModelSpec:
    n_pop = float(config.get("N", 261.0))
    step = float(config.get("step", 0.2))

    def field_factory(params, ctx):
        beta = params["beta"]
        alpha = params["alpha"]

        def field(t, y):
            return sir_rhs(y, beta, alpha)

        return field

    def init_fn(params, ctx):
        i0 = float(params["I0"])
        if not 1.0 <= i0 <= n_pop:
            raise ModelEvalError(f"I0={i0:g} outside [1, N={n_pop:g}]")
        return [n_pop - i0, i0, 0.0]

    def observe_fn(times, states, params, ctx):
        return {"R": states[:, 2]}

    def domain_fn(params):
        return params["beta"] > 0 and params["alpha"] > 0 and 1.0 <= params["I0"] <= n_pop

    return ModelSpec(
        name="sir",
        state_names=("S", "I", "R"),
        param_names=("beta", "alpha"),
        discrete_param_names=("I0",),
        observed=("R",),
        obs_model="poisson",
        constants={"N": n_pop},
        positive_params=frozenset({"beta", "alpha"}),
        field_factory=field_factory,
        init_fn=init_fn,
        observe_fn=observe_fn,
        domain_fn=domain_fn,
        default_integrator=IntegratorConfig(method="fixed_rk4", step=step),
        kernel="sir",
    )


# ---------------------------------------------------------------------------
# Nylon polycondensation model


def nylon_coefficients(params: Mapping[str, float], temp: float, w_eq: float):
    """Rate and equilibrium coefficients (kp, Ka, g) at reactor temperature.

    Raises ModelEvalError on exponential overflow, which the likelihood
    maps to -inf.
    """
    if not temp > 0:
        raise ValueError("temperature must be positive")
    inv_diff = 1.0 / temp - 1.0 / NYLON_REF_TEMP
    kp_exp = -(params["E"] / GAS_CONSTANT) * inv_diff
    if kp_exp > _EXP_OVERFLOW:
        raise ModelEvalError("overflow in kp exponential")
    kp = params["kp0"] * 1e-3 * math.exp(kp_exp)

    g_exp = params["alpha"] + 1e3 * params["beta"] / temp
    if g_exp > _EXP_OVERFLOW:
        raise ModelEvalError("overflow in g exponential")
    g = math.exp(g_exp) if g_exp > -_EXP_OVERFLOW else 0.0

    den_exp = (9.624 - 3613.0 / temp) + (params["H"] / GAS_CONSTANT) * inv_diff
    if abs(den_exp) > _EXP_OVERFLOW:
        raise ModelEvalError("overflow in Ka exponential")
    ka = 20.97 * (1.0 + g * w_eq) * params["Ka0"] / math.exp(den_exp)
    return kp, ka, g


def nylon_rhs(state, params: Mapping[str, float], ctx: ExperimentContext):
    """(dL, dA, dC, dW): reversible condensation plus water mass transfer.

    dA/dt = dC/dt = -dL/dt holds structurally (one shared rate value).
    """
    temp = ctx.require("T")
    w_eq = ctx.require("Weq")
    kp, ka, _ = nylon_coefficients(params, temp, w_eq)
    return _nylon_rhs_inner(state, kp, ka, w_eq)


def _nylon_rhs_inner(state, kp, ka, w_eq):
    link, amine, carboxyl, water = state
    if ka == 0.0:
        raise ModelEvalError("Ka is zero; equilibrium term undefined")
    rate = kp * (carboxyl * amine - link * water / ka)
    return (rate, -rate, -rate, rate - MASS_TRANSFER_COEF * (water - w_eq))


def _build_nylon(config: dict) -> ModelSpec:
    experiment_ids = tuple(config.get("experiments", ("e1",)))
    init_names = []
    for exp in experiment_ids:
        init_names += [f"A0_{exp}", f"C0_{exp}", f"W0_{exp}"]
    param_names = ("kp0", "E", "alpha", "beta", "Ka0", "H", "sigmaA2", "sigmaC2", *init_names)

    def field_factory(params, ctx):
        temp = ctx.require("T")
        w_eq = ctx.require("Weq")
        kp, ka, _ = nylon_coefficients(params, temp, w_eq)
        if ka == 0.0:
            raise ModelEvalError("Ka is zero; equilibrium term undefined")

        def field(t, y):
            return _nylon_rhs_inner(y, kp, ka, w_eq)

        return field

    def init_fn(params, ctx):
        names = {s: ctx.init_params.get(s, f"{s}0_{ctx.id}") for s in ("A", "C", "W")}
        a0 = float(params[names["A"]])
        c0 = float(params[names["C"]])
        w0 = float(params[names["W"]])
        link_total = ctx.require("link_total")
        l0 = link_total - a0
        if min(a0, c0, w0) <= 0 or l0 < 0:
            raise ModelEvalError(f"invalid initial concentrations for experiment {ctx.id!r}")
        return [l0, a0, c0, w0]

    def observe_fn(times, states, params, ctx):
        return {"A": states[:, 1], "C": states[:, 2]}

    def obs_variance_fn(var, params, ctx):
        return params["sigmaA2"] if var == "A" else params["sigmaC2"]

    def domain_fn(params):
        if params["sigmaA2"] <= 0 or params["sigmaC2"] <= 0:
            return False
        return all(params[name] > 0 for name in init_names)

    return ModelSpec(
        name="nylon",
        state_names=("L", "A", "C", "W"),
        param_names=param_names,
        observed=("A", "C"),
        obs_model="gaussian",
        positive_params=frozenset({"sigmaA2", "sigmaC2", *init_names}),
        field_factory=field_factory,
        init_fn=init_fn,
        observe_fn=observe_fn,
        obs_variance_fn=obs_variance_fn,
        domain_fn=domain_fn,
        default_integrator=IntegratorConfig(method="adaptive"),
        require_nonneg_states=True,
    )


# ---------------------------------------------------------------------------
# Dow catalyzed batch-reactor DAE


def dow_algebraic(y_diff, params: Mapping[str, float]):
    """Close the algebraic half of the DAE: (y7, y8, y9, y10).

    y7 solves a scalar equation (unique on the admissible domain where
    every theta_i + y7 stays positive); the other three follow directly.
    """
    theta7 = params["theta7"]
    theta8 = params["theta8"]
    theta9 = params["theta9"]
    if min(theta7, theta8, theta9) <= 0:
        raise ModelEvalError("theta parameters must be positive")
    y1, _, y3, _, y5, y6 = y_diff
    q_plus = params["Q"]

    def residual(y7):
        return (
            y7
            + q_plus
            - y6
            - theta8 * y1 / (theta8 + y7)
            - theta9 * y3 / (theta9 + y7)
            - theta7 * y5 / (theta7 + y7)
        )

    theta_min = min(theta7, theta8, theta9)
    lo = -theta_min + 1e-12 * max(1.0, theta_min)
    hi = max(1.0, abs(y6) + abs(q_plus) + abs(y1) + abs(y3) + abs(y5))
    r_lo = residual(lo)
    if r_lo > 0:
        raise ModelEvalError(
            f"no admissible catalyst balance root: residual positive at domain edge (state={list(y_diff)}, Q={q_plus})"
        )
    for _ in range(200):
        if residual(hi) > 0:
            break
        hi = lo + 2.0 * (hi - lo)
    else:
        raise ModelEvalError(f"failed to bracket catalyst balance root (state={list(y_diff)}, Q={q_plus})")
    y7 = solve_scalar_root(residual, (lo, hi), tol=1e-12)
    if abs(residual(y7)) > 1e-10:
        raise ModelEvalError(f"catalyst balance residual {residual(y7):.3e} above tolerance at y7={y7:g}")
    y8 = theta8 * y1 / (theta8 + y7)
    y9 = theta9 * y3 / (theta9 + y7)
    y10 = theta7 * y5 / (theta7 + y7)
    return y7, y8, y9, y10


def dow_rhs(state, params: Mapping[str, float], ctx: ExperimentContext):
    """Derivatives of the six differential components, Eq of the DAE."""
    rates = _dow_rates(params, ctx)
    return _dow_rhs_inner(state, rates, params)


def _dow_rates(params, ctx):
    if "k1" in params:
        return params["k1"], params["k2"], params["k3"]
    temp = ctx.require("T")
    inv_diff = 1.0 / temp - 1.0 / DOW_REF_TEMP
    out = []
    for base, act in (("k10", "E1"), ("k20", "E2"), ("k30", "E3")):
        ex = -params[act] * inv_diff
        if ex > _EXP_OVERFLOW:
            raise ModelEvalError(f"overflow in {base} temperature relation")
        out.append(params[base] * math.exp(ex))
    return tuple(out)


def _dow_rhs_inner(state, rates, params):
    k1, k2, k3 = rates
    y1, y2, y3, y4, y5, y6 = state
    _, y8, y9, y10 = dow_algebraic(state, params)
    return (
        -k2 * y8 * y2,
        -k1 * y6 * y2 + k3 * y10 - k2 * y8 * y2,
        -k2 * y8 * y2 + k1 * y6 * y4 - 0.5 * k3 * y9,
        -k1 * y6 * y4 + 0.5 * k3 * y9,
        k1 * y6 * y2 - k3 * y10,
        -k1 * (y6 * y2 + y6 * y4) + k3 * (y10 + 0.5 * y9),
    )


def _build_dow(config: dict, structural: bool) -> ModelSpec:
    sigma2 = float(config.get("sigma2", 1e-4))
    if structural:
        param_names = ("k10", "k20", "k30", "E1", "E2", "E3", "theta7", "theta8", "theta9")
        positive = frozenset({"k10", "k20", "k30", "theta7", "theta8", "theta9"})
    else:
        param_names = ("k1", "k2", "k3", "theta7", "theta8", "theta9")
        positive = frozenset(param_names)

    def field_factory(params, ctx):
        rates = _dow_rates(params, ctx)
        full = dict(params)
        full["Q"] = ctx.require("Q")

        def field(t, y):
            return _dow_rhs_inner(y, rates, full)

        return field

    def init_fn(params, ctx):
        return [ctx.require(f"y{i}_0") for i in range(1, 7)]

    def observe_fn(times, states, params, ctx):
        return {f"y{i}": states[:, i - 1] for i in range(1, 5)}

    def obs_variance_fn(var, params, ctx):
        return sigma2

    def domain_fn(params):
        return all(params[name] > 0 for name in positive)

    return ModelSpec(
        name="dow_structural" if structural else "dow",
        state_names=tuple(f"y{i}" for i in range(1, 7)),
        param_names=param_names,
        observed=("y1", "y2", "y3", "y4"),
        obs_model="gaussian",
        constants={"sigma2": sigma2},
        positive_params=positive,
        field_factory=field_factory,
        init_fn=init_fn,
        observe_fn=observe_fn,
        obs_variance_fn=obs_variance_fn,
        domain_fn=domain_fn,
        default_integrator=IntegratorConfig(method="adaptive"),
    )


# ---------------------------------------------------------------------------
# Synthetic testbeds with closed-form behavior


def _build_conjugate_normal(config: dict) -> ModelSpec:
    sigma2 = float(config.get("sigma2", 1.0))

    def observe_fn(times, states, params, ctx):
        return {"y": np.full(len(times), float(params["theta"]))}

    return ModelSpec(
        name="conjugate_normal",
        state_names=(),
        param_names=("theta",),
        observed=("y",),
        obs_model="gaussian",
        constants={"sigma2": sigma2},
        observe_fn=observe_fn,
        obs_variance_fn=lambda var, params, ctx: sigma2,
    )


def _build_sum_model(config: dict) -> ModelSpec:
    sigma2 = float(config.get("sigma2", 1.0))

    def observe_fn(times, states, params, ctx):
        return {"y": np.full(len(times), float(params["a"] + params["b"]))}

    return ModelSpec(
        name="sum_model",
        state_names=(),
        param_names=("a", "b"),
        observed=("y",),
        obs_model="gaussian",
        constants={"sigma2": sigma2},
        observe_fn=observe_fn,
        obs_variance_fn=lambda var, params, ctx: sigma2,
    )


def _build_ratio_model(config: dict) -> ModelSpec:
    sigma2 = float(config.get("sigma2", 0.0025))

    def observe_fn(times, states, params, ctx):
        decay = params["a"] / params["b"]
        return {"y": np.exp(-decay * np.asarray(times, dtype=float))}

    return ModelSpec(
        name="ratio_model",
        state_names=(),
        param_names=("a", "b"),
        observed=("y",),
        obs_model="gaussian",
        constants={"sigma2": sigma2},
        positive_params=frozenset({"a", "b"}),
        observe_fn=observe_fn,
        obs_variance_fn=lambda var, params, ctx: sigma2,
        domain_fn=lambda params: params["a"] > 0 and params["b"] > 0,
    )


def _build_normal_locations(config: dict) -> ModelSpec:
    """Independent Gaussian location streams; one mean is integer-valued.

    The likelihood is exactly Gaussian in the continuous means, so the
    asymptotic-normal approximation used for joint confidence regions is
    exact here — the calibration testbed for the profile machinery.
    """
    variances = {f"v{i}": float(v) for i, v in enumerate(config.get("variances", (1.0, 1.0, 1.0, 1.0)), start=1)}

    def observe_fn(times, states, params, ctx):
        n = len(times)
        return {
            "v1": np.full(n, float(params["m1"])),
            "v2": np.full(n, float(params["m2"])),
            "v3": np.full(n, float(params["m3"])),
            "v4": np.full(n, float(params["d"])),
        }

    return ModelSpec(
        name="normal_locations",
        state_names=(),
        param_names=("m1", "m2", "m3"),
        discrete_param_names=("d",),
        observed=("v1", "v2", "v3", "v4"),
        obs_model="gaussian",
        constants={f"var_{k}": v for k, v in variances.items()},
        observe_fn=observe_fn,
        obs_variance_fn=lambda var, params, ctx: variances[var],
    )


# ---------------------------------------------------------------------------
# Registry and simulation

_REGISTRY = {
    "sir": _build_sir,
    "nylon": _build_nylon,
    "dow": lambda cfg: _build_dow(cfg, structural=False),
    "dow_structural": lambda cfg: _build_dow(cfg, structural=True),
    "conjugate_normal": _build_conjugate_normal,
    "sum_model": _build_sum_model,
    "ratio_model": _build_ratio_model,
    "normal_locations": _build_normal_locations,
}


def register_model(name: str, builder: Callable):
    if name in _REGISTRY:
        raise ValueError(f"model {name!r} already registered")
    _REGISTRY[name] = builder


def available_models() -> tuple:
    return tuple(sorted(_REGISTRY))


def build_model(name: str, config: Optional[dict] = None) -> ModelSpec:
    """Instantiate a registered model; the result can be rebuilt anywhere
    from (registry_name, build_config), which the parallel grid runner
    relies on."""
    if name not in _REGISTRY:
        raise ValueError(f"unknown model {name!r}; available: {', '.join(available_models())}")
    config = dict(config or {})
    spec = _REGISTRY[name](config)
    return _with_build_info(spec, name, config)


def _with_build_info(spec: ModelSpec, name: str, config: dict) -> ModelSpec:
    import dataclasses

    return dataclasses.replace(spec, registry_name=name, build_config=config)


def solve_states(model: ModelSpec, theta: Mapping[str, float], ctx: ExperimentContext, times, integ: Optional[IntegratorConfig] = None):
    """State rows at the requested times (None for a static model).

    All dynamic models start at t = 0; a leading grid point is inserted
    when the first requested time is later.
    """
    if model.is_static:
        return None
    integ = integ or model.default_integrator
    t_req = np.asarray(times, dtype=float)
    x0 = model.init_fn(theta, ctx)
    field = model.field_factory(theta, ctx)
    if integ.method == "fixed_rk4":
        grid = t_req if t_req[0] == 0.0 else np.concatenate(([0.0], t_req))
        traj = rk4_integrate(field, x0, grid, integ.step)
        return traj.states if t_req[0] == 0.0 else traj.states[1:]
    traj = adaptive_integrate(
        field, x0, (0.0, float(t_req[-1])), t_req,
        rtol=integ.rtol, atol=integ.atol, max_steps=integ.max_steps,
    )
    return traj.states


def simulate(model: ModelSpec, theta: Mapping[str, float], experiments, times, integ: Optional[IntegratorConfig] = None):
    """Predicted observation means per experiment.

    ``times`` is either one array applied to every experiment or a dict
    keyed by experiment id.  Returns {experiment id: {variable: means}}.
    """
    missing = [p for p in model.all_param_names if p not in theta]
    if missing:
        raise ValueError(f"theta is missing parameters: {missing}")
    out = {}
    for ctx in experiments:
        t_req = np.asarray(times[ctx.id] if isinstance(times, dict) else times, dtype=float)
        if t_req.ndim != 1 or t_req.size == 0:
            raise ValueError(f"experiment {ctx.id!r} needs a nonempty 1-d time array")
        try:
            states = solve_states(model, theta, ctx, t_req, integ)
            out[ctx.id] = model.observe_fn(t_req, states, theta, ctx)
        except (IntegrationError, RootSolveError, ModelEvalError) as exc:
            raise ModelEvalError(f"experiment {ctx.id!r}: {exc}") from exc
    return out
