"""Likelihood evaluation, priors, the cloned posterior target, and the
random-walk Metropolis sampler with convergence diagnostics.

Cloning is implemented as an exponent on the log likelihood (K * logL),
never by materializing copies of the data.  Positivity-constrained
parameters are sampled on the log scale with the Jacobian folded into the
sampling-space density; draws are always reported in the original space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from . import kernels, statfun
from .data import Dataset
from .integrate import IntegrationError, IntegratorConfig, RootSolveError
from .models import ExperimentContext, ModelEvalError, ModelSpec, solve_states

__all__ = [
    "NormalPrior",
    "GammaPrior",
    "PriorSet",
    "log_prior",
    "log_obs_likelihood",
    "ClonedTarget",
    "cloned_log_posterior",
    "to_sampling_space",
    "from_sampling_space",
    "Chain",
    "run_chain",
    "diagnostics",
    "summarize",
]

logger = logging.getLogger("clonestat")

_LOG_2PI = math.log(2.0 * math.pi)
_NEG_INF = float("-inf")


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("normal prior variance must be positive")

    def logpdf(self, x: float) -> float:
        return -0.5 * (_LOG_2PI + math.log(self.variance)) - 0.5 * (x - self.mean) ** 2 / self.variance

    def median(self) -> float:
        return self.mean

    def quantile(self, p: float) -> float:
        return self.mean + math.sqrt(self.variance) * statfun._norm_quantile(p)


@dataclass(frozen=True)
class GammaPrior:
    """Gamma with mean shape*scale and variance shape*scale**2."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("gamma prior shape and scale must be positive")

    def logpdf(self, x: float) -> float:
        if x <= 0:
            return _NEG_INF
        a, b = self.shape, self.scale
        return (a - 1.0) * math.log(x) - x / b - a * math.log(b) - statfun.ln_gamma(a)

    def median(self) -> float:
        return self.scale * statfun._lower_gamma_inverse(0.5, self.shape)

    def quantile(self, p: float) -> float:
        return self.scale * statfun._lower_gamma_inverse(p, self.shape)


Marginal = Union[NormalPrior, GammaPrior]


@dataclass(frozen=True)
class PriorSet:
    """Independent marginal priors, one per sampled parameter."""

    id: str
    marginals: Mapping[str, Marginal]

    @property
    def param_names(self) -> frozenset:
        return frozenset(self.marginals)

    def median_point(self) -> dict:
        out = {}
        for name, marg in self.marginals.items():
            out[name] = marg.median()
        return out


def log_prior(prior: PriorSet, theta: Mapping[str, float]) -> float:
    """Sum of marginal log densities; -inf outside support."""
    total = 0.0
    for name, marg in prior.marginals.items():
        if name not in theta:
            raise ValueError(f"theta is missing prior parameter {name!r}")
        lp = marg.logpdf(float(theta[name]))
        if lp == _NEG_INF:
            return _NEG_INF
        total += lp
    return total


# ---------------------------------------------------------------------------
# Observation likelihood


def _poisson_loglik(y: np.ndarray, mu: np.ndarray) -> float:
    total = 0.0
    for yi, mui in zip(y, mu):
        if mui < 0.0:
            if mui >= -1e-9:
                mui = 0.0
            else:
                return _NEG_INF
        if mui == 0.0:
            if yi != 0.0:
                return _NEG_INF
            continue
        total += yi * math.log(mui) - mui - statfun.ln_gamma(yi + 1.0)
    return total


def log_obs_likelihood(
    model: ModelSpec,
    data: Dataset,
    theta: Mapping[str, float],
    experiments=None,
    integrator: Optional[IntegratorConfig] = None,
) -> float:
    """Log likelihood of the dataset under theta; -inf on any failure.

    Integration failures, domain violations and overflow all map to -inf
    (with the cause logged at debug level) so that random-walk proposals
    into unstable regions are rejected rather than aborting a chain.
    """
    target = ClonedTarget(model, data, prior=None, n_clones=1, experiments=experiments, integrator=integrator)
    return target.log_obs_likelihood(theta)


class ClonedTarget:
    """Unnormalized K-cloned log posterior with optional fixed parameters.

    ``fixed`` values (e.g. a conditioned discrete parameter) are
    substituted before every evaluation; the remaining "free" parameters
    are the sampling dimensions.  ``prior`` may be None for plain
    likelihood evaluation.
    """

    def __init__(
        self,
        model: ModelSpec,
        data: Dataset,
        prior: Optional[PriorSet],
        n_clones: int = 1,
        fixed: Optional[Mapping[str, float]] = None,
        experiments=None,
        integrator: Optional[IntegratorConfig] = None,
    ):
        if n_clones < 1:
            raise ValueError("clone count must be >= 1")
        self.model = model
        self.data = data
        self.prior = prior
        self.n_clones = int(n_clones)
        self.fixed = dict(fixed or {})
        self.integrator = integrator or model.default_integrator

        unknown = [p for p in self.fixed if p not in model.all_param_names]
        if unknown:
            raise ValueError(f"fixed parameters not in model: {unknown}")
        not_fixed_discrete = [p for p in model.discrete_param_names if p not in self.fixed]
        if prior is not None and not_fixed_discrete:
            raise ValueError(
                f"discrete parameters must be conditioned on a fixed value before sampling: {not_fixed_discrete}"
            )
        self.free_names = tuple(p for p in model.param_names if p not in self.fixed)
        if prior is not None and prior.param_names != frozenset(self.free_names):
            raise ValueError(
                f"prior {prior.id!r} covers {sorted(prior.param_names)} but the free parameters are {sorted(self.free_names)}"
            )
        self.positive_mask = np.array([p in model.positive_params for p in self.free_names], dtype=bool)

        if experiments is None:
            experiments = [ExperimentContext(id=e) for e in data.experiment_ids]
        self.experiments = {ctx.id: ctx for ctx in experiments}
        missing = [e for e in data.experiment_ids if e not in self.experiments]
        if missing:
            raise ValueError(f"dataset references experiments without a context: {missing}")
        unknown_vars = data.variables - set(model.observed)
        if unknown_vars:
            raise ValueError(f"dataset contains unobservable variables: {sorted(unknown_vars)}")
        self._packed = [(exp, *data.experiment(exp)) for exp in data.experiment_ids]
        self._use_kernel = model.kernel == "sir"
        if self._use_kernel:
            # data-constant pieces of the Poisson terms, computed once
            self._kernel_data = []
            for exp, times, per_var in self._packed:
                idx, values = per_var["R"]
                obs_times = times[idx]
                lgam = np.array([statfun.ln_gamma(v + 1.0) for v in values])
                self._kernel_data.append((obs_times, values, lgam))

    # -- likelihood -------------------------------------------------------

    def _full_theta(self, theta: Mapping[str, float]) -> dict:
        full = dict(theta)
        full.update(self.fixed)
        return full

    def log_obs_likelihood(self, theta: Mapping[str, float]) -> float:
        full = self._full_theta(theta)
        if not self.model.check_domain(full):
            return _NEG_INF
        if self._use_kernel:
            return self._kernel_loglik(full)
        return self._generic_loglik(full)

    def _kernel_loglik(self, full: dict) -> float:
        total = 0.0
        n_pop = self.model.constants["N"]
        h = self.integrator.step
        for obs_times, values, lgam in self._kernel_data:
            ll = kernels.sir_log_likelihood(
                full["beta"], full["alpha"], full["I0"], n_pop, obs_times, values, lgam, h
            )
            if ll == _NEG_INF:
                return _NEG_INF
            total += ll
        return total

    def _generic_loglik(self, full: dict) -> float:
        total = 0.0
        for exp, times, per_var in self._packed:
            ctx = self.experiments[exp]
            try:
                states = solve_states(self.model, full, ctx, times, self.integrator)
                predicted = self.model.observe_fn(times, states, full, ctx)
            except (ModelEvalError, IntegrationError, RootSolveError, OverflowError) as exc:
                logger.debug("likelihood -> -inf for experiment %r: %s", exp, exc)
                return _NEG_INF
            if self.model.require_nonneg_states and states is not None and np.min(states) < -1e-9:
                logger.debug("likelihood -> -inf for experiment %r: negative state", exp)
                return _NEG_INF
            for var, (idx, values) in per_var.items():
                mu = np.asarray(predicted[var], dtype=float)[idx]
                if not np.all(np.isfinite(mu)):
                    return _NEG_INF
                if self.model.obs_model == "poisson":
                    term = _poisson_loglik(values, mu)
                    if term == _NEG_INF:
                        return _NEG_INF
                    total += term
                else:
                    var2 = self.model.obs_variance_fn(var, full, ctx)
                    if not var2 > 0:
                        return _NEG_INF
                    resid = values - mu
                    total += float(-0.5 * len(values) * (_LOG_2PI + math.log(var2)) - 0.5 * np.sum(resid * resid) / var2)
        return total

    def log_density(self, theta: Mapping[str, float]) -> float:
        """K * log likelihood + log prior at theta (free parameters)."""
        lp = 0.0
        if self.prior is not None:
            lp = log_prior(self.prior, theta)
            if lp == _NEG_INF:
                return _NEG_INF
        ll = self.log_obs_likelihood(theta)
        if ll == _NEG_INF:
            return _NEG_INF
        return self.n_clones * ll + lp

    # -- sampling-space view ----------------------------------------------

    def theta_to_vector(self, theta: Mapping[str, float]) -> np.ndarray:
        return np.array([float(theta[p]) for p in self.free_names])

    def vector_to_theta(self, vec: np.ndarray) -> dict:
        return dict(zip(self.free_names, (float(v) for v in vec)))

    def log_density_z(self, z: np.ndarray) -> float:
        theta_vec, log_jac = from_sampling_space(z, self.positive_mask)
        value = self.log_density(self.vector_to_theta(theta_vec))
        if value == _NEG_INF:
            return _NEG_INF
        return value + log_jac


def cloned_log_posterior(target: ClonedTarget, theta: Mapping[str, float]) -> float:
    """Unnormalized log of the K-cloned posterior at theta."""
    return target.log_density(theta)


# ---------------------------------------------------------------------------
# Sampling-space transform


def to_sampling_space(theta: np.ndarray, positive: np.ndarray):
    """Map positivity-constrained components to log scale.

    Returns (z, log_jacobian) where the Jacobian term is the one to add
    to the original-space log density to get the sampling-space density.
    """
    theta = np.asarray(theta, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    if np.any(theta[positive] <= 0.0):
        bad = theta[positive][theta[positive] <= 0.0]
        raise ValueError(f"positivity-constrained components must be > 0, got {bad}")
    z = theta.copy()
    z[positive] = np.log(theta[positive])
    return z, float(np.sum(z[positive]))


def from_sampling_space(z: np.ndarray, positive: np.ndarray):
    """Inverse of to_sampling_space; same (value, log_jacobian) convention."""
    z = np.asarray(z, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    theta = z.copy()
    theta[positive] = np.exp(z[positive])
    return theta, float(np.sum(z[positive]))


# ---------------------------------------------------------------------------
# Random-walk Metropolis


@dataclass
class Chain:
    """Retained draws (original parameter space) plus run metadata."""

    names: tuple
    draws: np.ndarray
    n_total: int
    n_burn: int
    acceptance_rate: float
    seed_entropy: tuple
    final_scales: np.ndarray
    diagnostics: Optional[dict] = None

    @property
    def n_retained(self) -> int:
        return self.draws.shape[0]


def run_chain(
    target: ClonedTarget,
    init: Mapping[str, float],
    n_iter: int,
    n_burn: int,
    seed,
    proposal_scale=0.5,
    adapt: bool = True,
) -> Chain:
    """Component-blocked random-walk Metropolis in sampling space.

    One iteration updates every component once (Gaussian proposal).  With
    ``adapt`` the per-component scales follow a Robbins-Monro recursion
    toward 0.44 acceptance during burn-in only, then freeze, so retained
    draws come from a fixed Markov kernel.  Identical (seed, config) give
    bitwise-identical output.
    """
    if not 0 <= n_burn < n_iter:
        raise ValueError("need 0 <= n_burn < n_iter")
    names = target.free_names
    dim = len(names)
    if dim == 0:
        raise ValueError("no free parameters to sample")

    theta0 = target.theta_to_vector(init)
    z, _ = to_sampling_space(theta0, target.positive_mask)
    log_post = target.log_density_z(z)
    if not math.isfinite(log_post):
        raise ValueError(f"target density is not finite at the initial point {dict(init)!r}")

    if np.isscalar(proposal_scale):
        scales = np.full(dim, float(proposal_scale))
    elif isinstance(proposal_scale, Mapping):
        scales = np.array([float(proposal_scale.get(p, 0.5)) for p in names])
    else:
        scales = np.asarray(proposal_scale, dtype=float).copy()
        if scales.shape != (dim,):
            raise ValueError("proposal_scale vector length must match the free parameters")
    if np.any(scales <= 0):
        raise ValueError("proposal scales must be positive")

    entropy = seed if isinstance(seed, (tuple, list)) else (int(seed),)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(list(entropy))))

    kept = np.empty((n_iter - n_burn, dim))
    accept_burn = 0
    accept_main = 0
    target_rate = 0.44
    for sweep in range(n_iter):
        adapting = adapt and sweep < n_burn
        gain = min(0.25, (sweep + 1.0) ** -0.55)
        for j in range(dim):
            step = rng.standard_normal() * scales[j]
            log_u = math.log(rng.uniform())
            z_prop = z.copy()
            z_prop[j] += step
            log_post_prop = target.log_density_z(z_prop)
            accepted = log_u < log_post_prop - log_post
            if accepted:
                z = z_prop
                log_post = log_post_prop
                if sweep < n_burn:
                    accept_burn += 1
                else:
                    accept_main += 1
            if adapting:
                scales[j] *= math.exp(gain * ((1.0 if accepted else 0.0) - target_rate))
                scales[j] = min(max(scales[j], 1e-10), 1e6)
        if sweep >= n_burn:
            theta_vec, _ = from_sampling_space(z, target.positive_mask)
            kept[sweep - n_burn] = theta_vec
    if n_burn > 0 and accept_burn == 0:
        raise RuntimeError(
            "no proposals accepted during burn-in; decrease proposal_scale (or check the target) and rerun"
        )
    rate = accept_main / float((n_iter - n_burn) * dim)
    return Chain(
        names=tuple(names),
        draws=kept,
        n_total=n_iter,
        n_burn=n_burn,
        acceptance_rate=rate,
        seed_entropy=tuple(entropy),
        final_scales=scales,
    )


def maximize_simplex(fn, x0: np.ndarray, step: float = 0.25, max_iter: int = 250, ftol: float = 1e-6) -> np.ndarray:
    """Derivative-free local maximization (Nelder-Mead) of fn(x).

    Used to polish chain starting points in sampling space; only needs to
    land in the right basin, so the iteration budget is deliberately
    small.  Deterministic given x0.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    simplex = [x0]
    for j in range(dim):
        vertex = x0.copy()
        vertex[j] += step if vertex[j] == 0 else step * max(1.0, abs(vertex[j]))
        simplex.append(vertex)
    values = [fn(v) for v in simplex]

    for _ in range(max_iter):
        order = sorted(range(dim + 1), key=lambda i: values[i], reverse=True)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if math.isfinite(values[0]) and math.isfinite(values[-1]) and values[0] - values[-1] < ftol:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_ref = fn(reflected)
        if f_ref > values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_exp = fn(expanded)
            if f_exp > f_ref:
                simplex[-1], values[-1] = expanded, f_exp
            else:
                simplex[-1], values[-1] = reflected, f_ref
        elif f_ref > values[-2]:
            simplex[-1], values[-1] = reflected, f_ref
        else:
            contracted = centroid + 0.5 * (worst - centroid)
            f_con = fn(contracted)
            if f_con > values[-1]:
                simplex[-1], values[-1] = contracted, f_con
            else:
                best = simplex[0]
                simplex = [best] + [best + 0.5 * (v - best) for v in simplex[1:]]
                values = [values[0]] + [fn(v) for v in simplex[1:]]
    best = int(np.argmax(values))
    return simplex[best]


# ---------------------------------------------------------------------------
# Diagnostics and summaries


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.size
    centered = x - x.mean()
    size = 1
    while size < 2 * n:
        size <<= 1
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    return acov

def _integrated_autocorr_time(x: np.ndarray) -> float:
    """Geyer initial-positive-sequence estimate of the autocorrelation time."""
    acov = _autocovariance(x)
    c0 = acov[0]
    if c0 <= 0.0:
        return math.nan
    rho = acov / c0
    tau = -1.0
    for m in range(rho.size // 2):
        pair = float(rho[2 * m] + rho[2 * m + 1])
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    return float(max(tau, 1e-8))


def _spectral_var_of_mean(x: np.ndarray) -> float:
    """Variance of the sample mean from the spectral density at zero."""
    tau = _integrated_autocorr_time(x)
    if math.isnan(tau):
        return math.nan
    return float(np.var(x)) * tau / x.size


def diagnostics(chain: Chain) -> dict:
    """Per-parameter Geweke z (first 10% vs last 50%) and ESS.

    A constant chain is flagged: its ESS and z are undefined.
    """
    n = chain.n_retained
    if n < 200:
        raise ValueError(f"diagnostics need at least 200 retained draws, got {n}")
    out = {}
    for j, name in enumerate(chain.names):
        x = chain.draws[:, j]
        if np.all(x == x[0]):
            out[name] = {"geweke_z": math.nan, "ess": math.nan, "flag": "constant"}
            continue
        head = x[: max(2, n // 10)]
        tail = x[-max(2, n // 2):]
        var_head = _spectral_var_of_mean(head)
        var_tail = _spectral_var_of_mean(tail)
        denom = math.sqrt(var_head + var_tail)
        z = (float(head.mean()) - float(tail.mean())) / denom if denom > 0 else math.inf
        tau = _integrated_autocorr_time(x)
        out[name] = {"geweke_z": float(z), "ess": float(n / tau), "flag": None}
    chain.diagnostics = out
    return out


def summarize(chain: Chain) -> dict:
    """Posterior mean and unbiased variance per parameter (original space)."""
    if chain.n_retained < 2:
        raise ValueError("summaries need at least 2 retained draws")
    out = {}
    for j, name in enumerate(chain.names):
        x = chain.draws[:, j]
        out[name] = {"mean": float(x.mean()), "variance": float(x.var(ddof=1)), "n": int(x.size)}
    return out
