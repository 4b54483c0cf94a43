"""Discrete-parameter profiling via conditional data cloning.

For each candidate value of the discrete parameter, a full DC grid runs
with that value held fixed; the combined conditional estimate plays the
role of the conditional MLE and clone-scaled variances approximate the
conditional inverse information.  A likelihood-ratio statistic computed
from single deterministic (uncloned) likelihood evaluations — the clone
exponent cancels algebraically — screens candidates into a profile
confidence set, and stochastic search over the conditional asymptotic
normals traces joint confidence regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .cloning import McmcConfig, combined_estimate, run_grid
from .data import Dataset
from .estimability import STATUS_ESTIMABLE, EstimabilityReport, estimability_report
from .inference import ClonedTarget
from .models import ExperimentContext, ModelSpec
from .statfun import chi2_quantile

__all__ = [
    "ConditionalFit",
    "ProfileResult",
    "conditional_dc",
    "profile_sweep",
    "dclr_statistic",
    "profile_mle",
    "profile_interval_set",
    "joint_region_sample",
    "expand_profile_candidates",
]


@dataclass
class ConditionalFit:
    """DC results with the discrete parameter fixed at one value."""

    discrete_name: str
    discrete_value: int
    cond_mle: dict
    cond_inv_fim: dict  # clone-scaled posterior variance per parameter
    logl_at_mle: float  # uncloned log likelihood at the conditional MLE
    report: Optional[EstimabilityReport] = None
    cells: Optional[list] = None
    ok: bool = True


@dataclass(frozen=True)
class ProfileResult:
    discrete_name: str
    mle_value: int
    mle_params: dict
    profile_set: tuple
    logl_by_value: dict


def conditional_dc(
    model: ModelSpec,
    data: Dataset,
    discrete_name: str,
    value: int,
    priors,
    k_levels,
    mcmc: McmcConfig,
    seed: int,
    alpha: float = 0.05,
    experiments: Optional[Sequence[ExperimentContext]] = None,
    workers: int = 1,
    init_hints=(),
) -> ConditionalFit:
    """Full DC grid conditional on one discrete value.

    The fit is flagged not-ok (and should be excluded from profiling)
    when the conditional estimability report finds anything other than
    estimable parameters.  ``init_hints`` seeds the per-cell start search
    (e.g. with neighboring conditional fits during a sweep).
    """
    if discrete_name not in model.discrete_param_names:
        raise ValueError(f"{discrete_name!r} is not a discrete parameter of model {model.name!r}")
    fixed = {discrete_name: float(value)}
    cells = run_grid(
        model, data, priors, k_levels, mcmc, seed, fixed=fixed, experiments=experiments,
        workers=workers, init_hints=init_hints,
    )
    report = estimability_report(cells, alpha=alpha)
    ok = all(v.status == STATUS_ESTIMABLE for v in report.verdicts.values())
    combined = combined_estimate(cells, force=True)
    theta = dict(combined.mle)
    target = ClonedTarget(model, data, prior=None, n_clones=1, fixed=fixed, experiments=experiments, integrator=mcmc.integrator)
    logl = target.log_obs_likelihood(theta)
    return ConditionalFit(
        discrete_name=discrete_name,
        discrete_value=int(value),
        cond_mle=theta,
        cond_inv_fim=dict(combined.asymptotic_variance),
        logl_at_mle=logl,
        report=report,
        cells=cells,
        ok=ok,
    )


def profile_sweep(
    model: ModelSpec,
    data: Dataset,
    discrete_name: str,
    values: Sequence[int],
    priors,
    k_levels,
    mcmc: McmcConfig,
    seed: int,
    alpha: float = 0.05,
    experiments: Optional[Sequence[ExperimentContext]] = None,
    workers: int = 1,
) -> list:
    """Conditional DC over a ladder of discrete values with warm starts.

    Each candidate's start search is seeded with the conditional MLEs of
    the previously fitted values (the conditional optimum moves
    continuously in the discrete parameter, so neighbors are excellent
    basin guides).  A second pass refits any value whose likelihood dips
    far below both neighbors, which flags a start that missed the basin.
    Returns fits sorted by discrete value.
    """
    values = sorted(int(v) for v in values)
    fits: dict = {}
    hints: list = []

    def fit_one(value):
        local_hints = list(hints)
        for neighbor in (value - 1, value + 1):
            if neighbor in fits:
                local_hints.insert(0, fits[neighbor].cond_mle)
        fit = conditional_dc(
            model, data, discrete_name, value, priors, k_levels, mcmc, seed,
            alpha=alpha, experiments=experiments, workers=workers, init_hints=local_hints[:4],
        )
        fits[value] = fit
        if math.isfinite(fit.logl_at_mle):
            hints.insert(0, fit.cond_mle)
        del hints[6:]

    for value in values:
        fit_one(value)
    # refit dips: a value whose conditional likelihood falls well below
    # both neighbors almost surely missed its basin on the first pass
    for idx in range(len(values)):
        value = values[idx]
        here = fits[value].logl_at_mle
        neighbor_lls = [
            fits[values[j]].logl_at_mle
            for j in (idx - 1, idx + 1)
            if 0 <= j < len(values) and math.isfinite(fits[values[j]].logl_at_mle)
        ]
        if neighbor_lls and (not math.isfinite(here) or here < min(neighbor_lls) - 10.0):
            fit_one(value)
    return [fits[v] for v in values]


def dclr_statistic(logl_num: float, logl_den: float, n_clones: int = 1, cloned: bool = False) -> float:
    """Data-cloning likelihood ratio statistic.

    With ``cloned`` the inputs are K-cloned log likelihoods and the
    statistic is -(2/K)(num - den); otherwise plain -2(num - den).  The
    two agree exactly because the clone exponent cancels.
    """
    if not (math.isfinite(logl_num) and math.isfinite(logl_den)):
        raise ValueError(f"log likelihoods must be finite, got ({logl_num!r}, {logl_den!r})")
    if n_clones < 1:
        raise ValueError("clone count must be >= 1")
    if cloned:
        return -(2.0 / n_clones) * (logl_num - logl_den)
    return -2.0 * (logl_num - logl_den)


def profile_mle(fits: Sequence[ConditionalFit]) -> ConditionalFit:
    usable = [f for f in fits if f.ok]
    if not usable:
        raise ValueError("no usable conditional fits (all flagged)")
    return max(usable, key=lambda f: f.logl_at_mle)


def profile_interval_set(fits: Sequence[ConditionalFit], level: float = 0.95) -> ProfileResult:
    """Discrete values whose profile statistic stays below the chi2(1) cut.

    The candidate values must form a contiguous integer range containing
    the profile maximizer.
    """
    if not fits:
        raise ValueError("no conditional fits supplied")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    values = sorted(f.discrete_value for f in fits)
    if values != list(range(values[0], values[-1] + 1)):
        raise ValueError(f"candidate values must be contiguous integers, got {values}")
    best = profile_mle(fits)
    threshold = chi2_quantile(level, 1.0)
    kept = []
    for fit in fits:
        if not fit.ok:
            continue
        stat = dclr_statistic(fit.logl_at_mle, best.logl_at_mle)
        if stat <= threshold:
            kept.append(fit.discrete_value)
    return ProfileResult(
        discrete_name=best.discrete_name,
        mle_value=best.discrete_value,
        mle_params=dict(best.cond_mle),
        profile_set=tuple(sorted(kept)),
        logl_by_value={f.discrete_value: f.logl_at_mle for f in fits},
    )


def joint_region_sample(
    model: ModelSpec,
    data: Dataset,
    fits: Sequence[ConditionalFit],
    n_samples: int,
    level: float = 0.95,
    seed: int = 0,
    df: Optional[float] = None,
    experiments: Optional[Sequence[ExperimentContext]] = None,
    integrator=None,
) -> list:
    """Stochastic search for the joint confidence region.

    For each conditional fit, draws points from independent normals
    centered at the conditional MLE with the clone-scaled (inverse
    information) variances, computes the likelihood-ratio statistic of
    (point, discrete value) against the overall MLE triple, and keeps
    points below the chi-square threshold.  ``df`` defaults to the number
    of jointly inferred parameters, continuous plus the discrete one
    (e.g. 3 for a two-rate epidemic model with an initial count).
    Returns dicts with the discrete value, the sampled parameters, and
    the statistic.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    fits = [f for f in fits if f.ok]
    if not fits:
        raise ValueError("no usable conditional fits")
    best = profile_mle(fits)
    names = list(best.cond_mle)
    if df is None:
        df = len(names) + 1  # continuous block plus the discrete value
    threshold = chi2_quantile(level, float(df))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed)])))
    accepted = []
    for fit in sorted(fits, key=lambda f: f.discrete_value):
        fixed = {fit.discrete_name: float(fit.discrete_value)}
        target = ClonedTarget(
            model, data, prior=None, n_clones=1, fixed=fixed, experiments=experiments, integrator=integrator
        )
        center = np.array([fit.cond_mle[n] for n in names])
        spread = np.array([math.sqrt(max(fit.cond_inv_fim[n], 0.0)) for n in names])
        draws = center + rng.standard_normal((n_samples, len(names))) * spread
        for row in draws:
            theta = dict(zip(names, (float(v) for v in row)))
            logl = target.log_obs_likelihood(theta)
            if logl == float("-inf"):
                continue
            stat = dclr_statistic(logl, best.logl_at_mle)
            if stat <= threshold:
                point = {"discrete": fit.discrete_value, "statistic": stat}
                point.update(theta)
                accepted.append(point)
    if not accepted:
        raise RuntimeError(
            "no sampled points fell inside the joint region; widen the candidate range or raise n_samples"
        )
    return accepted


def expand_profile_candidates(
    fit_at,
    start: int,
    domain: tuple,
    level: float = 0.95,
    max_candidates: int = 200,
):
    """Grow a candidate window around the profile maximizer.

    ``fit_at(value) -> ConditionalFit`` is called lazily; expansion on a
    side stops once the statistic there exceeds twice the chi2(1)
    threshold (or the domain edge is hit).  Returns fits sorted by value.
    """
    lo_dom, hi_dom = int(domain[0]), int(domain[1])
    if not lo_dom <= start <= hi_dom:
        raise ValueError(f"start {start} outside domain [{lo_dom}, {hi_dom}]")
    threshold = 2.0 * chi2_quantile(level, 1.0)
    fits = {start: fit_at(start)}
    lo = hi = start
    for _ in range(max_candidates):
        ok_logls = [f.logl_at_mle for f in fits.values() if f.ok]
        if not ok_logls:
            raise RuntimeError("no usable conditional fits while expanding the candidate window")
        best_logl = max(ok_logls)
        lo_done = lo == lo_dom or (
            fits[lo].ok and dclr_statistic(fits[lo].logl_at_mle, best_logl) > threshold
        )
        hi_done = hi == hi_dom or (
            fits[hi].ok and dclr_statistic(fits[hi].logl_at_mle, best_logl) > threshold
        )
        if lo_done and hi_done:
            break
        if not lo_done:
            lo -= 1
            fits[lo] = fit_at(lo)
        if not hi_done:
            hi += 1
            fits[hi] = fit_at(hi)
    return [fits[v] for v in sorted(fits)]
