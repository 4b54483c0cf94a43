"""Two-stage ANOVA estimability test over grid cell means.

Stage one groups cell posterior means by clone count (priors act as
replicates): a significant effect means more clones are needed before
anything can be concluded.  Stage two, run only when stage one passes,
groups the means by prior (clone levels act as replicates): a significant
effect means the likelihood does not pin the parameter down, i.e. it is
inestimable.  Tests always use cell means, never pooled draws, which
would be sensitive to pure Monte Carlo noise.

Transformed quantities (e.g. a ratio of two parameters) are tested by
evaluating an expression over every stored draw of every cell, producing
synthetic cells for the same machinery.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import exprlang
from .cloning import CellKey, CellResult, CombinedEstimate, combined_estimate
from .statfun import f_pvalue

__all__ = [
    "AnovaResult",
    "ParamVerdict",
    "EstimabilityReport",
    "oneway_anova",
    "cell_mean_table",
    "estimability_report",
    "transform_cells",
]

STATUS_ESTIMABLE = "estimable"
STATUS_INESTIMABLE = "inestimable"
STATUS_INSUFFICIENT_CLONES = "insufficient_clones"
STATUS_UNCONVERGED = "chains_unconverged"


@dataclass(frozen=True)
class AnovaResult:
    factor: Optional[str]  # "clone" or "prior"
    f_stat: float
    df: tuple
    p: float
    flag: Optional[str] = None


@dataclass(frozen=True)
class ParamVerdict:
    parameter: str
    clone_test: Optional[AnovaResult]
    prior_test: Optional[AnovaResult]
    status: str
    combined: Optional[dict] = None  # {"mle", "variance", "lo", "hi"} when estimable


@dataclass(frozen=True)
class EstimabilityReport:
    alpha: float
    verdicts: dict  # parameter -> ParamVerdict
    k_levels: tuple
    prior_ids: tuple

    def status_of(self, parameter: str) -> str:
        return self.verdicts[parameter].status

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "k_levels": list(self.k_levels), "prior_ids": list(self.prior_ids), "parameters": {}}
        for name, verdict in self.verdicts.items():
            entry = {"status": verdict.status}
            for label, test in (("clone_test", verdict.clone_test), ("prior_test", verdict.prior_test)):
                if test is not None:
                    entry[label] = {
                        "F": test.f_stat,
                        "df": list(test.df),
                        "p": test.p,
                        "flag": test.flag,
                    }
            if verdict.combined is not None:
                entry["combined"] = dict(verdict.combined)
            out["parameters"][name] = entry
        return out

    def format_table(self) -> str:
        """Aligned text table: estimate, both p-values, status per row."""
        headers = ["parameter", "estimate (95% interval)", "clone p", "prior p", "status"]
        rows = []
        for name, verdict in self.verdicts.items():
            if verdict.combined is not None:
                half = verdict.combined["hi"] - verdict.combined["mle"]
                est = f"{verdict.combined['mle']:.6g} +/- {half:.3g}"
            else:
                est = "---"
            clone_p = f"{verdict.clone_test.p:.3g}" if verdict.clone_test else "---"
            prior_p = f"{verdict.prior_test.p:.3g}" if verdict.prior_test else "---"
            rows.append([name, est, clone_p, prior_p, verdict.status])
        widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i]) for i in range(5)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        return "\n".join(lines)


def oneway_anova(groups: Sequence[Sequence[float]], factor: Optional[str] = None) -> AnovaResult:
    """Standard one-way F test: between-group over within-group mean square.

    Degenerate inputs are flagged rather than erroring: zero within-group
    variance with spread between groups gives F=inf, p=0; all values
    identical gives F=0, p=1.
    """
    if len(groups) < 2:
        raise ValueError("one-way ANOVA needs at least 2 groups")
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(a.ndim != 1 or a.size < 2 for a in arrays):
        raise ValueError("each group needs at least 2 values")
    n_total = sum(a.size for a in arrays)
    grand = sum(float(a.sum()) for a in arrays) / n_total
    ss_between = sum(a.size * (float(a.mean()) - grand) ** 2 for a in arrays)
    ss_within = sum(float(np.sum((a - a.mean()) ** 2)) for a in arrays)
    df_between = len(arrays) - 1
    df_within = n_total - len(arrays)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(factor, 0.0, (df_between, df_within), 1.0, flag="degenerate-constant")
        return AnovaResult(factor, math.inf, (df_between, df_within), 0.0, flag="degenerate-exact")
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(factor, f_stat, (df_between, df_within), f_pvalue(f_stat, df_between, df_within))


def cell_mean_table(cells: Sequence[CellResult], parameter: str):
    """Cell means arranged (clone level x prior): the tested array.

    Returns (k_levels, prior_ids, 2-d array); the grid must be complete.
    """
    k_levels = sorted({c.key.k for c in cells})
    prior_ids = sorted({c.key.prior_id for c in cells})
    by_key = {(c.key.k, c.key.prior_id): c for c in cells}
    missing = [f"{k}_{p}" for k in k_levels for p in prior_ids if (k, p) not in by_key]
    if missing or len(cells) != len(k_levels) * len(prior_ids):
        raise ValueError(f"unbalanced grid; missing cells: {missing or 'duplicates present'}")
    table = np.empty((len(k_levels), len(prior_ids)))
    for i, k in enumerate(k_levels):
        for j, p in enumerate(prior_ids):
            cell = by_key[(k, p)]
            if parameter not in cell.means:
                raise ValueError(f"cell {cell.key} does not carry parameter {parameter!r}")
            table[i, j] = cell.means[parameter]
    return k_levels, prior_ids, table


def estimability_report(
    cells: Sequence[CellResult],
    alpha: float = 0.05,
    params: Optional[Sequence[str]] = None,
) -> EstimabilityReport:
    """Sequential clone-effect then prior-effect verdict per parameter.

    The prior test runs only when the clone test is not significant (the
    first test validates the second's replication assumption).  Cells
    that failed their convergence gates poison the whole grid: every
    parameter reports chains_unconverged, and the caller should drop the
    offending clone levels and rerun.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    cells = list(cells)
    if not cells:
        raise ValueError("no cells to test")
    names = cells[0].names
    for cell in cells:
        if cell.names != names:
            raise ValueError("cells carry different parameter sets")
    wanted = list(params) if params is not None else list(names)
    unknown = [p for p in wanted if p not in names]
    if unknown:
        raise ValueError(f"parameters not present in cells: {unknown}")

    k_levels = tuple(sorted({c.key.k for c in cells}))
    prior_ids = tuple(sorted({c.key.prior_id for c in cells}))
    unconverged = [c for c in cells if not c.diag_ok]
    verdicts = {}
    if unconverged:
        warnings.warn(
            f"{len(unconverged)} cell(s) failed convergence gates: "
            + ", ".join(f"{c.key.k}_{c.key.prior_id}" for c in unconverged),
            stacklevel=2,
        )
        for name in wanted:
            verdicts[name] = ParamVerdict(name, None, None, STATUS_UNCONVERGED)
        return EstimabilityReport(alpha, verdicts, k_levels, prior_ids)

    combined_all = None
    for name in wanted:
        _, _, table = cell_mean_table(cells, name)
        clone_test = oneway_anova(list(table), factor="clone")  # rows: one group per k
        if clone_test.p < alpha:
            verdicts[name] = ParamVerdict(name, clone_test, None, STATUS_INSUFFICIENT_CLONES)
            continue
        prior_test = oneway_anova(list(table.T), factor="prior")  # columns: one group per prior
        if prior_test.p < alpha:
            verdicts[name] = ParamVerdict(name, clone_test, prior_test, STATUS_INESTIMABLE)
            continue
        if combined_all is None:
            combined_all = combined_estimate(cells)
        lo, hi = combined_all.interval95[name]
        verdicts[name] = ParamVerdict(
            name,
            clone_test,
            prior_test,
            STATUS_ESTIMABLE,
            combined={
                "mle": combined_all.mle[name],
                "variance": combined_all.asymptotic_variance[name],
                "lo": lo,
                "hi": hi,
            },
        )
    return EstimabilityReport(alpha, verdicts, k_levels, prior_ids)


def transform_cells(cells: Sequence[CellResult], expr, name: Optional[str] = None, flag_warn_frac: float = 0.001) -> list:
    """Synthetic cells for a derived quantity, from stored chain draws.

    ``expr`` is an expression string or parsed tree over the parameter
    names.  Draws where the expression is undefined are dropped from that
    cell's mean/variance; a warning is raised when more than
    ``flag_warn_frac`` of a cell's draws are flagged.
    """
    if isinstance(expr, str):
        tree = exprlang.parse(expr)
        label = name or expr.strip()
    else:
        tree = expr
        label = name or exprlang.pretty(tree)
    out = []
    for cell in cells:
        unknown = sorted(exprlang.free_vars(tree) - set(cell.names))
        if unknown:
            raise ValueError(f"expression references unknown parameters: {unknown}")
        draws = cell.load_chain()
        bindings = {p: draws[:, i] for i, p in enumerate(cell.names)}
        values = exprlang.evaluate_array(tree, bindings)
        defined = np.isfinite(values)
        n_bad = int(values.size - defined.sum())
        if n_bad:
            frac = n_bad / values.size
            if frac > flag_warn_frac:
                warnings.warn(
                    f"cell {cell.key.k}_{cell.key.prior_id}: {n_bad} of {values.size} draws "
                    f"({100 * frac:.2f}%) undefined under {label!r}",
                    stacklevel=2,
                )
        kept = values[defined]
        if kept.size < 2:
            raise ValueError(f"cell {cell.key} has fewer than 2 defined draws under {label!r}")
        out.append(
            CellResult(
                key=cell.key,
                names=(label,),
                means={label: float(kept.mean())},
                variances={label: float(kept.var(ddof=1))},
                n_draws=int(kept.size),
                diagnostics={label: {"geweke_z": math.nan, "ess": math.nan, "flag": "derived"}},
                diag_ok=cell.diag_ok,
                acceptance_rate=cell.acceptance_rate,
                seed_entropy=cell.seed_entropy,
                chain=kept.reshape(-1, 1),
            )
        )
    return out
