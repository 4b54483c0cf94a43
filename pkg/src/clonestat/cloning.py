"""Grid runner over (clone count x prior) cells and combined estimators.

Every cell runs one independently seeded chain; the per-cell seed is a
pure function of (root seed, clone count, prior id, conditioning), so
results are identical no matter how many workers execute the grid or in
what order.  Combined point estimates weight cell means by retained draw
count; the combined variance scales each cell's posterior variance by its
clone count (the inverse-information estimate).
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import Dataset
from .inference import (
    ClonedTarget,
    GammaPrior,
    NormalPrior,
    PriorSet,
    diagnostics,
    from_sampling_space,
    maximize_simplex,
    run_chain,
    summarize,
    to_sampling_space,
)
from .integrate import IntegratorConfig
from .models import ExperimentContext, ModelSpec, build_model

__all__ = [
    "CellKey",
    "CellResult",
    "CombinedEstimate",
    "McmcConfig",
    "cell_seed_entropy",
    "run_cell",
    "run_grid",
    "filter_cells",
    "combined_estimate",
    "prior_to_dict",
    "prior_from_dict",
    "save_grid",
    "load_grid",
    "write_json",
]

Z_95 = 1.959963984540054  # two-sided 95% normal multiplier


@dataclass(frozen=True, order=True)
class CellKey:
    k: int
    prior_id: str


@dataclass
class CellResult:
    """One DC run's output for a (clone count, prior) grid cell."""

    key: CellKey
    names: tuple
    means: dict
    variances: dict
    n_draws: int
    diagnostics: dict
    diag_ok: bool
    acceptance_rate: float
    seed_entropy: tuple
    chain: Optional[np.ndarray] = None
    chain_path: Optional[str] = None

    def load_chain(self) -> np.ndarray:
        if self.chain is None:
            if self.chain_path is None:
                raise ValueError(f"cell {self.key} has no stored chain")
            self.chain = _read_chain_csv(Path(self.chain_path), self.names)
        return self.chain

    def to_summary_dict(self, config_hash: str) -> dict:
        return {
            "config_hash": config_hash,
            "k": self.key.k,
            "prior_id": self.key.prior_id,
            "parameters": list(self.names),
            "means": {n: self.means[n] for n in self.names},
            "variances": {n: self.variances[n] for n in self.names},
            "n_draws": self.n_draws,
            "diagnostics": {n: self.diagnostics[n] for n in self.names},
            "diag_ok": self.diag_ok,
            "acceptance_rate": self.acceptance_rate,
            "seed_entropy": list(self.seed_entropy),
        }

    @classmethod
    def from_summary_dict(cls, payload: dict, chain_path: Optional[str] = None) -> "CellResult":
        names = tuple(payload["parameters"])
        return cls(
            key=CellKey(int(payload["k"]), str(payload["prior_id"])),
            names=names,
            means={n: float(payload["means"][n]) for n in names},
            variances={n: float(payload["variances"][n]) for n in names},
            n_draws=int(payload["n_draws"]),
            diagnostics=payload["diagnostics"],
            diag_ok=bool(payload["diag_ok"]),
            acceptance_rate=float(payload["acceptance_rate"]),
            seed_entropy=tuple(payload["seed_entropy"]),
            chain=None,
            chain_path=chain_path,
        )


@dataclass(frozen=True)
class CombinedEstimate:
    """Draw-count-weighted MLE with clone-scaled asymptotic variance."""

    mle: dict
    asymptotic_variance: dict
    interval95: dict


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 20000
    burn_frac: float = 0.5
    adapt: bool = True
    proposal_scale: float = 0.5
    ess_min: float = 1000.0
    geweke_max: float = 3.0
    integrator: Optional[IntegratorConfig] = None

    def __post_init__(self):
        if self.n_iter < 4:
            raise ValueError("n_iter must be at least 4")
        if not 0.0 < self.burn_frac < 1.0:
            raise ValueError("burn_frac must lie in (0, 1)")

    @property
    def n_burn(self) -> int:
        return int(round(self.n_iter * self.burn_frac))


def cell_seed_entropy(root_seed: int, k: int, prior_id: str, fixed: Optional[Mapping[str, float]] = None) -> tuple:
    """Deterministic per-cell RNG entropy, independent of scheduling."""
    token = json.dumps({"k": int(k), "prior": str(prior_id), "fixed": {str(n): float(v) for n, v in sorted((fixed or {}).items())}}, sort_keys=True)
    digest = hashlib.sha256(token.encode()).digest()
    return (int(root_seed), int.from_bytes(digest[:8], "big"))


_INIT_QUANTILES = (0.05, 0.5, 0.95)
_INIT_SCALE_LADDER = (1.0, 0.1, 0.01, 1e-3, 1e-4)
_INIT_SCALE_LADDER_FINE = tuple(10.0 ** (-0.5 * i) for i in range(9))


def _median_point(prior: PriorSet, model: ModelSpec) -> dict:
    point = prior.median_point()
    for name, value in point.items():
        if name in model.positive_params and value <= 0:
            marg = prior.marginals[name]
            spread = marg.variance ** 0.5 if isinstance(marg, NormalPrior) else 1.0
            point[name] = 0.5 * spread if spread > 0 else 1.0
    return point


def _initial_point(prior: PriorSet, model: ModelSpec, target: ClonedTarget, init_hints=()) -> dict:
    """Deterministic chain start: prior-derived candidate scan plus polish.

    Diffuse priors on rate parameters can sit many orders of magnitude
    from the likelihood's basin (and their medians may be numerically
    explosive for the dynamics), so one fixed start is not viable.  The
    scan covers the prior quantile lattice, a downward log-scale ladder
    on positivity-constrained components, and any caller-supplied hints
    (e.g. neighboring conditional fits during a profile sweep); the
    leading candidates under the cell's own cloned target are polished
    with short simplex descents in sampling space and the best endpoint
    wins.  Everything is deterministic, and the scan candidates are
    functions of the cell's prior, so starts stay prior-dependent.
    """
    names = list(target.free_names)
    median = _median_point(prior, model)
    candidates = [dict(hint) for hint in init_hints if set(hint) >= set(names)]
    candidates.append(dict(median))

    quantile_axes = {n: [prior.marginals[n].quantile(q) for q in _INIT_QUANTILES] for n in names}
    if len(names) <= 3:
        grids = [[]]
        for n in names:
            grids = [g + [(n, v)] for g in grids for v in quantile_axes[n]]
        candidates += [dict(g) for g in grids]
    else:
        for n in names:
            for v in quantile_axes[n]:
                point = dict(median)
                point[n] = v
                candidates.append(point)

    positives = [n for n in names if n in model.positive_params]
    ladder = _INIT_SCALE_LADDER_FINE if len(positives) <= 2 else _INIT_SCALE_LADDER
    if positives and len(positives) <= 3:
        grids = [[]]
        for n in positives:
            grids = [g + [(n, median[n] * s)] for g in grids for s in ladder]
        for g in grids:
            point = dict(median)
            point.update(g)
            candidates.append(point)
    else:
        for n in positives:
            for s in _INIT_SCALE_LADDER[1:]:
                point = dict(median)
                point[n] = median[n] * s
                candidates.append(point)

    seen = set()
    scored = []
    for point in candidates:
        key = tuple(point[n] for n in names)
        if key in seen:
            continue
        seen.add(key)
        value = target.log_density(point)
        if value > float("-inf"):
            scored.append((value, point))
    scored.sort(key=lambda item: -item[0])

    if not scored:
        # last resort: walk the median down until the target is finite
        point = dict(median)
        for _ in range(80):
            value = target.log_density(point)
            if value > float("-inf"):
                scored.append((value, point))
                break
            for n in positives:
                point[n] *= 0.5
        else:
            raise ValueError(
                f"could not find a finite starting point for prior {prior.id!r}; "
                "check the model domain or the prior"
            )

    # Polish the leading candidates locally and keep the best endpoint;
    # the raw scan ranking is unreliable when basins are narrow.
    best_value, best_theta = scored[0]
    for value, point in scored[:8]:
        z, _ = to_sampling_space(target.theta_to_vector(point), target.positive_mask)
        for _ in range(3):
            z = maximize_simplex(target.log_density_z, z, step=0.3, max_iter=400)
        theta_vec, _ = from_sampling_space(z, target.positive_mask)
        theta = target.vector_to_theta(theta_vec)
        polished = target.log_density(theta)
        if polished > best_value:
            best_value, best_theta = polished, theta
    return dict(best_theta)


def run_cell(
    model: ModelSpec,
    data: Dataset,
    prior: PriorSet,
    k: int,
    mcmc: McmcConfig,
    seed: int,
    fixed: Optional[Mapping[str, float]] = None,
    experiments: Optional[Sequence[ExperimentContext]] = None,
    init_hints=(),
) -> CellResult:
    """Run one (k, prior) cell: chain, summary, convergence gates."""
    target = ClonedTarget(
        model, data, prior, n_clones=k, fixed=fixed, experiments=experiments, integrator=mcmc.integrator
    )
    entropy = cell_seed_entropy(seed, k, prior.id, fixed)
    chain = run_chain(
        target,
        _initial_point(prior, model, target, init_hints),
        n_iter=mcmc.n_iter,
        n_burn=mcmc.n_burn,
        seed=entropy,
        proposal_scale=mcmc.proposal_scale,
        adapt=mcmc.adapt,
    )
    summary = summarize(chain)
    diag = diagnostics(chain)
    diag_ok = all(
        entry["flag"] is None and abs(entry["geweke_z"]) < mcmc.geweke_max and entry["ess"] >= mcmc.ess_min
        for entry in diag.values()
    )
    return CellResult(
        key=CellKey(int(k), prior.id),
        names=chain.names,
        means={n: summary[n]["mean"] for n in chain.names},
        variances={n: summary[n]["variance"] for n in chain.names},
        n_draws=chain.n_retained,
        diagnostics=diag,
        diag_ok=diag_ok,
        acceptance_rate=chain.acceptance_rate,
        seed_entropy=entropy,
        chain=chain.draws,
    )


def _cell_task(payload: dict) -> CellResult:
    """Worker entry point: rebuild everything from primitives and run."""
    model = build_model(payload["model_name"], payload["model_config"])
    data = Dataset(payload["rows"])
    experiments = [
        ExperimentContext(id=e["id"], conditions=e["conditions"], init_params=e["init_params"])
        for e in payload["experiments"]
    ] or None
    prior = prior_from_dict(payload["prior"])
    mcmc_payload = dict(payload["mcmc"])
    integ = mcmc_payload.pop("integrator", None)
    mcmc = McmcConfig(**mcmc_payload, integrator=IntegratorConfig(**integ) if integ else None)
    return run_cell(
        model, data, prior, payload["k"], mcmc, payload["seed"], payload["fixed"], experiments,
        init_hints=payload.get("init_hints") or (),
    )


def run_grid(
    model: ModelSpec,
    data: Dataset,
    priors: Sequence[PriorSet],
    k_levels: Sequence[int],
    mcmc: McmcConfig,
    seed: int,
    fixed: Optional[Mapping[str, float]] = None,
    experiments: Optional[Sequence[ExperimentContext]] = None,
    workers: int = 1,
    init_hints=(),
) -> list:
    """One CellResult per (k, prior), deterministic for a given seed.

    The estimability tests need both factors, so at least two priors
    (pairwise distinct) and two clone levels are required.
    """
    if len(priors) < 2:
        raise ValueError("need at least 2 priors (the prior-effect test requires them)")
    ids = [p.id for p in priors]
    if len(set(ids)) != len(ids):
        raise ValueError(f"prior ids must be unique, got {ids}")
    for a in range(len(priors)):
        for b in range(a + 1, len(priors)):
            if priors[a].marginals == priors[b].marginals:
                raise ValueError(f"priors {priors[a].id!r} and {priors[b].id!r} are identical")
    k_list = [int(k) for k in k_levels]
    if len(k_list) < 2:
        raise ValueError("need at least 2 clone levels (the clone-effect test requires them)")
    if len(set(k_list)) != len(k_list) or any(k < 1 for k in k_list):
        raise ValueError(f"clone levels must be distinct positive integers, got {k_levels}")

    jobs = sorted(((k, prior) for k in k_list for prior in priors), key=lambda kp: (kp[0], kp[1].id))
    if workers <= 1:
        results = [
            run_cell(model, data, prior, k, mcmc, seed, fixed, experiments, init_hints=init_hints)
            for k, prior in jobs
        ]
    else:
        if model.registry_name is None:
            raise ValueError("parallel execution needs a registry-built model (build_model)")
        payloads = []
        for k, prior in jobs:
            payloads.append(
                {
                    "model_name": model.registry_name,
                    "model_config": model.build_config,
                    "rows": data.to_rows(),
                    "experiments": [
                        {"id": c.id, "conditions": dict(c.conditions), "init_params": dict(c.init_params)}
                        for c in (experiments or [])
                    ],
                    "prior": prior_to_dict(prior),
                    "k": k,
                    "mcmc": _mcmc_to_dict(mcmc),
                    "seed": seed,
                    "fixed": dict(fixed) if fixed else None,
                    "init_hints": [dict(h) for h in init_hints],
                }
            )
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, payloads))
    return sorted(results, key=lambda c: (c.key.k, c.key.prior_id))


def filter_cells(cells: Sequence[CellResult], drop_k: Sequence[int] = ()) -> list:
    """Drop whole clone levels (the "discard runs with low k" workflow)."""
    dropped = {int(k) for k in drop_k}
    return [c for c in cells if c.key.k not in dropped]


def combined_estimate(cells: Sequence[CellResult], force: bool = False) -> CombinedEstimate:
    """Weighted combination across cells: weights N_cell / sum N.

    Point estimate is the weighted mean of cell means; the asymptotic
    variance is the weighted mean of (clone count x posterior variance).
    Cells that failed their convergence gates block the combination
    unless force is passed.
    """
    cells = list(cells)
    if not cells:
        raise ValueError("no cells to combine")
    names = cells[0].names
    for cell in cells:
        if cell.names != names:
            raise ValueError(f"cells carry different parameter sets: {cell.names} vs {names}")
    bad = [str(c.key) for c in cells if not c.diag_ok]
    if bad and not force:
        raise ValueError(f"cells failed convergence gates (pass force=True to override): {bad}")
    total = float(sum(c.n_draws for c in cells))
    weights = [c.n_draws / total for c in cells]
    mle = {}
    asym = {}
    interval = {}
    for name in names:
        mle[name] = sum(w * c.means[name] for w, c in zip(weights, cells))
        asym[name] = sum(w * c.key.k * c.variances[name] for w, c in zip(weights, cells))
        half = Z_95 * asym[name] ** 0.5
        interval[name] = (mle[name] - half, mle[name] + half)
    return CombinedEstimate(mle=mle, asymptotic_variance=asym, interval95=interval)


# ---------------------------------------------------------------------------
# Prior and config serialization helpers


def prior_to_dict(prior: PriorSet) -> dict:
    out = {"id": prior.id, "marginals": {}}
    for name, marg in prior.marginals.items():
        if isinstance(marg, NormalPrior):
            out["marginals"][name] = {"type": "normal", "mean": marg.mean, "variance": marg.variance}
        elif isinstance(marg, GammaPrior):
            out["marginals"][name] = {"type": "gamma", "shape": marg.shape, "scale": marg.scale}
        else:
            raise TypeError(f"unknown marginal type {type(marg)!r}")
    return out


def prior_from_dict(payload: dict) -> PriorSet:
    marginals = {}
    for name, spec in payload["marginals"].items():
        kind = spec.get("type")
        if kind == "normal":
            marginals[name] = NormalPrior(float(spec["mean"]), float(spec["variance"]))
        elif kind == "gamma":
            marginals[name] = GammaPrior(float(spec["shape"]), float(spec["scale"]))
        else:
            raise ValueError(f"unknown prior type {kind!r} for parameter {name!r}")
    return PriorSet(id=str(payload["id"]), marginals=marginals)


def _mcmc_to_dict(mcmc: McmcConfig) -> dict:
    out = {
        "n_iter": mcmc.n_iter,
        "burn_frac": mcmc.burn_frac,
        "adapt": mcmc.adapt,
        "proposal_scale": mcmc.proposal_scale,
        "ess_min": mcmc.ess_min,
        "geweke_max": mcmc.geweke_max,
    }
    if mcmc.integrator is not None:
        integ = mcmc.integrator
        out["integrator"] = {
            "method": integ.method,
            "step": integ.step,
            "rtol": integ.rtol,
            "atol": integ.atol,
            "max_steps": integ.max_steps,
        }
    return out


# ---------------------------------------------------------------------------
# Results directory layout


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cell_dir(out_dir: Path, key: CellKey) -> Path:
    return Path(out_dir) / "cells" / f"{key.k}_{key.prior_id}"


def _write_chain_csv(path: Path, names, draws: np.ndarray):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in draws:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_chain_csv(path: Path, names) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != tuple(names):
            raise ValueError(f"chain file {path} parameters {header} do not match summary {list(names)}")
        return np.loadtxt(fh, delimiter=",", ndmin=2)


def save_grid(out_dir, manifest: dict, cells: Sequence[CellResult]):
    """Persist grid.json plus per-cell summary.json and chain.csv."""
    out_dir = Path(out_dir)
    manifest = dict(manifest)
    manifest["k_levels"] = sorted({c.key.k for c in cells})
    manifest["prior_ids"] = sorted({c.key.prior_id for c in cells})
    manifest["cells"] = [f"{c.key.k}_{c.key.prior_id}" for c in sorted(cells, key=lambda c: (c.key.k, c.key.prior_id))]
    write_json(out_dir / "grid.json", manifest)
    for cell in cells:
        cdir = _cell_dir(out_dir, cell.key)
        cdir.mkdir(parents=True, exist_ok=True)
        write_json(cdir / "summary.json", cell.to_summary_dict(manifest["config_hash"]))
        if cell.chain is not None:
            _write_chain_csv(cdir / "chain.csv", cell.names, cell.chain)


def load_grid(out_dir):
    """Read a results directory back into (manifest, cells).

    Chains are loaded lazily via CellResult.load_chain().
    """
    out_dir = Path(out_dir)
    with open(out_dir / "grid.json", "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    cells = []
    for tag in manifest["cells"]:
        cdir = out_dir / "cells" / tag
        with open(cdir / "summary.json", "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("config_hash") != manifest.get("config_hash"):
            raise ValueError(f"cell {tag} config hash does not match the grid manifest")
        chain_path = cdir / "chain.csv"
        cells.append(CellResult.from_summary_dict(payload, str(chain_path) if chain_path.exists() else None))
    return manifest, sorted(cells, key=lambda c: (c.key.k, c.key.prior_id))
