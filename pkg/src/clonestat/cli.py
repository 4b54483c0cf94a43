"""Command-line interface: config parsing, dataset ingestion, dispatch.

Subcommands
-----------
run        DC grid over (clone levels x priors) -> results directory
anova      estimability report from a results directory
transform  estimability of an expression over stored chains
profile    discrete-parameter profile set + joint confidence region
simulate   synthetic dataset generation from a config + parameter file
plotdata   thinned, cell-tagged draws for external pair plotting

Exit codes: 0 ok, 1 validation error, 2 runtime error, 3 convergence
gate failure.  Errors print one line to stderr.  The environment
variable CLONESTAT_SEED overrides the config seed (a --seed flag
overrides both).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, kernels
from .cloning import (
    McmcConfig,
    cell_seed_entropy,
    filter_cells,
    load_grid,
    prior_from_dict,
    prior_to_dict,
    run_grid,
    save_grid,
    write_json,
)
from .data import Dataset
from .estimability import STATUS_UNCONVERGED, estimability_report, transform_cells
from .exprlang import ExprSyntaxError, parse as parse_expr
from .integrate import IntegratorConfig
from .models import ExperimentContext, ModelSpec, available_models, build_model, simulate
from .profiling import conditional_dc, joint_region_sample, profile_interval_set

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_dataset", "main"]


class ConfigError(ValueError):
    """Invalid configuration or dataset; maps to exit code 1."""


@dataclass
class RunConfig:
    model: ModelSpec
    priors: list
    k_levels: list
    mcmc: McmcConfig
    seed: int
    alpha: float
    data_path: Optional[str]
    experiments: list
    experiment_times: dict
    transforms: list
    discrete: Optional[dict]
    profile_opts: dict
    config_hash: str = ""
    canonical: dict = dc_field(default_factory=dict)


def _require(payload: dict, key: str, kind, context: str):
    if key not in payload:
        raise ConfigError(f"{context}: missing required field {key!r}")
    value = payload[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{context}: field {key!r} must be {getattr(kind, '__name__', kind)}")
    return value


def _parse_experiments(payload, context="config.experiments"):
    experiments = []
    times = {}
    for n, entry in enumerate(payload or []):
        if not isinstance(entry, dict) or "id" not in entry:
            raise ConfigError(f"{context}[{n}]: each experiment needs an 'id'")
        exp_id = str(entry["id"])
        conditions = {str(k): float(v) for k, v in entry.get("conditions", {}).items()}
        init_params = {str(k): str(v) for k, v in entry.get("init_params", {}).items()}
        experiments.append(ExperimentContext(id=exp_id, conditions=conditions, init_params=init_params))
        t_spec = entry.get("times")
        if t_spec is None:
            times[exp_id] = None
        elif isinstance(t_spec, dict):
            for key in ("start", "stop", "step"):
                if key not in t_spec:
                    raise ConfigError(f"{context}[{n}].times: needs start/stop/step")
            grid = np.arange(float(t_spec["start"]), float(t_spec["stop"]) + 0.5 * float(t_spec["step"]), float(t_spec["step"]))
            times[exp_id] = grid
        else:
            times[exp_id] = np.asarray([float(t) for t in t_spec], dtype=float)
    return experiments, times


def parse_config(path, seed_override: Optional[int] = None, need_grid: bool = True) -> RunConfig:
    """Read, validate and default-fill a JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    model_spec = _require(raw, "model", dict, "config")
    name = _require(model_spec, "name", str, "config.model")
    if name not in available_models():
        raise ConfigError(f"config.model.name: unknown model {name!r}; available: {', '.join(available_models())}")
    model_config = model_spec.get("config", {})
    if not isinstance(model_config, dict):
        raise ConfigError("config.model.config must be an object")
    model = build_model(name, model_config)

    priors_raw = raw.get("priors", [])
    if not isinstance(priors_raw, list):
        raise ConfigError("config.priors must be a list")
    priors = []
    for n, spec in enumerate(priors_raw):
        try:
            priors.append(prior_from_dict(spec))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config.priors[{n}]: {exc}") from exc
    ids = [p.id for p in priors]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"config.priors: ids must be unique, got {ids}")
    expected = set(model.param_names)
    for prior in priors:
        if prior.param_names != expected:
            raise ConfigError(
                f"config.priors[{prior.id}]: marginals cover {sorted(prior.param_names)} "
                f"but model {name!r} samples {sorted(expected)}"
            )

    k_levels = raw.get("k_levels", [])
    if not isinstance(k_levels, list) or not all(isinstance(k, int) and k >= 1 for k in k_levels):
        raise ConfigError("config.k_levels must be a list of positive integers")
    if k_levels != sorted(set(k_levels)):
        raise ConfigError("config.k_levels must be strictly ascending")
    if need_grid:
        if len(k_levels) < 2:
            raise ConfigError("config.k_levels: need >= 2 clone levels for the estimability tests")
        if len(priors) < 2:
            raise ConfigError("config.priors: need >= 2 priors for the estimability tests")

    mcmc_raw = raw.get("mcmc", {})
    if not isinstance(mcmc_raw, dict):
        raise ConfigError("config.mcmc must be an object")
    integ = None
    if "integrator" in raw:
        try:
            integ = IntegratorConfig(**raw["integrator"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config.integrator: {exc}") from exc
    try:
        mcmc = McmcConfig(
            n_iter=int(mcmc_raw.get("n_iter", 20000)),
            burn_frac=float(mcmc_raw.get("burn_frac", 0.5)),
            adapt=bool(mcmc_raw.get("adapt", True)),
            proposal_scale=float(mcmc_raw.get("proposal_scale", 0.5)),
            ess_min=float(mcmc_raw.get("ess_min", 1000.0)),
            geweke_max=float(mcmc_raw.get("geweke_max", 3.0)),
            integrator=integ,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.mcmc: {exc}") from exc

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("config.seed must be an integer")
    env_seed = os.environ.get("CLONESTAT_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"CLONESTAT_SEED must be an integer, got {env_seed!r}") from exc
    if seed_override is not None:
        seed = int(seed_override)

    alpha = raw.get("alpha", 0.05)
    if not isinstance(alpha, (int, float)) or not 0.0 < float(alpha) < 1.0:
        raise ConfigError("config.alpha must lie in (0, 1)")

    transforms = raw.get("transforms", [])
    if not isinstance(transforms, list) or not all(isinstance(t, str) for t in transforms):
        raise ConfigError("config.transforms must be a list of expression strings")
    for text in transforms:
        try:
            tree = parse_expr(text)
        except ExprSyntaxError as exc:
            raise ConfigError(f"config.transforms: {text!r}: {exc}") from exc
        from .exprlang import free_vars

        unknown = sorted(free_vars(tree) - set(model.param_names))
        if unknown:
            raise ConfigError(f"config.transforms: {text!r} references unknown parameters {unknown}")

    discrete = raw.get("discrete")
    if discrete is not None:
        if not isinstance(discrete, dict) or "name" not in discrete:
            raise ConfigError("config.discrete must be an object with a 'name'")
        if discrete["name"] not in model.discrete_param_names:
            raise ConfigError(
                f"config.discrete.name: {discrete['name']!r} is not a discrete parameter of model {name!r}"
            )
        if "values" in discrete:
            values = [int(v) for v in discrete["values"]]
        elif "range" in discrete:
            lo, hi = discrete["range"]
            values = list(range(int(lo), int(hi) + 1))
        else:
            raise ConfigError("config.discrete needs 'values' or 'range'")
        if not values:
            raise ConfigError("config.discrete: empty candidate set")
        discrete = {"name": str(discrete["name"]), "values": values}

    profile_opts = raw.get("profile", {})
    if not isinstance(profile_opts, dict):
        raise ConfigError("config.profile must be an object")
    profile_opts = {
        "level": float(profile_opts.get("level", 0.95)),
        "n_region_samples": int(profile_opts.get("n_region_samples", 2000)),
    }

    experiments, experiment_times = _parse_experiments(raw.get("experiments"))
    data_path = raw.get("data")
    if data_path is not None and not isinstance(data_path, str):
        raise ConfigError("config.data must be a file path string")

    canonical = {
        "model": {"name": name, "config": model_config},
        "experiments": [
            {
                "id": ctx.id,
                "conditions": dict(ctx.conditions),
                "init_params": dict(ctx.init_params),
                "times": None if experiment_times[ctx.id] is None else [float(t) for t in experiment_times[ctx.id]],
            }
            for ctx in experiments
        ],
        "priors": [prior_to_dict(p) for p in priors],
        "k_levels": k_levels,
        "mcmc": {
            "n_iter": mcmc.n_iter,
            "burn_frac": mcmc.burn_frac,
            "adapt": mcmc.adapt,
            "proposal_scale": mcmc.proposal_scale,
            "ess_min": mcmc.ess_min,
            "geweke_max": mcmc.geweke_max,
            "integrator": None
            if integ is None
            else {"method": integ.method, "step": integ.step, "rtol": integ.rtol, "atol": integ.atol, "max_steps": integ.max_steps},
        },
        "seed": seed,
        "alpha": float(alpha),
        "transforms": transforms,
        "discrete": discrete,
        "profile": profile_opts,
    }
    if data_path is not None:
        data_file = (path.parent / data_path) if not Path(data_path).is_absolute() else Path(data_path)
        if data_file.exists():
            canonical["data_sha256"] = hashlib.sha256(data_file.read_bytes()).hexdigest()
        data_path = str(data_file)
    config_hash = hashlib.sha256(json.dumps(canonical, sort_keys=True).encode()).hexdigest()[:16]

    return RunConfig(
        model=model,
        priors=priors,
        k_levels=k_levels,
        mcmc=mcmc,
        seed=seed,
        alpha=float(alpha),
        data_path=data_path,
        experiments=experiments,
        experiment_times=experiment_times,
        transforms=transforms,
        discrete=discrete,
        profile_opts=profile_opts,
        config_hash=config_hash,
        canonical=canonical,
    )


def load_dataset(path, model: Optional[ModelSpec] = None) -> Dataset:
    """CSV with header experiment,time,variable,value; '#' comments allowed.

    Times must already be strictly increasing within each (experiment,
    variable) series — unsorted data is an error, not silently sorted.
    Poisson-model counts must be nonnegative integers and every variable
    must be observable under the model.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"data file not found: {path}")
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(line for line in fh if line.strip() and not line.lstrip().startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty dataset") from None
        if [h.strip() for h in header] != ["experiment", "time", "variable", "value"]:
            raise ConfigError(f"{path}: header must be 'experiment,time,variable,value', got {header}")
        for n, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ConfigError(f"{path}:{n}: expected 4 fields, got {len(row)}")
            exp, t_str, var, v_str = (f.strip() for f in row)
            try:
                t_val = float(t_str)
                value = float(v_str)
            except ValueError:
                raise ConfigError(f"{path}:{n}: time and value must be numeric") from None
            rows.append((exp, t_val, var, value))
    try:
        data = Dataset(rows)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if model is not None:
        unknown = sorted(data.variables - set(model.observed))
        if unknown:
            raise ConfigError(
                f"{path}: unobservable/unknown variable(s) for model {model.name!r}: {unknown}"
            )
        if model.obs_model == "poisson":
            for row in data.rows:
                if row.value < 0 or row.value != int(row.value):
                    raise ConfigError(
                        f"{path}: Poisson observations must be nonnegative integers, got {row.value} "
                        f"(experiment {row.experiment!r}, t={row.time:g})"
                    )
    return data


def _contexts_for_data(cfg: RunConfig, data: Dataset):
    if cfg.experiments:
        known = {c.id for c in cfg.experiments}
        missing = [e for e in data.experiment_ids if e not in known]
        if missing:
            raise ConfigError(f"dataset experiments without config entries: {missing}")
        return cfg.experiments
    return [ExperimentContext(id=e) for e in data.experiment_ids]


def _manifest(cfg: RunConfig, extra: Optional[dict] = None) -> dict:
    payload = {
        "config_hash": cfg.config_hash,
        "model": cfg.model.name,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "backend": kernels.BACKEND,
        "version": __version__,
    }
    payload.update(extra or {})
    return payload


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_run(args) -> int:
    cfg = parse_config(args.config, seed_override=args.seed)
    data = load_dataset(cfg.data_path, cfg.model) if cfg.data_path else None
    if data is None:
        raise ConfigError("config.data: the run command needs a dataset")
    contexts = _contexts_for_data(cfg, data)
    cells = run_grid(
        cfg.model,
        data,
        cfg.priors,
        cfg.k_levels,
        cfg.mcmc,
        cfg.seed,
        experiments=contexts,
        workers=args.workers,
    )
    save_grid(args.out, _manifest(cfg), cells)
    for cell in cells:
        status = "ok" if cell.diag_ok else "GATE-FAILED"
        print(f"cell k={cell.key.k} prior={cell.key.prior_id}: {cell.n_draws} draws, "
              f"acceptance {cell.acceptance_rate:.3f}, {status}")
    print(f"results written to {args.out}")
    return 0


def _cmd_anova(args) -> int:
    manifest, cells = load_grid(args.results)
    cells = filter_cells(cells, drop_k=args.drop_k or [])
    if len({c.key.k for c in cells}) < 2:
        raise ConfigError("fewer than 2 clone levels remain after --drop-k; cannot run the clone-effect test")
    alpha = args.alpha if args.alpha is not None else manifest.get("alpha", 0.05)
    report = estimability_report(cells, alpha=alpha)
    payload = {"config_hash": manifest["config_hash"], "report": report.to_dict()}
    out_dir = Path(args.results)
    write_json(out_dir / "report.json", payload)
    table = report.format_table()
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    if any(v.status == STATUS_UNCONVERGED for v in report.verdicts.values()):
        print("warning: unconverged cells; drop the offending clone levels and rerun", file=sys.stderr)
        return 3
    return 0


def _cmd_transform(args) -> int:
    manifest, cells = load_grid(args.results)
    cells = filter_cells(cells, drop_k=args.drop_k or [])
    try:
        tree = parse_expr(args.expr)
    except ExprSyntaxError as exc:
        raise ConfigError(f"--expr: {exc}") from exc
    synthetic = transform_cells(cells, tree, name=args.expr.strip())
    alpha = args.alpha if args.alpha is not None else manifest.get("alpha", 0.05)
    report = estimability_report(synthetic, alpha=alpha)
    slug = hashlib.sha256(args.expr.strip().encode()).hexdigest()[:12]
    payload = {"config_hash": manifest["config_hash"], "expr": args.expr.strip(), "report": report.to_dict()}
    write_json(Path(args.results) / "transforms" / f"{slug}.json", payload)
    print(report.format_table())
    if any(v.status == STATUS_UNCONVERGED for v in report.verdicts.values()):
        return 3
    return 0


def _cmd_profile(args) -> int:
    cfg = parse_config(args.config, seed_override=args.seed)
    if cfg.discrete is None:
        raise ConfigError("config.discrete: the profile command needs a discrete parameter block")
    data = load_dataset(cfg.data_path, cfg.model) if cfg.data_path else None
    if data is None:
        raise ConfigError("config.data: the profile command needs a dataset")
    contexts = _contexts_for_data(cfg, data)
    name = cfg.discrete["name"]
    out_dir = Path(args.out)
    fits = []
    for value in cfg.discrete["values"]:
        fit = conditional_dc(
            cfg.model,
            data,
            name,
            value,
            cfg.priors,
            cfg.k_levels,
            cfg.mcmc,
            cfg.seed,
            alpha=cfg.alpha,
            experiments=contexts,
            workers=args.workers,
        )
        save_grid(
            out_dir / "conditional" / str(value),
            _manifest(cfg, {"fixed": {name: value}}),
            fit.cells,
        )
        tag = "ok" if fit.ok else "FLAGGED"
        logl = f"{fit.logl_at_mle:.4f}" if math.isfinite(fit.logl_at_mle) else "-inf"
        print(f"conditional {name}={value}: logL={logl} [{tag}]")
        fits.append(fit)
    usable = [f for f in fits if f.ok and math.isfinite(f.logl_at_mle)]
    if not usable:
        print("error: convergence: every conditional fit failed its gates", file=sys.stderr)
        return 3
    level = cfg.profile_opts["level"]
    result = profile_interval_set(fits, level=level)
    region = joint_region_sample(
        cfg.model,
        data,
        fits,
        n_samples=cfg.profile_opts["n_region_samples"],
        level=level,
        seed=cell_seed_entropy(cfg.seed, 0, "joint-region")[1],
        experiments=contexts,
        integrator=cfg.mcmc.integrator,
    )
    payload = {
        "config_hash": cfg.config_hash,
        "discrete": name,
        "level": level,
        "mle": {"value": result.mle_value, "params": result.mle_params},
        "profile_set": list(result.profile_set),
        "logl_by_value": {
            str(v): (ll if math.isfinite(ll) else None) for v, ll in sorted(result.logl_by_value.items())
        },
        "conditional_table": {
            str(f.discrete_value): {
                p: {"estimate": f.cond_mle[p], "se": math.sqrt(max(f.cond_inv_fim[p], 0.0))}
                for p in sorted(f.cond_mle)
            }
            for f in fits
        },
    }
    write_json(out_dir / "profile.json", payload)
    param_names = sorted(result.mle_params)
    with open(out_dir / "region.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join([name, *param_names, "statistic"]) + "\n")
        for point in region:
            row = [str(point["discrete"])] + [repr(point[p]) for p in param_names] + [repr(point["statistic"])]
            fh.write(",".join(row) + "\n")
    print(f"profile MLE: {name}={result.mle_value}, set={sorted(result.profile_set)}")
    print(f"joint region: {len(region)} accepted points -> {out_dir / 'region.csv'}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config, seed_override=args.seed, need_grid=False)
    with open(args.params, "r", encoding="utf-8") as fh:
        theta = {str(k): float(v) for k, v in json.load(fh).items()}
    missing = [p for p in cfg.model.all_param_names if p not in theta]
    if missing:
        raise ConfigError(f"--params: missing parameters {missing}")
    if not cfg.experiments:
        raise ConfigError("config.experiments: the simulate command needs experiments with times")
    for ctx in cfg.experiments:
        if cfg.experiment_times.get(ctx.id) is None:
            raise ConfigError(f"config.experiments[{ctx.id}]: simulate needs explicit times")
    times = {ctx.id: cfg.experiment_times[ctx.id] for ctx in cfg.experiments}
    predicted = simulate(cfg.model, theta, cfg.experiments, times, cfg.mcmc.integrator)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 0xC10E5])))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("# synthetic dataset generated by clonestat simulate\n")
        fh.write(f"# model={cfg.model.name} seed={cfg.seed} config_hash={cfg.config_hash}\n")
        fh.write("experiment,time,variable,value\n")
        for ctx in cfg.experiments:
            t_grid = times[ctx.id]
            for var in cfg.model.observed:
                if var not in predicted[ctx.id]:
                    continue
                means = np.asarray(predicted[ctx.id][var], dtype=float)
                if cfg.model.obs_model == "poisson":
                    values = rng.poisson(np.maximum(means, 0.0)).astype(int)
                else:
                    sd = math.sqrt(cfg.model.obs_variance_fn(var, theta, ctx))
                    values = means + sd * rng.standard_normal(means.size)
                for t_val, value in zip(t_grid, values):
                    rendered = str(int(value)) if cfg.model.obs_model == "poisson" else repr(float(value))
                    fh.write(f"{ctx.id},{t_val:g},{var},{rendered}\n")
    print(f"synthetic dataset written to {out}")
    return 0


def _cmd_plotdata(args) -> int:
    manifest, cells = load_grid(args.results)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    total = 0
    with open(out, "w", encoding="utf-8") as fh:
        names = cells[0].names
        fh.write(",".join(["k", "prior_id", "draw", *names]) + "\n")
        for cell in cells:
            draws = cell.load_chain()
            stride = max(1, math.ceil(draws.shape[0] / args.max_draws))
            for idx in range(0, draws.shape[0], stride):
                row = [str(cell.key.k), cell.key.prior_id, str(idx)]
                row += [repr(float(v)) for v in draws[idx]]
                fh.write(",".join(row) + "\n")
                total += 1
    print(f"{total} draws written to {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clonestat", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the data-cloning grid")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_anova = sub.add_parser("anova", help="estimability report from grid results")
    p_anova.add_argument("--results", required=True)
    p_anova.add_argument("--alpha", type=float, default=None)
    p_anova.add_argument("--drop-k", type=int, action="append", default=None)
    p_anova.set_defaults(func=_cmd_anova)

    p_tr = sub.add_parser("transform", help="test a transformed parameter expression")
    p_tr.add_argument("--results", required=True)
    p_tr.add_argument("--expr", required=True)
    p_tr.add_argument("--alpha", type=float, default=None)
    p_tr.add_argument("--drop-k", type=int, action="append", default=None)
    p_tr.set_defaults(func=_cmd_transform)

    p_prof = sub.add_parser("profile", help="discrete-parameter profile inference")
    p_prof.add_argument("--config", required=True)
    p_prof.add_argument("--out", required=True)
    p_prof.add_argument("--workers", type=int, default=1)
    p_prof.add_argument("--seed", type=int, default=None)
    p_prof.set_defaults(func=_cmd_profile)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--params", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.set_defaults(func=_cmd_simulate)

    p_plot = sub.add_parser("plotdata", help="emit thinned draws for pair plots")
    p_plot.add_argument("--results", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--max-draws", type=int, default=2000)
    p_plot.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: validation: {_one_line(exc)}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not crashes
        print(f"error: runtime: {_one_line(exc)}", file=sys.stderr)
        return 2


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
