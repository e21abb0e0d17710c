"""Experiment pipelines: simulate, estimate, verify and suites of configs."""
from dataclasses import dataclass
from pathlib import Path
from typing import Any
import logging
import math

import numpy as np

from src import __version__
from src.bismut.estimators import BismutEstimate, RunSetup, estimate_bismut, estimate_fd
from src.bismut.functionals import Direction, TestFunctional, build_direction, build_functional
from src.bismut.oracles import deterministic_tangent_oracle
from src.bismut.verification import damped_decay_slope, verify_chain_rule, verify_ibp
from src.config import get_settings
from src.errors import ConfigInvalid, MkvBismutError
from src.experiments.reports import summarize_reports, write_json, write_summary_csv, write_weights_csv
from src.experiments.schemas import ExperimentConfig, load_config
from src.models.coefficients import CoefficientSet
from src.models.linear_delay import LinearDelayParams
from src.models.registry import build_model
from src.pathspace.grid import make_grid
from src.pathspace.io import write_paths, write_paths_csv
from src.solver.particles import SAMPLERS, moment_sup
from src.solver.picard import picard_law_fixedpoint
from src.tangents.solvers import solve_damped_tangent
from src.tangents.types import constant_control

logger = logging.getLogger(__name__)

VERIFY_KINDS = ("ibp", "chain-rule", "decay", "picard")


@dataclass(frozen=True)
class Experiment:
    """A validated config with its model, functional, direction and run setup built."""
    config: ExperimentConfig
    coeffs: CoefficientSet
    functional: TestFunctional
    direction: Direction
    setup: RunSetup


def prepare(config: ExperimentConfig, threads: int | None = None) -> Experiment:
    coeffs = build_model(config.model.name, config.model.params)
    grid = make_grid(config.grid.T, config.grid.dt, config.grid.r0)
    params = {"dim": coeffs.d, **config.initial.params}
    try:
        init = SAMPLERS[config.initial.name](**params)
    except (TypeError, ValueError) as e:
        raise ConfigInvalid("initial.params", str(e)) from e
    setup = RunSetup(coeffs, init, grid, config.N, config.seed, threads)
    return Experiment(
        config=config,
        coeffs=coeffs,
        functional=build_functional(config.functional.name, config.functional.params),
        direction=build_direction(config.direction.name, config.direction.params),
        setup=setup,
    )


def resolve_output(config: ExperimentConfig, out_dir: str | Path | None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if config.output_dir:
        return Path(config.output_dir)
    return Path(get_settings().output_dir) / config.name


def manifest(experiment: Experiment) -> dict[str, Any]:
    """Everything needed to reproduce a run bit for bit."""
    config = experiment.config
    return {
        "config": config.model_dump(mode="json"),
        "config_hash": config.content_hash(),
        "version": __version__,
        "model": experiment.coeffs.describe(),
        "grid": experiment.setup.grid.to_dict(),
        "N": config.N,
        "seed": config.seed,
        "initial": experiment.setup.init.descriptor,
    }


# ============================================================================
# ORACLES
# ============================================================================

def delay_oracle_value(experiment: Experiment) -> tuple[float | None, str | None]:
    """The method-of-steps oracle when the experiment is in its scope, else (None, reason)."""
    config = experiment.config
    if config.model.name != "linear_delay":
        return None, "delay-ODE oracle covers the linear_delay model only"
    params = LinearDelayParams(**config.model.params)
    if params.sigma_tanh != 0.0:
        return None, "delay-ODE oracle needs additive noise"
    if config.functional.name != "coordinate" or config.functional.params.get("index", 0) != 0:
        return None, "delay-ODE oracle needs f(xi) = xi(0)"
    if config.direction.name != "constant_shift":
        return None, "delay-ODE oracle needs a constant direction"
    phi0 = float(np.asarray(config.direction.params.get("value", 1.0), dtype=float).reshape(-1)[0])
    grid = experiment.setup.grid
    return deterministic_tangent_oracle(params, phi0, grid.T, grid), None


def _pair(a: float, b: float, tolerance: float) -> dict[str, Any]:
    gap = abs(a - b)
    return {"gap": gap, "tolerance": tolerance, "pass": gap <= tolerance}


def compute_oracles(experiment: Experiment, estimate: BismutEstimate, base) -> dict[str, Any]:
    """Finite-difference and delay-ODE oracles with all pairwise gaps."""
    config = experiment.config
    se_b = estimate.stderr
    if estimate.diagnostics.get("combined_stderr") is not None and estimate.remainder_included:
        se_b = estimate.diagnostics["combined_stderr"]
    report: dict[str, Any] = {"bismut": {"value": estimate.value, "stderr": se_b}, "gaps": {}}

    fd = None
    if config.oracles.fd:
        fd = estimate_fd(experiment.functional, experiment.direction, config.fd_epsilon, experiment.setup, base=base)
        report["fd"] = fd.to_dict()
        report["gaps"]["bismut_fd"] = _pair(estimate.value, fd.value, 3.0 * math.hypot(se_b, fd.stderr) + fd.epsilon_term)

    if config.oracles.delay_ode:
        value, reason = delay_oracle_value(experiment)
        report["delay_ode"] = {"value": value, "reason": reason}
        if value is not None:
            report["gaps"]["bismut_delay_ode"] = _pair(estimate.value, value, 3.0 * se_b)
            if fd is not None:
                report["gaps"]["delay_ode_fd"] = _pair(value, fd.value, 3.0 * fd.stderr + fd.epsilon_term)
    return report


# ============================================================================
# PIPELINES
# ============================================================================

def run_simulation(config: ExperimentConfig, out_dir: str | Path | None = None, threads: int | None = None) -> dict[str, Any]:
    """Forward solve only; writes manifest.json, paths.bin, paths.csv and simulate.json."""
    experiment = prepare(config, threads)
    out = resolve_output(config, out_dir)
    base, _ = experiment.setup.simulate()
    grid = experiment.setup.grid

    write_json(out / "manifest.json", manifest(experiment))
    write_paths(out / "paths.bin", base.paths, grid, kind="paths", meta={"seed": config.seed})
    write_paths_csv(out / "paths.csv", base.paths, grid.times())
    summary = {
        "config_hash": config.content_hash(),
        "moment_sup_p2": moment_sup(base, 2.0),
        "terminal_mean": base.paths[:, -1].mean(axis=0).tolist(),
        "version": __version__,
    }
    write_json(out / "simulate.json", summary)
    logger.info(f"Simulation written to {out}")
    return summary


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None, threads: int | None = None) -> dict[str, Any]:
    """
    Full estimate pipeline.

    Writes manifest.json, estimate.json, weights.csv and, when any oracle is
    enabled, oracle.json. Returns the record used by suite summaries.
    """
    experiment = prepare(config, threads)
    out = resolve_output(config, out_dir)
    write_json(out / "manifest.json", manifest(experiment))

    base = experiment.setup.simulate()
    estimate = estimate_bismut(
        experiment.functional,
        config.flavor,
        experiment.direction,
        experiment.setup,
        lam=config.lam,
        include_remainder=config.include_remainder,
        base=base,
    )
    payload = {**estimate.to_dict(), "config_hash": config.content_hash(), "version": __version__}
    write_json(out / "estimate.json", payload)
    write_weights_csv(out / "weights.csv", estimate.weights)

    record: dict[str, Any] = {"config": config.model_dump(mode="json"), "estimate": payload, "oracle": None}
    if config.oracles.fd or config.oracles.delay_ode:
        oracle = compute_oracles(experiment, estimate, base)
        write_json(out / "oracle.json", oracle)
        record["oracle"] = oracle
    logger.info(f"Experiment {config.name} written to {out}")
    return record


def run_verification(config: ExperimentConfig, kind: str, out_dir: str | Path | None = None, threads: int | None = None) -> dict[str, Any]:
    """Run one of the verify checks and write verify_<kind>.json."""
    if kind not in VERIFY_KINDS:
        raise ConfigInvalid("verify", f"unknown check {kind!r} (known: {list(VERIFY_KINDS)})")
    experiment = prepare(config, threads)
    setup, options = experiment.setup, config.verify
    grid = setup.grid
    out = resolve_output(config, out_dir)
    write_json(out / "manifest.json", manifest(experiment))

    if kind == "ibp":
        control = constant_control(grid, config.N, experiment.coeffs.m, options.ibp_level)
        result = verify_ibp(experiment.functional, control, setup).to_dict()
    elif kind == "chain-rule":
        samples = setup.init.draw(config.N, grid.k, config.seed)
        if options.chain_rule_outer == "square":
            outer, outer_prime = (lambda u: u * u), (lambda u: 2.0 * u)
        else:
            outer, outer_prime = (lambda u: u), (lambda u: 1.0)
        check = verify_chain_rule(experiment.functional, outer, outer_prime, experiment.direction, samples, options.chain_rule_epsilon)
        result = check.to_dict()
    elif kind == "decay":
        base, law = setup.simulate()
        xi = experiment.direction(base.segment(0))
        t_min, t_max = options.decay_window
        slopes = [
            damped_decay_slope(solve_damped_tangent(experiment.coeffs, base, law, xi, lam, setup.threads), t_min, t_max)
            for lam in options.decay_lams
        ]
        ordered = [s for _, s in sorted(zip(options.decay_lams, slopes))]
        result = {
            "lams": list(options.decay_lams),
            "slopes": slopes,
            "window": [t_min, t_max],
            "all_negative": all(s < 0 for s in slopes),
            "steepening": all(b < a for a, b in zip(ordered, ordered[1:])),
        }
    else:
        _, diagnostics = picard_law_fixedpoint(
            experiment.coeffs, setup.init, grid, config.N, config.seed,
            lam=options.picard_lam, tol=options.picard_tol, max_iter=options.picard_max_iter,
            p=options.picard_p, metric_stride=options.picard_metric_stride, threads=setup.threads,
        )
        result = diagnostics.to_dict()

    payload = {"check": kind, "config_hash": config.content_hash(), "version": __version__, "result": result}
    write_json(out / f"verify_{kind.replace('-', '_')}.json", payload)
    logger.info(f"Verification {kind} written to {out}")
    return payload


def run_suite(directory: str | Path, out_dir: str | Path | None = None, threads: int | None = None) -> list[dict[str, Any]]:
    """
    Run every *.json config of a directory in name order and write summary.csv.

    Individual failures become failure rows; the suite carries on.

    Raises:
        ConfigInvalid: the directory holds no configs
    """
    source = Path(directory)
    paths = sorted(source.glob("*.json")) if source.is_dir() else []
    if not paths:
        raise ConfigInvalid("suite", f"no configs in {directory}")

    root = Path(out_dir) if out_dir is not None else Path(get_settings().output_dir) / source.name
    records: list[dict[str, Any]] = []
    for path in paths:
        logger.info(f"Suite: running {path.name}")
        try:
            config = load_config(path)
            records.append(run_experiment(config, root / path.stem, threads))
        except MkvBismutError as e:
            logger.error(f"Suite: {path.name} failed: {e}")
            records.append({"source": path.stem, "config": None, "error": f"{type(e).__name__}: {e}"})
        except Exception as e:
            logger.error(f"Suite: {path.name} crashed: {e}", exc_info=True)
            records.append({"source": path.stem, "config": None, "error": f"{type(e).__name__}: {e}"})

    rows = summarize_reports(records)
    write_summary_csv(root / "summary.csv", rows)
    return rows
