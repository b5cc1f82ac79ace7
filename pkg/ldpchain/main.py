from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
from pydantic import ValidationError

from ldpchain import artifacts
from ldpchain.config import settings
from ldpchain.errors import PreconditionError
from ldpchain.kernels.base import X_INIT, KernelModel, sample_paths
from ldpchain.kernels.zoo import LotkaVolterra, PerturbedSystem, build_kernel
from ldpchain.measures import build_measure
from ldpchain.models import FAIL, ClassStructure
from ldpchain.schemas import TASKS, ClassesParams, ExperimentConfig, MeasureSpec
from ldpchain.services import estimator_service, maps_service, zoo_service
from ldpchain.services.classes_service import (
    build_compact_frame,
    check_admissible,
    class_rows,
    class_structure_record,
    discover_classes_1d,
    grid_class_probe,
    product_classes_extinction,
)

logger = logging.getLogger("ldpchain.cli")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


@dataclass
class TaskResult:
    """Rows for `<task>.csv`, the summary payload, and an optional plot writer."""

    rows: list[dict[str, Any]]
    result: dict[str, Any]
    failed: bool = False
    plot: Callable[[Path], Path] | None = None


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def resolve_classes(model: KernelModel, p: ClassesParams, rng: np.random.Generator) -> ClassStructure:
    if p.method == "grid":
        if p.grid is None:
            raise PreconditionError("method=grid needs a grid")
        return grid_class_probe(model, p.grid.lows, p.grid.highs, p.grid.cells, p.k_max, p.samples, rng)
    if isinstance(model, PerturbedSystem):
        return discover_classes_1d(model.f, p.domain, p.resolution, p.beta_support)
    if isinstance(model, LotkaVolterra):
        return product_classes_extinction(model.dim)
    raise PreconditionError(f"analytic classes are not available for model {model.name}; use method=grid")


def task_simulate(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    start = X_INIT if p.start is None else np.asarray(p.start, dtype=float)
    paths = sample_paths(model, start, p.n, p.paths, np.random.default_rng(cfg.seed))
    rows = [
        {"path": i, "t": t + 1, **{f"x{k + 1}": float(v) for k, v in enumerate(letter)}}
        for i, word in enumerate(paths)
        for t, letter in enumerate(word)
    ]
    return TaskResult(rows, {"model": model.describe(), "paths": p.paths, "n": p.n})


def task_classes(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    cs = resolve_classes(model, cfg.params, np.random.default_rng(cfg.seed))
    return TaskResult(class_rows(cs), {"classes": class_structure_record(cs)})


def task_admissible(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    cs = resolve_classes(model, p.classes, np.random.default_rng(cfg.seed))
    rows = []
    for name, spec in sorted(p.measures.items()):
        report = check_admissible(build_measure(spec), cs)
        rows.append({"measure": name, **report.to_record()})
    return TaskResult(rows, {"classes": class_structure_record(cs), "measures": rows})


def task_verify_maps(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    reports = [
        maps_service.geographic_sweep(kind, p.instances, cfg.seed, members=p.members, dump_limit=p.dump_limit)
        for kind in p.kinds
    ]
    rows = [r.to_row() for r in reports]
    result = {"checks": rows, "counterexamples": {r.kind: r.counterexamples for r in reports if r.counterexamples}}
    return TaskResult(rows, result, failed=any(r.verdict == FAIL for r in reports))


def task_estimate_rate(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    surface = estimator_service.rl_diagnostic(
        model, build_measure(p.target), p.deltas, p.ns, p.samples, cfg.seed,
        workers=cfg.workers, proxy_cells=p.target.proxy_cells,
    )
    corner = surface.corner
    result = {
        "target": surface.target,
        "monotonicity_violations": surface.monotonicity_violations,
        "rl_proxy": surface.rl_proxy,
        "corner": None if corner is None else {"n": corner.n, "delta": corner.delta},
    }
    return TaskResult(surface.rows(), result, plot=lambda path: artifacts.plot_rate_surface(path, surface))


def task_dv_bound(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    bound = estimator_service.dv_entropy_lower_bound(
        model, build_measure(p.target), p.box_low, p.box_high,
        cells=p.cells, eps=p.eps, sweeps=p.sweeps, mc_samples=p.mc_samples, seed=cfg.seed,
    )
    row = {"value": bound.value, "integration_error": bound.integration_error, "family": bound.family}
    return TaskResult([row], bound.to_record())


def task_verify_inequalities(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    cs = resolve_classes(model, p.classes, rng)
    fp = p.frame
    frame = build_compact_frame(
        model, cs, fp.class_subset, fp.quantile, fp.delta, fp.tau_max, fp.samples, rng,
        probes_per_class=fp.probes_per_class, cores=[build_measure(c) for c in fp.cores] or None,
    )
    reports = []
    if p.coupling is not None:
        c = p.coupling
        reports.append(
            estimator_service.verify_coupling_probability(
                model, frame, build_measure(c.center), c.radius, c.N, c.n, c.T, p.samples, cfg.seed,
                workers=cfg.workers, proxy_cells=c.center.proxy_cells,
            )
        )
    if p.supermultiplicative is not None:
        s = p.supermultiplicative
        reports.append(
            estimator_service.verify_supermultiplicative(
                model, frame, build_measure(s.mu1), build_measure(s.mu2), s.eps, s.delta, s.n, s.T,
                p.samples, cfg.seed, workers=cfg.workers, proxy_cells=s.mu1.proxy_cells,
            )
        )
    if p.decoupling is not None:
        d = p.decoupling
        centers = tuple(None if c is None else build_measure(c) for c in (d.center1, d.center2))
        given = [c for c in (d.center1, d.center2) if c is not None]
        reports.append(
            estimator_service.verify_decoupling_probability(
                model, frame, d.partition, d.n, d.eps, d.lambdas, centers, (d.radius1, d.radius2),
                p.samples, cfg.seed, workers=cfg.workers,
                proxy_cells=given[0].proxy_cells if given else MeasureSpec.model_fields["proxy_cells"].default,
            )
        )
    rows = [r.to_row() for r in reports]
    result = {"frame": frame.to_record(), "checks": [{**r.to_row(), "details": r.details} for r in reports]}
    return TaskResult(rows, result, failed=any(r.verdict == FAIL for r in reports))


def task_lv_demo(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    if not isinstance(model, LotkaVolterra):
        raise PreconditionError("lv-demo needs the lotka_volterra model")
    report = zoo_service.lv_demo(
        model, build_measure(p.mu1), build_measure(p.mu2), p.delta, p.ns, p.samples, cfg.seed,
        workers=cfg.workers, beta_box=p.beta_box, proxy_cells=p.mu1.proxy_cells,
    )
    series: dict[str, list[tuple[float, float]]] = {}
    for row in report.rows:
        series.setdefault(row["measure"], []).append((row["n"], row["hits"] / row["samples"]))
    # Reported only; verify tasks alone set the exit code.
    result = {"passed": report.passed, "sets_exit_code": False, **report.details}
    return TaskResult(
        report.rows, result,
        plot=lambda path: artifacts.plot_series(path, series, "n", "P(L_n in ball)"),
    )


def task_escape_probe(cfg: ExperimentConfig, model: KernelModel) -> TaskResult:
    p = cfg.params
    report = zoo_service.escape_decay_probe(model, p.U, p.kappa, p.ns, p.samples, cfg.seed, workers=cfg.workers)
    pts = [(row["n"], row["estimate"]) for row in report.rows if isinstance(row["estimate"], float)]
    return TaskResult(
        report.rows, {"passed": report.passed, "sets_exit_code": False, **report.details},
        plot=lambda path: artifacts.plot_series(path, {"(1/n) log P": pts}, "n", "(1/n) log P(L_n(U) >= kappa)"),
    )


TASK_RUNNERS: dict[str, Callable[[ExperimentConfig, KernelModel], TaskResult]] = {
    "simulate": task_simulate,
    "classes": task_classes,
    "admissible": task_admissible,
    "verify-maps": task_verify_maps,
    "estimate-rate": task_estimate_rate,
    "dv-bound": task_dv_bound,
    "verify-inequalities": task_verify_inequalities,
    "lv-demo": task_lv_demo,
    "escape-probe": task_escape_probe,
}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig) -> int:
    """Run one task and write `<task>.csv`, `summary.json` and an optional plot."""
    runner = TASK_RUNNERS.get(cfg.task)
    if runner is None:
        raise RuntimeError(f"Unknown task: {cfg.task}")
    model = build_kernel(cfg.model)
    logger.info("run: task=%s model=%s seed=%s workers=%s", cfg.task, model.name, cfg.seed, cfg.workers)
    outcome = runner(cfg, model)

    out = Path(cfg.output_dir)
    artifacts.write_csv(out / f"{cfg.task}.csv", outcome.rows)
    doc = artifacts.summary(cfg.resolved(), cfg.workers, {**outcome.result, "failed": outcome.failed})
    artifacts.write_json(out / "summary.json", doc)
    if outcome.plot is not None and settings.ldp_plots:
        outcome.plot(out / f"{cfg.task}.svg")
    logger.info("run: wrote artifacts to %s", out)
    return EXIT_FAIL if outcome.failed else EXIT_OK


def load_config(path: str | None, task: str, seed: int | None, workers: int | None, out: str | None) -> ExperimentConfig:
    doc: dict[str, Any] = {}
    if path:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise PreconditionError("the config file must hold a JSON object")
    if doc.setdefault("task", task) != task:
        raise PreconditionError(f"config is for task {doc['task']!r}, not {task!r}")
    if seed is not None:
        doc["seed"] = seed
    if workers is not None:
        doc["workers"] = workers
    if out is not None:
        doc["output_dir"] = out
    return ExperimentConfig.model_validate(doc)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpchain", description="Large deviations toolkit for Markov chains")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="artifact directory")
    return parser


def _setup_logging() -> None:
    level = getattr(logging, (settings.ldp_log_level or "INFO").upper(), logging.INFO)
    if settings.ldp_debug:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging()
    try:
        cfg = load_config(args.config, args.task, args.seed, args.workers, args.out)
    except ValidationError as e:
        for err in e.errors():
            loc = ".".join(str(part) for part in err["loc"])
            logger.error("config: %s: %s", loc or "<root>", err["msg"])
        return EXIT_CONFIG
    except json.JSONDecodeError as e:
        logger.error("config: line %s column %s: %s", e.lineno, e.colno, e.msg)
        return EXIT_CONFIG
    except (OSError, PreconditionError) as e:
        logger.error("config: %s", e)
        return EXIT_CONFIG

    try:
        return run(cfg)
    except PreconditionError as e:
        logger.error("%s: %s", cfg.task, e)
        return EXIT_CONFIG
    except Exception:
        logger.exception("%s: task failed", cfg.task)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
