"""End-to-end experiment runs: data, SGD over seeds, bounds, verdicts, files."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from consistent_sgd.bounds import BoundConstants, BoundCurve, TheoremId, bound_curve, d_f
from consistent_sgd.datagen import standard_instance
from consistent_sgd.estimators import EstimatorSpec
from consistent_sgd.harness.config import ExperimentConfig
from consistent_sgd.harness.io import write_bound_csv, write_json, write_trace_csv
from consistent_sgd.harness.plot import emit_plot
from consistent_sgd.harness.rates import RateReport, check_rate
from consistent_sgd.optimizer import (FeasibleRegion, RunTrace, StepSchedule, average_traces,
                                      initial_iterate, run_sgd)
from consistent_sgd.problems import CurvatureConstants, GraphProblem, build_problem, curvature_constants, objective

log = logging.getLogger(__name__)

# trace column each bound constrains
BOUND_METRIC = {
    TheoremId.T2_iterate: "dist_sq",
    TheoremId.T2_average: "avg_gap",
    TheoremId.T3_smooth: "f_gap",
    TheoremId.T4_convex: "avg_gap",
    TheoremId.T5_nonconvex: "min_grad_norm_sq",
    TheoremId.T10_iterate: "dist_sq",
    TheoremId.T10_average: "avg_gap",
    TheoremId.T11_smooth: "f_gap",
    TheoremId.T12_convex: "avg_gap",
    TheoremId.T13_nonconvex: "min_grad_norm_sq",
}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    problem: GraphProblem
    curvature: CurvatureConstants
    traces: list[RunTrace]
    mean_trace: RunTrace
    bound_curves: list[BoundCurve]
    rate: RateReport | None
    summary: dict
    files: list[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.summary["all_passed"])


def build_experiment_problem(cfg: ExperimentConfig) -> GraphProblem:
    A, X, truth = standard_instance(cfg.kind, n=cfg.n, p=cfg.p, d=cfg.d, d2=cfg.d2, seed=cfg.data_seed)
    return build_problem(A, X, truth)


def estimator_spec(cfg: ExperimentConfig) -> EstimatorSpec:
    return EstimatorSpec(mode=cfg.estimator, n1=cfg.n1, n2=cfg.n2, n3=cfg.n3, replacement=cfg.replacement)


def make_region(cfg: ExperimentConfig, problem: GraphProblem) -> FeasibleRegion:
    return FeasibleRegion.ball(problem.radius) if cfg.region == "ball" else FeasibleRegion()


def _schedule(cfg: ExperimentConfig, curv: CurvatureConstants, D_f: float) -> StepSchedule:
    return StepSchedule(rule=cfg.rule, l=curv.l, c=cfg.c, D_f=cfg.D_f if cfg.D_f is not None else D_f,
                        G=cfg.G, T=cfg.T, rho=cfg.rho, delta=cfg.delta)


def _run_one(args) -> RunTrace:
    problem, spec, schedule, region, T, seed, stride = args
    return run_sgd(problem, spec, schedule, region, T, seed=seed, iterate_stride=stride or None)


def _bound_constants(cfg, curv, region, G_hat, D_f_max) -> BoundConstants:
    return BoundConstants(G=G_hat, l=curv.l, L=curv.L,
                          D=region.diameter if region.shape == "ball" else None,
                          c=cfg.c, D_f=cfg.D_f if cfg.D_f is not None else D_f_max,
                          rho=cfg.rho, delta=cfg.delta, T=cfg.T)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every seed of ``cfg`` and write its artifacts to ``cfg.output_dir``.

    Writes ``trace_seed<s>.csv`` per seed, ``mean_trace.csv``, one
    ``bound_<id>.csv`` per requested theorem, ``summary.json`` and, if
    enabled, ``figure.svg``.  Reruns with the same config are byte-identical.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")

    problem = build_experiment_problem(cfg)
    curv = curvature_constants(problem, seed=cfg.data_seed)
    region = make_region(cfg, problem)
    spec = estimator_spec(cfg)
    spec.validate(problem)

    D_f_seed = {}
    jobs = []
    for seed in cfg.seeds:
        w1 = initial_iterate(problem, region, seed)
        D_f_seed[seed] = d_f(objective(problem, w1), problem.f_star, curv.L)
        schedule = _schedule(cfg, curv, D_f_seed[seed])
        jobs.append((problem, spec, schedule, region, cfg.T, seed, cfg.iterate_stride))
    log.info("running %d seed(s), T=%d, %s estimator", len(jobs), cfg.T, cfg.estimator)
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = [_run_one(j) for j in jobs]

    files = []
    for seed, tr in zip(cfg.seeds, traces):
        files.append(write_trace_csv(out / f"trace_seed{seed}.csv", tr))
    mean = average_traces(traces)
    files.append(write_trace_csv(out / "mean_trace.csv", mean))

    G_hat = max(tr.G_hat for tr in traces)
    consts = _bound_constants(cfg, curv, region, G_hat, max(D_f_seed.values()))
    curves, bound_results = [], {}
    for b in cfg.bounds:
        th = TheoremId(b)
        curve = bound_curve(th, consts)
        curves.append(curve)
        files.append(write_bound_csv(out / f"bound_{th}.csv", curve))
        metric = BOUND_METRIC[th]
        observed = mean.column(metric)[curve.k - 1]
        ratio = observed / curve.values
        bound_results[str(th)] = {
            "metric": metric,
            "max_ratio": float(np.max(ratio)),
            "worst_k": int(curve.k[int(np.argmax(ratio))]),
            "passed": bool(np.all(observed <= (1 + cfg.bound_slack) * curve.values)),
        }

    rate = None
    if cfg.rate_metric:
        rate = check_rate(mean, cfg.rate_metric, cfg.rate_target, tuple(cfg.rate_window))

    verdicts = {f"bound:{k}": v["passed"] for k, v in bound_results.items()}
    if rate is not None:
        verdicts[f"rate:{rate.metric}"] = rate.passed
    if cfg.plot:
        ref = None
        if cfg.rate_metric:
            slope = -1.0 if cfg.kind == "convex" else -0.5
            ref = (float(mean.column(cfg.rate_metric)[0]), slope)
        files.append(emit_plot([mean], curves, out / "figure.svg", reference=ref,
                               title=f"{cfg.kind}, {cfg.estimator}, {len(traces)} seed(s)"))

    summary = {
        "config": cfg.to_dict(),
        "constants": {
            "l": curv.l,
            "L": curv.L,
            "L_estimated": curv.L_estimated,
            "G_hat": G_hat,
            "G_hat_per_seed": {str(s): t.G_hat for s, t in zip(cfg.seeds, traces)},
            "D_f": consts.D_f,
            "D_f_per_seed": {str(s): v for s, v in D_f_seed.items()},
            "radius": problem.radius if region.shape == "ball" else None,
            "D": consts.D,
            "c": cfg.c,
            "rho": cfg.rho,
            "delta": cfg.delta,
            "T": cfg.T,
            "f_star": problem.f_star,
        },
        "bound_constants": consts.as_dict(),
        "seeds": list(cfg.seeds),
        "projection_activated": {str(s): t.projection_ever_active for s, t in zip(cfg.seeds, traces)},
        "bounds": bound_results,
        "rate": rate.as_dict() if rate is not None else None,
        "verdicts": verdicts,
        "all_passed": all(verdicts.values()),
        "files": sorted(p.name for p in files) + ["summary.json"],
    }
    files.append(write_json(out / "summary.json", summary))
    return ExperimentResult(cfg, problem, curv, traces, mean, curves, rate, summary, files)
