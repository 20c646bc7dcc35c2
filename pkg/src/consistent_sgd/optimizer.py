"""Projected SGD with the step-size rules of the convergence theorems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from consistent_sgd.datagen import STREAM_ESTIMATOR, STREAM_INIT, make_rng
from consistent_sgd.estimators import EstimatorSpec, estimate_gradient
from consistent_sgd.problems import GraphProblem, value_and_gradient

Rule = Literal["inverse_lk", "inverse_sqrt", "constant_nonconvex", "highprob_inverse_lk",
               "highprob_constant_nonconvex", "constant"]
RULES = ("inverse_lk", "inverse_sqrt", "constant_nonconvex", "highprob_inverse_lk",
         "highprob_constant_nonconvex", "constant")

TRACE_COLUMNS = ("k", "gamma_k", "dist_sq", "f_gap", "avg_gap", "grad_norm_sq",
                 "min_grad_norm_sq", "proj_active")


class DivergenceError(ArithmeticError):
    """An iterate became non-finite."""


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule and its constants.

    ``inverse_lk``                  c / (l k)         (c defaults to 1)
    ``inverse_sqrt``                c / sqrt(k)
    ``constant_nonconvex``          D_f / (G sqrt(T))
    ``highprob_inverse_lk``         c / ((l - rho/T) k)
    ``highprob_constant_nonconvex`` D_f / ((1 + delta) G sqrt(T))
    ``constant``                    c
    """

    rule: Rule
    l: float | None = None
    c: float = 1.0
    D_f: float | None = None
    G: float | None = None
    T: int | None = None
    rho: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown step rule {self.rule!r}")
        need = {
            "inverse_lk": ("l",),
            "inverse_sqrt": (),
            "constant_nonconvex": ("D_f", "G", "T"),
            "highprob_inverse_lk": ("l", "T"),
            "highprob_constant_nonconvex": ("D_f", "G", "T"),
            "constant": (),
        }[self.rule]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"step rule {self.rule} needs constant {name}")
        if self.rule in ("inverse_lk", "highprob_inverse_lk") and not self.l > 0:
            raise ValueError(f"step rule {self.rule} needs l > 0, got {self.l}")
        if self.rule == "highprob_inverse_lk" and not self.l - self.rho / self.T > 0:
            raise ValueError(f"l - rho/T must be positive (l={self.l}, rho={self.rho}, T={self.T})")
        if self.rule == "highprob_constant_nonconvex" and not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if self.rule in ("inverse_sqrt", "constant") and not self.c > 0:
            raise ValueError(f"step constant c must be positive, got {self.c}")


def step_size(schedule: StepSchedule, k: int) -> float:
    if k < 1:
        raise ValueError(f"iteration index starts at 1, got {k}")
    s = schedule
    if s.rule == "inverse_lk":
        return s.c / (s.l * k)
    if s.rule == "inverse_sqrt":
        return s.c / math.sqrt(k)
    if s.rule == "constant_nonconvex":
        return s.D_f / (s.G * math.sqrt(s.T))
    if s.rule == "highprob_inverse_lk":
        return s.c / ((s.l - s.rho / s.T) * k)
    if s.rule == "highprob_constant_nonconvex":
        return s.D_f / ((1.0 + s.delta) * s.G * math.sqrt(s.T))
    return s.c


@dataclass(frozen=True)
class FeasibleRegion:
    shape: Literal["ball", "unconstrained"] = "unconstrained"
    radius: float = math.inf

    def __post_init__(self):
        if self.shape not in ("ball", "unconstrained"):
            raise ValueError(f"unknown region shape {self.shape!r}")
        if self.shape == "ball" and not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"ball radius must be positive and finite, got {self.radius}")

    @classmethod
    def ball(cls, radius: float) -> "FeasibleRegion":
        return cls("ball", float(radius))

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius if self.shape == "ball" else math.inf

    def contains(self, w: np.ndarray, tol: float = 0.0) -> bool:
        return self.shape == "unconstrained" or float(np.linalg.norm(w)) <= self.radius + tol


def project(w: np.ndarray, region: FeasibleRegion) -> np.ndarray:
    """Euclidean projection onto the region (radial scaling for a ball)."""
    if region.shape == "unconstrained":
        return w
    norm = float(np.linalg.norm(w))
    if norm <= region.radius:
        return w
    return w * (region.radius / norm)


def initial_iterate(problem: GraphProblem, region: FeasibleRegion, seed: int) -> np.ndarray:
    """Standard normal start, projected into the region."""
    return project(make_rng(seed, STREAM_INIT).standard_normal(problem.dim), region)


@dataclass
class RunTrace:
    """Per-iteration metrics of one run (rows k = 1..T) and final iterates.

    Row k describes iterate w_k and the update that produced w_{k+1}:
    ``gamma_k`` is the step used and ``proj_active`` records whether the
    projection moved ``w_k - gamma_k g_k``.
    """

    k: np.ndarray
    gamma_k: np.ndarray
    dist_sq: np.ndarray
    f_gap: np.ndarray
    avg_gap: np.ndarray
    grad_norm_sq: np.ndarray
    min_grad_norm_sq: np.ndarray
    proj_active: np.ndarray
    w_T: np.ndarray | None = None
    w_bar_T: np.ndarray | None = None
    w_next: np.ndarray | None = None
    max_g_norm: float = 0.0
    iterates: dict[int, np.ndarray] = field(default_factory=dict)
    seed: int | None = None

    @property
    def T(self) -> int:
        return len(self.k)

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise KeyError(f"unknown trace column {name!r}")
        return getattr(self, name)

    @property
    def G_hat(self) -> float:
        """max over the run of max(||g_k||, ||grad f(w_k)||)."""
        return max(self.max_g_norm, math.sqrt(float(np.max(self.grad_norm_sq))))

    @property
    def projection_ever_active(self) -> bool:
        return bool(np.any(self.proj_active))


StepHook = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def run_sgd(problem: GraphProblem, spec: EstimatorSpec, schedule: StepSchedule,
            region: FeasibleRegion, T: int, w1: np.ndarray | None = None, seed: int = 0, *,
            estimator: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
            iterate_stride: int | None = None, on_step: StepHook | None = None) -> RunTrace:
    """Run T projected SGD updates from ``w1``.

    ``estimator(w, rng) -> g`` replaces the spec-driven draw (test doubles).
    ``on_step(k, w_k, g_k, h_k)`` sees every draw next to the exact gradient.
    Iterates are kept at k = 1, T and every ``iterate_stride`` steps.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    spec.validate(problem)
    if w1 is None:
        w1 = initial_iterate(problem, region, seed)
    w = problem.check_param(w1).copy()
    if not region.contains(w, tol=1e-9 * max(1.0, region.radius if region.shape == "ball" else 0.0)):
        raise ValueError("initial iterate lies outside the feasible region")
    rng = make_rng(seed, STREAM_ESTIMATOR)
    cols = {name: np.empty(T) for name in TRACE_COLUMNS}
    proj = np.zeros(T, dtype=bool)
    w_bar = np.zeros_like(w)
    w_star, f_star = problem.w_star, problem.f_star
    iterates = {}
    max_g = 0.0
    min_gn = math.inf

    for k in range(1, T + 1):
        i = k - 1
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"non-finite iterate at k={k}")
        w_bar = ((k - 1) * w_bar + w) / k
        f_k, h = value_and_gradient(problem, w)
        f_bar = value_and_gradient(problem, w_bar)[0] if k > 1 else f_k
        gn = float(h @ h)
        min_gn = min(min_gn, gn)
        diff = w - w_star
        gamma = step_size(schedule, k)
        cols["k"][i] = k
        cols["gamma_k"][i] = gamma
        cols["dist_sq"][i] = float(diff @ diff)
        cols["f_gap"][i] = f_k - f_star
        cols["avg_gap"][i] = f_bar - f_star
        cols["grad_norm_sq"][i] = gn
        cols["min_grad_norm_sq"][i] = min_gn
        if k == 1 or k == T or (iterate_stride and k % iterate_stride == 0):
            iterates[k] = w.copy()

        if estimator is not None:
            g = np.asarray(estimator(w, rng), dtype=float)
        elif spec.mode == "exact":
            g = h
        else:
            g = estimate_gradient(spec, problem, w, rng).g
        if on_step is not None:
            on_step(k, w, g, h)
        max_g = max(max_g, float(np.linalg.norm(g)))

        w_T, w_bar_T = w, w_bar
        step = w - gamma * g
        w = project(step, region)
        proj[i] = w is not step
    if not np.all(np.isfinite(w)):
        raise DivergenceError(f"non-finite iterate after the update at k={T}")

    return RunTrace(
        k=cols["k"].astype(np.int64), gamma_k=cols["gamma_k"], dist_sq=cols["dist_sq"],
        f_gap=cols["f_gap"], avg_gap=cols["avg_gap"], grad_norm_sq=cols["grad_norm_sq"],
        min_grad_norm_sq=cols["min_grad_norm_sq"], proj_active=proj,
        w_T=w_T.copy(), w_bar_T=w_bar_T.copy(), w_next=w.copy(), max_g_norm=max_g,
        iterates=iterates, seed=seed,
    )


def average_traces(traces: list[RunTrace]) -> RunTrace:
    """Element-wise mean of the metric columns across runs of equal length."""
    if not traces:
        raise ValueError("no traces to average")
    T = traces[0].T
    if any(t.T != T for t in traces):
        raise ValueError("traces have different lengths")
    mean = {name: np.mean([t.column(name) for t in traces], axis=0)
            for name in TRACE_COLUMNS if name not in ("k", "proj_active")}
    return RunTrace(k=traces[0].k.copy(), proj_active=np.any([t.proj_active for t in traces], axis=0),
                    max_g_norm=max(t.max_g_norm for t in traces), **mean)
