"""The two graph regression objectives and their analytic gradients.

convex:     f(w)      = ||A X w - y||^2 / (2n)
nonconvex:  f(W1, W2) = ||A sigmoid(A X W1) W2 - y||^2 / (2n)

Nonconvex parameters are flattened as ``[W1.ravel(), W2]`` (row-major W1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from consistent_sgd.datagen import STREAM_CHECKS, GroundTruth, Kind, make_rng, sigmoid


@dataclass(frozen=True, eq=False)
class GraphProblem:
    A: np.ndarray
    X: np.ndarray
    y: np.ndarray
    kind: Kind
    w_star: np.ndarray
    d2: int | None = None
    radius: float = 0.0
    f_star: float = 0.0
    AX: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("convex", "nonconvex"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.X.shape[0] != n or self.y.shape != (n,):
            raise ValueError(f"inconsistent shapes A{self.A.shape} X{self.X.shape} y{self.y.shape}")
        if self.kind == "nonconvex" and (self.d2 is None or self.d2 < 1):
            raise ValueError("nonconvex problems need a hidden width d2 >= 1")
        AX = self.A @ self.X
        AX.setflags(write=False)
        object.__setattr__(self, "AX", AX)
        if self.w_star.shape != (self.dim,):
            raise ValueError(f"w_star has shape {self.w_star.shape}, expected ({self.dim},)")
        if self.radius <= 0:
            object.__setattr__(self, "radius", default_radius(self.kind, self.d, self.d2))
        if np.linalg.norm(self.w_star) > self.radius:
            raise ValueError("planted optimum lies outside the feasible ball")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def dim(self) -> int:
        if self.kind == "convex":
            return self.d
        return self.d * self.d2 + self.d2

    def unpack(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split a flattened nonconvex parameter into (W1, W2)."""
        k = self.d * self.d2
        return w[:k].reshape(self.d, self.d2), w[k:]

    def check_param(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"parameter has shape {w.shape}, expected ({self.dim},) for {self.kind} problem")
        return w


def default_radius(kind: Kind, d: int, d2: int | None) -> float:
    if kind == "convex":
        return 100.0 * d
    return 100.0 * (d + 1) * d2


def build_problem(A: np.ndarray, X: np.ndarray, truth: GroundTruth) -> GraphProblem:
    return GraphProblem(A=np.asarray(A), X=np.asarray(X), y=truth.y, kind=truth.kind,
                        w_star=truth.w_star, d2=truth.d2, f_star=truth.f_star)


def value_and_gradient(problem: GraphProblem, w: np.ndarray) -> tuple[float, np.ndarray]:
    w = problem.check_param(w)
    n = problem.n
    if problem.kind == "convex":
        r = problem.AX @ w - problem.y
        return float(r @ r) / (2 * n), problem.AX.T @ r / n
    W1, W2 = problem.unpack(w)
    H = sigmoid(problem.AX @ W1)
    AH = problem.A @ H
    r = AH @ W2 - problem.y
    g_W2 = AH.T @ r / n
    # back through the output aggregation and the sigmoid
    dZ = np.outer(problem.A.T @ r, W2) / n * H * (1.0 - H)
    g_W1 = problem.AX.T @ dZ
    return float(r @ r) / (2 * n), np.concatenate([g_W1.ravel(), g_W2])


def objective(problem: GraphProblem, w: np.ndarray) -> float:
    return value_and_gradient(problem, w)[0]


def gradient(problem: GraphProblem, w: np.ndarray) -> np.ndarray:
    return value_and_gradient(problem, w)[1]


@dataclass(frozen=True)
class CurvatureConstants:
    """Strong-convexity modulus ``l`` (None for nonconvex), smoothness ``L``,
    and an optional empirical gradient bound ``G_hat``."""

    l: float | None
    L: float
    G_hat: float | None = None
    L_estimated: bool = False

    def with_G(self, G_hat: float) -> "CurvatureConstants":
        return CurvatureConstants(self.l, self.L, float(G_hat), self.L_estimated)


def curvature_constants(problem: GraphProblem, *, pairs: int = 10_000, inflate: float = 1.5,
                        seed: int = 0) -> CurvatureConstants:
    """l = s_min(AX)^2/n and L = s_max(AX)^2/n for the convex problem.

    A numerically rank-deficient AX reports ``l = 0``. For the nonconvex
    problem ``l`` is None and ``L`` is the inflated empirical Lipschitz
    estimate from :func:`estimate_lipschitz`.
    """
    if problem.kind == "convex":
        s = np.linalg.svd(problem.AX, compute_uv=False)
        n = problem.n
        smin = s[-1] if len(s) == problem.d else 0.0
        if smin <= s[0] * max(problem.AX.shape) * np.finfo(float).eps:
            smin = 0.0
        return CurvatureConstants(l=smin**2 / n, L=s[0] ** 2 / n)
    L = estimate_lipschitz(problem, pairs=pairs, seed=seed) * inflate
    return CurvatureConstants(l=None, L=L, L_estimated=True)


def sample_pairs(problem: GraphProblem, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random parameter pairs around the region SGD visits.

    ``w`` is standard normal (the initial-iterate law, which also covers the
    planted optimum); ``u`` perturbs it at a log-uniform scale in [1e-3, 1].
    """
    w = rng.standard_normal((count, problem.dim))
    scale = 10.0 ** rng.uniform(-3.0, 0.0, size=(count, 1))
    u = w + scale * rng.standard_normal((count, problem.dim))
    return w, u


def estimate_lipschitz(problem: GraphProblem, *, pairs: int = 10_000, seed: int = 0) -> float:
    """max ||grad f(w) - grad f(u)|| / ||w - u|| over random pairs (uninflated)."""
    rng = make_rng(seed, STREAM_CHECKS, 1)
    W, U = sample_pairs(problem, pairs, rng)
    best = 0.0
    for w, u in zip(W, U):
        num = np.linalg.norm(gradient(problem, w) - gradient(problem, u))
        best = max(best, num / np.linalg.norm(w - u))
    return best
