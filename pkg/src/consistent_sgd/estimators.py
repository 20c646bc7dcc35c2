"""Gradient estimators: exact, unbiased output-minibatch, and layer-sampled
consistent estimators, plus Monte Carlo diagnostics.

The layered estimator samples uniform node index sets per layer and
rescales every sampled aggregation by ``n / n_i``.  For the convex model

    grad of  1/(2 n2) || (n/n1) A[I2, I1] X[I1] w - y[I2] ||^2

and for the nonconvex model

    grad of  1/(2 n3) || (n/n2) A[I3, I2] sigmoid((n/n1) A[I2, I1] X[I1] W1) W2 - y[I3] ||^2.

Index sets are drawn without replacement by default, so a full count
reproduces the exact aggregation; ``replacement=True`` gives i.i.d. draws.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from consistent_sgd.datagen import STREAM_ESTIMATOR, make_rng, sigmoid
from consistent_sgd.problems import GraphProblem, gradient

Mode = Literal["exact", "minibatch_unbiased", "layered_consistent"]
MODES = ("exact", "minibatch_unbiased", "layered_consistent")


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to draw and its per-layer sample counts.

    ``None`` means "all n nodes".  Convex problems use ``n1`` (input layer)
    and ``n2`` (output layer); nonconvex problems use ``n1``, ``n2`` and
    ``n3`` (output layer).  ``minibatch_unbiased`` forces every inner layer
    to be full and only samples the output layer.
    """

    mode: Mode = "exact"
    n1: int | None = None
    n2: int | None = None
    n3: int | None = None
    replacement: bool = False

    def validate(self, problem: GraphProblem) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if self.mode == "exact":
            return
        for name in ("n1", "n2", "n3"):
            v = getattr(self, name)
            if v is not None and not 1 <= v <= problem.n:
                raise ValueError(f"sample count {name}={v} outside [1, {problem.n}]")

    def layer_sizes(self, problem: GraphProblem) -> tuple[int, ...]:
        """Effective per-layer counts, input layer first."""
        n = problem.n
        full = lambda v: n if v is None else int(v)  # noqa: E731
        if self.mode == "exact":
            return (n, n) if problem.kind == "convex" else (n, n, n)
        if problem.kind == "convex":
            if self.mode == "minibatch_unbiased":
                return (n, full(self.n2))
            return (full(self.n1), full(self.n2))
        if self.mode == "minibatch_unbiased":
            return (n, n, full(self.n3))
        return (full(self.n1), full(self.n2), full(self.n3))

    def with_layer_count(self, problem: GraphProblem, N: int) -> "EstimatorSpec":
        """Spec with the sampled inner layers set to ``N`` (tail diagnostics)."""
        if problem.kind == "convex":
            return replace(self, n1=N)
        return replace(self, n1=N, n2=N)


@dataclass(frozen=True)
class GradientSample:
    g: np.ndarray
    sample_sizes: tuple[int, ...]
    draw_seed: int | None = None


def _as_rng(seed) -> tuple[np.random.Generator, int | None]:
    if isinstance(seed, np.random.Generator):
        return seed, None
    return make_rng(int(seed), STREAM_ESTIMATOR), int(seed)


def _index_set(rng: np.random.Generator, n: int, k: int, replacement: bool) -> np.ndarray | None:
    """Sorted index set, or None for the full set drawn without replacement."""
    if replacement:
        return np.sort(rng.integers(0, n, size=k))
    if k == n:
        return None
    return np.sort(rng.choice(n, size=k, replace=False))


def _input_aggregate(problem: GraphProblem, I_out, I_in) -> np.ndarray:
    """(n/|I_in|) A[I_out, I_in] X[I_in], using the cached A X when I_in is full."""
    if I_in is None:
        return problem.AX if I_out is None else problem.AX[I_out]
    rows = problem.A if I_out is None else problem.A[I_out]
    return (problem.n / len(I_in)) * rows[:, I_in] @ problem.X[I_in]


def layered_gradient(problem: GraphProblem, w: np.ndarray, index_sets: Sequence) -> np.ndarray:
    """Layered estimator for explicit index sets, input layer first.

    ``None`` in ``index_sets`` stands for the full node set; the rescaling
    uses the size of each set.
    """
    n = problem.n
    size = lambda I: n if I is None else len(I)  # noqa: E731
    if problem.kind == "convex":
        I1, I2 = index_sets
        B = _input_aggregate(problem, I2, I1)
        r = B @ w - (problem.y if I2 is None else problem.y[I2])
        return B.T @ r / size(I2)

    I1, I2, I3 = index_sets
    W1, W2 = problem.unpack(w)
    B1 = _input_aggregate(problem, I2, I1)
    H = sigmoid(B1 @ W1)
    rows = problem.A if I3 is None else problem.A[I3]
    B2 = rows if I2 is None else (n / size(I2)) * rows[:, I2]
    BH = B2 @ H
    r = BH @ W2 - (problem.y if I3 is None else problem.y[I3])
    g_W2 = BH.T @ r / size(I3)
    dZ = np.outer(B2.T @ r, W2) / size(I3) * H * (1.0 - H)
    g_W1 = B1.T @ dZ
    return np.concatenate([g_W1.ravel(), g_W2])


def estimate_gradient(spec: EstimatorSpec, problem: GraphProblem, w, seed) -> GradientSample:
    """Draw one gradient estimate at ``w``.

    ``seed`` is either an integer (a fresh estimator stream) or a live
    ``numpy.random.Generator`` that the caller advances across draws.
    """
    spec.validate(problem)
    w = problem.check_param(w)
    rng, draw_seed = _as_rng(seed)
    sizes = spec.layer_sizes(problem)
    if spec.mode == "exact":
        return GradientSample(gradient(problem, w), sizes, draw_seed)
    sets = [_index_set(rng, problem.n, k, spec.replacement) for k in sizes]
    return GradientSample(layered_gradient(problem, w, sets), sizes, draw_seed)


def estimator_errors(spec: EstimatorSpec, problem: GraphProblem, w, trials: int, seed) -> np.ndarray:
    """Squared errors ||g - grad f(w)||^2 over ``trials`` independent draws."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    spec.validate(problem)
    w = problem.check_param(w)
    h = gradient(problem, w)
    rng, _ = _as_rng(seed)
    out = np.empty(trials)
    for i in range(trials):
        diff = estimate_gradient(spec, problem, w, rng).g - h
        out[i] = diff @ diff
    return out


def estimator_mse(spec: EstimatorSpec, problem: GraphProblem, w, trials: int, seed) -> float:
    return float(np.mean(estimator_errors(spec, problem, w, trials, seed)))


@dataclass(frozen=True)
class TailEstimate:
    """Exceedance frequencies of ||g - h|| >= delta ||h|| over an N-grid and
    the fitted exponential decay  p(N) ~ C exp(-N tau)."""

    delta: float
    N: tuple[int, ...]
    trials: int
    p_hat: tuple[float, ...]
    tau_hat: float
    C_hat: float | None
    tau_available: bool
    zero_encountered: bool

    def rows(self):
        for N, p in zip(self.N, self.p_hat):
            yield {"N": N, "delta": self.delta, "p_hat": p, "trials": self.trials}


def fit_tail(N: Sequence[int], p_hat: Sequence[float]) -> tuple[float, float | None, bool]:
    """Least-squares fit of -log p against N on the points with 0 < p < 1.

    Returns ``(tau, C, available)``; fewer than two usable points, or a
    nonpositive slope, gives ``(0.0, None, False)``.
    """
    N = np.asarray(N, dtype=float)
    p = np.asarray(p_hat, dtype=float)
    ok = (p > 0) & (p < 1)
    if ok.sum() < 2:
        return 0.0, None, False
    slope, intercept = np.polyfit(N[ok], -np.log(p[ok]), 1)
    if not slope > 0:
        return 0.0, None, False
    return float(slope), float(np.exp(-intercept)), True


def empirical_tail(spec: EstimatorSpec, problem: GraphProblem, w, delta: float,
                   N: int | Sequence[int], trials: int, seed: int) -> TailEstimate:
    """Monte Carlo tail probabilities at fixed ``w`` for each sample size in ``N``.

    ``N`` sets ``n1`` on the convex problem and ``n1 = n2`` on the
    nonconvex one; the remaining counts come from ``spec``.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    w = problem.check_param(w)
    h = gradient(problem, w)
    h_norm = float(np.linalg.norm(h))
    if h_norm == 0.0:
        raise ValueError("relative deviation undefined: the gradient at w is zero")
    grid = (int(N),) if np.isscalar(N) else tuple(int(v) for v in N)
    p_hat = []
    for j, Nj in enumerate(grid):
        sub = spec.with_layer_count(problem, Nj)
        sub.validate(problem)
        rng = make_rng(int(seed), STREAM_ESTIMATOR, j)
        hits = 0
        for _ in range(trials):
            g = estimate_gradient(sub, problem, w, rng).g
            hits += np.linalg.norm(g - h) >= delta * h_norm
        p_hat.append(hits / trials)
    tau, C, ok = fit_tail(grid, p_hat)
    return TailEstimate(delta=float(delta), N=grid, trials=trials, p_hat=tuple(p_hat),
                        tau_hat=tau, C_hat=C, tau_available=ok,
                        zero_encountered=any(p == 0 for p in p_hat))
