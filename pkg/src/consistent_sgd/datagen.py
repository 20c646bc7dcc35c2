"""Seeded generation of the synthetic graph regression instances.

All randomness flows through :func:`make_rng`, which builds a Philox-4x64
counter-based generator keyed by ``SeedSequence(seed, spawn_key=(stream,))``.
Philox and SeedSequence are fully specified by NumPy and produce identical
streams on every platform, so a ``(seed, stream)`` pair pins every draw.
Each consumer (graph, features, ground truth, initial iterate, estimator)
has its own stream id, so any one of them can be regenerated or reseeded
without disturbing the others.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

# stream ids; never renumber, stored traces depend on them
STREAM_GRAPH = 0
STREAM_FEATURES = 1
STREAM_TRUTH = 2
STREAM_INIT = 3
STREAM_ESTIMATOR = 4
STREAM_CHECKS = 5

Kind = Literal["convex", "nonconvex"]


def make_rng(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Philox generator for ``(seed, stream, *extra)``."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), *map(int, extra)))
    return np.random.Generator(np.random.Philox(ss))


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic sigmoid, split by sign so ``exp`` never overflows."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def gen_adjacency(n: int, p: float, seed: int) -> np.ndarray:
    """Weighted Erdos-Renyi G(n, p) adjacency matrix.

    Undirected, no self loops. One weight per unordered pair, drawn
    uniformly on ``(0, 1/n)`` for every pair first and then masked by the
    edge indicator, so the weight stream does not depend on ``p``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability p must lie in [0, 1], got {p}")
    rng = make_rng(seed, STREAM_GRAPH)
    iu, ju = np.triu_indices(n, k=1)
    m = iu.size
    is_edge = rng.random(m) < p
    u = rng.random(m)
    # map [0, 1) onto the open interval (0, 1/n)
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    weights = np.minimum(u / n, np.nextafter(1.0 / n, 0.0))
    A = np.zeros((n, n))
    A[iu[is_edge], ju[is_edge]] = weights[is_edge]
    A += A.T
    return _frozen(A)


@dataclass(frozen=True)
class MixtureParams:
    """Two-component Gaussian mixture with diagonal covariances."""

    t1: float
    mu1: np.ndarray
    var1: np.ndarray
    t2: float
    mu2: np.ndarray
    var2: np.ndarray

    @classmethod
    def default(cls, d: int = 10) -> "MixtureParams":
        return cls(
            t1=0.3,
            mu1=np.zeros(d),
            var1=np.arange(1, d + 1, dtype=float) ** 2,
            t2=0.7,
            mu2=np.ones(d),
            var2=np.full(d, 4.0),
        )

    @property
    def dim(self) -> int:
        return len(self.mu1)

    def validate(self, d: int) -> None:
        for name in ("mu1", "var1", "mu2", "var2"):
            if np.shape(getattr(self, name)) != (d,):
                raise ValueError(f"mixture field {name} must have shape ({d},)")
        if self.t1 < 0 or self.t2 < 0 or not np.isclose(self.t1 + self.t2, 1.0):
            raise ValueError(f"mixture weights must be nonnegative and sum to 1, got {self.t1}, {self.t2}")
        if np.any(np.asarray(self.var1) <= 0) or np.any(np.asarray(self.var2) <= 0):
            raise ValueError("mixture variances must be positive")


def gen_features(n: int, d: int, mixture: MixtureParams | None = None, seed: int = 0) -> np.ndarray:
    """n x d feature matrix, rows i.i.d. from the two-component mixture."""
    mixture = MixtureParams.default(d) if mixture is None else mixture
    mixture.validate(d)
    rng = make_rng(seed, STREAM_FEATURES)
    first = rng.random(n) < mixture.t1
    z = rng.standard_normal((n, d))
    mu = np.where(first[:, None], mixture.mu1, mixture.mu2)
    sd = np.where(first[:, None], np.sqrt(mixture.var1), np.sqrt(mixture.var2))
    return _frozen(mu + sd * z)


@dataclass(frozen=True)
class GroundTruth:
    w_star: np.ndarray
    y: np.ndarray
    f_star: float = 0.0
    kind: Kind = "convex"
    d2: int | None = None


def forward(kind: Kind, A: np.ndarray, AX: np.ndarray, w: np.ndarray, d2: int | None) -> np.ndarray:
    """Network output for flattened parameters ``w``.

    ``AX`` must be ``A @ X``; it is passed in so callers share one product.
    Nonconvex layout: ``w = [W1.ravel(), W2]`` with ``W1`` of shape (d, d2),
    row-major.
    """
    if kind == "convex":
        return AX @ w
    d = AX.shape[1]
    W1 = w[: d * d2].reshape(d, d2)
    W2 = w[d * d2:]
    return (A @ sigmoid(AX @ W1)) @ W2


def gen_ground_truth(kind: Kind, A: np.ndarray, X: np.ndarray, d2: int = 5, seed: int = 0) -> GroundTruth:
    """Planted optimum and targets with zero optimal value."""
    A = np.asarray(A, dtype=float)
    X = np.asarray(X, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {A.shape}")
    if X.ndim != 2 or X.shape[0] != A.shape[0]:
        raise ValueError(f"features must have {A.shape[0]} rows, got shape {X.shape}")
    if kind not in ("convex", "nonconvex"):
        raise ValueError(f"unknown problem kind {kind!r}")
    d = X.shape[1]
    rng = make_rng(seed, STREAM_TRUTH)
    AX = A @ X
    if kind == "convex":
        w_star = rng.standard_normal(d)
        d2 = None
    else:
        if d2 is None or d2 < 1:
            raise ValueError(f"hidden width d2 must be >= 1, got {d2}")
        W1 = rng.standard_normal((d, d2))
        W2 = rng.standard_normal((d2, 1))
        w_star = np.concatenate([W1.ravel(), W2.ravel()])
    y = forward(kind, A, AX, w_star, d2)
    return GroundTruth(w_star=_frozen(w_star), y=_frozen(y), f_star=0.0, kind=kind, d2=d2)


def write_matrix_csv(path, a: np.ndarray) -> None:
    """Row-major CSV, 17 significant digits (round-trips float64)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    with open(path, "w", newline="") as fh:
        for row in a:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def dump_instance(out_dir, A: np.ndarray, X: np.ndarray, truth: GroundTruth) -> list[str]:
    """Write A, X, w_star, y as CSV into ``out_dir``; returns file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = {"A.csv": A, "X.csv": X, "w_star.csv": truth.w_star, "y.csv": truth.y}
    for name, arr in names.items():
        write_matrix_csv(out / name, arr)
    return sorted(names)


def edge_count(A: np.ndarray) -> int:
    return int(np.count_nonzero(np.triu(A, k=1)))


def standard_instance(kind: Kind, n: int = 300, p: float = 0.3, d: int = 10, d2: int = 5,
                      seed: int = 0, mixture: MixtureParams | None = None
                      ) -> tuple[np.ndarray, np.ndarray, GroundTruth]:
    A = gen_adjacency(n, p, seed)
    X = gen_features(n, d, mixture, seed)
    return A, X, gen_ground_truth(kind, A, X, d2, seed)

