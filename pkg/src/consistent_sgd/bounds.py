"""Closed-form right-hand sides of the convergence theorems.

Expectation (unbiased) and probability-one (strongly consistent) versions
share one formula per metric; the high-probability versions carry the extra
``rho`` / ``delta`` factors and are evaluated at the horizon T.  Each
high-probability formula is arranged so that ``rho = delta = 0`` runs the
same floating-point operations as its base formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class TheoremId(str, Enum):
    T2_iterate = "T2_iterate"
    T2_average = "T2_average"
    T3_smooth = "T3_smooth"
    T4_convex = "T4_convex"
    T5_nonconvex = "T5_nonconvex"
    T10_iterate = "T10_iterate"
    T10_average = "T10_average"
    T11_smooth = "T11_smooth"
    T12_convex = "T12_convex"
    T13_nonconvex = "T13_nonconvex"

    def __str__(self) -> str:
        return self.value


# constants each bound reads
REQUIRED = {
    TheoremId.T2_iterate: ("G", "l"),
    TheoremId.T2_average: ("G", "l"),
    TheoremId.T3_smooth: ("G", "l", "L"),
    TheoremId.T4_convex: ("G", "D", "c"),
    TheoremId.T5_nonconvex: ("G", "L", "D_f"),
    TheoremId.T10_iterate: ("G", "l", "rho"),
    TheoremId.T10_average: ("G", "l", "rho"),
    TheoremId.T11_smooth: ("G", "l", "L", "rho"),
    TheoremId.T12_convex: ("G", "D", "c", "rho"),
    TheoremId.T13_nonconvex: ("G", "L", "D_f", "delta"),
}

# smallest valid k (or horizon T)
MIN_K = {
    TheoremId.T2_iterate: 3,
    TheoremId.T3_smooth: 3,
    TheoremId.T10_iterate: 3,
    TheoremId.T10_average: 3,
    TheoremId.T11_smooth: 3,
}

# bounds stated only at the horizon T
HORIZON_ONLY = frozenset({
    TheoremId.T5_nonconvex, TheoremId.T10_iterate, TheoremId.T10_average,
    TheoremId.T11_smooth, TheoremId.T12_convex, TheoremId.T13_nonconvex,
})


@dataclass(frozen=True)
class BoundConstants:
    G: float | None = None
    l: float | None = None
    L: float | None = None
    D: float | None = None
    c: float | None = None
    D_f: float | None = None
    rho: float | None = None
    delta: float | None = None
    T: int | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _check(theorem: TheoremId, consts: BoundConstants, k) -> None:
    for name in REQUIRED[theorem]:
        v = getattr(consts, name)
        if v is None:
            raise ValueError(f"{theorem} needs constant {name}")
        if name in ("rho", "delta") and v < 0:
            raise ValueError(f"{theorem}: {name} must be nonnegative, got {v}")
        if name not in ("rho", "delta", "D_f") and not v > 0:
            raise ValueError(f"{theorem}: {name} must be positive, got {v}")
    if k < MIN_K.get(theorem, 1):
        raise ValueError(f"{theorem} holds only for k >= {MIN_K[theorem]}, got k={k}")
    if theorem in (TheoremId.T10_iterate, TheoremId.T10_average, TheoremId.T11_smooth):
        if not consts.rho < consts.l or not consts.l - consts.rho / k > 0:
            raise ValueError(f"{theorem} needs rho < l, got rho={consts.rho}, l={consts.l}")
    if theorem == TheoremId.T13_nonconvex and not consts.delta < 1:
        raise ValueError(f"{theorem} needs delta < 1, got {consts.delta}")
    if theorem in (TheoremId.T5_nonconvex, TheoremId.T13_nonconvex) and consts.D_f < 0:
        raise ValueError(f"{theorem}: D_f must be nonnegative, got {consts.D_f}")


def bound_value(theorem: TheoremId | str, consts: BoundConstants, k: int) -> float:
    """Right-hand side of the chosen bound at iteration ``k``.

    For the horizon-only theorems (T5 and the high-probability family)
    ``k`` is the number of updates T.
    """
    th = TheoremId(theorem)
    _check(th, consts, k)
    G, l, L, D, c = consts.G, consts.l, consts.L, consts.D, consts.c
    D_f, rho, delta = consts.D_f, consts.rho, consts.delta

    if th is TheoremId.T2_iterate:
        return G**2 / (l**2 * k)
    if th is TheoremId.T2_average:
        return G**2 * (1 + math.log(k)) / (2 * k) / l
    if th is TheoremId.T3_smooth:
        return L * G**2 / (2 * l**2 * k)
    if th is TheoremId.T4_convex:
        return (D**2 / c + c * G**2 * math.sqrt(1 + 1 / k)) / (2 * math.sqrt(k))
    if th is TheoremId.T5_nonconvex:
        return L * G * D_f / math.sqrt(k)

    T = k
    lr = l - rho / T if l is not None else None
    if th is TheoremId.T10_iterate:
        num = (1 + rho / T) ** 2 + rho * lr
        return G**2 * num / (lr**2 * T)
    if th is TheoremId.T10_average:
        scale = G**2 * (1 + math.log(T)) / (2 * T)
        return scale * rho / (1 + math.log(T)) + scale * (1 + rho / T) ** 2 / lr
    if th is TheoremId.T11_smooth:
        num = (1 + rho / T) ** 2 + rho * lr
        return L * G**2 * num / (2 * lr**2 * T)
    if th is TheoremId.T12_convex:
        sq = math.sqrt(T)
        inner = D**2 / c + rho * D**2 + G**2 * rho + c * G**2 * (1 + rho / sq) ** 2 * math.sqrt(1 + 1 / T)
        return inner / (2 * sq)
    # T13
    return (1 + delta) * L * G * D_f / ((1 - delta) * math.sqrt(T))


@dataclass(frozen=True)
class BoundCurve:
    theorem: TheoremId
    k: np.ndarray
    values: np.ndarray

    def rows(self):
        for k, v in zip(self.k, self.values):
            yield {"k": int(k), "value": float(v), "theorem": str(self.theorem)}


def bound_curve(theorem: TheoremId | str, consts: BoundConstants, ks=None) -> BoundCurve:
    """Bound over ``ks`` (default 1..T clipped to the valid range); the
    horizon-only theorems give a single point at T."""
    th = TheoremId(theorem)
    if th in HORIZON_ONLY:
        if consts.T is None:
            raise ValueError(f"{th} is evaluated at the horizon; set T")
        ks = [consts.T]
    elif ks is None:
        if consts.T is None:
            raise ValueError("give ks or a horizon T")
        ks = range(MIN_K.get(th, 1), consts.T + 1)
    ks = np.asarray(list(ks), dtype=np.int64)
    vals = np.array([bound_value(th, consts, int(k)) for k in ks])
    return BoundCurve(th, ks, vals)


def d_f(f_w1: float, f_star: float, L: float) -> float:
    """sqrt(2 (f(w1) - f*) / L), the nonconvex step-size constant."""
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    gap = f_w1 - f_star
    if gap < 0:
        raise ValueError(f"f(w1) - f* must be nonnegative, got {gap}")
    return math.sqrt(2 * gap / L)


def required_sample_size(tau_at_delta: float, T: int, C: float, epsilon: float,
                         n: int | None = None) -> int:
    """ceil(log(T C / epsilon) / tau), clamped to [1, n]."""
    if not tau_at_delta > 0:
        raise ValueError(f"tail decay rate must be positive, got {tau_at_delta}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not C > 0:
        raise ValueError(f"tail constant C must be positive, got {C}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    N = math.ceil(math.log(T * C / epsilon) / tau_at_delta)
    N = max(N, 1)
    return min(N, n) if n is not None else N
