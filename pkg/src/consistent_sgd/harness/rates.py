"""Log-log slope fits of convergence metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

# values below this sit on the roundoff floor and are cut from fits
ROUNDOFF_FLOOR = 1e-24
MIN_POINTS = 10


@dataclass(frozen=True)
class RateReport:
    metric: str
    k_lo: int
    k_hi: int
    slope: float
    intercept: float
    r2: float
    target_slope: float
    passed: bool
    n_used: int
    n_excluded: int
    floor_cutoff: int | None

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        cut = f", floor cutoff k={self.floor_cutoff}" if self.floor_cutoff is not None else ""
        return (f"{verdict} {self.metric}: slope {self.slope:.4f} (target <= {self.target_slope}) "
                f"on k in [{self.k_lo}, {self.k_hi}], R^2 {self.r2:.4f}, "
                f"{self.n_used} points, {self.n_excluded} excluded{cut}")

    def as_dict(self) -> dict:
        return asdict(self)


def check_rate(trace, metric: str, target_slope: float, window: tuple[int, int],
               floor: float = ROUNDOFF_FLOOR) -> RateReport:
    """Least-squares fit of log(metric) against log(k) over ``window``.

    ``trace`` is a RunTrace or a ``(k, values)`` pair.  Rows from the first
    value below ``floor`` onward are cut (the cutoff k is reported); other
    nonpositive values are dropped and counted.  Passes iff slope <= target.
    """
    if isinstance(trace, tuple):
        k, v = (np.asarray(a, dtype=float) for a in trace)
    else:
        k, v = np.asarray(trace.k, dtype=float), np.asarray(trace.column(metric), dtype=float)
    k_lo, k_hi = int(window[0]), int(window[1])
    if not 1 <= k_lo < k_hi:
        raise ValueError(f"bad fit window [{k_lo}, {k_hi}]")
    if k.size == 0 or k_hi > k.max():
        raise ValueError(f"window end {k_hi} beyond the trace (last k={k.max() if k.size else None})")
    sel = (k >= k_lo) & (k <= k_hi)
    kw, vw = k[sel], v[sel]
    below = np.flatnonzero(vw < floor)
    cutoff = int(kw[below[0]]) if below.size else None
    keep = np.ones(kw.size, dtype=bool)
    if below.size:
        keep[below[0]:] = False
    keep &= np.isfinite(vw) & (vw > 0)
    if keep.sum() < MIN_POINTS:
        raise ValueError(f"only {int(keep.sum())} usable points for {metric} in [{k_lo}, {k_hi}]")
    x, yv = np.log(kw[keep]), np.log(vw[keep])
    slope, intercept = np.polyfit(x, yv, 1)
    resid = yv - (slope * x + intercept)
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    slope = float(slope)
    return RateReport(metric=metric, k_lo=k_lo, k_hi=k_hi, slope=slope, intercept=float(intercept),
                      r2=r2, target_slope=float(target_slope), passed=slope <= target_slope,
                      n_used=int(keep.sum()), n_excluded=int(kw.size - keep.sum()), floor_cutoff=cutoff)
