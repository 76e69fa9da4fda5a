"""Vectorised adaptive Simpson quadrature and cached cumulative integrals.

Every integrand passed to this module must accept a float ndarray and return
an ndarray of the same shape.
"""

from __future__ import annotations

import math
import threading
from typing import Callable

import numpy as np

Integrand = Callable[[np.ndarray], np.ndarray]

HALF_PI = 0.5 * math.pi


class QuadratureError(RuntimeError):
    """Adaptive refinement did not converge within the depth limit."""


def adaptive_simpson(func: Integrand, a, b, tol: float = 1e-10,
                     min_depth: int = 2, max_depth: int = 40) -> np.ndarray:
    """Integrate ``func`` over each interval ``[a[i], b[i]]``.

    All intervals are refined simultaneously: a subinterval is accepted once
    the two-halves Simpson estimate differs from the whole-interval estimate
    by at most ``15 * tol_local``, and the accepted value carries the
    Richardson correction. Tolerances are halved on every bisection, so
    ``tol`` bounds the estimated absolute error of each requested interval.

    Parameters
    ----------
    func : callable
        Vectorised integrand.
    a, b : array_like
        Interval endpoints (broadcast together). ``b < a`` gives a negated
        integral, ``a == b`` gives zero.
    tol : float
        Absolute error target per interval.
    min_depth : int
        Number of bisections applied before the convergence test is
        trusted; guards against oscillatory integrands aliasing at the
        initial five nodes.
    max_depth : int
        Bisection limit; exceeding it raises :class:`QuadratureError`.

    Returns
    -------
    ndarray
        Integral for every interval, shaped like ``broadcast(a, b)``.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    a = a.ravel().copy()
    b = b.ravel().copy()
    out = np.zeros(a.size)
    if a.size == 0:
        return out.reshape(shape)

    owner = np.flatnonzero(a != b)
    lo, hi = a[owner], b[owner]
    if owner.size == 0:
        return out.reshape(shape)
    mid = 0.5 * (lo + hi)
    pts = np.concatenate([lo, mid, hi])
    vals = func(pts)
    n = owner.size
    flo, fmid, fhi = vals[:n], vals[n:2 * n], vals[2 * n:]
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    local_tol = np.full(n, float(tol))
    depth = 0

    while owner.size:
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        fq = func(np.concatenate([q1, q3]))
        m = owner.size
        fq1, fq3 = fq[:m], fq[m:]
        h = hi - lo
        left = h / 12.0 * (flo + 4.0 * fq1 + fmid)
        right = h / 12.0 * (fmid + 4.0 * fq3 + fhi)
        halves = left + right
        diff = halves - whole
        if not np.all(np.isfinite(halves)):
            raise QuadratureError("non-finite integrand value during refinement")
        done = np.abs(diff) <= 15.0 * local_tol if depth >= min_depth else np.zeros(m, bool)
        if np.any(done):
            np.add.at(out, owner[done], halves[done] + diff[done] / 15.0)
        keep = ~done
        if not np.any(keep):
            break
        depth += 1
        if depth > max_depth:
            raise QuadratureError(
                f"adaptive Simpson exceeded depth {max_depth} on {int(keep.sum())} intervals")
        # split every unconverged interval into its two halves
        owner = np.concatenate([owner[keep], owner[keep]])
        new_lo = np.concatenate([lo[keep], mid[keep]])
        new_hi = np.concatenate([mid[keep], hi[keep]])
        new_mid = np.concatenate([q1[keep], q3[keep]])
        flo, fmid, fhi = (np.concatenate([flo[keep], fmid[keep]]),
                          np.concatenate([fq1[keep], fq3[keep]]),
                          np.concatenate([fmid[keep], fhi[keep]]))
        whole = np.concatenate([left[keep], right[keep]])
        local_tol = np.concatenate([local_tol[keep], local_tol[keep]]) * 0.5
        lo, hi, mid = new_lo, new_hi, new_mid
    return out.reshape(shape)


class CumulativeIntegral:
    """``t -> int_start^t integrand`` with panel caching.

    Panel integrals over ``[start + k*panel, start + (k+1)*panel]`` are computed
    once and accumulated, so evaluating at many increasing times costs time
    linear in the horizon. A query at ``t`` adds the cached prefix to a
    partial adaptive integral from the last breakpoint below ``t``.

    The cache is guarded by a lock; concurrent callers see the same values
    as sequential ones because every panel is integrated independently of
    the batch it was computed in.
    """

    def __init__(self, integrand: Integrand, start: float, tol: float = 1e-10,
                 panel: float = HALF_PI, partial_min_depth: int = 1):
        if panel <= 0:
            raise ValueError("panel length must be positive")
        self.integrand = integrand
        self.start = float(start)
        self.tol = float(tol)
        self.panel = float(panel)
        # queries integrate at most one panel, so fewer forced bisections suffice
        self.partial_min_depth = int(partial_min_depth)
        self._prefix = np.zeros(1)
        self._lock = threading.Lock()

    @property
    def cached_panels(self) -> int:
        return self._prefix.size - 1

    def _ensure(self, k_max: int) -> np.ndarray:
        with self._lock:
            have = self._prefix.size - 1
            if k_max > have:
                # grow geometrically to keep the number of batches logarithmic
                upto = max(k_max, 2 * have, 16)
                k = np.arange(have, upto)
                lo = self.start + k * self.panel
                vals = adaptive_simpson(self.integrand, lo, lo + self.panel, self.tol)
                tail = np.cumsum(np.concatenate([self._prefix[-1:], vals]))
                self._prefix = np.concatenate([self._prefix[:-1], tail])
            return self._prefix

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.start - 1e-12 * max(1.0, abs(self.start))):
            raise ValueError("cumulative integral queried before its start")
        offs = np.maximum(t - self.start, 0.0)
        k = np.floor(offs / self.panel).astype(np.int64)
        prefix = self._ensure(int(k.max(initial=0)) + 1)
        base = self.start + k * self.panel
        partial = adaptive_simpson(self.integrand, base, np.maximum(t, base), self.tol,
                                   min_depth=self.partial_min_depth)
        res = prefix[k] + partial
        return res if res.ndim else float(res)

    def from_scratch(self, t: float) -> float:
        """Panel-by-panel integral to ``t`` without touching the cache."""
        t = float(t)
        k = int(math.floor((t - self.start) / self.panel))
        lo = self.start + np.arange(k) * self.panel
        total = float(np.sum(adaptive_simpson(self.integrand, lo, lo + self.panel, self.tol)))
        base = self.start + k * self.panel
        return total + float(adaptive_simpson(self.integrand, base, t, self.tol))


def cumulative_on_grid(func: Integrand, grid, tol: float = 1e-10,
                       min_depth: int = 2) -> np.ndarray:
    """Running integral of ``func`` sampled at the points of an increasing grid."""
    grid = np.asarray(grid, dtype=float)
    pieces = adaptive_simpson(func, grid[:-1], grid[1:], tol, min_depth=min_depth)
    return np.concatenate([[0.0], np.cumsum(pieces)])
