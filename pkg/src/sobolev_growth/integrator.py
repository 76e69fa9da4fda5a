"""Dormand-Prince 5(4) with PI step-size control and dense output."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
# fifth-order weights minus embedded fourth-order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# coefficients of the continuous extension
D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
              -10690763975 / 1880347072, 701980252875 / 199316789632,
              -1453857185 / 822651844, 69997945 / 29380423])


class StepSizeUnderflow(RuntimeError):
    """The controller asked for a step below the resolvable minimum."""


@dataclass(frozen=True)
class IntegrationStats:
    steps: int
    rejected: int
    rhs_evals: int
    rtol: float
    atol: float


def _dense(y0, y1, k, h, theta):
    """Evaluate the continuous extension at fraction ``theta`` of a step."""
    ydiff = y1 - y0
    bspl = h * k[0] - ydiff
    r4 = ydiff - h * k[6] - bspl
    r5 = h * np.tensordot(D, k, axes=1)
    th1 = 1.0 - theta
    return y0 + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5)))


def solve(rhs: Callable[[float, np.ndarray], np.ndarray], t0: float, y0, t_end: float,
          sample_times, rtol: float = 1e-10, atol: float = 1e-10,
          h0: float | None = None, max_steps: int = 10_000_000,
          safety: float = 0.9) -> tuple[np.ndarray, IntegrationStats]:
    """Integrate ``y' = rhs(t, y)`` and return ``y`` at ``sample_times``.

    Parameters
    ----------
    rhs : callable
        Right-hand side, ``rhs(t, y) -> ndarray`` shaped like ``y``.
    t0, t_end : float
        Integration interval, ``t_end > t0``.
    y0 : array_like
        Initial state (flat).
    sample_times : array_like
        Increasing output times within ``[t0, t_end]``; values between
        accepted steps come from the continuous extension.
    rtol, atol : float
        Local error tolerances; the error norm is the max over components of
        ``|err| / (atol + rtol * max(|y_old|, |y_new|))``. The max norm keeps
        every component at tolerance, which matters for the invariants
        monitored on the matrix components.

    Returns
    -------
    samples : ndarray, shape (len(sample_times), y.size)
    stats : IntegrationStats

    Raises
    ------
    StepSizeUnderflow
        If the step shrinks below ``16 eps |t|`` or ``max_steps`` is hit.
    """
    y = np.array(y0, dtype=float).ravel()
    ts = np.asarray(sample_times, dtype=float)
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    if ts.size and (np.any(np.diff(ts) < 0) or ts[0] < t0 or ts[-1] > t_end):
        raise ValueError("sample times must be increasing and inside [t0, t_end]")
    out = np.empty((ts.size, y.size))
    i_out = 0
    while i_out < ts.size and ts[i_out] == t0:
        out[i_out] = y
        i_out += 1

    k = np.empty((7, y.size))
    k[0] = rhs(t0, y)
    nfev = 1
    span = t_end - t0
    if h0 is None:
        # standard starting-step heuristic
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k[0] / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
    h = float(h0)
    t = float(t0)
    err_prev = 1e-4
    steps = rejected = 0
    just_rejected = False
    # PI controller exponents as in Hairer's DOPRI5
    beta = 0.04
    alpha = 0.2 - 0.75 * beta

    while t < t_end:
        if steps + rejected >= max_steps:
            raise StepSizeUnderflow(f"step limit {max_steps} reached at t={t:.6g}")
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g}")
        last = t + h >= t_end
        if last:
            h = t_end - t
        for s in range(1, 7):
            ys = y + h * np.tensordot(A[s], k[:s], axes=1)
            k[s] = rhs(t + C[s] * h, ys)
        nfev += 6
        y_new = ys  # seventh stage is evaluated at the fifth-order solution
        err_vec = h * np.tensordot(E, k, axes=1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not np.isfinite(err):
            err = np.inf

        if err <= 1.0:
            t_new = t_end if last else t + h
            while i_out < ts.size and ts[i_out] <= t_new:
                theta = (ts[i_out] - t) / h
                out[i_out] = y_new if ts[i_out] == t_new else _dense(y, y_new, k, h, theta)
                i_out += 1
            err = max(err, 1e-10)
            fac = safety * err ** -alpha * err_prev ** beta
            fac = min(10.0, max(0.2, fac))
            if just_rejected:
                fac = min(fac, 1.0)
            err_prev = err
            t, y = t_new, y_new
            k[0] = k[6]
            steps += 1
            just_rejected = False
            h *= fac
        else:
            rejected += 1
            just_rejected = True
            fac = 0.2 if not np.isfinite(err) else max(0.2, safety * err ** -alpha)
            h *= fac
    return out, IntegrationStats(steps, rejected, nfev, float(rtol), float(atol))
