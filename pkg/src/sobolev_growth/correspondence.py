"""Quantum Sobolev norms against the classical prediction ``||z*||^s + ||W||^s``.

All statements are of the form "a ratio stays in a band", so the helpers here
reduce a positive series on a time window to its min, max, band (max/min) and
drift (how much the band changes between the two halves of the window).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classical_dynamics import AnalyticBasis, forced_particular_solution, fundamental_from_analytic, operator_norm
from .quantum_evolution import HermiteState, Trajectory, _sobolev


class GridMismatchError(ValueError):
    """Classical and quantum series are not sampled at the same times."""


def predicted_norm(s: float, W_norm, zstar_norm=0.0):
    """``zstar_norm^s + W_norm^s``; with ``zstar_norm = 0`` the homogeneous prediction."""
    W_norm = np.asarray(W_norm, dtype=float)
    zstar_norm = np.asarray(zstar_norm, dtype=float)
    if np.any(W_norm < 0) or np.any(zstar_norm < 0):
        raise ValueError("norms must be nonnegative")
    out = zstar_norm ** s + W_norm ** s
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BandReport:
    min_ratio: float
    max_ratio: float
    band: float
    drift: float
    count: int

    def passes(self, max_band: float = math.inf, max_drift: float = 2.0) -> bool:
        return (math.isfinite(self.band) and self.min_ratio > 0
                and self.band <= max_band and self.drift <= max_drift)

    def as_dict(self) -> dict:
        return {"min_ratio": self.min_ratio, "max_ratio": self.max_ratio,
                "band": self.band, "drift": self.drift, "count": self.count}


def _band(v: np.ndarray) -> float:
    return float(v.max() / v.min()) if v.size and v.min() > 0 else math.inf


def band_report(values) -> BandReport:
    """Band statistics of a positive series.

    ``drift`` is the larger over the smaller of the bands of the first and
    second halves, so 1 means both halves spread equally.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two values")
    if not np.all(np.isfinite(v)):
        return BandReport(math.nan, math.nan, math.inf, math.inf, v.size)
    half = v.size // 2
    b1, b2 = _band(v[:half]), _band(v[half:])
    drift = max(b1, b2) / min(b1, b2) if min(b1, b2) > 0 else math.inf
    return BandReport(float(v.min()), float(v.max()), _band(v), float(drift), v.size)


def windowed_band(times, values, window_start: float, window_end: float = math.inf) -> BandReport:
    t = np.asarray(times, dtype=float)
    sel = (t >= window_start) & (t <= window_end)
    return band_report(np.asarray(values, dtype=float)[sel])


@dataclass(frozen=True)
class ClassicalSeries:
    """``||W(t)||`` and ``||z*(t)||`` on a time grid, from either classical route."""

    times: np.ndarray
    W_norm: np.ndarray
    zstar_norm: np.ndarray


def classical_from_flow(flow) -> ClassicalSeries:
    return ClassicalSeries(np.asarray(flow.times), np.asarray(flow.W_norm), np.asarray(flow.zstar_norm))


def classical_from_analytic(basis: AnalyticBasis, times, a: float = 0.0) -> ClassicalSeries:
    """Closed-form ``W`` (normalised to ``I`` at ``t0``) and, for ``a != 0``, the Duhamel ``z*``."""
    times = np.asarray(times, dtype=float)
    W = fundamental_from_analytic(basis, times, normalize=True)
    if a:
        z = np.linalg.norm(forced_particular_solution(basis, a, times), axis=-1)
    else:
        z = np.zeros(times.size)
    return ClassicalSeries(times, operator_norm(W), z)


@dataclass(frozen=True)
class RatioSeries:
    times: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray
    window_start: float
    s: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        w = self.times >= self.window_start
        if not (np.all(self.measured[w] > 0) and np.all(self.predicted[w] > 0)):
            raise ValueError("measured and predicted must be positive on the window")

    @property
    def ratio(self) -> np.ndarray:
        return self.measured / self.predicted

    def report(self) -> BandReport:
        return windowed_band(self.times, self.ratio, self.window_start)


def _measured(trajectory, s: float) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(trajectory, Trajectory):
        return trajectory.times, trajectory.norm(s)
    states: Sequence[HermiteState] = trajectory
    return (np.array([st.time for st in states]),
            np.array([_sobolev(st.coeffs, s) for st in states]))


def ratio_series(flow, trajectory, s: float, window_start: float,
                 time_tol: float = 1e-9) -> tuple[RatioSeries, BandReport]:
    """Measured ``||u(t)||_s`` over ``predicted_norm`` on the shared time grid.

    ``flow`` is a :class:`~sobolev_growth.classical_dynamics.FlowResult` or a
    :class:`ClassicalSeries`; ``trajectory`` a :class:`Trajectory` or a list of
    :class:`HermiteState` samples.

    Raises
    ------
    GridMismatchError
        If the two time grids differ in length or by more than ``time_tol``.
    """
    cl = flow if isinstance(flow, ClassicalSeries) else classical_from_flow(flow)
    t_q, measured = _measured(trajectory, s)
    if t_q.shape != cl.times.shape or np.max(np.abs(t_q - cl.times), initial=0.0) > time_tol:
        raise GridMismatchError("classical and quantum samples are on different time grids")
    rs = RatioSeries(cl.times, measured, predicted_norm(s, cl.W_norm, cl.zstar_norm),
                     float(window_start), float(s))
    return rs, rs.report()


def envelope_times(kind: str, t_min: float, t_max: float) -> np.ndarray:
    """Where ``sin^2(sqrt t)`` vanishes (``"low"``: ``(k pi)^2``) or peaks (``"high"``: ``((k + 1/2) pi)^2``)."""
    shift = {"low": 0.0, "high": 0.5}[kind]
    k = np.arange(math.floor(math.sqrt(max(t_min, 0.0)) / math.pi) - 1,
                  math.ceil(math.sqrt(t_max) / math.pi) + 1)
    t = ((k + shift) * math.pi) ** 2
    return t[(k + shift > 0) & (t >= t_min) & (t <= t_max)]


def envelope_scale(kind: str, t, s: float):
    """``t^{s/6}`` on the low envelope, ``t^{s/6} ln^{s/2} t`` on the high one."""
    t = np.asarray(t, dtype=float)
    base = t ** (s / 6.0)
    return base if kind == "low" else base * np.log(t) ** (s / 2.0)


def envelope_band(times, values, s: float, kind: str, t_min: float, t_max: float) -> BandReport:
    """Band of ``values / envelope_scale`` along the envelope subsequence.

    ``values`` sampled on ``times`` are linearly interpolated to the
    subsequence times.
    """
    tk = envelope_times(kind, t_min, t_max)
    if tk.size < 2:
        raise ValueError("fewer than two envelope times in the range")
    v = np.interp(tk, np.asarray(times, dtype=float), np.asarray(values, dtype=float))
    return band_report(v / envelope_scale(kind, tk, s))
