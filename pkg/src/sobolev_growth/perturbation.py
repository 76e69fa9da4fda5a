"""The explicit time-decaying perturbation phi_f and the integral factor H_f.

For a growth rate ``f`` with ``k = f'/f``::

    phi_f(t) = -k^2 cos^4 t - k' cos^2 t + 4 k cos t sin t
    H_f(t)   = exp(int_{t0}^t k(s) cos^2 s ds)

where ``k' = (f'' f - f'^2) / f^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .growth_rates import GrowthRate, RateDomainError, rate_grid
from .quadrature import CumulativeIntegral, HALF_PI, cumulative_on_grid


@dataclass(frozen=True)
class Perturbation:
    rate: GrowthRate
    label: str

    def phi(self, t):
        """Evaluate phi_f pointwise from the rate's closed forms."""
        t = np.asarray(t, dtype=float)
        k = self.rate.log_derivative(t)
        dk = self.rate.log_second(t)
        c = np.cos(t)
        c2 = c * c
        return -k * k * c2 * c2 - dk * c2 + 4.0 * k * c * np.sin(t)

    __call__ = phi


def build_phi(rate: GrowthRate) -> Perturbation:
    return Perturbation(rate, f"phi[{rate.label}]")


class HfEvaluator:
    """``H_f`` via cached cumulative adaptive Simpson quadrature.

    The exponent is integrated with absolute tolerance ``tol`` per query, which
    is a relative tolerance on ``H_f`` itself. Breakpoints sit every pi/2
    starting at ``t0``.
    """

    def __init__(self, rate: GrowthRate, tol: float = 1e-10, panel: float = HALF_PI):
        self.rate = rate
        self.tol = float(tol)
        self.method = "adaptive-simpson"

        def integrand(s):
            return rate.log_derivative(s) * np.cos(s) ** 2

        self._exponent = CumulativeIntegral(integrand, rate.t0, tol=tol, panel=panel)

    @property
    def t0(self) -> float:
        return self.rate.t0

    def log_value(self, t):
        """``ln H_f(t)``."""
        return self._exponent(t)

    def __call__(self, t):
        return np.exp(self._exponent(t))

    def from_scratch(self, t: float) -> float:
        """Uncached quadrature, for checking the cache."""
        return float(np.exp(self._exponent.from_scratch(t)))


def eval_Hf(ev: HfEvaluator, t):
    """``H_f(t)``; scalar in, float out."""
    return ev(t)


@dataclass(frozen=True)
class DecayReport:
    sup_tail: float
    sup_tail_half: float
    tol: float
    horizon: float

    @property
    def decaying(self) -> bool:
        """Tail sup below ``tol`` and still shrinking between H/2 and H."""
        return self.sup_tail <= self.tol and self.sup_tail < 0.9 * self.sup_tail_half

    def as_dict(self) -> dict:
        return {"sup_tail": self.sup_tail, "sup_tail_half": self.sup_tail_half,
                "tol": self.tol, "horizon": self.horizon, "decaying": self.decaying}


def _tail_sup(p: Perturbation, horizon: float, step: float) -> float:
    t = rate_grid(p.rate, horizon, step)
    vals = p.phi(t)
    if not np.all(np.isfinite(vals)):
        raise RateDomainError(f"phi_f of {p.rate.label} is not finite on the grid")
    tail = vals[int(0.9 * t.size):]
    return float(np.max(np.abs(tail)))


def check_decay(p: Perturbation, horizon: float, step: float = 0.01,
                tol: float = 0.25) -> DecayReport:
    """Sup of ``|phi_f|`` over the last 10% of ``[t0, horizon]``.

    The same statistic at half the horizon is reported too, so a persistent
    oscillation (exponential rates) is told apart from slow decay.
    """
    half = p.rate.t0 + 0.5 * (horizon - p.rate.t0)
    return DecayReport(_tail_sup(p, horizon, step), _tail_sup(p, half, step),
                       float(tol), float(horizon))


@dataclass(frozen=True)
class HypothesesReport:
    sup_c1: float
    sup_c2: float
    sup_c3: float
    horizon: float
    running: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def verdict(self) -> str:
        return f"suprema finite, supported on horizon {self.horizon:g}"

    def as_dict(self) -> dict:
        return {"sup_c1": self.sup_c1, "sup_c2": self.sup_c2, "sup_c3": self.sup_c3,
                "horizon": self.horizon, "verdict": self.verdict}


def inner_integrand(rate: GrowthRate, Hf: HfEvaluator):
    """``sin(2s) k(s) / H_f(s)^2``, the weighted integrand of the third hypothesis."""

    def g(s):
        s = np.asarray(s, dtype=float)
        return np.sin(2.0 * s) * rate.log_derivative(s) * np.exp(-2.0 * Hf.log_value(s))

    return g


def check_hypotheses(rate: GrowthRate, horizon: float, step: float = HALF_PI / 8,
                     tol: float = 1e-10, Hf: HfEvaluator | None = None) -> HypothesesReport:
    """Running suprema of ``|k|``, ``|int cos(2s) k|`` and ``|int sin(2s) k / H_f^2|``.

    Integrals are accumulated on the grid ``t0 + j*step`` with adaptive
    Simpson per cell; the suprema are over grid points, ``|k|`` is also
    sampled there.
    """
    t = rate_grid(rate, horizon, step)
    Hf = Hf or HfEvaluator(rate, tol)
    k = rate.log_derivative(t)
    if not np.all(np.isfinite(k)):
        raise RateDomainError(f"f'/f of {rate.label} is not finite on the grid")
    c2 = cumulative_on_grid(lambda s: np.cos(2.0 * s) * rate.log_derivative(s), t, tol)
    c3 = cumulative_on_grid(inner_integrand(rate, Hf), t, tol)
    run = {
        "t": t,
        "c1": np.maximum.accumulate(np.abs(k)),
        "c2": np.maximum.accumulate(np.abs(c2)),
        "c3": np.maximum.accumulate(np.abs(c3)),
    }
    return HypothesesReport(float(run["c1"][-1]), float(run["c2"][-1]),
                            float(run["c3"][-1]), float(horizon), run)
