"""Growth-rate functions, the class M checks and a catalog of sample rates.

A :class:`GrowthRate` bundles ``f`` with closed-form ``f'`` and ``f''`` and the
start ``t0`` of its domain. All callables are vectorised over numpy arrays.

Default domain starts per family
--------------------------------
========================  ===============================================
family                    ``t0``
========================  ===============================================
power_log (beta = 0)      pi/2 (also of the form 2k*pi + pi/2)
power_log (beta > 0)      e
exp_log_power(a)          exp(max(1, a - 1))  (f'/f decreasing from there)
exp_power(sigma)          pi/2
t_over_log                e**2  (f'/f decreasing for ln t > golden ratio)
iterated_log(k)           the k-fold exponential of 1/2, so f(t0) = 1/2
exponential(lambda)       pi/2
constant(c)               pi/2
oscillatory               e
========================  ===============================================
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Func = Callable[[np.ndarray], np.ndarray]

HALF_PI = 0.5 * math.pi
GOLDEN = 0.5 * (1.0 + math.sqrt(5.0))

CATALOG_NAMES = (
    "power_log", "exp_log_power", "exp_power", "t_over_log", "iterated_log",
    "exponential", "constant", "oscillatory",
)


class RateDomainError(ValueError):
    """A rate evaluated to a non-finite or non-positive value on its domain."""


@dataclass(frozen=True)
class GrowthRate:
    """A positive C^2 function ``f`` on ``[t0, inf)`` with its derivatives."""

    t0: float
    f: Func
    d1: Func
    d2: Func
    label: str
    params: tuple = ()
    # optional closed forms of f'/f and its derivative; they avoid the
    # cancellation in f'' f - f'^2 and the overflow of f for fast rates
    k: Func | None = None
    dk: Func | None = None

    def log_derivative(self, t) -> np.ndarray:
        """``f'/f``."""
        if self.k is not None:
            return self.k(t)
        return self.d1(t) / self.f(t)

    def log_second(self, t) -> np.ndarray:
        """``(f'' f - f'^2) / f^2``, the derivative of ``f'/f``."""
        if self.dk is not None:
            return self.dk(t)
        f = self.f(t)
        d1 = self.d1(t)
        return (self.d2(t) * f - d1 * d1) / (f * f)

    def with_t0(self, t0: float) -> "GrowthRate":
        return dataclasses.replace(self, t0=float(t0))


def _arr(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


def _from_log_derivative(label, params, t0, f, k, dk) -> GrowthRate:
    """Build a rate from ``f`` and closed forms of ``k = f'/f`` and ``k'``."""

    def d1(t):
        t = _arr(t)
        return f(t) * k(t)

    def d2(t):
        t = _arr(t)
        kt = k(t)
        return f(t) * (kt * kt + dk(t))

    return GrowthRate(float(t0), f, d1, d2, label, tuple(params), k=k, dk=dk)


def power_log(mu: float = 1.0, alpha: float = 1.0, beta: float = 0.0) -> GrowthRate:
    """``mu * t**alpha * ln(t)**beta``."""
    if mu <= 0 or alpha < 0 or beta < 0:
        raise ValueError("power_log needs mu > 0, alpha >= 0, beta >= 0")
    t0 = math.e if beta > 0 else HALF_PI

    def f(t):
        t = _arr(t)
        return mu * t ** alpha * np.log(t) ** beta

    def k(t):
        t = _arr(t)
        return alpha / t + beta / (t * np.log(t))

    def dk(t):
        t = _arr(t)
        lt = np.log(t)
        return -alpha / t ** 2 - beta * (lt + 1.0) / (t * lt) ** 2

    return _from_log_derivative(f"power_log({mu:g},{alpha:g},{beta:g})",
                                (mu, alpha, beta), t0, f, k, dk)


def exp_log_power(a: float = 2.0) -> GrowthRate:
    """``exp(ln(t)**a)`` for ``a > 0``."""
    if a <= 0:
        raise ValueError("exp_log_power needs a > 0")

    def f(t):
        return np.exp(np.log(_arr(t)) ** a)

    def k(t):
        t = _arr(t)
        return a * np.log(t) ** (a - 1.0) / t

    def dk(t):
        t = _arr(t)
        lt = np.log(t)
        return a * ((a - 1.0) * lt ** (a - 2.0) - lt ** (a - 1.0)) / t ** 2

    return _from_log_derivative(f"exp_log_power({a:g})", (a,),
                                math.exp(max(1.0, a - 1.0)), f, k, dk)


def exp_power(sigma: float = 0.5) -> GrowthRate:
    """``exp(t**sigma)`` for ``0 < sigma < 1``."""
    if not 0 < sigma < 1:
        raise ValueError("exp_power needs 0 < sigma < 1")

    def f(t):
        return np.exp(_arr(t) ** sigma)

    def k(t):
        return sigma * _arr(t) ** (sigma - 1.0)

    def dk(t):
        return sigma * (sigma - 1.0) * _arr(t) ** (sigma - 2.0)

    return _from_log_derivative(f"exp_power({sigma:g})", (sigma,), HALF_PI, f, k, dk)


def t_over_log() -> GrowthRate:
    """``t / ln(t)``."""

    def f(t):
        t = _arr(t)
        return t / np.log(t)

    def k(t):
        t = _arr(t)
        return (1.0 - 1.0 / np.log(t)) / t

    def dk(t):
        t = _arr(t)
        lt = np.log(t)
        return (-1.0 + 1.0 / lt + 1.0 / lt ** 2) / t ** 2

    return _from_log_derivative("t_over_log", (), math.e ** 2, f, k, dk)


def iterated_log(k: int = 1) -> GrowthRate:
    """``ln ln ... ln(t)`` (``k`` times)."""
    if int(k) != k or k < 1:
        raise ValueError("iterated_log needs a positive integer k")
    k = int(k)
    t0 = 0.5
    for _ in range(k):
        t0 = math.exp(t0)
    if not math.isfinite(t0):
        raise ValueError(f"iterated_log({k}) has no representable domain start")

    def logs(t):
        out = []
        cur = _arr(t)
        for _ in range(k):
            cur = np.log(cur)
            out.append(cur)
        return out

    def f(t):
        return logs(t)[-1]

    def ratio(t):
        # f'/f = 1 / (t L1 L2 ... Lk)
        t = _arr(t)
        prod = t.copy()
        for lj in logs(t):
            prod = prod * lj
        return 1.0 / prod

    def dratio(t):
        t = _arr(t)
        ls = logs(t)
        acc = np.ones_like(t)
        partial = np.ones_like(t)
        for lj in ls:
            partial = partial * lj
            acc = acc + 1.0 / partial
        r = ratio(t)
        return -r * acc / t

    return _from_log_derivative(f"iterated_log({k})", (k,), t0, f, ratio, dratio)


def exponential(lam: float = 0.5) -> GrowthRate:
    """``exp(lam * t)``; outside class M, kept as the counterexample rate."""
    if lam <= 0:
        raise ValueError("exponential needs lambda > 0")

    def f(t):
        return np.exp(lam * _arr(t))

    def k(t):
        return np.full_like(_arr(t), lam)

    def dk(t):
        return np.zeros_like(_arr(t))

    return _from_log_derivative(f"exponential({lam:g})", (lam,), HALF_PI, f, k, dk)


def constant(c: float = 1.0) -> GrowthRate:
    """``f = c``: the unperturbed oscillator."""
    if c <= 0:
        raise ValueError("constant rate must be positive")

    def f(t):
        return np.full_like(_arr(t), c)

    def zero(t):
        return np.zeros_like(_arr(t))

    return GrowthRate(HALF_PI, f, zero, zero, f"constant({c:g})", (c,))


def oscillatory_rate() -> GrowthRate:
    """``t**(1/3) * (1 + ln(t) * sin(sqrt(t))**2)`` on ``[e, inf)``.

    The closed-form derivatives are checked against central differences when
    the rate is built.
    """

    def parts(t):
        t = _arr(t)
        r = np.sqrt(t)
        lt = np.log(t)
        s2 = np.sin(r) ** 2
        ds2 = np.sin(2.0 * r) / (2.0 * r)
        dds2 = np.cos(2.0 * r) / (2.0 * t) - np.sin(2.0 * r) / (4.0 * t * r)
        g = 1.0 + lt * s2
        dg = s2 / t + lt * ds2
        ddg = -s2 / t ** 2 + 2.0 * ds2 / t + lt * dds2
        c = np.cbrt(t)
        return t, c, g, dg, ddg

    def f(t):
        _, c, g, _, _ = parts(t)
        return c * g

    def d1(t):
        t, c, g, dg, _ = parts(t)
        return c * (g / (3.0 * t) + dg)

    def d2(t):
        t, c, g, dg, ddg = parts(t)
        return c * (-2.0 * g / (9.0 * t * t) + 2.0 * dg / (3.0 * t) + ddg)

    rate = GrowthRate(math.e, f, d1, d2, "oscillatory", ())
    _self_check(rate, [10.0, 37.0, 250.0])
    return rate


def _self_check(rate: GrowthRate, points: Sequence[float], rtol: float = 1e-5) -> None:
    t = np.asarray(points, dtype=float)
    h1, h2 = 1e-5 * t, 1e-4 * t
    fd1 = (rate.f(t + h1) - rate.f(t - h1)) / (2 * h1)
    fd2 = (rate.f(t + h2) - 2 * rate.f(t) + rate.f(t - h2)) / h2 ** 2
    scale = np.abs(rate.f(t)) / t
    if np.any(np.abs(fd1 - rate.d1(t)) > rtol * scale) or \
            np.any(np.abs(fd2 - rate.d2(t)) > rtol * scale):
        raise RuntimeError(f"closed-form derivatives of {rate.label} disagree with differences")


_FACTORIES = {
    "power_log": power_log,
    "exp_log_power": exp_log_power,
    "exp_power": exp_power,
    "t_over_log": t_over_log,
    "iterated_log": iterated_log,
    "exponential": exponential,
    "constant": constant,
    "oscillatory": oscillatory_rate,
}


def make_catalog_rate(name: str, params: Sequence[float] = (), t0: float | None = None) -> GrowthRate:
    """Look up a catalog family by name; ``t0`` overrides the family default."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown growth rate {name!r}; known: {', '.join(CATALOG_NAMES)}") from None
    params = tuple(float(p) for p in params)
    if name == "iterated_log":
        params = tuple(int(p) if float(p).is_integer() else p for p in params)
    try:
        rate = factory(*params)
    except TypeError as exc:
        raise ValueError(f"bad parameters {params} for {name}: {exc}") from None
    if t0 is not None:
        rate = rate.with_t0(t0)
    return rate


def custom_rate(f: Func, t0: float, d1: Func | None = None, d2: Func | None = None,
                label: str = "custom") -> GrowthRate:
    """Wrap a user function; missing derivatives fall back to central differences
    with step ``1e-5 * max(1, |t|)``."""

    def step(t):
        return 1e-5 * np.maximum(1.0, np.abs(t))

    if d1 is None:
        def d1(t):
            t = _arr(t)
            h = step(t)
            return (f(t + h) - f(t - h)) / (2 * h)
    if d2 is None:
        def d2(t):
            t = _arr(t)
            h = step(t)
            return (f(t + h) - 2 * f(t) + f(t - h)) / h ** 2
    return GrowthRate(float(t0), f, d1, d2, label)


# --- class M verdicts -------------------------------------------------------

@dataclass(frozen=True)
class ClassMThresholds:
    """Engineering thresholds turning asymptotic conditions into finite-horizon flags."""

    growth_factor: float = 2.0
    ratio_tol: float = 1e-2
    monotone_slack: float = 1e-10


@dataclass(frozen=True)
class ClassMReport:
    inf_positive: bool
    tends_to_infinity: bool
    ratio_to_zero: bool
    ratio_monotone: bool
    horizon: float
    grid_step: float
    thresholds: ClassMThresholds = field(default_factory=ClassMThresholds)

    @property
    def in_class(self) -> bool:
        return self.inf_positive and self.tends_to_infinity and self.ratio_to_zero and self.ratio_monotone

    @property
    def verdict(self) -> str:
        state = "supported" if self.in_class else "not supported"
        return f"class M {state} on horizon {self.horizon:g}"

    def as_dict(self) -> dict:
        return {
            "inf_positive": self.inf_positive,
            "tends_to_infinity": self.tends_to_infinity,
            "ratio_to_zero": self.ratio_to_zero,
            "ratio_monotone": self.ratio_monotone,
            "in_class": self.in_class,
            "horizon": self.horizon,
            "grid_step": self.grid_step,
            "growth_factor": self.thresholds.growth_factor,
            "ratio_tol": self.thresholds.ratio_tol,
            "monotone_slack": self.thresholds.monotone_slack,
            "verdict": self.verdict,
        }


def rate_grid(rate: GrowthRate, horizon: float, step: float) -> np.ndarray:
    if horizon <= rate.t0:
        raise ValueError("horizon must exceed the domain start t0")
    if step <= 0:
        raise ValueError("grid step must be positive")
    n = int(math.floor((horizon - rate.t0) / step + 1e-9))
    grid = rate.t0 + step * np.arange(n + 1)
    if grid[-1] < horizon - 1e-9 * step:
        grid = np.append(grid, horizon)
    return grid


def _finite(values: np.ndarray, what: str, rate: GrowthRate) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise RateDomainError(f"{what} of {rate.label} is not finite on the grid")
    return values


def check_class_M(rate: GrowthRate, horizon: float, step: float,
                  thresholds: ClassMThresholds = ClassMThresholds()) -> ClassMReport:
    """Finite-horizon verdicts for the class M conditions.

    The flags test, on the uniform grid ``t0, t0 + step, ..., horizon``:
    ``inf f > 0``; ``f(horizon) >= growth_factor * f(t0)``; ``f'/f`` below
    ``ratio_tol`` at the horizon; and ``f'/f`` non-increasing up to
    ``monotone_slack`` per step.
    """
    t = rate_grid(rate, horizon, step)
    f = _finite(rate.f(t), "f", rate)
    r = _finite(rate.log_derivative(t), "f'/f", rate)
    slack = thresholds.monotone_slack * np.maximum(np.abs(r[:-1]), 1.0)
    return ClassMReport(
        inf_positive=bool(np.min(f) > 0),
        tends_to_infinity=bool(f[-1] >= thresholds.growth_factor * f[0]),
        ratio_to_zero=bool(abs(r[-1]) < thresholds.ratio_tol),
        ratio_monotone=bool(np.all(np.diff(r) <= slack)),
        horizon=float(horizon),
        grid_step=float(step),
        thresholds=thresholds,
    )


@dataclass(frozen=True)
class SupportReport:
    kappa_bound: float
    monotone: bool
    subquadratic: bool
    horizon: float

    @property
    def holds(self) -> bool:
        return self.kappa_bound < 2.0 and self.monotone and self.subquadratic

    def as_dict(self) -> dict:
        return {"kappa_bound": self.kappa_bound, "monotone": self.monotone,
                "subquadratic": self.subquadratic, "holds": self.holds,
                "horizon": self.horizon}


def check_support_condition(rate: GrowthRate, horizon: float, step: float,
                            slack: float = 1e-10) -> SupportReport:
    """Check ``t f'/f <= kappa < 2`` decreasing, and ``f = o(t^2)`` on a grid.

    ``subquadratic`` requires ``f/t^2`` to be non-increasing over the second
    half of the grid and to end below half of its maximum.
    """
    t = rate_grid(rate, horizon, step)
    f = _finite(rate.f(t), "f", rate)
    g = _finite(t * rate.log_derivative(t), "t f'/f", rate)
    q = f / t ** 2
    half = q[q.size // 2:]
    tol = slack * np.maximum(np.abs(g[:-1]), 1.0)
    return SupportReport(
        kappa_bound=float(np.max(g)),
        monotone=bool(np.all(np.diff(g) <= tol)),
        subquadratic=bool(np.all(np.diff(half) <= slack * half[:-1]) and q[-1] < 0.5 * np.max(q)),
        horizon=float(horizon),
    )
