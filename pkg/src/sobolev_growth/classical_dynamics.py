"""Classical affine dynamics ``z' = A(t) z + l(t)`` and its closed-form oracle.

Two independent routes produce the fundamental matrix of the one-dimensional
oscillator ``xi'' + (1 + phi_f) xi = 0``:

* :func:`integrate_flow` integrates ``W' = A W`` together with the reducing
  transform ``U' = A U - U J`` and the forced solution with a Runge-Kutta pair;
* :class:`AnalyticBasis` evaluates the explicit solutions built from ``H_f``
  and the inner integral ``G(t) = int_{t0}^t sin(2s) k(s) / H_f(s)^2 ds``.

Phase-space vectors are ordered ``z = (xi, x)`` with ``x = xi'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import integrator
from .growth_rates import GrowthRate
from .perturbation import HfEvaluator, Perturbation, build_phi, inner_integrand
from .quadrature import CumulativeIntegral, HALF_PI, cumulative_on_grid

TWO_PI = 2.0 * math.pi


class HamiltonianViolation(ValueError):
    """``A(t)`` is not a Hamiltonian matrix at an evaluation point."""


class MisalignedStart(ValueError):
    """The start time is not of the form ``2k pi + pi/2`` where that is required."""


def symplectic_J(n: int) -> np.ndarray:
    """``[[0, I], [-I, 0]]``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def rotation(tau: float, n: int = 1) -> np.ndarray:
    """``exp(tau J) = cos(tau) I + sin(tau) J``."""
    return math.cos(tau) * np.eye(2 * n) + math.sin(tau) * symplectic_J(n)


def hamiltonian_defect(A: np.ndarray) -> float:
    J = symplectic_J(A.shape[0] // 2)
    return float(np.max(np.abs(A.T @ J + J @ A)))


def is_aligned(t0: float, tol: float = 1e-12) -> bool:
    """Whether ``t0 = 2k pi + pi/2`` for an integer ``k >= 0``."""
    k = (t0 - HALF_PI) / TWO_PI
    return k > -tol and abs(k - round(k)) <= tol * max(1.0, abs(k))


@dataclass(frozen=True)
class AffineSystemSpec:
    dim: int
    A: Callable[[float], np.ndarray]
    ell: Callable[[float], np.ndarray] | None = None
    label: str = "affine"
    check_hamiltonian: bool = True
    hamiltonian_tol: float = 1e-12


def oscillator_system(phi: Perturbation | Callable | None = None, a: float = 0.0,
                      label: str | None = None) -> AffineSystemSpec:
    """``xi' = x``, ``x' = -(1 + phi(t)) xi + a sin t``; ``phi=None`` is the plain oscillator."""

    def A(t):
        p = 0.0 if phi is None else float(phi(t))
        return np.array([[0.0, 1.0], [-(1.0 + p), 0.0]])

    ell = None
    if a != 0.0:
        def ell(t):
            return np.array([0.0, a * math.sin(t)])

    name = label or (getattr(phi, "label", "qho") if phi is not None else "qho")
    return AffineSystemSpec(1, A, ell, label=f"{name},a={a:g}")


def constant_system(A0: np.ndarray, label: str = "constant", check_hamiltonian: bool = True) -> AffineSystemSpec:
    A0 = np.array(A0, dtype=float)
    return AffineSystemSpec(A0.shape[0] // 2, lambda t: A0, None, label, check_hamiltonian)


def operator_norm(W: np.ndarray) -> np.ndarray:
    """``||W||`` per sample: largest singular value for 2x2 blocks, entry sum otherwise."""
    W = np.asarray(W)
    if W.shape[-1] == 2:
        fro2 = np.sum(W ** 2, axis=(-2, -1))
        det = W[..., 0, 0] * W[..., 1, 1] - W[..., 0, 1] * W[..., 1, 0]
        disc = np.sqrt(np.maximum(fro2 ** 2 - 4.0 * det ** 2, 0.0))
        return np.sqrt(0.5 * (fro2 + disc))
    return np.sum(np.abs(W), axis=(-2, -1))


@dataclass(frozen=True)
class FlowResult:
    times: np.ndarray
    W: np.ndarray
    U: np.ndarray
    zstar: np.ndarray
    stats: integrator.IntegrationStats
    t0: float
    label: str = ""

    @property
    def n(self) -> int:
        return self.W.shape[-1] // 2

    @property
    def W_norm(self) -> np.ndarray:
        return operator_norm(self.W)

    @property
    def zstar_norm(self) -> np.ndarray:
        return np.linalg.norm(self.zstar, axis=-1)

    @property
    def symplectic_defect(self) -> np.ndarray:
        """``||W^T J W - J||`` (max entry) per sample."""
        J = symplectic_J(self.n)
        M = np.einsum("kji,jl,klm->kim", self.W, J, self.W) - J
        return np.max(np.abs(M), axis=(1, 2))

    @property
    def wtex_residual(self) -> np.ndarray:
        """``||W - U exp((t - t0) J) J^T||`` (max entry) per sample."""
        n = self.n
        J = symplectic_J(n)
        out = np.empty(self.times.size)
        for i, t in enumerate(self.times):
            R = rotation(t - self.t0, n)
            out[i] = np.max(np.abs(self.W[i] - self.U[i] @ R @ J.T))
        return out


def integrate_flow(spec: AffineSystemSpec, t0: float, t_end: float, tol: float = 1e-10,
                   sample_step: float = 0.1, z0: Sequence[float] | None = None,
                   sample_times: Sequence[float] | None = None) -> FlowResult:
    """Jointly integrate ``W``, ``U`` and the forced solution ``z``.

    ``W(t0) = I``, ``U(t0) = J``, ``z(t0) = z0`` (zero by default). Samples
    are taken at ``t0 + j * sample_step`` up to ``t_end`` unless explicit
    ``sample_times`` are given.

    Raises
    ------
    HamiltonianViolation
        If ``A(t)^T J + J A(t)`` exceeds ``spec.hamiltonian_tol * max(1, |A|)``
        at any evaluation point (skipped when ``spec.check_hamiltonian`` is off).
    integrator.StepSizeUnderflow
        On step-size collapse.
    """
    n = spec.dim
    m = 2 * n
    J = symplectic_J(n)
    z0 = np.zeros(m) if z0 is None else np.asarray(z0, dtype=float)
    y0 = np.concatenate([np.eye(m).ravel(), J.ravel(), z0])

    def rhs(t, y):
        A = np.asarray(spec.A(t), dtype=float)
        if spec.check_hamiltonian:
            bad = np.max(np.abs(A.T @ J + J @ A))
            if bad > spec.hamiltonian_tol * max(1.0, float(np.max(np.abs(A)))):
                raise HamiltonianViolation(
                    f"A(t) is not Hamiltonian at t={t:.6g} (defect {bad:.3g})")
        W = y[:m * m].reshape(m, m)
        U = y[m * m:2 * m * m].reshape(m, m)
        z = y[2 * m * m:]
        dz = A @ z
        if spec.ell is not None:
            dz = dz + spec.ell(t)
        return np.concatenate([(A @ W).ravel(), (A @ U - U @ J).ravel(), dz])

    if sample_times is None:
        count = int(math.floor((t_end - t0) / sample_step + 1e-9))
        times = t0 + sample_step * np.arange(count + 1)
    else:
        times = np.asarray(sample_times, dtype=float)
    Y, stats = integrator.solve(rhs, t0, y0, t_end, times, rtol=tol, atol=tol)
    W = Y[:, :m * m].reshape(-1, m, m)
    U = Y[:, m * m:2 * m * m].reshape(-1, m, m)
    if times.size and times[0] == t0:
        W[0] = np.eye(m)
        U[0] = J
    return FlowResult(times, W, U, Y[:, 2 * m * m:].copy(), stats, float(t0), spec.label)


@dataclass(frozen=True)
class PairingReport:
    max_defects: tuple

    def passes(self, tol: float = 1e-8) -> bool:
        return max(self.max_defects) <= tol


def check_symplectic_pairings(result: FlowResult) -> PairingReport:
    """Max over time of the three pairing defects of the columns of ``U``.

    With columns ``X_1..X_2n`` the defects are ``|<X_j, J X_{n+j}> - 1|``,
    ``|<X_j, J X_i>|`` for ``i, j <= n`` and ``|<X_j, J X_{n+i}>|`` for ``i != j``.
    """
    n = result.n
    J = symplectic_J(n)
    # P[k, a, b] = <X_a, J X_b>
    P = np.einsum("kia,ij,kjb->kab", result.U, J, result.U)
    d1 = np.max(np.abs(np.diagonal(P[:, :n, n:], axis1=1, axis2=2) - 1.0))
    d2 = np.max(np.abs(P[:, :n, :n]))
    off = P[:, :n, n:] * (1.0 - np.eye(n))
    d3 = float(np.max(np.abs(off))) if n > 1 else 0.0
    return PairingReport((float(d1), float(d2), d3))


class AnalyticBasis:
    """Closed-form solutions of ``xi'' + (1 + phi_f) xi = 0``.

    ``xi1 = cos(t) H``, ``x1 = (-sin t + k cos^3 t) H``,
    ``xi2 = sin(t) / H + cos(t) H G``,
    ``x2 = (cos t + k cos^2 t sin t) / H + (k cos^3 t - sin t) H G``.
    """

    def __init__(self, rate: GrowthRate, quad_tol: float = 1e-10, Hf: HfEvaluator | None = None):
        self.rate = rate
        self.quad_tol = float(quad_tol)
        self.Hf = Hf or HfEvaluator(rate, quad_tol)
        self.G = CumulativeIntegral(inner_integrand(rate, self.Hf), rate.t0, tol=quad_tol)

    @property
    def t0(self) -> float:
        return self.rate.t0

    def evaluate(self, t):
        """``(xi1, x1, xi2, x2)`` at ``t`` (vectorised)."""
        t = np.asarray(t, dtype=float)
        H = np.exp(self.Hf.log_value(t))
        G = self.G(t)
        k = self.rate.log_derivative(t)
        c, s = np.cos(t), np.sin(t)
        xi1 = c * H
        x1 = (-s + k * c ** 3) * H
        xi2 = s / H + c * H * G
        x2 = (c + k * c * c * s) / H + (k * c ** 3 - s) * H * G
        return xi1, x1, xi2, x2

    def raw_matrix(self, t) -> np.ndarray:
        xi1, x1, xi2, x2 = self.evaluate(t)
        return np.stack([np.stack([xi2, -xi1], -1), np.stack([x2, -x1], -1)], -2)


def analytic_basis_eval(basis: AnalyticBasis, t: float) -> tuple[float, float, float, float]:
    return tuple(float(v) for v in basis.evaluate(float(t)))


def basis_residual(basis: AnalyticBasis, t, h: float = 1e-3) -> np.ndarray:
    """Residual of ``xi'' + (1 + phi_f) xi`` for ``xi1`` and ``xi2`` by central differences.

    Returns an array of shape ``(2, len(t))``; it scales as ``h^2``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phi = build_phi(basis.rate)
    out = []
    for j in (0, 2):
        f0 = basis.evaluate(t)[j]
        fp = basis.evaluate(t + h)[j]
        fm = basis.evaluate(t - h)[j]
        out.append((fp - 2 * f0 + fm) / h ** 2 + (1.0 + phi(t)) * f0)
    return np.array(out)


def fundamental_from_analytic(basis: AnalyticBasis, t, normalize: bool = False) -> np.ndarray:
    """``[[xi2, -xi1], [x2, -x1]](t)``.

    This equals ``I`` at ``t0`` when ``t0 = 2k pi + pi/2``. For other starts,
    ``normalize=True`` right-multiplies by the inverse of its value at ``t0``;
    without it a misaligned start raises :class:`MisalignedStart`.
    """
    raw = basis.raw_matrix(t)
    if is_aligned(basis.t0):
        return raw
    if not normalize:
        raise MisalignedStart(f"t0={basis.t0:.12g} is not 2k*pi + pi/2; pass normalize=True")
    return raw @ np.linalg.inv(basis.raw_matrix(basis.t0))


def forced_particular_solution(basis: AnalyticBasis, a: float, t, quad_tol: float | None = None) -> np.ndarray:
    """Duhamel solution with ``z(t0) = 0`` for the forcing ``(0, a sin t)``.

    Since ``W(s)^{-1} (0, sin s) = sin(s) (xi1(s), xi2(s))``, the solution is
    ``a W(t) (int sin xi1, int sin xi2)``. The outer integrals are accumulated
    cell by cell between the sorted query times (cells longer than pi/8 are
    split), each cell to ``quad_tol`` (default: the basis tolerance).
    """
    if not is_aligned(basis.t0):
        raise MisalignedStart("the forced solution needs t0 = 2k*pi + pi/2")
    t = np.asarray(t, dtype=float)
    if a == 0.0:
        return np.zeros(t.shape + (2,))
    if np.any(t < basis.t0):
        raise ValueError("forced solution queried before t0")
    tol = basis.quad_tol if quad_tol is None else float(quad_tol)
    flat = t.ravel()
    pts = np.unique(flat)
    grid = np.union1d(basis.t0 + HALF_PI / 4 * np.arange(int((pts[-1] - basis.t0) / (HALF_PI / 4)) + 1), pts)

    c1 = cumulative_on_grid(lambda s: np.sin(s) * basis.evaluate(s)[0], grid, tol, min_depth=1)
    c2 = cumulative_on_grid(lambda s: np.sin(s) * basis.evaluate(s)[2], grid, tol, min_depth=1)
    idx = np.searchsorted(grid, flat)
    v = np.stack([c1[idx], c2[idx]], -1)
    W = basis.raw_matrix(flat)
    z = a * np.einsum("...ij,...j->...i", W, v)
    return z.reshape(t.shape + (2,))


@dataclass(frozen=True)
class AppendixReport:
    t: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    bands: tuple  # (I1 f^{1/2} / (t - t0), |I2| / f^{1/2}, |I3|) as arrays

    def band_stats(self, window_start: float) -> dict:
        sel = self.t >= window_start
        b1, b2, b3 = (np.asarray(b)[sel] for b in self.bands)
        return {
            "I1_band_min": float(b1.min()), "I1_band_max": float(b1.max()),
            "I1_band": float(b1.max() / b1.min()),
            "I2_ratio_sup": float(b2.max()),
            "I3_sup": float(b3.max()),
        }


def appendix_integrals(basis: AnalyticBasis, t, step: float = HALF_PI / 8) -> AppendixReport:
    """Growth-bound integrals on the grid ``t0, t0 + step, ...`` up to ``max(t)``.

    ``I1 = int sin^2 / H``, ``I2 = int sin(2s) H``, and
    ``I3 = int_{t0}^t sin(2s) H(s) (G(t) - G(s)) ds = G(t) I2(t) - int sin(2s) H G``.
    Values are returned at the points of ``t`` (which are appended to the grid).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    t0 = basis.t0
    grid = t0 + step * np.arange(int(math.floor((t.max() - t0) / step)) + 1)
    grid = np.union1d(grid, t)
    Hf = basis.Hf
    tol = basis.quad_tol

    def h(s):
        return np.exp(Hf.log_value(s))

    c1 = cumulative_on_grid(lambda s: np.sin(s) ** 2 / h(s), grid, tol)
    c2 = cumulative_on_grid(lambda s: np.sin(2 * s) * h(s), grid, tol)
    cg = cumulative_on_grid(lambda s: np.sin(2 * s) * h(s) * basis.G(s), grid, tol)
    idx = np.searchsorted(grid, t)
    I1, I2 = c1[idx], c2[idx]
    I3 = basis.G(t) * I2 - cg[idx]
    f = basis.rate.f(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = np.where(t > t0, I1 * np.sqrt(f) / (t - t0), np.nan)
    return AppendixReport(t, I1, I2, I3, (b1, np.abs(I2) / np.sqrt(f), np.abs(I3)))


@dataclass(frozen=True)
class CrossingTerms:
    t: np.ndarray
    main: np.ndarray  # (H I1)^2
    R1: np.ndarray
    R2: np.ndarray
    cross: np.ndarray  # 2 (R2 sin t - R1 cos t) H I1
    reconstructed: np.ndarray  # ||z||^2 / a^2 from the decomposition


def crossing_terms(basis: AnalyticBasis, t, step: float = HALF_PI / 8) -> CrossingTerms:
    """Split ``||z||^2 / a^2`` into the main term, the remainders and the cross term.

    With ``I1..I3`` as in :func:`appendix_integrals`, ``k = f'/f`` and ``H = H_f(t)``::

        z1 / a = -cos(t) H I1 + R1
        z2 / a =  sin(t) H I1 + R2
        R1 = sin(t) I2 / (2H) + cos(t) H I3 / 2
        R2 = (cos t + k cos^2 t sin t) I2 / (2H) - k cos^3(t) H I1
             + (k cos^3 t - sin t) H I3 / 2
    """
    rep = appendix_integrals(basis, t, step)
    t = rep.t
    H = basis.Hf(t)
    k = basis.rate.log_derivative(t)
    c, s = np.cos(t), np.sin(t)
    HI1 = H * rep.I1
    R1 = s * rep.I2 / (2 * H) + 0.5 * c * H * rep.I3
    R2 = ((c + k * c * c * s) * rep.I2 / (2 * H) - k * c ** 3 * HI1
          + 0.5 * (k * c ** 3 - s) * H * rep.I3)
    cross = 2.0 * (R2 * s - R1 * c) * HI1
    return CrossingTerms(t, HI1 ** 2, R1, R2, cross, HI1 ** 2 + R1 ** 2 + R2 ** 2 + cross)


@dataclass(frozen=True)
class OscillatoryIntegralReport:
    t: np.ndarray
    running_cos: np.ndarray
    running_sin: np.ndarray
    parts_bound: np.ndarray
    sup_cos: float
    sup_sin: float
    rel_change_last_decade: float
    bound_holds: bool
    horizon: float

    @property
    def bounded(self) -> bool:
        return self.rel_change_last_decade < 0.01

    def as_dict(self) -> dict:
        return {"sup_cos": self.sup_cos, "sup_sin": self.sup_sin,
                "rel_change_last_decade": self.rel_change_last_decade,
                "bound_holds": self.bound_holds, "bounded": self.bounded,
                "horizon": self.horizon,
                "verdict": ("bounded" if self.bounded else "not settled")
                + f" on horizon {self.horizon:g}"}


def oscillatory_integral_check(G: Callable, derivatives: Sequence[Callable], N: int,
                               horizon: float, t0: float = HALF_PI, step: float = HALF_PI / 8,
                               tol: float = 1e-10) -> OscillatoryIntegralReport:
    """Running suprema of ``|int cos(2s) G|`` and ``|int sin(2s) G|`` on ``[t0, horizon]``.

    The verdict compares the running sups at ``t0 + (horizon - t0)/10`` and at
    the horizon. As an independent check, the integration-by-parts bound
    ``sum_{l=1}^N 2^-l (|G^(l-1)(t)| + |G^(l-1)(t0)|) + 2^-N int |G^(N)|``
    is evaluated on the same grid and must dominate both integrals.
    """
    if N < 1 or len(derivatives) < N:
        raise ValueError("need N >= 1 and derivatives G', ..., G^(N)")
    n = int(math.floor((horizon - t0) / step))
    grid = t0 + step * np.arange(n + 1)
    if grid[-1] < horizon:
        grid = np.append(grid, horizon)
    ic = cumulative_on_grid(lambda s: np.cos(2 * s) * G(s), grid, tol)
    is_ = cumulative_on_grid(lambda s: np.sin(2 * s) * G(s), grid, tol)
    rc = np.maximum.accumulate(np.abs(ic))
    rs = np.maximum.accumulate(np.abs(is_))
    funcs = [G] + list(derivatives[:N])
    bound = np.zeros_like(grid)
    for l in range(1, N + 1):
        g = funcs[l - 1]
        bound += 2.0 ** -l * (np.abs(g(grid)) + abs(float(g(t0))))
    gN = funcs[N]
    bound += 2.0 ** -N * cumulative_on_grid(lambda s: np.abs(gN(s)), grid, tol)
    slack = 1e-9 + 10 * tol * np.arange(grid.size)
    holds = bool(np.all(np.abs(ic) <= bound + slack) and np.all(np.abs(is_) <= bound + slack))
    j = int(np.searchsorted(grid, t0 + 0.1 * (horizon - t0)))
    sup_now = max(rc[-1], rs[-1])
    sup_then = max(rc[j], rs[j])
    rel = 0.0 if sup_now == 0 else (sup_now - sup_then) / sup_now
    return OscillatoryIntegralReport(grid, rc, rs, bound, float(rc[-1]), float(rs[-1]),
                                     float(rel), holds, float(horizon))
