"""Hermite-basis evolution of the perturbed quantum harmonic oscillator.

The state ``u = sum_n c_n h_n`` is expanded in oscillator eigenfunctions, so
``T = diag(n + 1/2)`` and the Hamiltonian

    H(t) = T + (phi(t) / 2) X^2 + a sin(t) X

is real symmetric with bandwidth 2. The equation ``-i du/dt = H(t) u`` is
advanced by Strang splitting: half a step of the exact diagonal phase
``exp(i T dt / 2)``, a Cayley (midpoint) step for the banded remainder frozen
at the half step, and another diagonal half step. Every factor is unitary up
to roundoff and the composition is second order in ``dt``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numba
import numpy as np


class TruncationCeilingError(RuntimeError):
    """The truncation would have to grow beyond ``N_max``."""


class NormDriftError(RuntimeError):
    """The L2 norm drifted by more than the unitarity budget."""


class UntrustedNormWarning(UserWarning):
    """A Sobolev norm was taken of a state whose tail mass exceeds the threshold."""


# --- operator matrices ------------------------------------------------------

def x_offdiag(N: int) -> np.ndarray:
    """``<n+1|X|n> = sqrt((n+1)/2)`` for ``n = 0..N-1``."""
    return np.sqrt(np.arange(1, N + 1) / 2.0)


def x2_offdiag(N: int) -> np.ndarray:
    """``<n+2|X^2|n> = sqrt((n+1)(n+2))/2`` for ``n = 0..N-2``."""
    n = np.arange(N - 1, dtype=float)
    return np.sqrt((n + 1.0) * (n + 2.0)) / 2.0


def oscillator_diag(N: int) -> np.ndarray:
    return np.arange(N + 1) + 0.5


def matrix_X(N: int) -> np.ndarray:
    """Position operator on ``span(h_0..h_N)`` as a dense ``(N+1, N+1)`` array."""
    if N < 1:
        raise ValueError("N must be at least 1")
    e = x_offdiag(N)
    return np.diag(e, 1) + np.diag(e, -1)


def matrix_X2(N: int) -> np.ndarray:
    """``X^2`` in the oscillator basis (exact matrix elements, not the truncated square)."""
    if N < 2:
        raise ValueError("N must be at least 2")
    g = x2_offdiag(N)
    return np.diag(oscillator_diag(N)) + np.diag(g, 2) + np.diag(g, -2)


def matrix_D2(N: int) -> np.ndarray:
    """``D^2`` in the oscillator basis; ``(X^2 + D^2) / 2 = diag(n + 1/2)``."""
    if N < 2:
        raise ValueError("N must be at least 2")
    g = x2_offdiag(N)
    return np.diag(oscillator_diag(N)) - np.diag(g, 2) - np.diag(g, -2)


# --- states -----------------------------------------------------------------

@dataclass(frozen=True)
class HermiteState:
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("coefficients must be a vector of length >= 2")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.size - 1

    @property
    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    @property
    def tail_mass(self) -> float:
        return tail_mass(self.coeffs)

    def padded(self, N: int) -> "HermiteState":
        c = np.zeros(N + 1, dtype=complex)
        c[:self.coeffs.size] = self.coeffs
        return HermiteState(c, self.time)

    def scaled(self, factor: complex) -> "HermiteState":
        return HermiteState(self.coeffs * factor, self.time)


def basis_state(n: int, N: int = 256, time: float = 0.0) -> HermiteState:
    c = np.zeros(N + 1, dtype=complex)
    c[n] = 1.0
    return HermiteState(c, time)


def tail_mass(c: np.ndarray) -> float:
    """``sum_{n > 0.9 N} |c_n|^2``."""
    N = c.size - 1
    start = int(math.floor(0.9 * N)) + 1
    return float(np.sum(np.abs(c[start:]) ** 2))


def sobolev_weights(N: int, s: float) -> np.ndarray:
    return (np.arange(N + 1) + 0.5) ** s + 1.0


def sobolev_norm(state: HermiteState, s: float, tail_threshold: float = 1e-12) -> float:
    """``sqrt(sum ((n + 1/2)^s + 1) |c_n|^2)``.

    A :class:`UntrustedNormWarning` is emitted when the tail mass exceeds
    ``tail_threshold``.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    if state.tail_mass > tail_threshold:
        warnings.warn(f"tail mass {state.tail_mass:.3g} exceeds {tail_threshold:g}; "
                      "Sobolev norm untrusted", UntrustedNormWarning, stacklevel=2)
    return _sobolev(state.coeffs, s)


def _sobolev(c: np.ndarray, s: float) -> float:
    return float(np.sqrt(np.sum(sobolev_weights(c.size - 1, s) * np.abs(c) ** 2)))


# --- Hamiltonian ------------------------------------------------------------

@dataclass(frozen=True)
class QuantumHamiltonianSpec:
    """Inputs of the quantum evolution.

    ``phi`` must be vectorised. ``N`` is the initial truncation (coefficient
    indices ``0..N``); it doubles, up to ``N_max``, whenever the tail mass
    after a sampling interval exceeds ``tail_tol``.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    a: float = 0.0
    N: int = 256
    dt: float = 1e-3
    N_max: int = 1 << 17
    tail_tol: float = 1e-12
    drift_budget: float = 1e-8  # allowed L2 drift per unit time


def hamiltonian_matrix(spec: QuantumHamiltonianSpec, t: float, N: int | None = None) -> np.ndarray:
    """Dense ``H(t)`` on ``span(h_0..h_N)``; for checks and small truncations."""
    N = spec.N if N is None else N
    p = float(np.asarray(spec.phi(np.array([t])))[0])
    return (np.diag(oscillator_diag(N)) + 0.5 * p * matrix_X2(N)
            + spec.a * math.sin(t) * matrix_X(N))


@numba.njit(cache=True)
def _advance(c, phi_mid, force_mid, dt, diag, e, g, half_phase, work):
    """Apply ``len(phi_mid)`` split steps to ``c`` in place.

    ``diag = n + 1/2``, ``e`` and ``g`` are the first and second off-diagonals
    of ``X`` and ``X^2``; ``half_phase = exp(i diag dt / 2)``.
    """
    n = c.size
    theta = 0.5 * dt
    a0 = work[0]
    a1 = work[1]
    a2 = work[2]
    b1 = work[3]
    b2 = work[4]
    r = work[5]
    for step in range(phi_mid.size):
        hp = 0.5 * phi_mid[step]
        fm = force_mid[step]
        for j in range(n):
            c[j] *= half_phase[j]
        # r = (I + i theta V) c and the factor matrix I - i theta V
        for j in range(n):
            vd = hp * diag[j]
            acc = vd * c[j]
            if j >= 1:
                acc += fm * e[j - 1] * c[j - 1]
            if j + 1 < n:
                acc += fm * e[j] * c[j + 1]
            if j >= 2:
                acc += hp * g[j - 2] * c[j - 2]
            if j + 2 < n:
                acc += hp * g[j] * c[j + 2]
            r[j] = c[j] + 1j * theta * acc
            a0[j] = 1.0 - 1j * theta * vd
            if j + 1 < n:
                a1[j] = -1j * theta * fm * e[j]
                b1[j] = a1[j]
            if j + 2 < n:
                a2[j] = -1j * theta * hp * g[j]
                b2[j] = a2[j]
        # banded elimination without pivoting: the real part of the matrix is
        # the identity, so the factorisation exists and is stable
        for k in range(n):
            p = a0[k]
            if k + 1 < n:
                l1 = b1[k] / p
                a0[k + 1] -= l1 * a1[k]
                if k + 2 < n:
                    a1[k + 1] -= l1 * a2[k]
                r[k + 1] -= l1 * r[k]
            if k + 2 < n:
                l2 = b2[k] / p
                b1[k + 1] -= l2 * a1[k]
                a0[k + 2] -= l2 * a2[k]
                r[k + 2] -= l2 * r[k]
        c[n - 1] = r[n - 1] / a0[n - 1]
        if n >= 2:
            c[n - 2] = (r[n - 2] - a1[n - 2] * c[n - 1]) / a0[n - 2]
        for k in range(n - 3, -1, -1):
            c[k] = (r[k] - a1[k] * c[k + 1] - a2[k] * c[k + 2]) / a0[k]
        for j in range(n):
            c[j] *= half_phase[j]


class _Stepper:
    """Caches the basis arrays for one truncation size."""

    def __init__(self, N: int, dt: float):
        self.N = N
        self.diag = oscillator_diag(N)
        self.e = np.concatenate([x_offdiag(N), [0.0]])
        self.g = np.concatenate([x2_offdiag(N), [0.0, 0.0]])
        self.half_phase = np.exp(0.5j * dt * self.diag)
        self.work = np.zeros((6, N + 1), dtype=complex)
        self.dt = dt

    def run(self, c: np.ndarray, phi_mid: np.ndarray, force_mid: np.ndarray) -> None:
        _advance(c, phi_mid, force_mid, self.dt, self.diag, self.e, self.g,
                 self.half_phase, self.work)


@dataclass
class Trajectory:
    times: np.ndarray
    l2: np.ndarray
    tail: np.ndarray
    N: np.ndarray
    sobolev: dict
    final_state: HermiteState
    states: list | None = None
    growth_events: list = field(default_factory=list)

    def norm(self, s: float) -> np.ndarray:
        if s in self.sobolev:
            return self.sobolev[s]
        if self.states is None:
            raise KeyError(f"s={s} was not requested and states were not kept")
        return np.array([_sobolev(st.coeffs, s) for st in self.states])


def evolve(state: HermiteState, spec: QuantumHamiltonianSpec, t_end: float,
           sample_step: float = 0.1, s_values: Iterable[float] = (1.0, 2.0),
           keep_states: bool = False) -> Trajectory:
    """Advance ``state`` to ``t_end`` and sample every ``sample_step``.

    Sampling times are ``state.time + j * sample_step``; ``sample_step`` must
    be an integer multiple of ``spec.dt``. After each sampling interval the
    tail mass is checked; if it exceeds ``spec.tail_tol`` the truncation is
    doubled and the interval is recomputed from its zero-padded start state.

    Raises
    ------
    TruncationCeilingError
        When the required truncation exceeds ``spec.N_max``.
    NormDriftError
        When ``| |c(t)|^2 - |c(t0)|^2 |`` exceeds ``drift_budget * (t - t0)``
        (plus a roundoff floor of ``1e-12``).
    """
    t0 = float(state.time)
    if t_end <= t0:
        raise ValueError("t_end must be after the state time")
    m = int(round(sample_step / spec.dt))
    if m < 1 or abs(m * spec.dt - sample_step) > 1e-9 * sample_step:
        raise ValueError("sample_step must be an integer multiple of dt")
    if state.tail_mass > spec.tail_tol:
        raise ValueError("initial state violates the tail-mass threshold; enlarge N")
    n_samples = int(math.floor((t_end - t0) / sample_step + 1e-9))
    s_values = tuple(float(s) for s in s_values)

    N = max(spec.N, state.N)
    c = state.padded(N).coeffs.copy()
    mass0 = float(np.sum(np.abs(c) ** 2))
    stepper = _Stepper(N, spec.dt)
    offsets = (np.arange(m) + 0.5) * spec.dt

    times = t0 + sample_step * np.arange(n_samples + 1)
    l2 = np.empty(n_samples + 1)
    tails = np.empty(n_samples + 1)
    Ns = np.empty(n_samples + 1, dtype=np.int64)
    sob = {s: np.empty(n_samples + 1) for s in s_values}
    kept = [] if keep_states else None
    events = []

    def record(j, vec, t):
        l2[j] = math.sqrt(float(np.sum(np.abs(vec) ** 2)))
        tails[j] = tail_mass(vec)
        Ns[j] = vec.size - 1
        for s in s_values:
            sob[s][j] = _sobolev(vec, s)
        if kept is not None:
            kept.append(HermiteState(vec.copy(), t))

    record(0, c, t0)
    for j in range(n_samples):
        start = t0 + (j * m) * spec.dt
        mids = start + offsets
        phi_mid = np.ascontiguousarray(np.asarray(spec.phi(mids), dtype=float))
        force_mid = spec.a * np.sin(mids)
        saved = c.copy()
        while True:
            stepper.run(c, phi_mid, force_mid)
            if not np.all(np.isfinite(c)):
                raise NormDriftError(f"non-finite coefficients at t={times[j + 1]:.6g}")
            if tail_mass(c) <= spec.tail_tol:
                break
            if 2 * N > spec.N_max:
                raise TruncationCeilingError(
                    f"truncation would exceed N_max={spec.N_max} at t={times[j + 1]:.6g}")
            N *= 2
            events.append((float(times[j]), N))
            c = np.zeros(N + 1, dtype=complex)
            c[:saved.size] = saved
            saved = c.copy()
            stepper = _Stepper(N, spec.dt)
        t = float(times[j + 1])
        drift = abs(float(np.sum(np.abs(c) ** 2)) - mass0)
        if not drift <= spec.drift_budget * (t - t0) + 1e-12:  # also catches NaN
            raise NormDriftError(f"L2 drift {drift:.3g} at t={t:.6g} exceeds the budget")
        record(j + 1, c, t)

    return Trajectory(times, l2, tails, Ns, sob, HermiteState(c.copy(), float(times[-1])),
                      kept, events)
