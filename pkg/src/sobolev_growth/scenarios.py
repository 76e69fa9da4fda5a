"""Scenario catalog, config parsing and the classical/quantum/correspondence pipeline."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classical_dynamics as cd
from . import correspondence as corr
from . import growth_rates as gr
from . import perturbation as pt
from . import quantum_evolution as qe

OUTDIR_ENV = "SOBOLEV_GROWTH_OUTDIR"
DEFAULT_OUTDIR = "sobolev_growth_out"


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


class ScenarioError(RuntimeError):
    """A module failed while running a scenario; the message names the module."""


@dataclass(frozen=True)
class Scenario:
    """One experiment: a rate, forcing, horizon and tolerances.

    ``duration`` is ``horizon - t0``; ``growth`` picks the growth verdict
    (``auto`` infers it from the rate and ``a``).
    """

    name: str
    rate: str = "power_log"
    params: tuple = (1.0, 1.0, 0.0)
    t0: float | None = None
    s: tuple = (1.0, 2.0)
    a: float = 0.0
    duration: float = 200.0
    ode_tol: float = 1e-10
    quad_tol: float = 1e-10
    dt: float = 1e-3
    N0: int = 256
    N_max: int = 2 ** 17
    sample_step: float = 0.1
    window_offset: float = 10.0
    oracle_window: float = 100.0
    check_horizon: float = 1e4
    check_step: float = 0.1
    envelope_horizon: float = 3000.0
    growth: str = "auto"
    description: str = ""

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("horizon must be after t0")
        if not self.s or any(v <= 0 for v in self.s):
            raise ConfigError("s values must be positive")
        if self.growth not in ("auto", "baseline", "homogeneous", "forced", "oscillatory"):
            raise ConfigError(f"unknown growth verdict {self.growth!r}")
        if self.window_offset >= self.duration:
            raise ConfigError("window_offset must be shorter than the run")

    def build_rate(self) -> gr.GrowthRate:
        try:
            return gr.make_catalog_rate(self.rate, self.params, self.t0)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"rate {self.rate!r}: {exc}") from exc

    @property
    def growth_kind(self) -> str:
        if self.growth != "auto":
            return self.growth
        if self.a != 0.0:
            return "forced"
        if self.rate == "constant":
            return "baseline"
        if self.rate == "oscillatory":
            return "oscillatory"
        return "homogeneous"


SCENARIOS = {
    "qho-baseline": Scenario(
        "qho-baseline", rate="constant", params=(), s=(1.0,), duration=50.0,
        check_horizon=1e3, description="f constant, phi = 0: the plain oscillator, norms constant"),
    "mono-linear": Scenario(
        "mono-linear", rate="power_log", params=(1.0, 1.0, 0.0), s=(1.0, 2.0), duration=200.0,
        description="f(t) = t, homogeneous: ||u||_s grows like t^(s/2)"),
    "mono-powerlog": Scenario(
        "mono-powerlog", rate="power_log", params=(1.0, 1.0, 1.0), s=(1.0,), duration=200.0,
        description="f(t) = t ln t, homogeneous: ||u||_1 grows like (t ln t)^(1/2)"),
    "oscillatory": Scenario(
        "oscillatory", rate="oscillatory", params=(), s=(1.0,), duration=300.0,
        description="f(t) = t^(1/3) (1 + ln t sin^2 sqrt t): envelopes t^(s/6) and t^(s/6) ln^(s/2) t"),
    "forced-linear": Scenario(
        "forced-linear", rate="power_log", params=(1.0, 1.0, 0.0), s=(1.0,), a=1.0, duration=200.0,
        description="f(t) = t with resonant forcing a sin t X: ||u||_1 grows like t"),
    "exponential-remark": Scenario(
        "exponential-remark", rate="exponential", params=(0.1,), s=(1.0,), duration=60.0,
        check_horizon=1e3,
        description="f = exp(0.1 t): outside class M, phi_f does not decay, norms grow exponentially"),
}

_FIELDS = {f.name: f for f in dataclasses.fields(Scenario)}
_TUPLE_KEYS = {"params", "s"}
_INT_KEYS = {"N0", "N_max"}
_STR_KEYS = {"name", "rate", "growth", "description"}


def _coerce(key: str, value):
    if key in _TUPLE_KEYS:
        if isinstance(value, str):
            items = [v for v in value.replace(",", " ").split() if v]
        elif isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [value]
        return tuple(float(v) for v in items)
    if key in _STR_KEYS:
        return str(value)
    if key in _INT_KEYS:
        v = float(value)
        if not v.is_integer():
            raise ValueError("expected an integer")
        return int(v)
    if key == "t0":
        return None if value in (None, "", "default") else float(value)
    return float(value)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` comments) or a JSON object.

    Lists are comma- or space-separated. ``horizon`` (absolute) may be
    given instead of ``duration``.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
        return dict(raw)
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def scenario_from_mapping(raw: dict, base: Scenario | None = None) -> Scenario:
    """Build a :class:`Scenario`, starting from ``raw['scenario']`` or ``base`` if given."""
    raw = dict(raw)
    base_name = raw.pop("scenario", None)
    if base_name is not None:
        if base_name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {base_name!r}")
        base = SCENARIOS[base_name]
    horizon = raw.pop("horizon", None)
    values = dataclasses.asdict(base) if base is not None else {}
    for key, value in raw.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _coerce(key, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    values.setdefault("name", "custom")
    if horizon is not None:
        if "duration" in raw:
            raise ConfigError("give either horizon or duration, not both")
        sc = Scenario(**{**values, "duration": math.inf})
        t0 = sc.build_rate().t0
        try:
            values["duration"] = float(horizon) - t0
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for 'horizon': {horizon!r}") from exc
    try:
        sc = Scenario(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    sc.build_rate()
    return sc


def load_scenario(spec: str, overrides: dict | None = None) -> Scenario:
    """A shipped scenario name or a config file path, then ``overrides``."""
    if spec in SCENARIOS:
        base, raw = SCENARIOS[spec], {}
    else:
        path = Path(spec)
        if not path.is_file():
            raise ConfigError(f"{spec!r} is neither a shipped scenario nor a config file")
        raw = parse_config_text(path.read_text())
        base = None
        raw.setdefault("name", path.stem)
    raw.update(overrides or {})
    return scenario_from_mapping(raw, base)


# ---------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    threshold: float

    def as_dict(self) -> dict:
        return {"pass": self.passed, "value": self.value, "threshold": self.threshold}


@dataclass
class ScenarioResult:
    scenario: Scenario
    verdicts: list
    reports: dict
    flow: cd.FlowResult
    trajectory: qe.Trajectory
    ratios: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)


def _tagged(module: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except (ConfigError, ScenarioError):
        raise
    except Exception as exc:
        raise ScenarioError(f"[{module}] {type(exc).__name__}: {exc}") from exc


def _le(name, value, threshold) -> Verdict:
    value = float(value)
    return Verdict(name, bool(math.isfinite(value) and value <= threshold), value, float(threshold))


def _rate_reports(sc: Scenario, rate: gr.GrowthRate, horizon: float) -> tuple[dict, list]:
    check_h = max(sc.check_horizon, horizon)
    cm = _tagged("growth_rates", gr.check_class_M, rate, check_h, sc.check_step)
    sup = _tagged("growth_rates", gr.check_support_condition, rate, check_h, sc.check_step)
    phi = pt.build_phi(rate)
    decay = _tagged("perturbation", pt.check_decay, phi, check_h)
    hyp = _tagged("perturbation", pt.check_hypotheses, rate, horizon, tol=sc.quad_tol)
    reports = {"class_M": cm.as_dict(), "support": sup.as_dict(), "decay": decay.as_dict(),
               "hypotheses": hyp.as_dict()}
    verdicts = []
    if sc.rate == "constant":
        # f constant: phi vanishes, class M fails only through growth
        verdicts.append(Verdict("rate_classified", not cm.tends_to_infinity and cm.ratio_to_zero,
                                float(cm.tends_to_infinity), 0.0))
    elif sc.rate == "exponential":
        verdicts.append(Verdict("rate_classified", not cm.ratio_to_zero and not decay.decaying,
                                float(cm.ratio_to_zero), 0.0))
    elif sc.rate == "oscillatory":
        # outside class M only through the non-monotone ratio f'/f; phi still decays
        ok = (cm.inf_positive and cm.tends_to_infinity and not cm.ratio_monotone
              and decay.decaying)
        verdicts.append(Verdict("rate_classified", ok, float(cm.ratio_monotone), 0.0))
    else:
        verdicts.append(Verdict("rate_classified", cm.in_class, float(cm.in_class), 1.0))
    return reports, verdicts


def run_scenario(sc: Scenario, outdir: str | os.PathLike | None = None) -> ScenarioResult:
    """Run the full pipeline and, if ``outdir`` is given, write its artifacts there.

    Artifacts: ``classical.csv``, ``quantum.csv``, ``correspondence_s<s>.csv``,
    ``reports.json`` and ``verdicts.json`` in ``outdir/<name>/``.
    """
    rate = sc.build_rate()
    t0 = rate.t0
    horizon = t0 + sc.duration
    window = t0 + sc.window_offset
    reports, verdicts = _rate_reports(sc, rate, horizon)
    phi = pt.build_phi(rate)

    # classical flow and its invariants
    system = cd.oscillator_system(phi, sc.a, label=sc.name)
    flow = _tagged("classical_dynamics", cd.integrate_flow, system, t0, horizon,
                   sc.ode_tol, sc.sample_step)
    symp = float(np.max(flow.symplectic_defect / np.maximum(1.0, flow.W_norm ** 2)))
    verdicts.append(_le("symplectic_defect", symp, 1e-8))
    verdicts.append(_le("wtex_residual", np.max(flow.wtex_residual / np.maximum(1.0, flow.W_norm)), 1e-6))

    # closed-form oracle on the first part of the run
    basis = cd.AnalyticBasis(rate, sc.quad_tol)
    sel = flow.times <= t0 + sc.oracle_window
    W_an = _tagged("classical_dynamics", cd.fundamental_from_analytic, basis, flow.times[sel], True)
    scale = np.maximum(np.max(np.abs(W_an), axis=(1, 2)), 1e-300)
    oracle = np.max(np.max(np.abs(flow.W[sel] - W_an), axis=(1, 2)) / scale)
    verdicts.append(_le("oracle_W", oracle, 1e-6))
    reports["oracle"] = {"W_rel_err": float(oracle), "window": sc.oracle_window}
    if sc.a != 0.0 and cd.is_aligned(t0):
        z_an = _tagged("classical_dynamics", cd.forced_particular_solution, basis, sc.a, flow.times[sel])
        zn = np.maximum(np.linalg.norm(z_an, axis=-1), 1.0)
        z_err = np.max(np.linalg.norm(flow.zstar[sel] - z_an, axis=-1) / zn)
        verdicts.append(_le("oracle_zstar", z_err, 1e-6))
        reports["oracle"]["zstar_rel_err"] = float(z_err)

    # quantum evolution
    qspec = qe.QuantumHamiltonianSpec(phi, sc.a, N=sc.N0, dt=sc.dt, N_max=sc.N_max)
    traj = _tagged("quantum_evolution", qe.evolve, qe.basis_state(0, sc.N0, t0), qspec, horizon,
                   sc.sample_step, sc.s)
    drift = np.max(np.abs(traj.l2 ** 2 - traj.l2[0] ** 2)[1:] / (traj.times[1:] - t0))
    verdicts.append(_le("l2_drift_per_time", drift, 1e-8))
    reports["quantum"] = {"final_N": int(traj.N[-1]), "growth_events": traj.growth_events,
                          "max_tail": float(np.max(traj.tail))}

    # correspondence and growth bands
    ratios = {}
    growth = reports["growth"] = {}
    kind = sc.growth_kind
    for s in sc.s:
        rs, rep = _tagged("correspondence", corr.ratio_series, flow, traj, s, window)
        ratios[s] = rs
        reports.setdefault("correspondence", {})[f"s{s:g}"] = rep.as_dict()
        verdicts.append(_le(f"correspondence_drift_s{s:g}", rep.drift, 2.0))
        m = traj.norm(s)
        if kind == "baseline":
            verdicts.append(_le(f"baseline_constant_s{s:g}", rep.band - 1.0, 1e-6))
        elif kind == "homogeneous":
            b = corr.windowed_band(traj.times, m / rate.f(traj.times) ** (s / 2), window)
            growth[f"s{s:g}"] = b.as_dict()
            verdicts.append(_le(f"growth_band_s{s:g}", b.band, 10.0))
        elif kind == "forced":
            b = corr.windowed_band(traj.times, m / traj.times ** s, window)
            growth[f"s{s:g}"] = b.as_dict()
            verdicts.append(_le(f"growth_band_s{s:g}", b.band, 10.0))
        elif kind == "oscillatory":
            for env in ("low", "high"):
                b = corr.envelope_band(traj.times, m, s, env, window, horizon)
                growth[f"{env}_s{s:g}"] = b.as_dict()
                verdicts.append(_le(f"envelope_{env}_s{s:g}", b.band, 10.0))
    if kind == "forced":
        b = corr.windowed_band(flow.times, flow.zstar_norm / np.maximum(flow.times - t0, 1e-300), window)
        growth["classical_zstar"] = b.as_dict()
        verdicts.append(_le("classical_forced_band", b.band, 5.0))
    if kind == "oscillatory":
        for env in ("low", "high"):
            tk = corr.envelope_times(env, window, t0 + sc.envelope_horizon)
            cs = _tagged("correspondence", corr.classical_from_analytic, basis, tk)
            for s in sc.s:
                b = corr.band_report(cs.W_norm ** s / corr.envelope_scale(env, tk, s))
                growth[f"classical_{env}_s{s:g}"] = b.as_dict()
                verdicts.append(_le(f"classical_envelope_{env}_s{s:g}", b.band, 10.0))

    result = ScenarioResult(sc, verdicts, reports, flow, traj, ratios)
    if outdir is not None:
        write_artifacts(result, outdir)
    return result


# ---------------------------------------------------------------- output


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def write_artifacts(result: ScenarioResult, outdir: str | os.PathLike) -> Path:
    sc = result.scenario
    d = Path(outdir) / sc.name
    d.mkdir(parents=True, exist_ok=True)
    flow, traj = result.flow, result.trajectory
    _write_csv(d / "classical.csv",
               ["t", "W_norm", "zstar_norm", "symplectic_defect", "wtex_residual"],
               [flow.times, flow.W_norm, flow.zstar_norm, flow.symplectic_defect, flow.wtex_residual])
    s_list = list(sc.s)
    _write_csv(d / "quantum.csv",
               ["t", "l2"] + [f"sobolev_s{s:g}" for s in s_list] + ["tail_mass", "N"],
               [traj.times, traj.l2] + [traj.norm(s) for s in s_list] + [traj.tail, traj.N])
    for s, rs in result.ratios.items():
        _write_csv(d / f"correspondence_s{s:g}.csv", ["t", "measured", "predicted", "ratio"],
                   [rs.times, rs.measured, rs.predicted, rs.ratio])
    reports = {"scenario": dataclasses.asdict(sc), **result.reports}
    (d / "reports.json").write_text(
        json.dumps(reports, indent=2, sort_keys=True, default=_json_default) + "\n")
    verdicts = {"scenario": sc.name, "all_pass": result.all_pass,
                "verdicts": {v.name: v.as_dict() for v in result.verdicts}}
    (d / "verdicts.json").write_text(
        json.dumps(verdicts, indent=2, sort_keys=True, default=_json_default) + "\n")
    return d


def resolve_outdir(cli_value: str | None) -> Path:
    return Path(cli_value or os.environ.get(OUTDIR_ENV) or DEFAULT_OUTDIR)
