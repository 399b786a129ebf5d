"""Closed-loop simulation of the plant/observer pair under a vaccination law.

The integrator advances both 4-state systems (plus the tracking-gain
auxiliary integrals when that law is selected) with a fixed-step classical
Runge-Kutta scheme.  The vaccination command is always computed from the
*estimated* populations, applied to plant and observer alike, and optionally
clamped to [0, 1] before application.  The hot loop itself lives in
``_kernels``; this module owns configuration validation, trajectory
recording, scenario presets, and post-run diagnostics.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from .analysis import (
    DecompositionAnchors,
    StabilityReport,
    build_system_matrices,
    certify,
    transient_envelope,
)
from .control import ControlGains, TrackingGainConfig
from .model import EpidemicParams, PopulationState, validate_params
from .observer import ObserverParams, ObserverState, validate_observer_params

CSV_COLUMNS = (
    "t",
    "S",
    "E",
    "I",
    "R",
    "S_hat",
    "E_hat",
    "I_hat",
    "R_hat",
    "V_cmd",
    "V_app",
    "g",
    "err_norm",
)

LAW_NAMES = tuple(_kernels.LAW_CODES)

REL_TOL = 1e-9


class ConfigurationError(ValueError):
    """A simulation configuration violated a named invariant."""


class SimulationAborted(RuntimeError):
    """A state component stopped being finite during integration."""

    def __init__(self, time: float):
        super().__init__(f"non-finite state at t = {time}")
        self.time = time


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to run one closed-loop simulation.

    ``stride`` is the recording period in days; it must be an integer
    multiple of ``dt`` and divide the duration evenly so the recorded grid
    is exact.  ``clamp_v`` selects whether the applied vaccination is the
    command saturated to [0, 1] (the default) or the raw command.
    ``anchors`` freeze the constant part of the estimate matrix for the
    tracking law and feed the stability certificate of ``run_scenario``.
    """

    plant: EpidemicParams
    observer: ObserverParams
    plant_init: PopulationState
    observer_init: ObserverState
    law: str = "none"
    gains: ControlGains = field(default_factory=ControlGains)
    v_const: float = 0.0
    tracking: TrackingGainConfig | None = None
    anchors: DecompositionAnchors = field(default_factory=DecompositionAnchors)
    duration: float = 1000.0
    dt: float = 0.01
    stride: float = 1.0
    clamp_v: bool = True
    per_stage_law: bool = False

    def problems(self) -> list[str]:
        """Every violated invariant, by name; empty when valid."""
        out = list(validate_params(self.plant))
        out += validate_observer_params(self.observer)
        if self.law not in _kernels.LAW_CODES:
            out.append(
                f"law: unknown value {self.law!r}, expected one of {LAW_NAMES}"
            )
        if not self.dt > 0.0:
            out.append("dt: must be positive")
        elif self.duration < self.dt:
            out.append("duration: must cover at least one step")
        else:
            n = self.duration / self.dt
            if abs(n - round(n)) > 1e-6 or round(n) < 1:
                out.append("duration: not an integer number of steps")
            rec = self.stride / self.dt
            if abs(rec - round(rec)) > 1e-6 or round(rec) < 1:
                out.append("stride: not an integer number of steps")
            elif abs(n - round(n)) <= 1e-6 and round(n) % round(rec) != 0:
                out.append("stride: does not divide the duration evenly")
        n_tot = self.plant.n_total
        if abs(self.observer.n_total - n_tot) > REL_TOL * max(1.0, n_tot):
            out.append("population scale: plant and observer N differ")
        tol = REL_TOL * max(1.0, n_tot)
        if abs(self.plant_init.total() - n_tot) > tol:
            out.append("conservation: plant initial state does not sum to N")
        if abs(self.observer_init.total() - n_tot) > tol:
            out.append("conservation: observer initial state does not sum to N")
        if self.law == "constant" and not math.isfinite(self.v_const):
            out.append("v_const: must be finite")
        if self.law == "tracking":
            if self.tracking is None:
                out.append("tracking: configuration required for the tracking law")
            else:
                muh = self.observer.mu_hat
                trk = self.tracking
                if trk.g_max < muh:
                    out.append("tracking.g_max: must be at least the estimated birth rate")
                if not 0.0 <= trk.g_init <= muh:
                    out.append("tracking.g_init: must lie in [0, estimated birth rate]")
                if trk.horizon_t < 0.0:
                    out.append("tracking.horizon_t: must be nonnegative")
        return out

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def record_every(self) -> int:
        return int(round(self.stride / self.dt))


def _require_valid(cfg: SimulationConfig) -> None:
    problems = cfg.problems()
    if problems:
        raise ConfigurationError("; ".join(problems))


def rk4_step(
    f: Callable[[float, np.ndarray], np.ndarray],
    x: np.ndarray,
    t: float,
    dt: float,
) -> np.ndarray:
    """One classical fourth-order step of ẋ = f(t, x).

    Raises SimulationAborted (carrying the stage time) if any stage
    derivative is non-finite.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)

    def stage(tau: float, base: np.ndarray) -> np.ndarray:
        k = np.asarray(f(tau, base), dtype=float)
        if not np.all(np.isfinite(k)):
            raise SimulationAborted(tau)
        return k

    k1 = stage(t, x)
    k2 = stage(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = stage(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = stage(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class TrajectoryDiagnostics:
    """Summary numbers accumulated while stepping.

    Drift values are the worst |S+E+I+R - N| seen at any visited step (not
    just recorded samples); ``min_component`` is the lowest value any of the
    eight states reached; counters are in steps, not samples.
    """

    max_drift_plant: float
    max_drift_observer: float
    min_component: float
    first_violation_time: float | None
    plant_violation_steps: int
    observer_violation_steps: int
    clamped_steps: int
    fallback_steps: int
    final_g: float
    final_error_norm: float


@dataclass(frozen=True)
class Trajectory:
    """Recorded closed-loop run: one row per sample, columns CSV_COLUMNS."""

    data: np.ndarray
    n_total: float
    diagnostics: TrajectoryDiagnostics

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[1] != len(CSV_COLUMNS):
            raise ValueError("trajectory data must have one column per field")
        if np.any(np.diff(self.data[:, 0]) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, CSV_COLUMNS.index(name)]

    @property
    def plant_states(self) -> np.ndarray:
        return self.data[:, 1:5]

    @property
    def observer_states(self) -> np.ndarray:
        return self.data[:, 5:9]

    @property
    def err_norm(self) -> np.ndarray:
        return self.data[:, 12]

    def to_csv(self, dest: str | Path) -> None:
        """Write the samples in full precision (repr round-trip exact)."""
        lines = [",".join(CSV_COLUMNS)]
        for row in self.data:
            lines.append(",".join(repr(float(v)) for v in row))
        Path(dest).write_text("\n".join(lines) + "\n")


def simulate(cfg: SimulationConfig) -> Trajectory:
    """Integrate the closed-loop system described by ``cfg``.

    The vaccination command is evaluated from the observer state at the
    start of every step and held across the four stages unless
    ``per_stage_law`` is set.  Positivity violations are recorded in the
    diagnostics but never abort the run; a non-finite state does.
    """
    _require_valid(cfg)
    p, q, gains = cfg.plant, cfg.observer, cfg.gains

    if cfg.law == "tracking":
        assert cfg.tracking is not None
        mats = build_system_matrices(
            p, q, gains, cfg.anchors.i_r, cfg.anchors.i_hat_r
        )
        ahat0 = np.ascontiguousarray(mats.a_hat)
        g_max, horizon_t, g_init = (
            cfg.tracking.g_max,
            cfg.tracking.horizon_t,
            cfg.tracking.g_init,
        )
    else:
        ahat0 = np.zeros((4, 4))
        g_max = horizon_t = g_init = 0.0

    n_steps = cfg.n_steps
    record_every = cfg.record_every
    n_rec = n_steps // record_every + 1
    rec = np.empty((n_rec, len(CSV_COLUMNS)))
    diag = np.zeros(12)

    status = _kernels.simulate_loop(
        float(p.mu), float(p.omega), float(p.beta1), float(p.sigma),
        float(p.gamma), float(p.n_total),
        float(q.mu_hat), float(q.omega_hat), float(q.beta1_hat),
        float(q.sigma_hat), float(q.gamma_hat),
        float(gains.k1), float(gains.k2), float(gains.k3), float(gains.k4),
        float(gains.k5), float(gains.g),
        _kernels.LAW_CODES[cfg.law], float(cfg.v_const),
        bool(cfg.clamp_v), bool(cfg.per_stage_law),
        ahat0, float(cfg.anchors.i_hat_r), float(g_max), float(horizon_t),
        float(g_init),
        float(cfg.plant_init.s), float(cfg.plant_init.e),
        float(cfg.plant_init.i), float(cfg.plant_init.r),
        float(cfg.observer_init.s), float(cfg.observer_init.e),
        float(cfg.observer_init.i), float(cfg.observer_init.r),
        float(cfg.dt), n_steps, record_every,
        REL_TOL * max(1.0, float(p.n_total)),
        rec, diag,
    )
    if status != 0:
        raise SimulationAborted(float(diag[_kernels.DIAG_ABORT_T]))

    first_violation = float(diag[_kernels.DIAG_FIRST_VIOLATION_T])
    diagnostics = TrajectoryDiagnostics(
        max_drift_plant=float(diag[_kernels.DIAG_DRIFT_PLANT]),
        max_drift_observer=float(diag[_kernels.DIAG_DRIFT_OBS]),
        min_component=float(diag[_kernels.DIAG_MIN_COMPONENT]),
        first_violation_time=None if first_violation < 0.0 else first_violation,
        plant_violation_steps=int(diag[_kernels.DIAG_PLANT_VIOLATION_STEPS]),
        observer_violation_steps=int(diag[_kernels.DIAG_OBS_VIOLATION_STEPS]),
        clamped_steps=int(diag[_kernels.DIAG_CLAMPED_STEPS]),
        fallback_steps=int(diag[_kernels.DIAG_FALLBACK_STEPS]),
        final_g=float(diag[_kernels.DIAG_FINAL_G]),
        final_error_norm=float(rec[-1, 12]),
    )
    return Trajectory(data=rec, n_total=float(p.n_total), diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Scenario presets
# ---------------------------------------------------------------------------

#: Estimated rates shared by every scenario (per day; the recovered pool
#: loses immunity in two weeks on average and life expectancy is 235 days
#: on the timescale of the study population).
BASE_RATES = {
    "mu": 1.0 / 235.0,
    "omega": 1.0 / 14.0,
    "beta": 1.46,
    "sigma": 0.5,
    "gamma": 0.5,
    "n_total": 1000.0,
}

#: Default multiplicative mismatch applied to the true plant rates in the
#: unknown-parameter scenarios.  Not a measured value; a configuration
#: default, overridable per run.
MISMATCH_FACTORS = {"beta": 1.2, "sigma": 0.8, "gamma": 0.8}

#: Default true initial populations.  The estimated initial values are
#: published; the true ones are not, so these are a documented default
#: chosen to give a large initial estimation error.
PLANT_INIT = (400.0, 50.0, 50.0, 500.0)

#: Published initial estimates.
OBSERVER_INIT = (250.0, 150.0, 150.0, 450.0)

#: Feedback gains of the vaccinated scenario.
SCENARIO_GAINS = ControlGains(
    k1=1.0,
    k2=-0.1,
    k3=-BASE_RATES["gamma"],
    k4=0.95 * BASE_RATES["omega"],
    k5=-BASE_RATES["beta"] / BASE_RATES["n_total"],
    g=BASE_RATES["mu"],
)

SCENARIO_NAMES = ("A", "B", "C")


def _base_observer() -> ObserverParams:
    return ObserverParams(
        mu_hat=BASE_RATES["mu"],
        omega_hat=BASE_RATES["omega"],
        beta_hat=BASE_RATES["beta"],
        sigma_hat=BASE_RATES["sigma"],
        gamma_hat=BASE_RATES["gamma"],
        n_total=BASE_RATES["n_total"],
    )


def _matched_plant() -> EpidemicParams:
    return EpidemicParams(
        mu=BASE_RATES["mu"],
        omega=BASE_RATES["omega"],
        beta=BASE_RATES["beta"],
        sigma=BASE_RATES["sigma"],
        gamma=BASE_RATES["gamma"],
        n_total=BASE_RATES["n_total"],
    )


def _mismatched_plant() -> EpidemicParams:
    return EpidemicParams(
        mu=BASE_RATES["mu"],
        omega=BASE_RATES["omega"],
        beta=BASE_RATES["beta"] * MISMATCH_FACTORS["beta"],
        sigma=BASE_RATES["sigma"] * MISMATCH_FACTORS["sigma"],
        gamma=BASE_RATES["gamma"] * MISMATCH_FACTORS["gamma"],
        n_total=BASE_RATES["n_total"],
    )


def scenario_config(name: str) -> SimulationConfig:
    """Preset configuration for scenario A, B or C.

    A: no vaccination, true rates equal the estimated rates (observer
    convergence case).  B: no vaccination, true rates perturbed by the
    default mismatch factors (non-convergence case).  C: scenario B's plant
    under the full vaccination law with the published gains, applied
    command clamped to [0, 1].
    """
    key = name.strip().upper()
    if key not in SCENARIO_NAMES:
        raise ConfigurationError(
            f"scenario: unknown name {name!r}, expected one of {SCENARIO_NAMES}"
        )
    plant = _matched_plant() if key == "A" else _mismatched_plant()
    law = "full" if key == "C" else "none"
    gains = SCENARIO_GAINS if key == "C" else ControlGains()
    return SimulationConfig(
        plant=plant,
        observer=_base_observer(),
        plant_init=PopulationState(*PLANT_INIT),
        observer_init=ObserverState(*OBSERVER_INIT),
        law=law,
        gains=gains,
    )


def run_scenario(
    name: str, overrides: dict[str, object] | None = None
) -> tuple[Trajectory, StabilityReport]:
    """Run a preset scenario and certify its configuration.

    ``overrides`` replaces top-level SimulationConfig fields before the run.
    The certificate uses a-priori infectious ranges [0, N] for both plant
    and observer, which is the worst case consistent with conserved
    nonnegative states.
    """
    cfg = scenario_config(name)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)  # type: ignore[arg-type]
    traj = simulate(cfg)
    n = cfg.plant.n_total
    report = certify(
        cfg.plant,
        cfg.observer,
        cfg.gains,
        cfg.anchors,
        i_range=(0.0, n),
        i_hat_range=(0.0, n),
    )
    return traj, report


# ---------------------------------------------------------------------------
# Post-run diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeDiagnostics:
    """Trajectory-versus-certificate comparison.

    The exponential envelopes are only meaningful when the certificate
    produced a positive decay margin with a finite transient constant and
    the run never left the linear regime (no clamping, no switching
    fallback, constant feedthrough gain); ``envelope_checked`` records
    whether that gate passed.  The error-norm cap 2*sqrt(2)*N holds for any
    pair of conserved nonnegative states, so its verdict is reported only
    when no positivity violation occurred.
    """

    envelope_checked: bool
    envelope_violations_full: int | None
    envelope_violations_estimate: int | None
    envelope_violations_error: int | None
    bounds_tol: float
    bound_violations: int
    error_norm_max: float
    error_norm_cap: float
    error_norm_bound_ok: bool | None


def compute_diagnostics(
    traj: Trajectory, report: StabilityReport
) -> EnvelopeDiagnostics:
    """Check the recorded run against the stability certificate.

    The estimate envelope uses the estimate's own initial norm and affine
    offset (valid because the stacked transition matrix is block
    triangular, so the estimate block of its exponential is never larger
    in norm than the whole).  The error envelope reuses the full stacked
    initial norm and forcing bound, since the error block is driven by both
    offsets; it is conservative but sound.
    """
    n = traj.n_total
    hat_norms = np.linalg.norm(traj.observer_states, axis=1)
    tilde_norms = traj.err_norm
    bar_norms = np.hypot(hat_norms, tilde_norms)

    d = traj.diagnostics
    g_col = traj.column("g")
    linear_regime = (
        d.clamped_steps == 0
        and d.fallback_steps == 0
        and float(np.ptp(g_col)) == 0.0
    )
    checkable = (
        report.rho0 > 0.0 and math.isfinite(report.k0) and linear_regime
    )
    if checkable:
        t = traj.t
        m_bar = transient_envelope(
            report.k0, report.rho0, float(bar_norms[0]), report.forcing_bound, t
        )
        m_hat = transient_envelope(
            report.k0, report.rho0, float(hat_norms[0]), report.b_hat_norm, t
        )
        m_tilde = m_bar  # error block is driven by both offsets; see docstring
        viol_bar = int(np.count_nonzero(bar_norms > m_bar))
        viol_hat = int(np.count_nonzero(hat_norms > m_hat))
        viol_tilde = int(np.count_nonzero(tilde_norms > m_tilde))
    else:
        viol_bar = viol_hat = viol_tilde = None

    tol = REL_TOL * max(1.0, n)
    states = traj.data[:, 1:9]
    out_of_bounds = np.any((states < -tol) | (states > n + tol), axis=1)
    bound_violations = int(np.count_nonzero(out_of_bounds))

    err_max = float(tilde_norms.max())
    cap = 2.0 * math.sqrt(2.0) * n
    total_violations = d.plant_violation_steps + d.observer_violation_steps
    if total_violations == 0 and bound_violations == 0:
        err_ok: bool | None = err_max <= cap * (1.0 + 1e-12)
    else:
        err_ok = None

    return EnvelopeDiagnostics(
        envelope_checked=bool(checkable),
        envelope_violations_full=viol_bar,
        envelope_violations_estimate=viol_hat,
        envelope_violations_error=viol_tilde,
        bounds_tol=tol,
        bound_violations=bound_violations,
        error_norm_max=err_max,
        error_norm_cap=cap,
        error_norm_bound_ok=err_ok,
    )
