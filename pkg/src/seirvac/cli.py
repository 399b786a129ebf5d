"""Command-line front end: run simulations, certify gains, batch scenarios.

Configuration is a plain-text sectioned key=value document (sections
``[plant]``, ``[observer]``, ``[gains]``, ``[tracking]``, ``[sim]``).
Unknown sections or keys are rejected with their line number, every default
that fires is echoed into the run manifest, and all numeric output is
written with full-precision ``repr`` so files round-trip exactly.  Exit
codes: 0 success, 1 configuration problem, 2 numerical abort.  The
environment variable ``SEIR_SEED`` is reserved but unused; the integrator
is deterministic.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .analysis import DecompositionAnchors, StabilityReport, certify
from .control import ControlGains, TrackingGainConfig, gain_feasibility
from .model import EpidemicParams, PopulationState
from .observer import ObserverParams, ObserverState
from .simulate import (
    BASE_RATES,
    CSV_COLUMNS,
    OBSERVER_INIT,
    PLANT_INIT,
    SCENARIO_NAMES,
    ConfigurationError,
    SimulationAborted,
    SimulationConfig,
    Trajectory,
    compute_diagnostics,
    run_scenario,
    scenario_config,
    simulate,
)

_FLOAT, _BOOL, _STR = "float", "bool", "str"

#: section -> key -> (type, default).  The observer shares the plant's
#: population size, so it has no n_total key of its own.
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "plant": {
        "mu": (_FLOAT, BASE_RATES["mu"]),
        "omega": (_FLOAT, BASE_RATES["omega"]),
        "beta": (_FLOAT, BASE_RATES["beta"]),
        "sigma": (_FLOAT, BASE_RATES["sigma"]),
        "gamma": (_FLOAT, BASE_RATES["gamma"]),
        "n_total": (_FLOAT, BASE_RATES["n_total"]),
        "s0": (_FLOAT, PLANT_INIT[0]),
        "e0": (_FLOAT, PLANT_INIT[1]),
        "i0": (_FLOAT, PLANT_INIT[2]),
        "r0": (_FLOAT, PLANT_INIT[3]),
    },
    "observer": {
        "mu": (_FLOAT, BASE_RATES["mu"]),
        "omega": (_FLOAT, BASE_RATES["omega"]),
        "beta": (_FLOAT, BASE_RATES["beta"]),
        "sigma": (_FLOAT, BASE_RATES["sigma"]),
        "gamma": (_FLOAT, BASE_RATES["gamma"]),
        "s0": (_FLOAT, OBSERVER_INIT[0]),
        "e0": (_FLOAT, OBSERVER_INIT[1]),
        "i0": (_FLOAT, OBSERVER_INIT[2]),
        "r0": (_FLOAT, OBSERVER_INIT[3]),
    },
    "gains": {
        "k1": (_FLOAT, 0.0),
        "k2": (_FLOAT, 0.0),
        "k3": (_FLOAT, 0.0),
        "k4": (_FLOAT, 0.0),
        "k5": (_FLOAT, 0.0),
        "g": (_FLOAT, 0.0),
    },
    "tracking": {
        "g_max": (_FLOAT, 0.1),
        "horizon": (_FLOAT, 100.0),
        "g_init": (_FLOAT, 0.0),
    },
    "sim": {
        "law": (_STR, "none"),
        "v_const": (_FLOAT, 0.0),
        "duration": (_FLOAT, 1000.0),
        "dt": (_FLOAT, 0.01),
        "stride": (_FLOAT, 1.0),
        "clamp_v": (_BOOL, True),
        "per_stage_law": (_BOOL, False),
        "anchor_i": (_FLOAT, 0.0),
        "anchor_i_hat": (_FLOAT, 0.0),
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ParsedConfig:
    config: SimulationConfig
    resolved: dict[str, dict[str, object]]
    defaults_applied: list[str]


def _coerce(kind: str, raw: str):
    if kind == _FLOAT:
        return float(raw)
    if kind == _BOOL:
        low = raw.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw.strip()


def load_config(text: str) -> ParsedConfig:
    """Parse a configuration document, applying and recording defaults.

    Raises ConfigurationError listing every problem, each prefixed with its
    line number where one applies.
    """
    values: dict[str, dict[str, object]] = {s: {} for s in SCHEMA}
    problems: list[str] = []
    section: str | None = None

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in SCHEMA:
                problems.append(f"line {lineno}: unknown section [{name}]")
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        if section is None:
            problems.append(f"line {lineno}: key outside any known section")
            continue
        key, _, raw_value = line.partition("=")
        key = key.strip().lower()
        if key not in SCHEMA[section]:
            problems.append(
                f"line {lineno}: unknown key {key!r} in section [{section}]"
            )
            continue
        if key in values[section]:
            problems.append(
                f"line {lineno}: duplicate key {key!r} in section [{section}]"
            )
            continue
        kind, _ = SCHEMA[section][key]
        try:
            values[section][key] = _coerce(kind, raw_value.strip())
        except ValueError:
            problems.append(
                f"line {lineno}: invalid {kind} value for {key!r}: "
                f"{raw_value.strip()!r}"
            )

    if problems:
        raise ConfigurationError("\n".join(problems))

    defaults_applied: list[str] = []
    resolved: dict[str, dict[str, object]] = {}
    for sec, keys in SCHEMA.items():
        resolved[sec] = {}
        for key, (_, default) in keys.items():
            if key in values[sec]:
                resolved[sec][key] = values[sec][key]
            else:
                resolved[sec][key] = default
                defaults_applied.append(f"{sec}.{key} = {default!r} (default)")

    cfg = _build_config(resolved)
    cfg_problems = cfg.problems()
    if cfg_problems:
        raise ConfigurationError("; ".join(cfg_problems))
    return ParsedConfig(
        config=cfg, resolved=resolved, defaults_applied=defaults_applied
    )


def _build_config(r: dict[str, dict[str, object]]) -> SimulationConfig:
    pl, ob, gn, tr, sm = (
        r["plant"], r["observer"], r["gains"], r["tracking"], r["sim"]
    )
    plant = EpidemicParams(
        mu=pl["mu"], omega=pl["omega"], beta=pl["beta"],
        sigma=pl["sigma"], gamma=pl["gamma"], n_total=pl["n_total"],
    )
    observer = ObserverParams(
        mu_hat=ob["mu"], omega_hat=ob["omega"], beta_hat=ob["beta"],
        sigma_hat=ob["sigma"], gamma_hat=ob["gamma"], n_total=pl["n_total"],
    )
    law = str(sm["law"]).strip().lower()
    tracking = None
    if law == "tracking":
        tracking = TrackingGainConfig(
            g_max=tr["g_max"], horizon_t=tr["horizon"], g_init=tr["g_init"]
        )
    return SimulationConfig(
        plant=plant,
        observer=observer,
        plant_init=PopulationState(pl["s0"], pl["e0"], pl["i0"], pl["r0"]),
        observer_init=ObserverState(ob["s0"], ob["e0"], ob["i0"], ob["r0"]),
        law=law,
        gains=ControlGains(
            k1=gn["k1"], k2=gn["k2"], k3=gn["k3"],
            k4=gn["k4"], k5=gn["k5"], g=gn["g"],
        ),
        v_const=sm["v_const"],
        tracking=tracking,
        anchors=DecompositionAnchors(
            i_r=sm["anchor_i"], i_hat_r=sm["anchor_i_hat"]
        ),
        duration=sm["duration"],
        dt=sm["dt"],
        stride=sm["stride"],
        clamp_v=sm["clamp_v"],
        per_stage_law=sm["per_stage_law"],
    )


def parse_config(text: str) -> SimulationConfig:
    """Parse and validate a configuration document (defaults applied)."""
    return load_config(text).config


def config_echo(cfg: SimulationConfig) -> dict[str, dict[str, object]]:
    """Schema-shaped dump of a resolved configuration (manifest payload)."""
    p, q, gn = cfg.plant, cfg.observer, cfg.gains
    tr = cfg.tracking
    return {
        "plant": {
            "mu": p.mu, "omega": p.omega, "beta": p.beta,
            "sigma": p.sigma, "gamma": p.gamma, "n_total": p.n_total,
            "s0": cfg.plant_init.s, "e0": cfg.plant_init.e,
            "i0": cfg.plant_init.i, "r0": cfg.plant_init.r,
        },
        "observer": {
            "mu": q.mu_hat, "omega": q.omega_hat, "beta": q.beta_hat,
            "sigma": q.sigma_hat, "gamma": q.gamma_hat,
            "s0": cfg.observer_init.s, "e0": cfg.observer_init.e,
            "i0": cfg.observer_init.i, "r0": cfg.observer_init.r,
        },
        "gains": {
            "k1": gn.k1, "k2": gn.k2, "k3": gn.k3,
            "k4": gn.k4, "k5": gn.k5, "g": gn.g,
        },
        "tracking": {
            "g_max": tr.g_max if tr else SCHEMA["tracking"]["g_max"][1],
            "horizon": tr.horizon_t if tr else SCHEMA["tracking"]["horizon"][1],
            "g_init": tr.g_init if tr else SCHEMA["tracking"]["g_init"][1],
        },
        "sim": {
            "law": cfg.law, "v_const": cfg.v_const,
            "duration": cfg.duration, "dt": cfg.dt, "stride": cfg.stride,
            "clamp_v": cfg.clamp_v, "per_stage_law": cfg.per_stage_law,
            "anchor_i": cfg.anchors.i_r, "anchor_i_hat": cfg.anchors.i_hat_r,
        },
    }


@dataclass(frozen=True)
class RunManifest:
    """What a run produced: inputs, artifacts, tool version, wall time."""

    config_path: str
    config: dict[str, dict[str, object]]
    defaults_applied: list[str]
    out_dir: str
    artifacts: list[str]
    version: str
    runtime_seconds: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"


def _dataclass_lines(obj) -> str:
    return "\n".join(
        f"{f.name} = {getattr(obj, f.name)}" for f in fields(obj)
    ) + "\n"


def _certify_for(cfg: SimulationConfig) -> StabilityReport:
    n = cfg.plant.n_total
    return certify(
        cfg.plant, cfg.observer, cfg.gains, cfg.anchors,
        i_range=(0.0, n), i_hat_range=(0.0, n),
    )


def _write_dat(traj: Trajectory, dest: Path) -> None:
    lines = ["# " + " ".join(CSV_COLUMNS)]
    for row in traj.data:
        lines.append(" ".join(repr(float(v)) for v in row))
    dest.write_text("\n".join(lines) + "\n")


def _write_run(
    out: Path,
    cfg: SimulationConfig,
    traj: Trajectory,
    report: StabilityReport,
    config_path: str,
    defaults_applied: list[str],
    t0: float,
    want_dat: bool,
) -> None:
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv")
    artifacts = ["trajectory.csv", "report.txt", "manifest.json"]
    if want_dat:
        _write_dat(traj, out / "trajectory.dat")
        artifacts.insert(1, "trajectory.dat")

    env = compute_diagnostics(traj, report)
    report_text = (
        "# stability certificate\n" + report.to_text()
        + "# run diagnostics\n" + _dataclass_lines(traj.diagnostics)
        + "# trajectory vs certificate\n" + _dataclass_lines(env)
    )
    (out / "report.txt").write_text(report_text)

    manifest = RunManifest(
        config_path=config_path,
        config=config_echo(cfg),
        defaults_applied=defaults_applied,
        out_dir=str(out),
        artifacts=artifacts,
        version=__version__,
        runtime_seconds=time.perf_counter() - t0,
    )
    (out / "manifest.json").write_text(manifest.to_json())


def cmd_simulate(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    try:
        parsed = load_config(text)
        traj = simulate(parsed.config)
    except ConfigurationError as exc:
        print(f"error: invalid configuration:\n{exc}", file=sys.stderr)
        return 1
    except SimulationAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = _certify_for(parsed.config)
    out = Path(args.out)
    _write_run(
        out, parsed.config, traj, report, str(args.config),
        parsed.defaults_applied, t0, args.dat,
    )
    print(f"wrote {out / 'trajectory.csv'} ({traj.data.shape[0]} rows)")
    return 0


def cmd_analyze(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        parsed = load_config(text)
    except ConfigurationError as exc:
        print(f"error: invalid configuration:\n{exc}", file=sys.stderr)
        return 1
    cfg = parsed.config
    report = _certify_for(cfg)
    n = cfg.plant.n_total
    feas = gain_feasibility(
        cfg.observer, cfg.gains, cfg.anchors,
        i_hat_range=(0.0, n), i_range=(0.0, n), p=cfg.plant,
    )
    sys.stdout.write("# stability certificate\n" + report.to_text())
    sys.stdout.write("# gain feasibility\n" + _dataclass_lines(feas))
    return 0


def cmd_scenarios(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for name in SCENARIO_NAMES:
        t0 = time.perf_counter()
        try:
            traj, report = run_scenario(name)
        except SimulationAborted as exc:
            print(f"error: scenario {name}: {exc}", file=sys.stderr)
            return 2
        cfg = scenario_config(name)
        _write_run(
            out / name, cfg, traj, report, f"<preset scenario {name}>",
            [], t0, args.dat,
        )
        d = traj.diagnostics
        summary_rows.append(
            (
                name,
                repr(d.final_error_norm),
                repr(d.max_drift_plant),
                repr(d.max_drift_observer),
                repr(d.min_component),
                repr(d.plant_violation_steps),
                repr(d.observer_violation_steps),
                repr(d.clamped_steps),
                repr(d.fallback_steps),
            )
        )
        print(f"scenario {name}: final err_norm = {d.final_error_norm}")

    header = (
        "scenario,final_err_norm,max_drift_plant,max_drift_observer,"
        "min_component,plant_violation_steps,observer_violation_steps,"
        "clamped_steps,fallback_steps"
    )
    lines = [header] + [",".join(row) for row in summary_rows]
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'summary.csv'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seirvac",
        description=(
            "Simulate and certify observer-based vaccination control of a "
            "true-mass-action SEIR epidemic."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one closed-loop simulation")
    p_sim.add_argument("--config", required=True, help="configuration file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument(
        "--dat", action="store_true",
        help="also write a gnuplot-compatible trajectory.dat",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_ana = sub.add_parser(
        "analyze", help="print the stability certificate without simulating"
    )
    p_ana.add_argument("--config", required=True, help="configuration file")
    p_ana.set_defaults(func=cmd_analyze)

    p_scn = sub.add_parser("scenarios", help="run the three preset scenarios")
    p_scn.add_argument("--out", required=True, help="output directory")
    p_scn.add_argument(
        "--dat", action="store_true",
        help="also write gnuplot-compatible .dat aliases",
    )
    p_scn.set_defaults(func=cmd_scenarios)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
