"""Single-run and sweep execution with CSV output and metadata sidecars.

CSV cells are locale-independent: 12 significant digits, scientific notation
below 1e-3.  Reruns with the same config are byte-identical; oracle columns
use per-point seeds derived deterministically from the base seed.  Sweep
points may execute on a process pool, but rows are always written in sweep
order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import logging
from dataclasses import dataclass

import numpy as np
import yaml

from . import __version__
from .config import OracleSpec, RunConfig, SweepAxis, config_to_dict
from .errors import ConfigError
from .pulses import PulseSchedule
from .runner import MasterEquationRun, run_master_equation
from .spincore import SpinSystemSpec
from .trajectories import TrajectoryConfig, TrajectoryEstimate, derive_seed, run_trajectories

logger = logging.getLogger(__name__)

RATE_CONVENTION = "rate = final transition probability / pulse duration (1/us)"
ORACLE_CONVENTION = (
    "quantum-jump Monte Carlo unraveling; per-trajectory substreams derived "
    "from (seed, trajectory index) via a splitmix64 counter generator"
)

_AXIS_COLUMNS = {
    SweepAxis.HYPERFINE_A1: "a1_mhz",
    SweepAxis.B_FIELD: "b_field_t",
    SweepAxis.STARK_SHIFT: "stark_shift_mhz",
    SweepAxis.TUNNEL_RATE: "tunnel_rate_per_us",
}


def format_number(x: float) -> str:
    """12 significant digits, scientific notation for 0 < |x| < 1e-3."""
    if x == 0:
        return "0"
    if not np.isfinite(x):
        return repr(float(x))
    if abs(x) < 1e-3:
        return f"{x:.11e}"
    return f"{x:.12g}"


def metadata_path(csv_path: str) -> str:
    if csv_path.endswith(".csv"):
        return csv_path[: -len(".csv")] + ".meta.yaml"
    return csv_path + ".meta.yaml"


def _write_metadata(csv_path: str, cfg: RunConfig, extra: dict):
    meta = {
        "tool": "donorspin",
        "version": __version__,
        "config": config_to_dict(cfg),
        "units": {
            "frequency": "MHz (ordinary); Hamiltonian entries internally rad/us",
            "time": "us",
            "b_field": "T",
        },
        "conventions": {
            "rate": RATE_CONVENTION,
            "oracle": ORACLE_CONVENTION,
            "basis": "nuclear configs all-up..all-down (donor 1 most significant) x electron (up, down, SET)",
        },
    }
    meta.update(extra)
    with open(metadata_path(csv_path), "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(meta, fh, sort_keys=True, default_flow_style=False)


def write_timeseries_csv(run: MasterEquationRun, csv_path: str, cfg: RunConfig, extra_meta: dict | None = None):
    ts = run.timeseries
    labels = ts.nuclear_labels
    header = ["time_us"] + [f"P_{s}" for s in labels] + ["P_e_up", "P_e_down", "P_e_set"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(ts.times_us.shape[0]):
            row = [ts.times_us[k], *ts.nuclear_probs[k], *ts.electron_probs[k]]
            writer.writerow([format_number(float(v)) for v in row])
    meta = {"mode": "simulate", "rows": int(ts.times_us.shape[0])}
    if extra_meta:
        meta.update(extra_meta)
    _write_metadata(csv_path, cfg, meta)


def run_single(cfg: RunConfig, csv_path: str, oracle_enabled: bool = False, seed_override: int | None = None):
    """Execute one pulse simulation and write the time-series CSV."""
    run = run_master_equation(cfg.system, cfg.pulse, cfg.initial_state)
    extra: dict = {}
    if oracle_enabled:
        oracle = cfg.oracle or OracleSpec()
        seed = seed_override if seed_override is not None else oracle.seed
        est = run_trajectories(
            TrajectoryConfig(oracle.num_trajectories, seed, cfg.system, cfg.pulse, cfg.initial_state)
        )
        extra["oracle_final"] = {
            "num_trajectories": est.num_trajectories,
            "seed": est.seed,
            "probabilities": {
                lab: float(p) for lab, p in zip(est.nuclear_labels, est.probabilities)
            },
            "standard_errors": {
                lab: float(s) for lab, s in zip(est.nuclear_labels, est.standard_errors)
            },
            "mean_tunnel_in_events": est.mean_tunnel_in_events,
            "mean_tunnel_out_events": est.mean_tunnel_out_events,
        }
    write_timeseries_csv(run, csv_path, cfg, extra)
    return run


def _point_system_pulse(
    cfg: RunConfig, axis: SweepAxis, value: float
) -> tuple[SpinSystemSpec, PulseSchedule]:
    system, pulse = cfg.system, cfg.pulse
    if axis is SweepAxis.HYPERFINE_A1:
        system = system.with_hyperfine((value, *system.hyperfine_mhz[1:]))
    elif axis is SweepAxis.B_FIELD:
        system = system.with_b_field(value)
    elif axis is SweepAxis.STARK_SHIFT:
        total = sum(system.hyperfine_mhz)
        system = system.with_hyperfine(((total + value) / 2.0, (total - value) / 2.0))
    elif axis is SweepAxis.TUNNEL_RATE:
        tau_total = pulse.tau_up_out_us + pulse.tau_in_us
        pulse = pulse.scaled((1.0 / value) / tau_total)
    return system, pulse


@dataclass(frozen=True)
class _PointTask:
    cfg: RunConfig
    axis: SweepAxis
    value: float
    index: int
    oracle: OracleSpec | None  # None disables oracle columns


def _oracle_aggregates(est: TrajectoryEstimate, initial: int, m: int, ff_target: int | None):
    def agg(target: int) -> tuple[float, float]:
        p = float(est.probabilities[target])
        return p, float(np.sqrt(p * (1.0 - p) / est.num_trajectories))

    flips = [agg(initial ^ (1 << (m - 1 - j))) for j in range(m)]
    ff = agg(ff_target) if ff_target is not None else None
    return flips, ff


def _compute_point(task: _PointTask) -> dict:
    from .analytics import backaction_budget_2p, flip_probability, flipflop_probability

    cfg = task.cfg
    system, pulse = _point_system_pulse(cfg, task.axis, task.value)
    run = run_master_equation(system, pulse, cfg.initial_state)
    m = system.num_donors
    duration = pulse.duration_us
    row: dict[str, float] = {_AXIS_COLUMNS[task.axis]: task.value}
    flips = run.flip_probabilities()
    for j in range(m):
        row[f"flip_prob_me_n{j + 1}"] = float(flips[j])
    ff_target = run.flipflop_target()
    ff_me = run.flipflop_probability()
    if ff_me is not None:
        row["flipflop_prob_me"] = ff_me
    for j in range(m):
        row[f"flip_prob_analytic_n{j + 1}"] = flip_probability(system.hyperfine_mhz[j], system)
    row["flip_prob_analytic_total"] = flip_probability(sum(system.hyperfine_mhz), system)
    if m >= 2:
        ff_an = flipflop_probability(system.hyperfine_mhz[0], system.hyperfine_mhz[1], system)
        row["flipflop_prob_exact"] = ff_an.exact
        row["flipflop_prob_approx"] = ff_an.approximate
    for j in range(m):
        row[f"flip_rate_me_n{j + 1}_per_us"] = float(flips[j]) / duration if duration else 0.0
    if ff_me is not None:
        row["flipflop_rate_me_per_us"] = ff_me / duration if duration else 0.0
    if task.axis is SweepAxis.STARK_SHIFT and m == 2:
        # constant along the sweep (A_total is fixed); omitted when no boundary
        # exists so every CSV cell stays a finite number
        boundary = backaction_budget_2p(sum(system.hyperfine_mhz), system)
        if boundary is not None:
            row["budget_boundary_mhz"] = boundary
    if task.oracle is not None:
        seed = derive_seed(task.oracle.seed, task.index)
        est = run_trajectories(
            TrajectoryConfig(task.oracle.num_trajectories, seed, system, pulse, cfg.initial_state)
        )
        oflips, off = _oracle_aggregates(est, run.initial_nuclear, m, ff_target)
        for j in range(m):
            row[f"oracle_flip_prob_n{j + 1}"] = oflips[j][0]
            row[f"oracle_flip_prob_se_n{j + 1}"] = oflips[j][1]
        if off is not None:
            row["oracle_flipflop_prob"] = off[0]
            row["oracle_flipflop_prob_se"] = off[1]
    diag = run.timeseries.diagnostics
    row["max_trace_drift"] = diag.max_trace_drift
    row["min_rho_eigenvalue"] = diag.min_rho_eigenvalue
    return row


def run_sweep(
    cfg: RunConfig,
    csv_path: str,
    oracle_enabled: bool = False,
    seed_override: int | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Execute every sweep point (optionally in parallel) and write the table."""
    if cfg.sweep is None:
        raise ConfigError("sweep", "missing sweep section")
    oracle = None
    if oracle_enabled:
        oracle = cfg.oracle or OracleSpec()
        if seed_override is not None:
            oracle = OracleSpec(oracle.num_trajectories, seed_override)
    values = cfg.sweep.values()
    tasks = [
        _PointTask(cfg=cfg, axis=cfg.sweep.axis, value=v, index=i, oracle=oracle)
        for i, v in enumerate(values)
    ]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_compute_point, tasks))
    else:
        rows = [_compute_point(t) for t in tasks]
    header = list(rows[0].keys())
    for r in rows[1:]:
        if list(r.keys()) != header:
            raise RuntimeError("inconsistent sweep columns across points")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([format_number(float(r[c])) for c in header])
    _write_metadata(
        csv_path,
        cfg,
        {
            "mode": "sweep",
            "axis": cfg.sweep.axis.value,
            "axis_column": _AXIS_COLUMNS[cfg.sweep.axis],
            "rows": len(rows),
            "oracle_enabled": bool(oracle),
        },
    )
    return rows
