"""YAML run-configuration schema: strict parsing, validation, canonical form.

Unknown keys are errors and every message carries the dotted field path;
silent typos in physics parameters are the failure mode this guards against.
The canonical form (defaults resolved, keys sorted) round-trips exactly
through serialize -> parse -> serialize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import yaml

from .errors import ConfigError
from .pulses import PulseKind, PulseSchedule
from .spincore import GAMMA_E_MHZ_PER_T, GAMMA_N_MHZ_PER_T, SpinSystemSpec


class SweepAxis(str, Enum):
    HYPERFINE_A1 = "hyperfine_a1"
    B_FIELD = "b_field"
    STARK_SHIFT = "stark_shift"
    TUNNEL_RATE = "tunnel_rate"


@dataclass(frozen=True)
class SweepSpec:
    axis: SweepAxis
    start: float
    stop: float
    num_points: int
    spacing: str = "linear"  # linear | log

    def values(self) -> list[float]:
        import numpy as np

        if self.spacing == "log":
            return [float(v) for v in np.geomspace(self.start, self.stop, self.num_points)]
        return [float(v) for v in np.linspace(self.start, self.stop, self.num_points)]


@dataclass(frozen=True)
class OracleSpec:
    num_trajectories: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    system: SpinSystemSpec
    pulse: PulseSchedule
    initial_state: str
    sweep: SweepSpec | None = None
    oracle: OracleSpec | None = None
    output_csv: str | None = None


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(path, "expected a mapping")
    return node


def _check_keys(node: dict, allowed: set[str], path: str):
    unknown = sorted(set(node) - allowed)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")


def _number(node: dict, key: str, path: str, *, required: bool = True, default=None):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
    return v


def _integer(node: dict, key: str, path: str, *, required: bool = True, default=None):
    v = _number(node, key, path, required=required, default=default)
    if v is default and not required and key not in node:
        return default
    if not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", "expected an integer")
    return v


def _string(node: dict, key: str, path: str, *, required: bool = True, default=None):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    v = node[key]
    if not isinstance(v, str):
        raise ConfigError(f"{path}.{key}", f"expected a string, got {type(v).__name__}")
    return v


def _parse_system(node, path="system") -> SpinSystemSpec:
    node = _require_mapping(node, path)
    _check_keys(
        node,
        {"num_donors", "hyperfine_mhz", "b_field_t", "gamma_e_mhz_per_t", "gamma_n_mhz_per_t"},
        path,
    )
    m = _integer(node, "num_donors", path)
    hf = node.get("hyperfine_mhz")
    if not isinstance(hf, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in hf):
        raise ConfigError(f"{path}.hyperfine_mhz", "expected a list of numbers")
    b = _number(node, "b_field_t", path)
    ge = _number(node, "gamma_e_mhz_per_t", path, required=False, default=GAMMA_E_MHZ_PER_T)
    gn = _number(node, "gamma_n_mhz_per_t", path, required=False, default=GAMMA_N_MHZ_PER_T)
    return SpinSystemSpec(m, tuple(float(a) for a in hf), float(b), float(ge), float(gn))


def _parse_pulse(node, path="pulse") -> PulseSchedule:
    node = _require_mapping(node, path)
    _check_keys(
        node,
        {"kind", "tau_up_out_us", "tau_in_us", "tau_down_out_us", "duration_us", "sample_points"},
        path,
    )
    kind_s = _string(node, "kind", path)
    try:
        kind = PulseKind(kind_s)
    except ValueError:
        raise ConfigError(
            f"{path}.kind", f"must be one of {[k.value for k in PulseKind]}, got {kind_s!r}"
        ) from None
    tau_down = _number(node, "tau_down_out_us", path, required=False)
    return PulseSchedule(
        kind=kind,
        tau_up_out_us=float(_number(node, "tau_up_out_us", path)),
        tau_in_us=float(_number(node, "tau_in_us", path)),
        duration_us=float(_number(node, "duration_us", path)),
        sample_points=_integer(node, "sample_points", path, required=False, default=1000),
        tau_down_out_us=None if tau_down is None else float(tau_down),
    )


def _parse_sweep(node, path="sweep") -> SweepSpec:
    node = _require_mapping(node, path)
    _check_keys(node, {"axis", "start", "stop", "num_points", "spacing"}, path)
    axis_s = _string(node, "axis", path)
    try:
        axis = SweepAxis(axis_s)
    except ValueError:
        raise ConfigError(
            f"{path}.axis", f"must be one of {[a.value for a in SweepAxis]}, got {axis_s!r}"
        ) from None
    start = float(_number(node, "start", path))
    stop = float(_number(node, "stop", path))
    num_points = _integer(node, "num_points", path)
    spacing = _string(node, "spacing", path, required=False, default="linear")
    if spacing not in ("linear", "log"):
        raise ConfigError(f"{path}.spacing", f"must be 'linear' or 'log', got {spacing!r}")
    if not start < stop:
        raise ConfigError(f"{path}.start", "start must be < stop")
    if num_points < 2:
        raise ConfigError(f"{path}.num_points", "must be >= 2")
    if spacing == "log" and start <= 0:
        raise ConfigError(f"{path}.start", "log spacing requires start > 0")
    return SweepSpec(axis=axis, start=start, stop=stop, num_points=num_points, spacing=spacing)


def _parse_oracle(node, path="oracle") -> OracleSpec:
    node = _require_mapping(node, path)
    _check_keys(node, {"num_trajectories", "seed"}, path)
    n = _integer(node, "num_trajectories", path, required=False, default=100_000)
    seed = _integer(node, "seed", path, required=False, default=0)
    if n < 1:
        raise ConfigError(f"{path}.num_trajectories", "must be >= 1")
    if not 0 <= seed < 2**64:
        raise ConfigError(f"{path}.seed", "must fit in an unsigned 64-bit integer")
    return OracleSpec(num_trajectories=n, seed=seed)


def parse_config(data: dict) -> RunConfig:
    data = _require_mapping(data, "<root>")
    _check_keys(data, {"system", "pulse", "initial_state", "sweep", "oracle", "output"}, "")
    for key in ("system", "pulse", "initial_state"):
        if key not in data:
            raise ConfigError(key, "missing required key")
    system = _parse_system(data["system"])
    pulse = _parse_pulse(data["pulse"])
    label = data["initial_state"]
    if not isinstance(label, str):
        raise ConfigError("initial_state", "expected a string state label")
    from .engine import parse_state_label

    try:
        parse_state_label(label, system.num_donors)
    except ValueError as exc:
        raise ConfigError("initial_state", str(exc)) from None
    sweep = _parse_sweep(data["sweep"]) if "sweep" in data else None
    oracle = _parse_oracle(data["oracle"]) if "oracle" in data else None
    output_csv = None
    if "output" in data:
        out = _require_mapping(data["output"], "output")
        _check_keys(out, {"csv"}, "output")
        output_csv = _string(out, "csv", "output", required=False)
    if sweep is not None:
        _validate_sweep_against(system, pulse, sweep)
    return RunConfig(
        system=system,
        pulse=pulse,
        initial_state=label,
        sweep=sweep,
        oracle=oracle,
        output_csv=output_csv,
    )


def _validate_sweep_against(system: SpinSystemSpec, pulse: PulseSchedule, sweep: SweepSpec):
    if sweep.axis is SweepAxis.STARK_SHIFT:
        if system.num_donors != 2:
            raise ConfigError("sweep.axis", "stark_shift sweeps require num_donors == 2")
        total = sum(system.hyperfine_mhz)
        if sweep.stop >= total:
            raise ConfigError("sweep.stop", f"Stark shift must stay below A_total = {total} MHz")
    if sweep.axis is SweepAxis.TUNNEL_RATE and sweep.start <= 0:
        raise ConfigError("sweep.start", "tunnel rates must be > 0")
    if sweep.axis is SweepAxis.B_FIELD and sweep.start <= 0:
        raise ConfigError("sweep.start", "magnetic fields must be > 0")
    if sweep.axis is SweepAxis.HYPERFINE_A1 and sweep.start < 0:
        raise ConfigError("sweep.start", "hyperfine constants must be >= 0")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    if data is None:
        raise ConfigError("<file>", "empty configuration file")
    return parse_config(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical (defaults-resolved) plain-dict form of a config."""
    out: dict = {
        "system": {
            "num_donors": cfg.system.num_donors,
            "hyperfine_mhz": list(cfg.system.hyperfine_mhz),
            "b_field_t": cfg.system.b_field_t,
            "gamma_e_mhz_per_t": cfg.system.gamma_e_mhz_per_t,
            "gamma_n_mhz_per_t": cfg.system.gamma_n_mhz_per_t,
        },
        "pulse": {
            "kind": cfg.pulse.kind.value,
            "tau_up_out_us": cfg.pulse.tau_up_out_us,
            "tau_in_us": cfg.pulse.tau_in_us,
            "duration_us": cfg.pulse.duration_us,
            "sample_points": cfg.pulse.sample_points,
        },
        "initial_state": cfg.initial_state,
    }
    if cfg.pulse.tau_down_out_us is not None and math.isfinite(cfg.pulse.tau_down_out_us):
        out["pulse"]["tau_down_out_us"] = cfg.pulse.tau_down_out_us
    if cfg.sweep is not None:
        out["sweep"] = {
            "axis": cfg.sweep.axis.value,
            "start": cfg.sweep.start,
            "stop": cfg.sweep.stop,
            "num_points": cfg.sweep.num_points,
            "spacing": cfg.sweep.spacing,
        }
    if cfg.oracle is not None:
        out["oracle"] = {
            "num_trajectories": cfg.oracle.num_trajectories,
            "seed": cfg.oracle.seed,
        }
    if cfg.output_csv is not None:
        out["output"] = {"csv": cfg.output_csv}
    return out


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True, default_flow_style=False)
