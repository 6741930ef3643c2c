"""Quantum-jump Monte Carlo unraveling used as a cross-check oracle.

Each trajectory evolves a pure state under the non-Hermitian drift
exp((-iH - 1/2 sum L^dag L) t); a jump fires when the squared norm decays
through a uniform threshold, the channel is drawn proportionally to
|L_mu psi|^2, and the final nuclear configuration is sampled projectively.
The ensemble mean of this unraveling reproduces the master equation, which
is what the equivalence tests exercise.

Randomness is counter-based: every uniform is a pure function of
(seed, trajectory index, draw index) through the splitmix64 output mix, so
per-trajectory substreams are deterministic, independent of chunking or
worker scheduling, and merge by plain integer-count addition.

Jump times are refined inside a drift step by a dyadic norm-bisection walk
to dt/1024 (< 1e-3 dt).  dt = min(tau_min/50, duration/1000).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import initial_state_vector, matrix_exponential
from .errors import NumericalError
from .pulses import (
    CHANNEL_TUNNEL_IN,
    CHANNEL_TUNNEL_OUT_DOWN,
    CHANNEL_TUNNEL_OUT_UP,
    LindbladSet,
    PulseSchedule,
    build_lindblads,
)
from .spincore import (
    BasisLayout,
    OperatorMatrix,
    SpinSystemSpec,
    assemble_combined,
    build_donor_hamiltonian,
    build_nuclear_zeeman,
    eigendecompose,
)

_REFINE_LEVELS = 10  # dt / 2^10 < 1e-3 dt
_CHUNK = 1 << 16
_NORM_FLOOR = 1e-280

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 output mix (bijective avalanche on uint64)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, trajectory: np.ndarray, draw: np.ndarray) -> np.ndarray:
    """Uniforms in (0, 1) addressed by (seed, trajectory index, draw index).

    Stream seeds come from the splitmix64 sequence indexed by trajectory and
    each draw is the mix of the stream counter, so substreams never overlap.
    """
    with np.errstate(over="ignore"):
        t = np.asarray(trajectory, dtype=np.uint64)
        d = np.asarray(draw, dtype=np.uint64)
        stream = _mix64(np.uint64(seed) + (t + np.uint64(1)) * _GOLDEN)
        bits = _mix64(stream + (d + np.uint64(1)) * _GOLDEN)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed for independent runs (sweep points)."""
    with np.errstate(over="ignore"):
        return int(_mix64(np.uint64(seed) + np.uint64(index + 1) * _GOLDEN))


@dataclass(frozen=True)
class TrajectoryConfig:
    """Monte Carlo run description.

    initial_label uses the same grammar as the master-equation runner
    ('e<k>', product configs like 'UDu', or '~UDu' for the nearest
    eigenstate).  record_first_jumps stores each trajectory's first jump
    time for waiting-time statistics.
    """

    num_trajectories: int
    seed: int
    system: SpinSystemSpec
    pulse: PulseSchedule
    initial_label: str = ""
    record_first_jumps: bool = False

    def __post_init__(self):
        if self.num_trajectories < 1:
            raise ValueError("num_trajectories must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if not self.initial_label:
            label = "~" + "U" * self.system.num_donors + "u"
            object.__setattr__(self, "initial_label", label)


@dataclass(frozen=True)
class TrajectoryEstimate:
    """Empirical nuclear-config frequencies with binomial standard errors."""

    probabilities: np.ndarray
    standard_errors: np.ndarray
    counts: np.ndarray
    num_trajectories: int
    seed: int
    nuclear_labels: tuple[str, ...]
    mean_tunnel_in_events: float
    mean_tunnel_out_events: float
    first_jump_times_us: np.ndarray | None = None

    def probability(self, label: str) -> float:
        return float(self.probabilities[self.nuclear_labels.index(label)])


_KIND_CODES = {CHANNEL_TUNNEL_OUT_UP: 0, CHANNEL_TUNNEL_OUT_DOWN: 1, CHANNEL_TUNNEL_IN: 2}


class _Sampler:
    """Per-chunk vectorized state: wavefunctions, thresholds, draw counters."""

    def __init__(self, runner: "_Runner", traj_ids: np.ndarray):
        n = traj_ids.size
        self.runner = runner
        self.traj = traj_ids
        self.psi = np.tile(runner.psi0, (n, 1))
        self._buf = np.empty_like(self.psi)
        self.draws = np.zeros(n, dtype=np.uint64)
        self.thresholds = self._draw(np.arange(n))
        self.out_events = np.zeros(n, dtype=np.int64)
        self.in_events = np.zeros(n, dtype=np.int64)
        self.first_jump = np.full(n, np.nan)

    def _draw(self, rows: np.ndarray) -> np.ndarray:
        u = counter_uniforms(self.runner.seed, self.traj[rows], self.draws[rows])
        self.draws[rows] += np.uint64(1)
        return u

    @staticmethod
    def norms2(psi: np.ndarray) -> np.ndarray:
        # view complex rows as interleaved floats: avoids the conj() copy
        v = np.ascontiguousarray(psi).view(np.float64)
        return np.einsum("ci,ci->c", v, v)

    def step(self, k: int):
        """Advance all trajectories by one drift step, resolving jumps."""
        r = self.runner
        trial = np.matmul(self.psi, r.u_step_t, out=self._buf)
        v = trial.view(np.float64)
        n2 = np.einsum("ci,ci->c", v, v)
        crossed = n2 < self.thresholds
        if crossed.any():
            rows = np.nonzero(crossed)[0]
            resolved = self._resolve_step(self.psi[rows], rows, k)
            trial[rows] = resolved
        self.psi, self._buf = self._buf, self.psi

    def _resolve_step(self, psi: np.ndarray, rows: np.ndarray, k: int) -> np.ndarray:
        """Walk the crossing trajectories through one step with jump handling.

        offset/remainder are in units of dt/2^LEVELS; jumps are located by a
        dyadic bisection of the norm decay, then the remainder of the step is
        applied chunk by chunk so that a second crossing in the same step is
        refined the same way (third crossings within one chunk fall back to
        chunk resolution; at the simulated rates that is ~1e-6 of steps).
        """
        r = self.runner
        units = 1 << _REFINE_LEVELS
        psi, offset = self._dyadic_walk(psi, rows, 1)
        psi = self._jump(psi, rows, k, offset)
        remainder = units - offset
        for level in range(1, _REFINE_LEVELS + 1):
            bit = 1 << (_REFINE_LEVELS - level)
            mask = (remainder & bit) != 0
            if not mask.any():
                continue
            idx = np.nonzero(mask)[0]
            trial = psi[idx] @ r.u_half_t[level]
            n2 = self.norms2(trial)
            sub_crossed = n2 < self.thresholds[rows[idx]]
            ok = idx[~sub_crossed]
            psi[ok] = trial[~sub_crossed]
            if sub_crossed.any():
                bad = idx[sub_crossed]
                sub_psi, sub_off = self._dyadic_walk(psi[bad], rows[bad], level + 1)
                # position within the step = units already applied + walk offset
                sub_psi = self._jump(sub_psi, rows[bad], k, (units - remainder[bad]) + sub_off)
                # finish this chunk without further detection (~1e-6 of steps)
                rest = bit - sub_off
                for l2 in range(level + 1, _REFINE_LEVELS + 1):
                    b2 = 1 << (_REFINE_LEVELS - l2)
                    m2 = (rest & b2) != 0
                    if m2.any():
                        sub_psi[m2] = sub_psi[m2] @ r.u_half_t[l2]
                psi[bad] = sub_psi
            remainder[idx] -= bit
        return psi

    def _dyadic_walk(
        self, psi: np.ndarray, rows: np.ndarray, start_level: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Advance states toward the crossing, never past it.

        Returns states just before the jump and the advance in dt/2^LEVELS
        units (resolution 1 unit).
        """
        r = self.runner
        offset = np.zeros(psi.shape[0], dtype=np.int64)
        thresholds = self.thresholds[rows]
        for level in range(start_level, _REFINE_LEVELS + 1):
            half = 1 << (_REFINE_LEVELS - level)
            trial = psi @ r.u_half_t[level]
            ok = self.norms2(trial) >= thresholds
            psi = np.where(ok[:, None], trial, psi)
            offset += np.where(ok, half, 0)
        return psi, offset

    def _jump(self, psi: np.ndarray, rows: np.ndarray, k: int, offset: np.ndarray) -> np.ndarray:
        """Apply one quantum jump to each row: pick channel, collapse, rearm."""
        r = self.runner
        n2 = self.norms2(psi)
        if (n2 < _NORM_FLOOR).any():
            raise NumericalError("trajectory norm underflow before jump")
        lpsi = np.einsum("oij,cj->coi", r.ops, psi)
        weights = np.abs(lpsi) ** 2
        weights = weights.sum(axis=2)
        totals = weights.sum(axis=1)
        if (totals <= 0).any():
            raise NumericalError("no open jump channel at a norm crossing")
        u = self._draw(rows) * totals
        cum = np.cumsum(weights, axis=1)
        chan = (cum < u[:, None]).sum(axis=1)
        chan = np.minimum(chan, r.ops.shape[0] - 1)
        picked = lpsi[np.arange(psi.shape[0]), chan]
        norms = np.sqrt(self.norms2(picked))
        psi = picked / norms[:, None]
        out_mask = r.kind_codes[chan] != 2
        self.out_events[rows] += out_mask
        self.in_events[rows] += ~out_mask
        if r.record_first_jumps:
            t_jump = (k + offset / (1 << _REFINE_LEVELS)) * r.dt
            fresh = np.isnan(self.first_jump[rows])
            self.first_jump[rows[fresh]] = t_jump[fresh]
        self.thresholds[rows] = self._draw(rows)
        return psi

    def measure(self) -> np.ndarray:
        """Projective nuclear-configuration measurement of each trajectory."""
        r = self.runner
        nuc_dim = r.layout.nuclear_dim
        probs = np.abs(self.psi.reshape(self.psi.shape[0], nuc_dim, r.layout.electron_dim)) ** 2
        probs = probs.sum(axis=2)
        totals = probs.sum(axis=1)
        if (totals < _NORM_FLOOR).any():
            raise NumericalError("trajectory norm underflow at measurement")
        cum = np.cumsum(probs, axis=1)
        u = self._draw(np.arange(self.psi.shape[0])) * totals
        configs = (cum < u[:, None]).sum(axis=1)
        return np.minimum(configs, nuc_dim - 1)


@dataclass
class _Runner:
    seed: int
    psi0: np.ndarray
    ops: np.ndarray
    kind_codes: np.ndarray
    layout: BasisLayout
    dt: float
    n_steps: int
    u_step_t: np.ndarray
    u_half_t: dict[int, np.ndarray]
    record_first_jumps: bool = False


def _make_runner(
    h: OperatorMatrix,
    jumps: LindbladSet,
    psi0: np.ndarray,
    sched: PulseSchedule,
    seed: int,
    record_first_jumps: bool,
) -> _Runner:
    dim = h.dim
    mats = jumps.matrices()
    drift = -1j * h.entries.astype(complex)
    for lm in mats:
        drift -= 0.5 * (lm.conj().T @ lm)
    taus = [sched.tau_up_out_us, sched.tau_in_us]
    if sched.tau_down_out_us is not None and math.isfinite(sched.tau_down_out_us):
        taus.append(sched.tau_down_out_us)
    dt_cap = min(min(taus) / 50.0, sched.duration_us / 1000.0) if sched.duration_us > 0 else 0.0
    n_steps = int(math.ceil(sched.duration_us / dt_cap)) if dt_cap > 0 else 0
    dt = sched.duration_us / n_steps if n_steps else 0.0
    u_step = matrix_exponential(drift * dt) if n_steps else np.eye(dim, dtype=complex)
    u_half = {
        level: np.ascontiguousarray(matrix_exponential(drift * (dt / (1 << level))).T)
        for level in range(1, _REFINE_LEVELS + 1)
    }
    ops = np.stack(mats) if mats else np.zeros((0, dim, dim), dtype=complex)
    codes = np.array([_KIND_CODES[c.kind] for c in jumps.channels], dtype=np.int8)
    return _Runner(
        seed=seed,
        psi0=psi0.astype(complex),
        ops=ops,
        kind_codes=codes,
        layout=h.layout,
        dt=dt,
        n_steps=n_steps,
        u_step_t=np.ascontiguousarray(u_step.T),
        u_half_t=u_half,
        record_first_jumps=record_first_jumps,
    )


def run_trajectories_from_operators(
    h: OperatorMatrix,
    jumps: LindbladSet,
    psi0: np.ndarray,
    sched: PulseSchedule,
    num_trajectories: int,
    seed: int,
    record_first_jumps: bool = False,
) -> TrajectoryEstimate:
    """Monte Carlo estimate for explicit (H, jump set, initial state)."""
    runner = _make_runner(h, jumps, psi0, sched, seed, record_first_jumps)
    nuc_dim = h.layout.nuclear_dim
    counts = np.zeros(nuc_dim, dtype=np.int64)
    out_events = 0
    in_events = 0
    first_jumps: list[np.ndarray] = []
    has_jumps = runner.ops.shape[0] > 0
    for start in range(0, num_trajectories, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, num_trajectories), dtype=np.uint64)
        sampler = _Sampler(runner, ids)
        if has_jumps:
            for k in range(runner.n_steps):
                sampler.step(k)
        else:
            for _ in range(runner.n_steps):
                sampler.psi = sampler.psi @ runner.u_step_t
        configs = sampler.measure()
        counts += np.bincount(configs, minlength=nuc_dim)
        out_events += int(sampler.out_events.sum())
        in_events += int(sampler.in_events.sum())
        if record_first_jumps:
            first_jumps.append(sampler.first_jump[~np.isnan(sampler.first_jump)])
    n = num_trajectories
    probs = counts / n
    se = np.sqrt(probs * (1.0 - probs) / n)
    layout = h.layout
    return TrajectoryEstimate(
        probabilities=probs,
        standard_errors=se,
        counts=counts,
        num_trajectories=n,
        seed=seed,
        nuclear_labels=tuple(layout.nuclear_labels()),
        mean_tunnel_in_events=in_events / n,
        mean_tunnel_out_events=out_events / n,
        first_jump_times_us=np.concatenate(first_jumps) if first_jumps else None,
    )


def run_trajectories(cfg: TrajectoryConfig) -> TrajectoryEstimate:
    """Monte Carlo estimate of the final nuclear-config probabilities for a pulse."""
    hd = build_donor_hamiltonian(cfg.system)
    eig = eigendecompose(hd)
    h = assemble_combined(hd, build_nuclear_zeeman(cfg.system))
    jumps = build_lindblads(eig, cfg.pulse)
    psi0 = initial_state_vector(cfg.initial_label, eig)
    return run_trajectories_from_operators(
        h,
        jumps,
        psi0,
        cfg.pulse,
        cfg.num_trajectories,
        cfg.seed,
        record_first_jumps=cfg.record_first_jumps,
    )
