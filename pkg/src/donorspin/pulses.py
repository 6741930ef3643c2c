"""Pulse descriptions and their Lindblad jump operators.

A readout pulse lets electron-up-like eigenstates tunnel to the SET and loads
a spin-down electron back; a resonant-tunneling pulse additionally lets the
down-like eigenstates tunnel out.  Tunneling is instantaneous, so every jump
operator preserves the nuclear configuration content of its source state: a
source eigenstate branches over nuclear configurations with amplitudes equal
to the norms of its nuclear-config projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ClassificationError, ConfigError
from .spincore import (
    ELECTRON_SET,
    ELECTRON_UP,
    BasisLayout,
    EigenSystem,
    OperatorMatrix,
    donor_projector,
)

# branch amplitudes at or below this are identically-zero overlaps plus roundoff
_AMP_CUTOFF = 1e-12


class PulseKind(str, Enum):
    READOUT = "readout"
    RESONANT_TUNNELING = "resonant_tunneling"


@dataclass(frozen=True)
class PulseSchedule:
    """Timing of one tunneling pulse.  All times in microseconds.

    tau_down_out_us is only meaningful for the resonant-tunneling pulse; it
    may be math.inf, which reduces the pulse to plain readout (zero rate for
    the extra channel).  sample_points is the number of propagation intervals,
    so a time series holds sample_points + 1 rows including t = 0.
    """

    kind: PulseKind
    tau_up_out_us: float
    tau_in_us: float
    duration_us: float
    sample_points: int = 1000
    tau_down_out_us: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PulseKind(self.kind))
        if not self.tau_up_out_us > 0:
            raise ConfigError("pulse.tau_up_out_us", "must be > 0")
        if not self.tau_in_us > 0:
            raise ConfigError("pulse.tau_in_us", "must be > 0")
        if self.duration_us < 0:
            raise ConfigError("pulse.duration_us", "must be >= 0")
        if self.sample_points < 2:
            raise ConfigError("pulse.sample_points", "must be >= 2")
        if self.kind is PulseKind.RESONANT_TUNNELING:
            if self.tau_down_out_us is None or not self.tau_down_out_us > 0:
                raise ConfigError(
                    "pulse.tau_down_out_us", "required and > 0 for resonant tunneling"
                )

    def scaled(self, factor: float) -> "PulseSchedule":
        """Same pulse with all tunneling times multiplied by factor."""
        tau_down = None if self.tau_down_out_us is None else self.tau_down_out_us * factor
        return PulseSchedule(
            self.kind,
            self.tau_up_out_us * factor,
            self.tau_in_us * factor,
            self.duration_us,
            self.sample_points,
            tau_down,
        )


CHANNEL_TUNNEL_OUT_UP = "tunnel_out_up"
CHANNEL_TUNNEL_OUT_DOWN = "tunnel_out_down"
CHANNEL_TUNNEL_IN = "tunnel_in"


@dataclass(frozen=True)
class LindbladChannel:
    """Provenance of one jump operator."""

    kind: str
    source_eigenstate: int | None = None  # donor-block eigenstate index (0-based)
    nuclear_config: int | None = None  # target nuclear configuration


@dataclass(frozen=True)
class LindbladSet:
    """Jump operators over the combined space, each scaled by sqrt(rate)."""

    operators: tuple[OperatorMatrix, ...]
    channels: tuple[LindbladChannel, ...]
    layout: BasisLayout

    def __post_init__(self):
        if len(self.operators) != len(self.channels):
            raise ValueError("operators/channels length mismatch")

    def __len__(self) -> int:
        return len(self.operators)

    def matrices(self) -> list[np.ndarray]:
        return [op.entries for op in self.operators]


@dataclass(frozen=True)
class EigenstateClassification:
    up_like: tuple[int, ...]
    down_like: tuple[int, ...]
    up_population: np.ndarray


def classify_eigenstates(eig: EigenSystem) -> EigenstateClassification:
    """Partition donor-block eigenstates by majority electron-spin character.

    A state is up-like iff its total population on electron-up basis states
    exceeds 1/2.  Population exactly 1/2 cannot be assigned a tunneling
    manifold and raises ClassificationError.
    """
    layout = eig.layout
    if layout.electron_dim != 2:
        raise ValueError("classification expects the donor-bound (electron_dim=2) block")
    up_rows = [layout.index(n, ELECTRON_UP) for n in range(layout.nuclear_dim)]
    pops = np.sum(np.abs(eig.eigenvectors[up_rows, :]) ** 2, axis=0)
    if np.any(np.abs(pops - 0.5) < 1e-12):
        k = int(np.argmin(np.abs(pops - 0.5)))
        raise ClassificationError(
            f"eigenstate {k} has electron-up population {pops[k]!r}, exactly 1/2"
        )
    up_like = tuple(int(k) for k in np.nonzero(pops > 0.5)[0])
    down_like = tuple(int(k) for k in np.nonzero(pops < 0.5)[0])
    return EigenstateClassification(up_like=up_like, down_like=down_like, up_population=pops)


def _tunnel_out_operators(
    eig: EigenSystem, sources: tuple[int, ...], tau_us: float, kind: str
) -> tuple[list[OperatorMatrix], list[LindbladChannel]]:
    """One jump operator per (source eigenstate, nuclear config) with nonzero overlap.

    L = (|Pi_n e_k| / sqrt(tau)) |n, SET><e_k,embedded|.  Branch weights sum
    to 1 over n, so each source loses population at exactly 1/tau.
    """
    donor_layout = eig.layout
    combined = BasisLayout(donor_layout.num_donors, 3)
    p_d = donor_projector(donor_layout.num_donors)
    rate_amp = 0.0 if math.isinf(tau_us) else 1.0 / math.sqrt(tau_us)
    ops: list[OperatorMatrix] = []
    channels: list[LindbladChannel] = []
    if rate_amp == 0.0:
        return ops, channels
    for k in sources:
        vec = eig.vector(k)
        embedded = p_d @ vec
        for n in range(donor_layout.nuclear_dim):
            rows = [donor_layout.index(n, e) for e in range(2)]
            amp = float(np.linalg.norm(vec[rows]))
            if amp <= _AMP_CUTOFF:
                continue
            target = combined.index(n, ELECTRON_SET)
            mat = np.zeros((combined.dim, combined.dim), dtype=complex)
            mat[target, :] = (amp * rate_amp) * embedded.conj()
            ops.append(OperatorMatrix(mat, combined))
            channels.append(LindbladChannel(kind, source_eigenstate=k, nuclear_config=n))
    return ops, channels


def _tunnel_in_operator(num_donors: int, tau_in_us: float) -> tuple[OperatorMatrix, LindbladChannel]:
    combined = BasisLayout(num_donors, 3)
    mat = np.zeros((combined.dim, combined.dim), dtype=complex)
    amp = 1.0 / math.sqrt(tau_in_us)
    for n in range(combined.nuclear_dim):
        mat[combined.index(n, 1), combined.index(n, ELECTRON_SET)] = amp
    return OperatorMatrix(mat, combined), LindbladChannel(CHANNEL_TUNNEL_IN)


def build_readout_lindblads(eig: EigenSystem, sched: PulseSchedule) -> LindbladSet:
    """Jump operators of the readout pulse: up-like states out, spin-down electron in."""
    if sched.kind is not PulseKind.READOUT:
        raise ValueError("schedule is not a readout pulse")
    return _build(eig, sched, resonant=False)


def build_resonant_lindblads(eig: EigenSystem, sched: PulseSchedule) -> LindbladSet:
    """Readout operators plus tunnel-out channels from the down-like eigenstates."""
    if sched.kind is not PulseKind.RESONANT_TUNNELING:
        raise ValueError("schedule is not a resonant-tunneling pulse")
    return _build(eig, sched, resonant=True)


def build_lindblads(eig: EigenSystem, sched: PulseSchedule) -> LindbladSet:
    if sched.kind is PulseKind.READOUT:
        return build_readout_lindblads(eig, sched)
    return build_resonant_lindblads(eig, sched)


def _build(eig: EigenSystem, sched: PulseSchedule, resonant: bool) -> LindbladSet:
    cls = classify_eigenstates(eig)
    ops, channels = _tunnel_out_operators(
        eig, cls.up_like, sched.tau_up_out_us, CHANNEL_TUNNEL_OUT_UP
    )
    op_in, ch_in = _tunnel_in_operator(eig.layout.num_donors, sched.tau_in_us)
    ops.append(op_in)
    channels.append(ch_in)
    if resonant:
        extra_ops, extra_ch = _tunnel_out_operators(
            eig, cls.down_like, sched.tau_down_out_us, CHANNEL_TUNNEL_OUT_DOWN
        )
        ops.extend(extra_ops)
        channels.extend(extra_ch)
    return LindbladSet(tuple(ops), tuple(channels), BasisLayout(eig.layout.num_donors, 3))
