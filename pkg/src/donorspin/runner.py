"""End-to-end master-equation runs and transition-probability extraction.

Ties spin-core, pulse-models and the Lindblad engine together for one
(system, pulse, initial state) triple and defines the config-to-config
observables used by sweeps and acceptance checks:

* flip of nucleus j:  final probability of the configuration that differs
  from the initial one in bit j only;
* flip-flop:          final probability of the configuration with the first
  two bits exchanged (defined when they differ).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import TimeSeries, build_liouvillian, initial_state, parse_state_label, propagate
from .pulses import PulseSchedule, build_lindblads
from .spincore import (
    BasisLayout,
    EigenSystem,
    SpinSystemSpec,
    assemble_combined,
    build_donor_hamiltonian,
    build_nuclear_zeeman,
    eigendecompose,
)


@dataclass(frozen=True)
class MasterEquationRun:
    system: SpinSystemSpec
    pulse: PulseSchedule
    initial_label: str
    initial_nuclear: int
    eigensystem: EigenSystem
    timeseries: TimeSeries

    @property
    def layout(self) -> BasisLayout:
        return self.timeseries.layout

    def final_nuclear_probs(self) -> np.ndarray:
        return self.timeseries.nuclear_probs[-1]

    def flip_probability(self, nucleus: int) -> float:
        """Final probability of the single-flip configuration of `nucleus` (0-based)."""
        target = self.initial_nuclear ^ (1 << (self.layout.num_donors - 1 - nucleus))
        return float(self.final_nuclear_probs()[target])

    def flip_probabilities(self) -> np.ndarray:
        return np.array([self.flip_probability(j) for j in range(self.layout.num_donors)])

    def flipflop_target(self) -> int | None:
        """Config index with nuclei 1 and 2 exchanged, or None when identical."""
        m = self.layout.num_donors
        if m < 2:
            return None
        bits = list(self.layout.nuclear_bits(self.initial_nuclear))
        if bits[0] == bits[1]:
            return None
        bits[0], bits[1] = bits[1], bits[0]
        return self.layout.nuclear_index(bits)

    def flipflop_probability(self) -> float | None:
        target = self.flipflop_target()
        if target is None:
            return None
        return float(self.final_nuclear_probs()[target])


def initial_nuclear_config(label: str, eig: EigenSystem) -> int:
    """Nuclear configuration an initial-state label refers to.

    Product and nearest labels carry it explicitly; eigenstate labels use the
    dominant nuclear configuration of the eigenvector.
    """
    parsed = parse_state_label(label, eig.layout.num_donors) if isinstance(label, str) else label
    if parsed.nuclear is not None:
        return parsed.nuclear
    vec = eig.vector(parsed.eigen_index)
    weights = np.abs(vec.reshape(eig.layout.nuclear_dim, eig.layout.electron_dim)) ** 2
    return int(np.argmax(weights.sum(axis=1)))


def run_master_equation(
    system: SpinSystemSpec, pulse: PulseSchedule, initial_label: str
) -> MasterEquationRun:
    """Propagate one pulse and return the sampled run."""
    h_donor = build_donor_hamiltonian(system)
    eig = eigendecompose(h_donor)
    h = assemble_combined(h_donor, build_nuclear_zeeman(system))
    jumps = build_lindblads(eig, pulse)
    lv = build_liouvillian(h, jumps)
    rho0 = initial_state(initial_label, eig)
    ts = propagate(rho0, lv, pulse)
    return MasterEquationRun(
        system=system,
        pulse=pulse,
        initial_label=initial_label,
        initial_nuclear=initial_nuclear_config(initial_label, eig),
        eigensystem=eig,
        timeseries=ts,
    )
