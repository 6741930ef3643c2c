"""Measurement-backaction simulator for donor nuclear-spin qubits.

Master-equation propagation of the nuclear-electron density matrix under
readout and resonant-tunneling pulses, closed-form flip / flip-flop
predictions, and an independent quantum-jump Monte Carlo cross-check.
"""

from .analytics import (
    EffectiveTwoLevel,
    FlipFlopProbability,
    MixingParameters,
    backaction_budget_2p,
    flip_probability,
    flipflop_probability,
    mixing_parameters,
    schrieffer_wolff_2p,
)
from .engine import (
    DensityMatrix,
    Liouvillian,
    TimeSeries,
    build_liouvillian,
    expectation,
    initial_state,
    initial_state_vector,
    matrix_exponential,
    parse_state_label,
    propagate,
)
from .errors import ClassificationError, ConfigError, DonorSpinError, NumericalError
from .pulses import (
    LindbladChannel,
    LindbladSet,
    PulseKind,
    PulseSchedule,
    build_lindblads,
    build_readout_lindblads,
    build_resonant_lindblads,
    classify_eigenstates,
)
from .spincore import (
    GAMMA_E_MHZ_PER_T,
    GAMMA_N_MHZ_PER_T,
    BasisLayout,
    EigenSystem,
    OperatorMatrix,
    SpinSystemSpec,
    assemble_combined,
    build_donor_hamiltonian,
    build_nuclear_zeeman,
    build_spin_operators,
    eigendecompose,
)

__version__ = "0.1.0"
