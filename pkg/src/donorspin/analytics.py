"""Closed-form transition probabilities and the effective two-level flip-flop model.

All inputs and outputs are ordinary frequencies in MHz; the probability
formulas are ratios of frequencies and therefore hold in any consistent unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spincore import TWO_PI, SpinSystemSpec


@dataclass(frozen=True)
class MixingParameters:
    """Mixing angle and eigenfrequencies of the one-donor up-down / down-up block."""

    theta_rad: float
    omega_1_rad_per_us: float
    omega_3_rad_per_us: float


@dataclass(frozen=True)
class EffectiveTwoLevel:
    """Detuning and electron-mediated coupling of the nuclear exchange block, MHz."""

    delta_mhz: float
    tau_c_mhz: float


class FlipFlopProbability(NamedTuple):
    exact: float
    approximate: float


def mixing_parameters(a_mhz: float, spec: SpinSystemSpec) -> MixingParameters:
    """theta = atan(A / (omega_n - omega_e)) and the split eigenfrequencies.

    The nuclear Larmor frequency keeps its negative sign, so theta is a small
    negative angle for physical parameters; the flip probability depends only
    on (omega_n - omega_e)^2.
    """
    detune = spec.omega_n_mhz - spec.omega_e_mhz
    if detune == 0:
        theta = math.copysign(math.pi / 2.0, a_mhz)
    else:
        theta = math.atan(a_mhz / detune)
    split = math.hypot(a_mhz, detune)
    omega_1 = TWO_PI * (-a_mhz / 4.0 + split / 2.0)
    omega_3 = TWO_PI * (-a_mhz / 4.0 - split / 2.0)
    return MixingParameters(theta_rad=theta, omega_1_rad_per_us=omega_1, omega_3_rad_per_us=omega_3)


def flip_probability(a_mhz: float, spec: SpinSystemSpec) -> float:
    """Time-averaged single-nucleus up->down probability after one readout load.

    P = (1/2) A^2 / (A^2 + (omega_n - omega_e)^2).
    """
    if a_mhz < 0:
        raise ValueError("hyperfine constant must be >= 0")
    if a_mhz == 0:
        return 0.0
    detune = spec.omega_n_mhz - spec.omega_e_mhz
    return 0.5 * a_mhz**2 / (a_mhz**2 + detune**2)


def schrieffer_wolff_2p(
    a1_mhz: float, a2_mhz: float, spec: SpinSystemSpec
) -> tuple[EffectiveTwoLevel, np.ndarray]:
    """Second-order effective block of the electron-down nuclear-exchange subspace.

    Returns the (delta, tau_c) parametrization plus the full 2x2 block (MHz)
    in the {up-down, down-up} nuclear basis, with the electron-down Zeeman
    energy as the zero of energy:

        [[-A1^2/(4 w) - A1/4 + A2/4,  -A1 A2/(4 w)          ],
         [-A1 A2/(4 w),               -A2^2/(4 w) - A2/4 + A1/4]]

    with w = omega_e - omega_n.  delta is the difference of the diagonal
    entries and tau_c twice the off-diagonal coupling.
    """
    if a1_mhz < 0 or a2_mhz < 0:
        raise ValueError("hyperfine constants must be >= 0")
    w = spec.omega_e_mhz - spec.omega_n_mhz
    if w == 0:
        raise ValueError("omega_e equals omega_n: degenerate perturbation theory invalid")
    h11 = -(a1_mhz**2) / (4.0 * w) - a1_mhz / 4.0 + a2_mhz / 4.0
    h22 = -(a2_mhz**2) / (4.0 * w) - a2_mhz / 4.0 + a1_mhz / 4.0
    h12 = -(a1_mhz * a2_mhz) / (4.0 * w)
    block = np.array([[h11, h12], [h12, h22]], dtype=float)
    return EffectiveTwoLevel(delta_mhz=h22 - h11, tau_c_mhz=2.0 * h12), block


def flipflop_probability(a1_mhz: float, a2_mhz: float, spec: SpinSystemSpec) -> FlipFlopProbability:
    """Time-averaged nuclear flip-flop probability of a 2P1e system.

    exact:        (1/2) tau_c^2 / (tau_c^2 + delta^2) from the effective block;
    approximate:  (1/2) (A1 A2 / (2 omega_e))^2 / ((A1 - A2)/2)^2, the
                  large-detuning form (infinite when A1 == A2 > 0).
    """
    if a1_mhz == 0 and a2_mhz == 0:
        return FlipFlopProbability(exact=0.0, approximate=0.0)
    two_level, _ = schrieffer_wolff_2p(a1_mhz, a2_mhz, spec)
    denom = two_level.tau_c_mhz**2 + two_level.delta_mhz**2
    exact = 0.5 * two_level.tau_c_mhz**2 / denom if denom > 0 else 0.0
    coupling = a1_mhz * a2_mhz / (2.0 * spec.omega_e_mhz)
    detune = (a1_mhz - a2_mhz) / 2.0
    approximate = math.inf if detune == 0 else 0.5 * (coupling / detune) ** 2
    return FlipFlopProbability(exact=exact, approximate=approximate)


def backaction_budget_2p(
    a_total_mhz: float, spec: SpinSystemSpec, resolution_mhz: float = 0.01
) -> float | None:
    """Stark shift above which a 2P dot beats a 1P dot of the same total hyperfine.

    Root of  flip(A1) + flipflop(A1, A2) - flip(A_total)  over the Stark
    shift dA, with A1 = (A_total + dA)/2 and A2 = (A_total - dA)/2, found by
    bisection to resolution_mhz.  Uses the approximate flip-flop form (the
    dashed-line convention).  Returns None when the bracket shows no sign
    change (no boundary).
    """
    if a_total_mhz <= 0:
        raise ValueError("a_total must be > 0")
    reference = flip_probability(a_total_mhz, spec)

    def excess(da: float) -> float:
        a1 = (a_total_mhz + da) / 2.0
        a2 = (a_total_mhz - da) / 2.0
        return flip_probability(a1, spec) + flipflop_probability(a1, a2, spec).approximate - reference

    margin = min(0.1, 1e-3 * a_total_mhz)
    lo, hi = margin, a_total_mhz - margin
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        return None
    while hi - lo > resolution_mhz:
        mid = 0.5 * (lo + hi)
        f_mid = excess(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)
