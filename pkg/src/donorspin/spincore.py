"""Spin operators and Hamiltonians for donor nuclear spins coupled to a shared electron.

Conventions
-----------
* User-facing frequencies are ordinary frequencies in MHz; Hamiltonian matrix
  entries are angular frequencies in rad/us (ordinary value times 2*pi).
  Times are in microseconds, magnetic fields in tesla, hbar = 1.
* The electron is a two-level system (up/down) while bound to the donor dot
  and becomes a three-level system (up/down/SET) in the combined space used
  during tunneling pulses.  The SET level carries no electron spin.
* Basis ordering is lexicographic nuclear (x) electron.  Nuclear
  configurations run from all-up to all-down with donor 1 as the most
  significant bit ('U' = up, 'D' = down); the electron index runs up, down,
  SET.  For one donor the combined basis is therefore
  Uu, Ud, Us, Du, Dd, Ds  (u/d = electron up/down, s = SET).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, NumericalError

TWO_PI = 2.0 * np.pi

#: electron gyromagnetic ratio, MHz/T (27.958 GHz/T)
GAMMA_E_MHZ_PER_T = 27958.0
#: phosphorus nuclear gyromagnetic ratio, MHz/T
GAMMA_N_MHZ_PER_T = -17.217

ELECTRON_UP = 0
ELECTRON_DOWN = 1
ELECTRON_SET = 2

_ELECTRON_CHARS = {ELECTRON_UP: "u", ELECTRON_DOWN: "d", ELECTRON_SET: "s"}

# single spin-1/2 operator components
_SX = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = 0.5 * np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = 0.5 * np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = a.copy(order="C")  # detach from the caller before locking
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinSystemSpec:
    """Static description of an mP1e donor system.

    hyperfine_mhz holds the contact hyperfine constant of each donor in MHz
    (ordinary frequency).  Gyromagnetic ratios are in MHz/T; the nuclear one
    is negative for phosphorus and the sign is retained throughout.
    """

    num_donors: int
    hyperfine_mhz: tuple[float, ...]
    b_field_t: float
    gamma_e_mhz_per_t: float = GAMMA_E_MHZ_PER_T
    gamma_n_mhz_per_t: float = GAMMA_N_MHZ_PER_T

    def __post_init__(self):
        object.__setattr__(self, "hyperfine_mhz", tuple(float(a) for a in self.hyperfine_mhz))
        if self.num_donors < 1:
            raise ConfigError("system.num_donors", "must be >= 1")
        if len(self.hyperfine_mhz) != self.num_donors:
            raise ConfigError(
                "system.hyperfine_mhz",
                f"expected {self.num_donors} values, got {len(self.hyperfine_mhz)}",
            )
        if any(a < 0 for a in self.hyperfine_mhz):
            raise ConfigError("system.hyperfine_mhz", "hyperfine constants must be >= 0")
        if not self.b_field_t > 0:
            raise ConfigError("system.b_field_t", "magnetic field must be > 0")

    @property
    def omega_e_mhz(self) -> float:
        """Electron Larmor frequency gamma_e * B, MHz (ordinary)."""
        return self.gamma_e_mhz_per_t * self.b_field_t

    @property
    def omega_n_mhz(self) -> float:
        """Nuclear Larmor frequency gamma_n * B, MHz (ordinary, signed)."""
        return self.gamma_n_mhz_per_t * self.b_field_t

    def with_hyperfine(self, hyperfine_mhz: Sequence[float]) -> "SpinSystemSpec":
        return SpinSystemSpec(
            self.num_donors,
            tuple(hyperfine_mhz),
            self.b_field_t,
            self.gamma_e_mhz_per_t,
            self.gamma_n_mhz_per_t,
        )

    def with_b_field(self, b_field_t: float) -> "SpinSystemSpec":
        return SpinSystemSpec(
            self.num_donors,
            self.hyperfine_mhz,
            b_field_t,
            self.gamma_e_mhz_per_t,
            self.gamma_n_mhz_per_t,
        )


@dataclass(frozen=True)
class BasisLayout:
    """Index bookkeeping for the nuclear (x) electron product basis.

    electron_dim selects the sector: 2 for the donor-bound electron, 3 for
    the combined space including the SET level, 1 for the nuclear-only space
    (electron parked on the SET).
    """

    num_donors: int
    electron_dim: int

    def __post_init__(self):
        if self.num_donors < 1:
            raise ValueError("num_donors must be >= 1")
        if self.electron_dim not in (1, 2, 3):
            raise ValueError("electron_dim must be 1, 2 or 3")

    @property
    def nuclear_dim(self) -> int:
        return 2**self.num_donors

    @property
    def dim(self) -> int:
        return self.nuclear_dim * self.electron_dim

    def index(self, nuclear: int | Sequence[int], electron: int = 0) -> int:
        """Flat basis index of |nuclear config, electron level>."""
        n = self.nuclear_index(nuclear) if not isinstance(nuclear, (int, np.integer)) else int(nuclear)
        if not 0 <= n < self.nuclear_dim:
            raise ValueError(f"nuclear config index {n} out of range")
        if not 0 <= electron < self.electron_dim:
            raise ValueError(f"electron level {electron} out of range")
        return n * self.electron_dim + electron

    def split(self, i: int) -> tuple[int, int]:
        """Inverse of index(): flat index -> (nuclear config index, electron level)."""
        return divmod(i, self.electron_dim)

    def nuclear_index(self, bits: Sequence[int]) -> int:
        """Config index from per-donor bits (0 = up, 1 = down), donor 1 first."""
        if len(bits) != self.num_donors:
            raise ValueError("wrong number of nuclear bits")
        n = 0
        for b in bits:
            n = (n << 1) | int(b)
        return n

    def nuclear_bits(self, n: int) -> tuple[int, ...]:
        return tuple((n >> (self.num_donors - 1 - j)) & 1 for j in range(self.num_donors))

    def nuclear_label(self, n: int) -> str:
        return "".join("D" if b else "U" for b in self.nuclear_bits(n))

    def nuclear_labels(self) -> list[str]:
        return [self.nuclear_label(n) for n in range(self.nuclear_dim)]

    def basis_label(self, i: int) -> str:
        n, e = self.split(i)
        return self.nuclear_label(n) + _ELECTRON_CHARS[e]

    def iter_basis(self) -> Iterator[tuple[int, int, int]]:
        for i in range(self.dim):
            n, e = self.split(i)
            yield i, n, e


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex operator over a BasisLayout."""

    entries: np.ndarray
    layout: BasisLayout

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("operator must be a square matrix")
        if a.shape[0] != self.layout.dim:
            raise ValueError(f"matrix dimension {a.shape[0]} does not match layout dim {self.layout.dim}")
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hermiticity_residual(self) -> float:
        """Max-entry asymmetry |H - H^dag| relative to the largest entry."""
        a = self.entries
        scale = max(np.abs(a).max(), 1e-300)
        return float(np.abs(a - a.conj().T).max() / scale)


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition with ascending eigenvalues and a fixed phase convention."""

    eigenvalues: np.ndarray  # real, ascending, rad/us
    eigenvectors: np.ndarray  # orthonormal columns
    layout: BasisLayout

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(np.asarray(self.eigenvalues, dtype=float)))
        object.__setattr__(self, "eigenvectors", _frozen(np.asarray(self.eigenvectors, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def vector(self, k: int) -> np.ndarray:
        """k-th eigenvector (0-based, ascending eigenvalue order)."""
        return self.eigenvectors[:, k]


@dataclass(frozen=True)
class SpinOperators:
    """X/Y/Z components of every nuclear spin and the electron spin, embedded in the full space."""

    nuclear: tuple[tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix], ...]
    electron: tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]
    layout: BasisLayout


def _embed_nuclear(op: np.ndarray, layout: BasisLayout, slot: int) -> np.ndarray:
    left = np.eye(2**slot, dtype=complex)
    right = np.eye(2 ** (layout.num_donors - slot - 1), dtype=complex)
    full_nuc = np.kron(np.kron(left, op), right)
    return np.kron(full_nuc, np.eye(layout.electron_dim, dtype=complex))


def _embed_electron(op: np.ndarray, layout: BasisLayout) -> np.ndarray:
    if layout.electron_dim == 1:
        raise ValueError("nuclear-only layout has no electron operators")
    if layout.electron_dim == 3:
        op3 = np.zeros((3, 3), dtype=complex)
        op3[:2, :2] = op
        op = op3
    return np.kron(np.eye(layout.nuclear_dim, dtype=complex), op)


def build_spin_operators(layout: BasisLayout) -> SpinOperators:
    """Spin-1/2 component operators for each nucleus and the electron.

    All operators act on the full layout space; the electron components are
    zero on the SET level when electron_dim is 3.
    """
    nuclear = tuple(
        tuple(
            OperatorMatrix(_embed_nuclear(c, layout, j), layout) for c in (_SX, _SY, _SZ)
        )
        for j in range(layout.num_donors)
    )
    electron = tuple(OperatorMatrix(_embed_electron(c, layout), layout) for c in (_SX, _SY, _SZ))
    return SpinOperators(nuclear=nuclear, electron=electron, layout=layout)


def build_donor_hamiltonian(spec: SpinSystemSpec) -> OperatorMatrix:
    """Hamiltonian of the electron-on-dot system, rad/us, dimension 2^m * 2.

    H = sum_j gamma_n B I_jz + gamma_e B S_z + sum_j A_j I_j . S
    """
    layout = BasisLayout(spec.num_donors, 2)
    ops = build_spin_operators(layout)
    omega_n = TWO_PI * spec.omega_n_mhz
    omega_e = TWO_PI * spec.omega_e_mhz
    h = omega_e * ops.electron[2].entries.copy()
    for j in range(spec.num_donors):
        ix, iy, iz = (c.entries for c in ops.nuclear[j])
        sx, sy, sz = (c.entries for c in ops.electron)
        h += omega_n * iz
        a = TWO_PI * spec.hyperfine_mhz[j]
        h += a * (ix @ sx + iy @ sy + iz @ sz)
    return OperatorMatrix(h, layout)


def build_nuclear_zeeman(spec: SpinSystemSpec) -> OperatorMatrix:
    """Nuclear Zeeman Hamiltonian on the nuclear-only space, rad/us, dimension 2^m."""
    layout = BasisLayout(spec.num_donors, 1)
    omega_n = TWO_PI * spec.omega_n_mhz
    h = np.zeros((layout.dim, layout.dim), dtype=complex)
    for j in range(spec.num_donors):
        h += omega_n * _embed_nuclear(_SZ, layout, j)
    return OperatorMatrix(h, layout)


def donor_projector(num_donors: int) -> np.ndarray:
    """Isometry from the donor-bound space (2^m * 2) into the combined space (2^m * 3)."""
    block = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], dtype=complex)
    return np.kron(np.eye(2**num_donors, dtype=complex), block)


def set_projector(num_donors: int) -> np.ndarray:
    """Isometry from the nuclear-only space (2^m) into the combined space (2^m * 3)."""
    block = np.array([[0.0], [0.0], [1.0]], dtype=complex)
    return np.kron(np.eye(2**num_donors, dtype=complex), block)


def assemble_combined(h_donor: OperatorMatrix, h_zn: OperatorMatrix) -> OperatorMatrix:
    """Combined three-level-electron Hamiltonian P_d H_donor P_d^dag + P_s H_zn P_s^dag."""
    m = h_donor.layout.num_donors
    if h_donor.layout.electron_dim != 2:
        raise ValueError("h_donor must live on the electron_dim=2 layout")
    if h_zn.layout.electron_dim != 1 or h_zn.layout.num_donors != m:
        raise ValueError("h_zn dimension inconsistent with h_donor")
    p_d = donor_projector(m)
    p_s = set_projector(m)
    h = p_d @ h_donor.entries @ p_d.conj().T + p_s @ h_zn.entries @ p_s.conj().T
    return OperatorMatrix(h, BasisLayout(m, 3))


_HERMITICITY_RTOL = 1e-10


def eigendecompose(h: OperatorMatrix, *, hermiticity_rtol: float = _HERMITICITY_RTOL) -> EigenSystem:
    """Hermitian eigendecomposition with deterministic ordering and phases.

    Eigenvalues ascend; within a degenerate cluster eigenvectors are ordered
    by the index of their largest-magnitude component, and each eigenvector
    is rotated so that component is real positive.
    """
    if h.hermiticity_residual() > hermiticity_rtol:
        raise NumericalError(
            f"matrix is not Hermitian (relative residual {h.hermiticity_residual():.3e})"
        )
    w, v = np.linalg.eigh(h.entries)

    # deterministic ordering inside degenerate clusters
    scale = max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    tol = 1e-12 * scale
    order = np.arange(w.size)
    start = 0
    while start < w.size:
        stop = start + 1
        while stop < w.size and w[stop] - w[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            anchors = [int(np.argmax(np.abs(v[:, k]))) for k in range(start, stop)]
            order[start:stop] = start + np.argsort(np.array(anchors), kind="stable")
        start = stop
    v = v[:, order]
    w = w[order]

    # phase convention: largest-magnitude component real positive
    for k in range(v.shape[1]):
        idx = int(np.argmax(np.abs(v[:, k])))
        piv = v[idx, k]
        mag = abs(piv)
        if mag > 0:
            v[:, k] *= piv.conjugate() / mag
            v[idx, k] = mag  # kill residual imaginary roundoff on the pivot
    return EigenSystem(eigenvalues=w, eigenvectors=v, layout=h.layout)


def nuclear_config_projector(layout: BasisLayout, nuclear: int) -> OperatorMatrix:
    """Projector onto one nuclear configuration, identity over the electron."""
    d = np.zeros(layout.dim)
    for e in range(layout.electron_dim):
        d[layout.index(nuclear, e)] = 1.0
    return OperatorMatrix(np.diag(d).astype(complex), layout)


def electron_level_projector(layout: BasisLayout, electron: int) -> OperatorMatrix:
    """Projector onto one electron level, identity over the nuclei."""
    d = np.zeros(layout.dim)
    for n in range(layout.nuclear_dim):
        d[layout.index(n, electron)] = 1.0
    return OperatorMatrix(np.diag(d).astype(complex), layout)
