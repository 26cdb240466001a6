"""Brute-force state-vector engine for small ensembles.

Basis index bit ``j`` is the excitation of qubit ``j`` (0 = ground).  The
z Pauli operator acts as sigma_z|e> = +|e>, sigma_z|g> = -|g>.

A laser pulse of area ``A`` and phase ``phi`` along ``k_L`` is

    U = exp[i (A/2) (e^{-i phi} J+ + e^{i phi} J-)]

which factorizes into independent single-qubit rotations.  With this
convention the detection sequence U(phi+pi) J- U(phi) expands exactly to

    1/2 e^{-2i phi} J+  +  1/2 J-  -  i/2 e^{-i phi} Jz

and averaging the two phases phi, phi+pi removes the Jz term.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .ensemble import EnsembleGeometry
from .radiation import Direction, DirectionLike, _axis_of

MAX_QUBITS = 14
_NORM_TOL = 1e-12


class DimensionError(ValueError):
    pass


class QubitLimitError(ValueError):
    pass


def _check_n(n: int) -> int:
    if n < 1:
        raise DimensionError("need at least one qubit")
    if n > MAX_QUBITS:
        raise QubitLimitError(
            f"{n} qubits requested; the exact engine is capped at {MAX_QUBITS} "
            f"(2^{n} amplitudes would not fit the oracle budget)"
        )
    return n


@dataclass(frozen=True, eq=False)
class PureState:
    """Amplitude vector of length 2^n; may be unnormalized after non-unitary maps."""

    amps: np.ndarray
    n: int

    def __post_init__(self):
        _check_n(self.n)
        a = np.asarray(self.amps, dtype=complex)
        if a.shape != (1 << self.n,):
            raise DimensionError(f"expected {1 << self.n} amplitudes, got shape {a.shape}")
        object.__setattr__(self, "amps", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        _same_dim(self, other)
        return complex(np.vdot(self.amps, other.amps))

    def __add__(self, other: "PureState") -> "PureState":
        _same_dim(self, other)
        return PureState(self.amps + other.amps, self.n)

    def __sub__(self, other: "PureState") -> "PureState":
        _same_dim(self, other)
        return PureState(self.amps - other.amps, self.n)

    def __mul__(self, scalar: complex) -> "PureState":
        return PureState(self.amps * scalar, self.n)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ExcitationAmplitudes:
    """Single-excitation sector: sum_j c_j |0..1_j..0>."""

    amps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=complex).reshape(-1)
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite and nonempty")
        object.__setattr__(self, "amps", a)

    @property
    def n(self) -> int:
        return self.amps.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @classmethod
    def w_state(cls, geom: EnsembleGeometry, k: Optional[DirectionLike] = None) -> "ExcitationAmplitudes":
        return cls(_w_amplitudes(geom, k))

    def with_phases(self, phases: np.ndarray) -> "ExcitationAmplitudes":
        """Multiply amplitude j by exp(i phases[j])."""
        return ExcitationAmplitudes(self.amps * np.exp(1j * np.asarray(phases, dtype=float)))


AnyState = Union[PureState, ExcitationAmplitudes]


def _same_dim(a, b):
    if a.n != b.n:
        raise DimensionError(f"dimension mismatch: {a.n} vs {b.n} qubits")


def _match_geom(state: PureState, geom: EnsembleGeometry):
    if state.n != geom.n:
        raise DimensionError(f"state has {state.n} qubits, geometry has {geom.n}")


def ground_state(n: int) -> PureState:
    _check_n(n)
    a = np.zeros(1 << n, dtype=complex)
    a[0] = 1.0
    return PureState(a, n)


def excited_state(n: int) -> PureState:
    _check_n(n)
    a = np.zeros(1 << n, dtype=complex)
    a[-1] = 1.0
    return PureState(a, n)


def basis_state(n: int, index: int) -> PureState:
    _check_n(n)
    a = np.zeros(1 << n, dtype=complex)
    a[index] = 1.0
    return PureState(a, n)


def random_state(n: int, rng: np.random.Generator) -> PureState:
    _check_n(n)
    a = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return PureState(a / np.linalg.norm(a), n)


def normalize(state: AnyState) -> AnyState:
    norm = state.norm
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return type(state)(state.amps / norm, state.n) if isinstance(state, PureState) else ExcitationAmplitudes(state.amps / norm)


def _phases(geom: EnsembleGeometry, k: Optional[DirectionLike]) -> np.ndarray:
    """k . x_j for every qubit, with |k| = 2 pi / wavelength."""
    return geom.wavenumber * (geom.positions @ _axis_of(geom, k))


def _split(amps: np.ndarray, n: int, j: int) -> np.ndarray:
    # view with axis 1 = qubit j
    return amps.reshape(1 << (n - 1 - j), 2, 1 << j)


def _apply_single(amps: np.ndarray, n: int, j: int, op: np.ndarray) -> np.ndarray:
    v = _split(amps, n, j)
    return np.einsum("ab,xby->xay", op, v).reshape(-1)


# ---------------------------------------------------------------------------
# collective operators


class Collective(str, enum.Enum):
    JZ = "JZ"
    JPLUS = "JPLUS"
    JMINUS = "JMINUS"


def _jz_diagonal(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    pop = np.zeros(1 << n)
    for j in range(n):
        pop += (idx >> j) & 1
    return 2.0 * pop - n


def apply_jz(state: PureState) -> PureState:
    return PureState(_jz_diagonal(state.n) * state.amps, state.n)


def apply_jplus(state: PureState, geom: EnsembleGeometry, k: Optional[DirectionLike] = None) -> PureState:
    """sum_j exp(i k.x_j) sigma_+^(j)."""
    _match_geom(state, geom)
    n = state.n
    phase = np.exp(1j * _phases(geom, k))
    out = np.zeros_like(state.amps)
    for j in range(n):
        src, dst = _split(state.amps, n, j), _split(out, n, j)
        dst[:, 1, :] += phase[j] * src[:, 0, :]
    return PureState(out, n)


def apply_jminus(state: PureState, geom: EnsembleGeometry, k: Optional[DirectionLike] = None) -> PureState:
    """Adjoint of :func:`apply_jplus`."""
    _match_geom(state, geom)
    n = state.n
    phase = np.exp(-1j * _phases(geom, k))
    out = np.zeros_like(state.amps)
    for j in range(n):
        src, dst = _split(state.amps, n, j), _split(out, n, j)
        dst[:, 0, :] += phase[j] * src[:, 1, :]
    return PureState(out, n)


def apply_collective(
    state: PureState,
    which: Collective,
    geom: EnsembleGeometry,
    k: Optional[DirectionLike] = None,
) -> PureState:
    which = Collective(which)
    _match_geom(state, geom)
    if which is Collective.JZ:
        return apply_jz(state)
    if which is Collective.JPLUS:
        return apply_jplus(state, geom, k)
    return apply_jminus(state, geom, k)


# ---------------------------------------------------------------------------
# pulses and conditional operators


def pulse_rotation(phi_L: float, area: float, kx: float) -> np.ndarray:
    """2x2 action of the pulse on one qubit at phase kx = k_L . x, basis (g, e)."""
    c, s = math.cos(0.5 * area), math.sin(0.5 * area)
    beta = np.exp(-1j * (phi_L - kx))
    return np.array([[c, 1j * s * np.conj(beta)], [1j * s * beta, c]])


def apply_pulse(
    state: PureState,
    phi_L: float,
    area: float,
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike] = None,
) -> PureState:
    """exp[i (area/2) (e^{-i phi_L} J+ + h.c.)], applied qubit by qubit."""
    _match_geom(state, geom)
    if not math.isfinite(area):
        raise ValueError("pulse area must be finite")
    kx = _phases(geom, k_L)
    amps = state.amps
    for j in range(state.n):
        amps = _apply_single(amps, state.n, j, pulse_rotation(phi_L, area, kx[j]))
    return PureState(amps, state.n)


def apply_m_det(
    state: PureState,
    phi_L: float,
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike] = None,
    k_emit: Optional[DirectionLike] = None,
) -> PureState:
    """U(phi+pi) J-(k_emit) U(phi): one photon emitted along ``k_emit`` (default ``k_L``) between two pi/2 pulses."""
    half = 0.5 * math.pi
    s = apply_pulse(state, phi_L, half, geom, k_L)
    s = apply_jminus(s, geom, k_L if k_emit is None else k_emit)
    return apply_pulse(s, phi_L + math.pi, half, geom, k_L)


def m_det_expansion(
    state: PureState, phi_L: float, geom: EnsembleGeometry, k_L: Optional[DirectionLike] = None
) -> PureState:
    """Closed form of :func:`apply_m_det` in terms of collective operators."""
    jp = apply_jplus(state, geom, k_L)
    jm = apply_jminus(state, geom, k_L)
    jz = apply_jz(state)
    return jp * (0.5 * np.exp(-2j * phi_L)) + jm * 0.5 + jz * (-0.5j * np.exp(-1j * phi_L))


def apply_m_ent(
    state: PureState,
    phi_L: float,
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike] = None,
    k_emit: Optional[DirectionLike] = None,
) -> PureState:
    """Average of the two detection sequences at phases phi and phi + pi (a click in the interference bin)."""
    a = apply_m_det(state, phi_L, geom, k_L, k_emit)
    b = apply_m_det(state, phi_L + math.pi, geom, k_L, k_emit)
    return (a + b) * 0.5


def m_ent_expansion(
    state: PureState, phi_L: float, geom: EnsembleGeometry, k_L: Optional[DirectionLike] = None
) -> PureState:
    jp = apply_jplus(state, geom, k_L)
    jm = apply_jminus(state, geom, k_L)
    return jp * (0.5 * np.exp(-2j * phi_L)) + jm * 0.5


def apply_phases(state: PureState, phases: np.ndarray) -> PureState:
    """prod_j exp(i phases[j] n_j): phase on the excited component of each qubit."""
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (state.n,):
        raise DimensionError("one phase per qubit required")
    idx = np.arange(1 << state.n)
    total = np.zeros(1 << state.n)
    for j in range(state.n):
        total += ((idx >> j) & 1) * phases[j]
    return PureState(state.amps * np.exp(1j * total), state.n)


def operator_matrix(op: Callable[[PureState], PureState], n: int) -> np.ndarray:
    """Dense matrix of a linear map, built column by column from the computational basis."""
    dim = 1 << _check_n(n)
    cols = [op(basis_state(n, i)).amps for i in range(dim)]
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# W states, fidelity, witness


def _w_amplitudes(geom: EnsembleGeometry, k: Optional[DirectionLike]) -> np.ndarray:
    return np.exp(1j * _phases(geom, k)) / math.sqrt(geom.n)


def w_state(geom: EnsembleGeometry, k: Optional[DirectionLike] = None) -> PureState:
    """Normalized phased W state: amplitude exp(i k.x_j)/sqrt(N) on qubit j's single excitation."""
    n = _check_n(geom.n)
    a = np.zeros(1 << n, dtype=complex)
    a[1 << np.arange(n)] = _w_amplitudes(geom, k)
    return PureState(a, n)


def fidelity(a: AnyState, b: AnyState) -> float:
    """|<a|b>|^2 for two normalized states of the same kind."""
    if type(a) is not type(b):
        raise TypeError("fidelity needs two states of the same representation")
    _same_dim(a, b)
    for s in (a, b):
        if abs(s.norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized (norm {s.norm:.12g})")
    f = abs(np.vdot(a.amps, b.amps)) ** 2
    return float(min(1.0, f))


def witness_value(n: int, fidelity_F: float) -> float:
    """Tr[W rho] for the W-state witness; negative certifies entanglement."""
    if n < 2:
        raise ValueError("the witness needs at least two qubits")
    if not (0.0 <= fidelity_F <= 1.0):
        raise ValueError("fidelity must lie in [0, 1]")
    return 1.0 - 1.0 / n - fidelity_F


def to_single_excitation(state: PureState, tol: float = 1e-9) -> ExcitationAmplitudes:
    """Project onto the single-excitation sector; refuses states with weight elsewhere."""
    idx = 1 << np.arange(state.n)
    inside = state.amps[idx]
    outside = state.norm ** 2 - float(np.sum(np.abs(inside) ** 2))
    if outside > tol:
        raise ValueError(f"state has weight {outside:.3g} outside the single-excitation sector")
    return ExcitationAmplitudes(inside.copy())


def from_single_excitation(amps: ExcitationAmplitudes) -> PureState:
    n = _check_n(amps.n)
    a = np.zeros(1 << n, dtype=complex)
    a[1 << np.arange(n)] = amps.amps
    return PureState(a, n)
