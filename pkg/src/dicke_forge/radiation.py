"""Collective radiation pattern and its angular integrals.

Intensities are per steradian in units of 1/lifetime.  The single-emitter
pattern is normalized to unit integral over the sphere, so a fully excited
lone emitter radiates at rate 1 and one left half-excited by a pi/2 pulse at
rate 1/2.

All direction arguments accept either a :class:`Direction` or an array of
unit vectors with trailing dimension 3; array inputs give array outputs.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import j1

from .ensemble import EnsembleGeometry, _perpendicular_frame

FULL_SPHERE = math.pi

# rows of the (directions x emitters) phase matrix evaluated per block
_BLOCK = 8192


@dataclass(frozen=True, eq=False)
class Direction:
    """A unit vector; the constructor normalizes any finite nonzero input."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float).reshape(3)
        norm = float(np.linalg.norm(v))
        if not math.isfinite(norm) or norm == 0.0:
            raise ValueError(f"cannot build a direction from {self.vec!r}")
        v = v / norm
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @classmethod
    def from_angles(cls, theta: float, phi: float = 0.0, axis: Sequence[float] = (0.0, 0.0, 1.0)) -> "Direction":
        """Polar angle ``theta`` from ``axis`` and azimuth ``phi`` about it."""
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        e1, e2 = _perpendicular_frame(a)
        st = math.sin(theta)
        return cls(math.cos(theta) * a + st * math.cos(phi) * e1 + st * math.sin(phi) * e2)

    def angle_to(self, other: Union["Direction", np.ndarray]) -> float:
        o = other.vec if isinstance(other, Direction) else np.asarray(other, dtype=float)
        # atan2 form stays accurate for tiny angles
        return float(math.atan2(np.linalg.norm(np.cross(self.vec, o)), float(self.vec @ o)))

    def __eq__(self, other):
        if not isinstance(other, Direction):
            return NotImplemented
        return np.array_equal(self.vec, other.vec)

    __hash__ = None


DirectionLike = Union[Direction, np.ndarray, Sequence[float]]


def _as_dirs(k: DirectionLike) -> tuple[np.ndarray, tuple]:
    if isinstance(k, Direction):
        return k.vec[None, :], ()
    arr = np.asarray(k, dtype=float)
    if arr.shape[-1] != 3:
        raise ValueError("directions need a trailing dimension of 3")
    return arr.reshape(-1, 3), arr.shape[:-1]


def _axis_of(geom: EnsembleGeometry, k_L: Optional[DirectionLike]) -> np.ndarray:
    if k_L is None:
        return np.asarray(geom.axis, dtype=float)
    if isinstance(k_L, Direction):
        return k_L.vec
    return Direction(k_L).vec


def _reshape(values: np.ndarray, shape: tuple):
    return float(values[0]) if shape == () else values.reshape(shape)


class Weighting(str, enum.Enum):
    SOLID_ANGLE = "SOLID_ANGLE"
    INTENSITY = "INTENSITY"


@dataclass(frozen=True)
class QuadratureSpec:
    """Product rule: Gauss-Legendre in cos(theta) per panel times uniform azimuth.

    With ``refine`` set, a separate panel covers polar angles below
    ``panel_angle`` so the forward peak gets its own nodes.  ``n_azimuth=1``
    is reserved for integrands that are symmetric about the axis.
    """

    n_polar: int = 256
    n_azimuth: int = 64
    refine: bool = True
    panel_angle: float = 0.3

    def __post_init__(self):
        if self.n_polar < 2:
            raise ValueError("n_polar must be at least 2")
        if self.n_azimuth < 1:
            raise ValueError("n_azimuth must be at least 1")
        if not (0.0 < self.panel_angle < math.pi):
            raise ValueError("panel_angle must lie in (0, pi)")

    def doubled(self) -> "QuadratureSpec":
        n_az = self.n_azimuth if self.n_azimuth == 1 else 2 * self.n_azimuth
        return QuadratureSpec(2 * self.n_polar, n_az, self.refine, self.panel_angle)


@lru_cache(maxsize=32)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _one_minus_cos(angle: float) -> float:
    return 2.0 * math.sin(0.5 * angle) ** 2


def _polar_rule(quad: QuadratureSpec, cap_half_angle: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights in t = 1 - cos(theta) over [0, 1 - cos(cap)]."""
    t_cap = _one_minus_cos(cap_half_angle)
    edges = [0.0, t_cap]
    if quad.refine and quad.panel_angle < cap_half_angle:
        edges = [0.0, _one_minus_cos(quad.panel_angle), t_cap]
    x, w = _gauss_legendre(quad.n_polar)
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        ts.append(lo + half * (x + 1.0))
        ws.append(half * w)
    return np.concatenate(ts), np.concatenate(ws)


def sphere_nodes(
    quad: QuadratureSpec,
    cap_half_angle: float = FULL_SPHERE,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature directions, weights (steradians) and cos(theta) for a cap about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    t, wt = _polar_rule(quad, min(cap_half_angle, math.pi))
    cos_t = 1.0 - t
    sin_t = np.sqrt(np.clip(t * (2.0 - t), 0.0, None))
    n_az = quad.n_azimuth
    phi = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az if n_az > 1 else np.zeros(1)
    e1, e2 = _perpendicular_frame(a)
    radial = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2  # (n_az, 3)
    dirs = cos_t[:, None, None] * a + sin_t[:, None, None] * radial[None, :, :]
    weights = np.repeat(wt[:, None] * (2.0 * np.pi / n_az), n_az, axis=1)
    return dirs.reshape(-1, 3), weights.ravel(), np.repeat(cos_t, n_az)


def integrate_direction_function(
    f: Callable[[np.ndarray], np.ndarray],
    quad: QuadratureSpec,
    cap_half_angle: float = FULL_SPHERE,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
) -> float:
    """Integrate ``f`` (vectorized over an (M, 3) array of directions) over a cap or the sphere."""
    if cap_half_angle <= 0.0:
        return 0.0
    dirs, w, _ = sphere_nodes(quad, cap_half_angle, axis)
    return float(np.dot(w, np.asarray(f(dirs), dtype=float)))


# ---------------------------------------------------------------------------
# coherence factor


def _coherence_direct(geom: EnsembleGeometry, axis: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    k = geom.wavenumber
    pos = geom.positions - geom.positions[0]
    out = np.empty(dirs.shape[0])
    for start in range(0, dirs.shape[0], _BLOCK):
        dq = k * (dirs[start:start + _BLOCK] - axis)
        s = np.exp(-1j * (dq @ pos.T)).sum(axis=1)
        out[start:start + _BLOCK] = (s.real ** 2 + s.imag ** 2) / geom.n
    return out


def coherence_factor(geom: EnsembleGeometry, k_L: Optional[DirectionLike], k: DirectionLike):
    """|sum_j exp(-i (k - k_L) . x_j)|^2 / N for emission direction ``k``.

    Lies in [0, N]; equals N along ``k_L`` and 1 for a single emitter.
    Positions are referenced to the first emitter, which changes nothing but
    keeps the phases small.
    """
    dirs, shape = _as_dirs(k)
    return _reshape(_coherence_direct(geom, _axis_of(geom, k_L), dirs), shape)


def chain_coherence(n: int, spacing: float, wavelength: float, theta):
    """Closed form of the coherence factor for a chain lying along the excitation axis.

    ``sin^2(N u / 2) / (N sin^2(u / 2))`` with ``u = k d (1 - cos theta)``;
    at the removable singularities ``u = 0 mod 2 pi`` the limit N is used.
    """
    theta = np.asarray(theta, dtype=float)
    u = 2.0 * np.pi * spacing / wavelength * 2.0 * np.sin(0.5 * theta) ** 2
    half = 0.5 * u
    den = n * np.sin(half) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(n * half) ** 2 / den
    near = np.abs(np.sin(half)) < 1e-7
    if np.any(near):
        # second-order expansion around the singular point
        r = np.remainder(half + 0.5 * np.pi, np.pi) - 0.5 * np.pi
        limit = n * (1.0 - (n * n - 1.0) * r * r / 3.0)
        val = np.where(near, limit, val)
    return float(val) if val.ndim == 0 else val


def cylinder_expected_coherence(
    n: int,
    radius: float,
    length: float,
    wavelength: float,
    k_L: DirectionLike,
    k: DirectionLike,
    axis: Optional[DirectionLike] = None,
):
    """Coherence factor averaged over uniform random positions in a cylinder.

    ``1 + (n - 1) |F(dk)|^2`` where ``F`` is the normalized form factor of
    the cylinder, ``[2 J1(q_perp R) / (q_perp R)] * sinc(q_z L / 2)``.
    The cylinder axis defaults to ``k_L``.
    """
    if radius <= 0 or length <= 0:
        raise ValueError("radius and length must be positive")
    kl = Direction(k_L.vec if isinstance(k_L, Direction) else k_L).vec
    ax = kl if axis is None else Direction(axis.vec if isinstance(axis, Direction) else axis).vec
    dirs, shape = _as_dirs(k)
    dq = (2.0 * np.pi / wavelength) * (dirs - kl)
    qz = dq @ ax
    qp = np.linalg.norm(dq - np.outer(qz, ax), axis=1)
    x = qp * radius
    safe = np.where(x > 1e-8, x, 1.0)
    radial = np.where(x > 1e-8, 2.0 * j1(safe) / safe, 1.0 - x * x / 8.0)
    longitudinal = np.sinc(qz * length / (2.0 * np.pi))
    return _reshape(1.0 + (n - 1) * (radial * longitudinal) ** 2, shape)


def coherence_model(
    geom: EnsembleGeometry, k_L: Optional[DirectionLike] = None, expected: bool = False
) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``dirs -> zeta`` either for the actual positions or the cylinder average."""
    axis = _axis_of(geom, k_L)
    if not expected:
        return lambda dirs: _coherence_direct(geom, axis, dirs)
    if geom.cylinder is None:
        raise ValueError("expected coherence needs a geometry built by make_cylinder")
    c = geom.cylinder
    return lambda dirs: cylinder_expected_coherence(
        geom.n, c.radius, c.length, geom.wavelength, axis, dirs, axis=geom.axis
    )


def default_quadrature(
    geom: EnsembleGeometry, k_L: Optional[DirectionLike] = None, expected: bool = False
) -> QuadratureSpec:
    """Quadrature sized to the ensemble: 512 x 1 when the pattern is axisymmetric, else 256 x 64.

    The polar count grows with k * extent so the oscillations of the
    coherence factor stay resolved, and the forward panel is a few
    first-null widths wide.
    """
    axis = _axis_of(geom, k_L)
    if expected:
        symmetric = geom.cylinder is not None and abs(float(axis @ geom.axis)) > 1.0 - 1e-12
        extent = geom.cylinder.length if geom.cylinder is not None else geom.extent
    else:
        symmetric = geom.n == 1 or (
            geom.is_collinear_with_axis() and abs(float(axis @ geom.axis)) > 1.0 - 1e-12
        )
        extent = geom.extent
    kx = geom.wavenumber * extent
    n_polar = max(512 if symmetric else 256, int(math.ceil(kx)) + 64)
    if extent > 0:
        panel = min(0.5 * math.pi, 4.0 * math.sqrt(2.0 * geom.wavelength / extent))
    else:
        panel = 0.5 * math.pi
    return QuadratureSpec(n_polar=n_polar, n_azimuth=1 if symmetric else 64, refine=True, panel_angle=panel)


# ---------------------------------------------------------------------------
# intensity and derived quantities


def single_emitter_pattern(geom: EnsembleGeometry, k_L: Optional[DirectionLike], k: DirectionLike):
    """Sphere-normalized dipole pattern of one emitter in direction ``k``."""
    dirs, shape = _as_dirs(k)
    return _reshape(geom.pattern.density(dirs @ _axis_of(geom, k_L)), shape)


def intensity(geom: EnsembleGeometry, k_L: Optional[DirectionLike], k: DirectionLike):
    """Short-time emission intensity I0(k) (N/4) (1 + zeta(k)), per steradian, in 1/lifetime."""
    dirs, shape = _as_dirs(k)
    axis = _axis_of(geom, k_L)
    i0 = geom.pattern.density(dirs @ axis)
    return _reshape(i0 * 0.25 * geom.n * (1.0 + _coherence_direct(geom, axis, dirs)), shape)


def _pattern_integrals(geom, k_L, quad, cap, expected):
    """Return (integral of I0, integral of I0 * zeta) over the cap."""
    axis = _axis_of(geom, k_L)
    if cap <= 0.0:
        return 0.0, 0.0
    dirs, w, cos_t = sphere_nodes(quad, cap, axis)
    i0 = geom.pattern.density(cos_t)
    zeta = coherence_model(geom, axis, expected)(dirs)
    return float(np.dot(w, i0)), float(np.dot(w, i0 * zeta))


def _resolve_quad(geom, k_L, quad, expected):
    return quad if quad is not None else default_quadrature(geom, k_L, expected)


def total_emission_rate(
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike] = None,
    quad: Optional[QuadratureSpec] = None,
    *,
    expected: bool = False,
) -> float:
    """Integral of the intensity over the sphere, in 1/lifetime."""
    quad = _resolve_quad(geom, k_L, quad, expected)
    a, b = _pattern_integrals(geom, k_L, quad, FULL_SPHERE, expected)
    return 0.25 * geom.n * (a + b)


def emission_rate_S(
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike] = None,
    quad: Optional[QuadratureSpec] = None,
    *,
    expected: bool = False,
) -> float:
    """Emission rate per excitation in units of 1/lifetime.

    A pi/2 pulse leaves N/2 excitations on average, so this is the total
    rate divided by N/2, i.e. ``(1 + <zeta>) / 2`` with the average taken
    over the dipole pattern.  A lone emitter gives exactly 1; values well
    above 1 mean superradiant emission.
    """
    return total_emission_rate(geom, k_L, quad, expected=expected) / (0.5 * geom.n)


def cone_mean_coherence(
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike],
    alpha: float,
    quad: Optional[QuadratureSpec] = None,
    weighting: Weighting = Weighting.SOLID_ANGLE,
    *,
    expected: bool = False,
) -> float:
    """Mean coherence factor over the detection cone of half-angle ``alpha``."""
    if not (0.0 < alpha <= math.pi):
        raise ValueError("alpha must lie in (0, pi]")
    quad = _resolve_quad(geom, k_L, quad, expected)
    axis = _axis_of(geom, k_L)
    dirs, w, cos_t = sphere_nodes(quad, alpha, axis)
    zeta = coherence_model(geom, axis, expected)(dirs)
    if Weighting(weighting) is Weighting.INTENSITY:
        w = w * geom.pattern.density(cos_t) * (1.0 + zeta)
    total = float(w.sum())
    if total <= 0.0:
        # pattern vanishes on the whole cap (PI pattern, tiny cap never does); fall back to solid angle
        return float(zeta.mean())
    return float(np.dot(w, zeta) / total)


def detection_fraction(
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike],
    alpha: float,
    quad: Optional[QuadratureSpec] = None,
    *,
    expected: bool = False,
) -> float:
    """Fraction of the emitted photons that leave inside the cone of half-angle ``alpha``."""
    if not (0.0 <= alpha <= math.pi):
        raise ValueError("alpha must lie in [0, pi]")
    if alpha == 0.0:
        return 0.0
    quad = _resolve_quad(geom, k_L, quad, expected)
    cap = _pattern_integrals(geom, k_L, quad, alpha, expected)
    full = _pattern_integrals(geom, k_L, quad, FULL_SPHERE, expected)
    return min(1.0, (cap[0] + cap[1]) / (full[0] + full[1]))


def detection_fraction_coherent(
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike],
    alpha: float,
    quad: Optional[QuadratureSpec] = None,
    *,
    expected: bool = False,
) -> float:
    """Like :func:`detection_fraction` but counting only the zeta-weighted term of the intensity."""
    if alpha == 0.0:
        return 0.0
    quad = _resolve_quad(geom, k_L, quad, expected)
    cap = _pattern_integrals(geom, k_L, quad, alpha, expected)
    full = _pattern_integrals(geom, k_L, quad, FULL_SPHERE, expected)
    return min(1.0, cap[1] / full[1])


def mismatch_fidelity(geom: EnsembleGeometry, k_L: Optional[DirectionLike], k_det: DirectionLike):
    """Overlap |<W|W'>|^2 = zeta(k_det) / N of the heralded state with the target W state."""
    dirs, shape = _as_dirs(k_det)
    zeta = _coherence_direct(geom, _axis_of(geom, k_L), dirs)
    return _reshape(np.clip(zeta / geom.n, 0.0, 1.0), shape)
