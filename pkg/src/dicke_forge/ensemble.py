"""Qubit-ensemble geometries and their radiative parameters.

An ensemble is a fixed set of emitter positions together with the
transition wavelength, the single-emitter lifetime and the dipole pattern
of the excited transition.  Positions are in metres, times in seconds.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# extent must stay below this fraction of c * lifetime
EXTENT_FRACTION = 1e-3

_UNIT_TOL = 1e-6


class GeometryError(ValueError):
    """Invalid geometry parameters or a malformed geometry file."""

    def __init__(self, message: str, *, line: Optional[int] = None, field: Optional[str] = None):
        self.detail = message
        self.line = line
        self.field = field
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if field is not None:
            prefix.append(f"field '{field}'")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)


class DipolePattern(str, enum.Enum):
    """Single-emitter angular pattern, theta measured from the excitation axis."""

    ISOTROPIC = "ISOTROPIC"
    SIGMA_PLUS = "SIGMA_PLUS"
    PI = "PI"

    def density(self, cos_theta):
        """Pattern normalized to unit integral over the sphere (per steradian)."""
        c = np.asarray(cos_theta, dtype=float)
        if self is DipolePattern.ISOTROPIC:
            return np.full_like(c, 1.0 / (4.0 * np.pi))
        if self is DipolePattern.SIGMA_PLUS:
            return 3.0 / (16.0 * np.pi) * (1.0 + c * c)
        return 3.0 / (4.0 * np.pi) * c * c

    @property
    def peak(self) -> float:
        """Maximum of :meth:`density`, used as a rejection envelope."""
        return {
            DipolePattern.ISOTROPIC: 1.0 / (4.0 * np.pi),
            DipolePattern.SIGMA_PLUS: 3.0 / (8.0 * np.pi),
            DipolePattern.PI: 3.0 / (4.0 * np.pi),
        }[self]


def unit_vector(v: Sequence[float], *, name: str = "axis") -> np.ndarray:
    """Return ``v`` as a unit vector, normalizing it only if it is already within 1e-6 of unit length."""
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise GeometryError("non-finite vector", field=name)
    norm = float(np.linalg.norm(a))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise GeometryError(f"expected a unit vector, got norm {norm:.6g}", field=name)
    return a / norm


@dataclass(frozen=True)
class CylinderShape:
    """Continuum description of a uniformly filled cylinder (used for form factors)."""

    radius: float
    length: float
    number_density: float
    aspect_ratio: float


@dataclass(frozen=True, eq=False)
class EnsembleGeometry:
    positions: np.ndarray
    wavelength: float
    lifetime: float
    pattern: DipolePattern = DipolePattern.ISOTROPIC
    label: str = ""
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    cylinder: Optional[CylinderShape] = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1 and pos.size == 3:
            pos = pos.reshape(1, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GeometryError("positions must be an (N, 3) array", field="positions")
        if pos.shape[0] == 0:
            raise GeometryError("at least one position is required", field="positions")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("non-finite coordinate", field="positions")
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise GeometryError(f"wavelength must be positive, got {self.wavelength!r}", field="wavelength")
        if not (math.isfinite(self.lifetime) and self.lifetime > 0):
            raise GeometryError(f"lifetime must be positive, got {self.lifetime!r}", field="lifetime")
        pos.setflags(write=False)
        axis = unit_vector(self.axis)
        axis.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "pattern", DipolePattern(self.pattern))
        limit = EXTENT_FRACTION * SPEED_OF_LIGHT * self.lifetime
        if self.extent > limit:
            raise GeometryError(
                f"ensemble extent {self.extent:.3g} m is not small against c*tau "
                f"(limit {limit:.3g} m)",
                field="positions",
            )

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def extent(self) -> float:
        """Largest distance between any two emitters (bounding-box diagonal for large N)."""
        if self.n == 1:
            return 0.0
        if self.n <= 512:
            d = self.positions[:, None, :] - self.positions[None, :, :]
            return float(np.sqrt((d * d).sum(-1)).max())
        span = self.positions.max(axis=0) - self.positions.min(axis=0)
        return float(np.linalg.norm(span))

    def is_collinear_with_axis(self, tol: float = 1e-12) -> bool:
        """True when every displacement between emitters is parallel to the excitation axis."""
        rel = self.positions - self.positions[0]
        perp = rel - np.outer(rel @ self.axis, self.axis)
        scale = max(self.extent, self.wavelength)
        return bool(np.all(np.abs(perp) <= tol * scale))

    def translated(self, shift: Sequence[float]) -> "EnsembleGeometry":
        return EnsembleGeometry(
            positions=self.positions + np.asarray(shift, dtype=float),
            wavelength=self.wavelength,
            lifetime=self.lifetime,
            pattern=self.pattern,
            label=self.label,
            axis=self.axis,
            cylinder=self.cylinder,
        )

    def __eq__(self, other):
        if not isinstance(other, EnsembleGeometry):
            return NotImplemented
        return (
            np.array_equal(self.positions, other.positions)
            and self.wavelength == other.wavelength
            and self.lifetime == other.lifetime
            and self.pattern == other.pattern
            and self.label == other.label
            and np.array_equal(self.axis, other.axis)
            and self.cylinder == other.cylinder
        )

    __hash__ = None


def make_linear_chain(
    n: int,
    spacing: float,
    wavelength: float,
    lifetime: float,
    pattern: DipolePattern = DipolePattern.SIGMA_PLUS,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    label: str = "",
) -> EnsembleGeometry:
    """Emitters at ``j * spacing`` along ``axis`` for ``j = 0 .. n-1``.

    The chain axis doubles as the excitation axis, so the chain lies parallel
    to the exciting wavevector.
    """
    if int(n) != n or n < 1:
        raise GeometryError(f"n must be a positive integer, got {n!r}", field="n")
    if not (math.isfinite(spacing) and spacing > 0):
        raise GeometryError(f"spacing must be positive, got {spacing!r}", field="spacing")
    a = unit_vector(axis)
    positions = np.arange(int(n), dtype=float)[:, None] * spacing * a[None, :]
    return EnsembleGeometry(
        positions=positions,
        wavelength=wavelength,
        lifetime=lifetime,
        pattern=pattern,
        label=label or f"chain n={int(n)} d={spacing:.4g} m",
        axis=a,
    )


def cylinder_dimensions(n: int, number_density: float, aspect_ratio: float) -> tuple[float, float]:
    """Radius and length of a cylinder holding ``n`` emitters at ``number_density``.

    ``length = aspect_ratio * 2 * radius`` and ``pi r^2 L = n / number_density``.
    """
    volume = n / number_density
    radius = (volume / (2.0 * aspect_ratio * np.pi)) ** (1.0 / 3.0)
    return radius, 2.0 * aspect_ratio * radius


def _cross(a, b) -> np.ndarray:
    # np.cross carries heavy per-call overhead for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _perpendicular_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = (1.0, 0.0, 0.0) if abs(axis[0]) < 0.9 else (0.0, 1.0, 0.0)
    e1 = _cross(axis, helper)
    e1 /= math.sqrt(float(e1 @ e1))
    return e1, _cross(axis, e1)


def make_cylinder(
    n: int,
    number_density: float,
    aspect_ratio: float = 10.0,
    seed: Union[int, Sequence[int], None] = 0,
    wavelength: float = 637e-9,
    lifetime: float = 13e-9,
    pattern: DipolePattern = DipolePattern.PI,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    label: str = "",
) -> EnsembleGeometry:
    """Sample ``n`` emitters uniformly inside a cylinder centred on the origin.

    ``number_density`` is in m^-3.  The cylinder axis defaults to the
    excitation axis.  Positions are a deterministic function of ``seed``.
    """
    if int(n) != n or n < 1:
        raise GeometryError(f"n must be a positive integer, got {n!r}", field="n")
    if not (math.isfinite(number_density) and number_density > 0):
        raise GeometryError("number_density must be positive", field="number_density")
    if not (math.isfinite(aspect_ratio) and aspect_ratio > 0):
        raise GeometryError("aspect_ratio must be positive", field="aspect_ratio")
    n = int(n)
    a = unit_vector(axis)
    radius, length = cylinder_dimensions(n, number_density, aspect_ratio)
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    z = length * (rng.random(n) - 0.5)
    e1, e2 = _perpendicular_frame(a)
    positions = (
        (r * np.cos(phi))[:, None] * e1 + (r * np.sin(phi))[:, None] * e2 + z[:, None] * a
    )
    return EnsembleGeometry(
        positions=positions,
        wavelength=wavelength,
        lifetime=lifetime,
        pattern=pattern,
        label=label or f"cylinder n={n}",
        axis=a,
        cylinder=CylinderShape(radius, length, number_density, aspect_ratio),
    )


# ---------------------------------------------------------------------------
# geometry files

_HEADER_KEYS = {"wavelength_m", "tau_s", "pattern", "label", "axis", "cylinder"}


def save_geometry(geom: EnsembleGeometry, path: Union[str, Path]) -> None:
    """Write ``geom`` in the line-oriented geometry format (exact float round-trip)."""
    lines = [
        "# dicke-forge geometry",
        f"wavelength_m={geom.wavelength!r}",
        f"tau_s={geom.lifetime!r}",
        f"pattern={geom.pattern.value}",
    ]
    if geom.label:
        lines.append(f"label={geom.label}")
    if not np.array_equal(geom.axis, [0.0, 0.0, 1.0]):
        lines.append("axis=" + " ".join(repr(float(v)) for v in geom.axis))
    if geom.cylinder is not None:
        c = geom.cylinder
        lines.append(f"cylinder={c.radius!r} {c.length!r} {c.number_density!r} {c.aspect_ratio!r}")
    for x, y, z in geom.positions:
        lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_float(text: str, lineno: int, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise GeometryError(f"cannot parse number {text!r}", line=lineno, field=name) from None


def load_geometry(path: Union[str, Path]) -> EnsembleGeometry:
    """Read a geometry file; see :func:`save_geometry` for the format."""
    header: dict[str, str] = {}
    header_lines: dict[str, int] = {}
    positions: list[tuple[float, float, float]] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _HEADER_KEYS:
                raise GeometryError(f"unknown header key {key!r}", line=lineno, field=key)
            if positions:
                raise GeometryError("header line after position data", line=lineno, field=key)
            header[key] = value.strip()
            header_lines[key] = lineno
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GeometryError(f"expected 'x y z', got {line!r}", line=lineno, field="positions")
        positions.append(tuple(_parse_float(p, lineno, "positions") for p in parts))

    for key in ("wavelength_m", "tau_s"):
        if key not in header:
            raise GeometryError("missing header", field=key)
    wavelength = _parse_float(header["wavelength_m"], header_lines["wavelength_m"], "wavelength_m")
    lifetime = _parse_float(header["tau_s"], header_lines["tau_s"], "tau_s")
    pattern = header.get("pattern", DipolePattern.ISOTROPIC.value).upper()
    try:
        pattern = DipolePattern(pattern)
    except ValueError:
        raise GeometryError(
            f"unknown pattern {header['pattern']!r}", line=header_lines.get("pattern"), field="pattern"
        ) from None
    axis = (0.0, 0.0, 1.0)
    if "axis" in header:
        parts = header["axis"].split()
        if len(parts) != 3:
            raise GeometryError("axis needs three components", line=header_lines["axis"], field="axis")
        axis = tuple(_parse_float(p, header_lines["axis"], "axis") for p in parts)

    cylinder = None
    if "cylinder" in header:
        parts = header["cylinder"].split()
        if len(parts) != 4:
            raise GeometryError(
                "cylinder needs radius, length, density, aspect ratio",
                line=header_lines["cylinder"],
                field="cylinder",
            )
        cylinder = CylinderShape(*(_parse_float(p, header_lines["cylinder"], "cylinder") for p in parts))

    if not positions:
        raise GeometryError("no positions", field="positions")
    try:
        return EnsembleGeometry(
            positions=np.array(positions),
            wavelength=wavelength,
            lifetime=lifetime,
            pattern=pattern,
            label=header.get("label", ""),
            axis=axis,
            cylinder=cylinder,
        )
    except GeometryError as exc:
        line = header_lines.get({"wavelength": "wavelength_m", "lifetime": "tau_s"}.get(exc.field, ""))
        if line is not None:
            raise GeometryError(exc.detail, line=line, field=exc.field) from None
        raise
