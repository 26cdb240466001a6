"""Protocol parameter design from per-source error budgets.

Every error source (double emission, wavevector mismatch, inhomogeneous
broadening, incomplete re-initialization) is held to its own budget,
0.2/N by default.  The pipeline runs

    S -> alpha_det -> eta_det -> T_det -> N_tr -> T_init -> T_prep

and never feeds a later quantity back into an earlier one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

from scipy.optimize import bisect, brentq

from .ensemble import EnsembleGeometry
from .protocol import FWHM_TO_SIGMA
from .radiation import (
    DirectionLike,
    QuadratureSpec,
    Weighting,
    _axis_of,
    cone_mean_coherence,
    default_quadrature,
    detection_fraction,
    detection_fraction_coherent,
    emission_rate_S,
)

ALPHA_BRACKET = (1e-4, 0.5 * math.pi)
ALPHA_XTOL = 1e-4


class DesignError(RuntimeError):
    """A constraint has no admissible solution for the given inputs."""


class Binding(str, enum.Enum):
    DOUBLE_EMISSION = "DOUBLE_EMISSION"
    BROADENING = "BROADENING"


@dataclass(frozen=True, eq=False)
class DesignInputs:
    """What the solver needs.

    ``coherence`` picks the coherence factor used in every integral:
    ``"direct"`` sums over the actual positions, ``"expected"`` uses the
    cylinder average, and ``"auto"`` takes the average whenever the geometry
    came from :func:`~dicke_forge.ensemble.make_cylinder`.
    """

    geometry: EnsembleGeometry
    budget: Optional[float] = None
    target_probability: float = 0.5
    inhomogeneous_fwhm: float = 0.0
    quad: Optional[QuadratureSpec] = None
    weighting: Weighting = Weighting.SOLID_ANGLE
    coherence: str = "auto"
    init_budget: Optional[float] = None
    interference_factor: float = 1.0
    pinned_eta: Optional[float] = None
    k_L: Optional[DirectionLike] = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"error budget must lie in (0, 1), got {self.epsilon}")
        if not (0.0 < self.epsilon_init < 1.0):
            raise ValueError(f"initialization budget must lie in (0, 1), got {self.epsilon_init}")
        if not (0.0 < self.target_probability < 1.0):
            raise ValueError("target success probability must lie in (0, 1)")
        if self.inhomogeneous_fwhm < 0:
            raise ValueError("linewidth must be nonnegative")
        if self.coherence not in ("auto", "direct", "expected"):
            raise ValueError("coherence must be 'auto', 'direct' or 'expected'")
        if self.coherence == "expected" and self.geometry.cylinder is None:
            raise ValueError("expected coherence needs a cylinder geometry")
        if not (0.0 < self.interference_factor <= 1.0):
            raise ValueError("interference_factor must lie in (0, 1]")
        if self.pinned_eta is not None and not (0.0 < self.pinned_eta <= 1.0):
            raise ValueError("pinned eta must lie in (0, 1]")
        object.__setattr__(self, "weighting", Weighting(self.weighting))

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def epsilon(self) -> float:
        return 0.2 / self.geometry.n if self.budget is None else float(self.budget)

    @property
    def epsilon_init(self) -> float:
        return self.epsilon if self.init_budget is None else float(self.init_budget)

    @property
    def expected(self) -> bool:
        if self.coherence == "auto":
            return self.geometry.cylinder is not None
        return self.coherence == "expected"

    def quadrature(self) -> QuadratureSpec:
        if self.quad is not None:
            return self.quad
        return default_quadrature(self.geometry, self.k_L, self.expected)


class DetectionTime(NamedTuple):
    t_det: float
    binding: Binding
    double_emission_cap: float
    broadening_cap: float


def broadening_sigma(fwhm: float) -> float:
    """Angular-frequency standard deviation of a Gaussian line with the given FWHM in Hz."""
    return 2.0 * math.pi * fwhm * FWHM_TO_SIGMA


def broadening_error(sigma: float, t_det: float) -> float:
    """Dephasing infidelity 1 - exp(-sigma^2 T^2) of a Gaussian detuning spread over a window T."""
    return -math.expm1(-((sigma * t_det) ** 2))


def solve_t_det(inputs: DesignInputs, S: float) -> DetectionTime:
    """Longest detection window meeting both the double-emission and broadening budgets."""
    if not S > 0:
        raise DesignError(f"emission rate must be positive, got {S}")
    g = inputs.geometry
    eps = inputs.epsilon
    # emission probability S N T / tau held at eps
    cap_double = eps * g.lifetime / (S * g.n)
    cap_broad = math.inf
    if inputs.inhomogeneous_fwhm > 0:
        sigma = broadening_sigma(inputs.inhomogeneous_fwhm)
        hi = 1.0 / sigma
        while broadening_error(sigma, hi) < eps:
            hi *= 2.0
        # xtol scaled to the window, the default absolute tolerance is picoseconds
        cap_broad = brentq(lambda t: broadening_error(sigma, t) - eps, 0.0, hi,
                           xtol=1e-12 * hi, rtol=1e-12)
    if not (cap_double > 0 and cap_broad > 0):
        raise DesignError("no positive detection time satisfies the budgets")
    if cap_broad < cap_double:
        return DetectionTime(cap_broad, Binding.BROADENING, cap_double, cap_broad)
    return DetectionTime(cap_double, Binding.DOUBLE_EMISSION, cap_double, cap_broad)


def mismatch_error(inputs: DesignInputs, alpha: float, quad: Optional[QuadratureSpec] = None,
                   weighting: Optional[Weighting] = None) -> float:
    """1 - mean(zeta)/N over the cone of half-angle ``alpha``."""
    quad = inputs.quadrature() if quad is None else quad
    w = inputs.weighting if weighting is None else weighting
    zbar = cone_mean_coherence(inputs.geometry, inputs.k_L, alpha, quad, w, expected=inputs.expected)
    return 1.0 - zbar / inputs.n


def solve_alpha_det(inputs: DesignInputs, quad: Optional[QuadratureSpec] = None,
                    weighting: Optional[Weighting] = None) -> float:
    """Widest detection cone whose mismatch error stays within budget (bisection, 0.1 mrad)."""
    quad = inputs.quadrature() if quad is None else quad
    eps = inputs.epsilon
    lo, hi = ALPHA_BRACKET

    def excess(alpha):
        return mismatch_error(inputs, alpha, quad, weighting) - eps

    if excess(hi) <= 0.0:
        return hi
    if excess(lo) > 0.0:
        raise DesignError(
            f"mismatch budget {eps:.3g} cannot be met even at alpha = {lo:g} rad"
        )
    root = bisect(excess, lo, hi, xtol=ALPHA_XTOL)
    # bisect returns a midpoint; step to the feasible side of the bracket
    if excess(root) > 0.0:
        root = max(lo, root - ALPHA_XTOL)
    return root


def expected_trials(p_det_per_trial: float, target: float = 0.5) -> int:
    """Smallest n with 1 - (1 - p)^n >= target."""
    if not p_det_per_trial > 0:
        raise ValueError(f"detection probability must be positive, got {p_det_per_trial}")
    if not (0.0 < target < 1.0):
        raise ValueError("target must lie in (0, 1)")
    if p_det_per_trial >= 1.0:
        return 1
    x = math.log1p(-target) / math.log1p(-p_det_per_trial)
    n = max(1, math.ceil(x - 1e-9))
    return n


def solve_t_init(n_tr: int, inputs: DesignInputs) -> float:
    """Wait time with n_tr * exp(-T_init / tau) held at the initialization budget."""
    if n_tr < 1:
        raise ValueError("n_tr must be at least 1")
    return max(0.0, inputs.geometry.lifetime * math.log(n_tr / inputs.epsilon_init))


def solve_t_init_per_qubit(n_tr: int, inputs: DesignInputs) -> float:
    """Alternative wait time tau * ln(n_tr * N), reported next to :func:`solve_t_init`."""
    return max(0.0, inputs.geometry.lifetime * math.log(n_tr * inputs.n))


@dataclass
class DesignReport:
    label: str
    n: int
    wavelength: float
    lifetime: float
    epsilon: float
    coherence: str
    weighting: str
    S: float
    alpha_det: float
    alpha_det_by_weighting: dict
    eta_det: float
    eta_det_by_weighting: dict
    eta_det_coherent: float
    eta_det_computed: float
    t_det: float
    t_det_binding: str
    t_det_caps: dict
    p_det: float
    n_tr: int
    t_init: float
    t_init_per_qubit: float
    t_prep: float
    budget: dict = field(default_factory=dict)
    witness_applicable: bool = True
    witness_bound: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_det_caps"] = {k: (None if math.isinf(v) else v) for k, v in self.t_det_caps.items()}
        return d


def design_report(inputs: DesignInputs) -> DesignReport:
    g = inputs.geometry
    quad = inputs.quadrature()
    expected = inputs.expected
    S = emission_rate_S(g, inputs.k_L, quad, expected=expected)

    alphas = {w.value: solve_alpha_det(inputs, quad, w) for w in Weighting}
    alpha = alphas[inputs.weighting.value]
    etas = {w: detection_fraction(g, inputs.k_L, a, quad, expected=expected) for w, a in alphas.items()}
    eta_computed = etas[inputs.weighting.value]
    eta = inputs.pinned_eta if inputs.pinned_eta is not None else eta_computed
    eta_coherent = detection_fraction_coherent(g, inputs.k_L, alpha, quad, expected=expected)

    td = solve_t_det(inputs, S)
    p_emis = S * g.n * td.t_det / g.lifetime
    p_det = p_emis * eta * inputs.interference_factor
    n_tr = expected_trials(p_det, inputs.target_probability)
    t_init = solve_t_init(n_tr, inputs)
    t_prep = n_tr * (t_init + 2.0 * td.t_det)

    sigma = broadening_sigma(inputs.inhomogeneous_fwhm)
    budget = {
        "double_emission": p_emis,
        "mismatch": mismatch_error(inputs, alpha, quad),
        "broadening": broadening_error(sigma, td.t_det),
        "initialization": n_tr * math.exp(-t_init / g.lifetime),
    }
    applicable = g.n >= 2
    return DesignReport(
        label=g.label,
        n=g.n,
        wavelength=g.wavelength,
        lifetime=g.lifetime,
        epsilon=inputs.epsilon,
        coherence="expected" if expected else "direct",
        weighting=inputs.weighting.value,
        S=S,
        alpha_det=alpha,
        alpha_det_by_weighting=alphas,
        eta_det=eta,
        eta_det_by_weighting=etas,
        eta_det_coherent=eta_coherent,
        eta_det_computed=eta_computed,
        t_det=td.t_det,
        t_det_binding=td.binding.value,
        t_det_caps={"double_emission": td.double_emission_cap, "broadening": td.broadening_cap},
        p_det=p_det,
        n_tr=n_tr,
        t_init=t_init,
        t_init_per_qubit=solve_t_init_per_qubit(n_tr, inputs),
        t_prep=t_prep,
        budget=budget,
        witness_applicable=applicable,
        witness_bound=(1.0 - 1.0 / g.n - (1.0 - sum(budget.values()))) if applicable else None,
    )


_ROWS = (
    ("N", lambda r: f"{r.n:d}"),
    ("S", lambda r: f"{r.S:.2f}"),
    ("alpha_det [mrad]", lambda r: f"{r.alpha_det * 1e3:.3g}"),
    ("eta_det", lambda r: f"{r.eta_det:.3g}"),
    ("T_det [ps]", lambda r: f"{r.t_det * 1e12:.3g}"),
    ("T_init [ns]", lambda r: f"{r.t_init * 1e9:.3g}"),
    ("N_tr", lambda r: f"{r.n_tr:d}"),
    ("T_prep [us]", lambda r: f"{r.t_prep * 1e6:.3g}"),
)


def format_table(reports: Sequence[DesignReport]) -> str:
    """Aligned text table, one column per report, in presentation units."""
    cells = [[name] + [fmt(r) for r in reports] for name, fmt in _ROWS]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = []
    for row in cells:
        head = row[0].ljust(widths[0])
        rest = " | ".join(c.rjust(w) for c, w in zip(row[1:], widths[1:]))
        lines.append(f"{head} | {rest}")
    return "\n".join(lines) + "\n"
