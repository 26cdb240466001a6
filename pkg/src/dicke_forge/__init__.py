"""Collective-emission W-state preparation: geometry, radiation, state-vector oracle, design and Monte Carlo."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .design import DesignError, DesignInputs, DesignReport, design_report
from .ensemble import DipolePattern, EnsembleGeometry, GeometryError, make_cylinder, make_linear_chain
from .protocol import ProtocolParams, run_many, run_until_success
from .radiation import Direction, QuadratureSpec, Weighting, coherence_factor, emission_rate_S

__all__ = [
    "DesignError",
    "DesignInputs",
    "DesignReport",
    "DipolePattern",
    "Direction",
    "EnsembleGeometry",
    "GeometryError",
    "ProtocolParams",
    "QuadratureSpec",
    "Weighting",
    "coherence_factor",
    "design_report",
    "emission_rate_S",
    "make_cylinder",
    "make_linear_chain",
    "run_many",
    "run_until_success",
]
