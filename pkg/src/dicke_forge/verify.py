"""Self-check suite: operator identities, quadrature normalizations, closed forms.

Each check is a named callable returning ``(ok, detail)``.  The registry is
plain data so callers (and tests) can swap in a deliberately broken variant
and confirm the failure is reported under the right name.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import statevec as sv
from .ensemble import DipolePattern, EnsembleGeometry, make_linear_chain
from .radiation import (
    QuadratureSpec,
    chain_coherence,
    coherence_factor,
    emission_rate_S,
    integrate_direction_function,
)

IDENTITY_TOL = 1e-10
DEFAULT_SIZES = (2, 4, 6)
# full basis up to this size, random probe states above it
_BASIS_LIMIT = 6


@dataclass(frozen=True)
class Check:
    name: str
    run: Callable[[], tuple]


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def random_geometry(n: int, rng: np.random.Generator, pattern=DipolePattern.SIGMA_PLUS) -> EnsembleGeometry:
    """A few wavelengths' worth of random positions, for identity checks."""
    wl = 852e-9
    pos = rng.uniform(-3 * wl, 3 * wl, size=(n, 3))
    return EnsembleGeometry(pos, wl, 30e-9, pattern, label=f"random-{n}")


def _max_deviation(lhs, rhs, n: int, rng: np.random.Generator) -> float:
    if n <= _BASIS_LIMIT:
        return float(np.max(np.abs(sv.operator_matrix(lhs, n) - sv.operator_matrix(rhs, n))))
    worst = 0.0
    for _ in range(4):
        s = sv.random_state(n, rng)
        worst = max(worst, float(np.max(np.abs(lhs(s).amps - rhs(s).amps))))
    return worst


def operator_identity(name: str, n: int, composite, expansion, seed: int = 0) -> Check:
    """``composite`` and ``expansion`` take (state, phi, geom, k_L) and must agree as linear maps."""

    def run():
        rng = np.random.default_rng([seed, n])
        geom = random_geometry(n, rng)
        k_L = rng.normal(size=3)
        k_L /= np.linalg.norm(k_L)
        phi = float(rng.uniform(0, 2 * math.pi))
        dev = _max_deviation(
            lambda s: composite(s, phi, geom, k_L), lambda s: expansion(s, phi, geom, k_L), n, rng
        )
        return dev <= IDENTITY_TOL, f"max deviation {dev:.2e}"

    return Check(f"{name}[N={n}]", run)


def _herald_check(count: int = 100, seed: int = 1) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for i in range(count):
            n = int(rng.integers(2, 11))
            geom = random_geometry(n, rng)
            phi = float(rng.uniform(0, 2 * math.pi))
            out = sv.normalize(sv.apply_m_ent(sv.ground_state(n), phi, geom))
            worst = max(worst, abs(1.0 - sv.fidelity(out, sv.w_state(geom))))
        return worst <= 1e-12, f"worst |1 - F| {worst:.2e} over {count} geometries"

    return Check("herald_gives_w_state", run)


def _unitarity_check(seed: int = 2) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for n in (1, 3, 5):
            geom = random_geometry(n, rng)
            s = sv.random_state(n, rng)
            out = sv.apply_pulse(s, float(rng.uniform(0, 6)), float(rng.uniform(0, 6)), geom)
            worst = max(worst, abs(out.norm - 1.0))
        return worst <= 1e-12, f"worst norm drift {worst:.2e}"

    return Check("pulse_unitarity", run)


def _adjoint_check(seed: int = 3) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for n in (2, 4, 6):
            geom = random_geometry(n, rng)
            a, b = sv.random_state(n, rng), sv.random_state(n, rng)
            lhs = a.inner(sv.apply_jplus(b, geom))
            rhs = np.conj(b.inner(sv.apply_jminus(a, geom)))
            worst = max(worst, abs(lhs - rhs))
        return worst <= 1e-12, f"worst deviation {worst:.2e}"

    return Check("jplus_jminus_adjoint", run)


def _mismatch_check(count: int = 50, seed: int = 4) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(count):
            n = int(rng.integers(1, 11))
            geom = random_geometry(n, rng)
            k = rng.normal(size=3)
            k /= np.linalg.norm(k)
            f = sv.fidelity(sv.w_state(geom), sv.w_state(geom, k))
            worst = max(worst, abs(f - coherence_factor(geom, None, k) / n))
        return worst <= 1e-12, f"worst deviation {worst:.2e}"

    return Check("mismatch_overlap", run)


def _normalization_check(pattern: DipolePattern) -> Check:
    def run():
        quad = QuadratureSpec(64, 1, refine=False)
        total = integrate_direction_function(lambda d: pattern.density(d[:, 2]), quad)
        return abs(total - 1.0) <= 1e-12, f"sphere integral {total:.15f}"

    return Check(f"pattern_normalization[{pattern.value}]", run)


def _single_emitter_rate_check() -> Check:
    def run():
        geom = make_linear_chain(1, 532e-9, 852e-9, 30e-9)
        s = emission_rate_S(geom)
        return abs(s - 1.0) <= 1e-12, f"S = {s:.15f}"

    return Check("single_emitter_rate", run)


def _chain_closed_form_check(seed: int = 5) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for n in (2, 10, 30):
            geom = make_linear_chain(n, 532e-9, 852e-9, 30e-9)
            theta = rng.uniform(0.0, math.pi, 200)
            dirs = np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)
            direct = coherence_factor(geom, None, dirs)
            closed = chain_coherence(n, 532e-9, 852e-9, theta)
            worst = max(worst, float(np.max(np.abs(direct - closed) / np.maximum(1.0, closed))))
        return worst <= 1e-10, f"worst relative deviation {worst:.2e}"

    return Check("chain_closed_form", run)


def default_checks(sizes: Sequence[int] = DEFAULT_SIZES) -> list[Check]:
    for n in sizes:
        sv._check_n(n)
    checks = []
    for n in sizes:
        checks.append(operator_identity("m_det_identity", n, sv.apply_m_det, sv.m_det_expansion))
        checks.append(operator_identity("m_ent_identity", n, sv.apply_m_ent, sv.m_ent_expansion))
    checks += [
        _herald_check(),
        _unitarity_check(),
        _adjoint_check(),
        _mismatch_check(),
        *(_normalization_check(p) for p in DipolePattern),
        _single_emitter_rate_check(),
        _chain_closed_form_check(),
    ]
    return checks


def run_checks(checks: Optional[Iterable[Check]] = None) -> list[CheckResult]:
    out = []
    for c in default_checks() if checks is None else checks:
        try:
            ok, detail = c.run()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(c.name, bool(ok), detail))
    return out


def format_matrix(results: Sequence[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    return "\n".join(f"{'PASS' if r.ok else 'FAIL'}  {r.name.ljust(width)}  {r.detail}" for r in results) + "\n"
