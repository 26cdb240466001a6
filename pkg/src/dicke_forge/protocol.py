"""Monte Carlo simulation of the repeat-until-success preparation protocol.

Each trial is a pair of detection windows.  Photons are emitted as a
Poisson process; each photon leaves in a direction drawn from the collective
intensity pattern and heralds success if it lands inside the detection cone
and in the interference time bin.  A heralding trial with two or more
emitted photons leaves the wrong state and counts as fidelity 0.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensemble import EnsembleGeometry, _perpendicular_frame
from .radiation import Direction, DirectionLike, _axis_of, _coherence_direct
from . import statevec

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
MAX_PROPOSALS = 1_000_000
_BLOCK = 4096

THREADS_ENV = "DICKE_FORGE_THREADS"


@dataclass(frozen=True, eq=False)
class ProtocolParams:
    """Inputs for one preparation run.

    ``window_budget`` selects how the emission budget maps onto the two
    windows: ``"pair"`` gives a Poisson mean of S N T_det / tau for the whole
    trial, ``"each"`` gives that mean to each window.  ``interference_factor``
    is the probability that a photon in the cone lands in the interference
    time bin.
    """

    geometry: EnsembleGeometry
    emission_rate_S: float
    alpha_det: float
    t_det: float
    t_init: float
    k_L: Optional[np.ndarray] = None
    phi_L: float = 0.0
    inhomogeneous_fwhm: float = 0.0
    max_trials: int = 1_000_000
    seed: int = 0
    interference_factor: float = 1.0
    window_budget: str = "pair"

    def __post_init__(self):
        if not (self.t_det > 0 and self.t_init > 0):
            raise ValueError("t_det and t_init must be positive")
        if not (0.0 < self.alpha_det <= math.pi):
            raise ValueError("alpha_det must lie in (0, pi]")
        if self.max_trials < 1:
            raise ValueError("max_trials must be at least 1")
        if self.emission_rate_S < 0:
            raise ValueError("emission rate must be nonnegative")
        if self.inhomogeneous_fwhm < 0:
            raise ValueError("linewidth must be nonnegative")
        if not (0.0 < self.interference_factor <= 1.0):
            raise ValueError("interference_factor must lie in (0, 1]")
        if self.window_budget not in ("pair", "each"):
            raise ValueError("window_budget must be 'pair' or 'each'")
        object.__setattr__(self, "k_L", _axis_of(self.geometry, self.k_L))

    @property
    def mean_emissions(self) -> float:
        """Poisson mean of the number of photons emitted in one trial."""
        g = self.geometry
        base = self.emission_rate_S * g.n * self.t_det / g.lifetime
        return base if self.window_budget == "pair" else 2.0 * base

    @property
    def decay_factor(self) -> float:
        return math.exp(-self.t_init / self.geometry.lifetime)

    def replace(self, **changes) -> "ProtocolParams":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ProtocolParams(**fields)


@dataclass(frozen=True)
class TrialRecord:
    emissions: int
    detected: bool
    direction: Optional[tuple] = None
    double_emission: bool = False
    fidelity: float = 0.0
    mismatch_fidelity: float = 1.0
    broadening_factor: float = 1.0
    residual_out: float = 0.0

    def __post_init__(self):
        if self.detected and self.emissions < 1:
            raise ValueError("a detected trial needs at least one emission")


@dataclass
class PreparationResult:
    trials: int
    success: bool
    fidelity: float
    witness: Optional[float]
    budget: dict = field(default_factory=dict)
    prep_time: float = 0.0
    emissions: int = 0
    direction: Optional[tuple] = None
    run_index: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# sampling


def _sample_cos_theta(pattern, rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.random(size)
    if pattern.value == "ISOTROPIC":
        return 2.0 * u - 1.0
    if pattern.value == "PI":
        return np.cbrt(2.0 * u - 1.0)
    # 1 + c^2 is a 3:1 mixture of the uniform and the c^2 densities
    pick = rng.random(size) < 0.75
    return np.where(pick, 2.0 * u - 1.0, np.cbrt(2.0 * u - 1.0))


def sample_emission_directions(
    geom: EnsembleGeometry,
    k_L: Optional[DirectionLike],
    rng: np.random.Generator,
    size: int,
    *,
    return_proposals: bool = False,
):
    """Draw ``size`` directions with density proportional to the collective intensity.

    Proposals come from the single-emitter pattern and are accepted with
    probability (1 + zeta) / (1 + N), valid because zeta never exceeds N.
    """
    axis = _axis_of(geom, k_L)
    e1, e2 = _perpendicular_frame(axis)
    n = geom.n
    out = np.empty((size, 3))
    filled = 0
    proposals = 0
    while filled < size:
        if proposals > MAX_PROPOSALS * max(size, 1):
            raise RuntimeError("rejection sampler exceeded its proposal cap")
        batch = int(min(200_000, max(64, 2 * (size - filled) * (n + 1) // 2)))
        c = _sample_cos_theta(geom.pattern, rng, batch)
        phi = 2.0 * np.pi * rng.random(batch)
        s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        dirs = c[:, None] * axis + (s * np.cos(phi))[:, None] * e1 + (s * np.sin(phi))[:, None] * e2
        zeta = _coherence_direct(geom, axis, dirs)
        keep = rng.random(batch) * (1.0 + n) < 1.0 + zeta
        idx = np.flatnonzero(keep)
        take = idx[: size - filled]
        out[filled:filled + take.size] = dirs[take]
        filled += take.size
        # in the final batch only proposals up to the last accepted one count
        proposals += int(take[-1]) + 1 if filled == size and take.size else batch
    if return_proposals:
        return out, proposals
    return out


def sample_emission_direction(
    geom: EnsembleGeometry, k_L: Optional[DirectionLike], rng: np.random.Generator
) -> Direction:
    return Direction(sample_emission_directions(geom, k_L, rng, 1)[0])


# ---------------------------------------------------------------------------
# trials


def draw_detunings(params: ProtocolParams, rng: np.random.Generator) -> np.ndarray:
    """Static angular-frequency offsets (rad/s), Gaussian with the configured FWHM."""
    n = params.geometry.n
    if params.inhomogeneous_fwhm == 0.0:
        return np.zeros(n)
    sigma = 2.0 * math.pi * params.inhomogeneous_fwhm * FWHM_TO_SIGMA
    return sigma * rng.standard_normal(n)


def broadening_factor(detunings: np.ndarray, t_det: float) -> float:
    """|mean_j exp(i delta_j T_det)|^2: overlap loss from phases accrued during the window."""
    m = np.exp(1j * np.asarray(detunings) * t_det).mean()
    return float(min(1.0, m.real ** 2 + m.imag ** 2))


def _resolve(
    params: ProtocolParams,
    count: int,
    rng: np.random.Generator,
    detunings: np.ndarray,
    residual_in: float,
) -> TrialRecord:
    geom = params.geometry
    residual_left = params.mean_emissions / geom.n
    if count == 0:
        return TrialRecord(0, False, residual_out=min(1.0, residual_in + residual_left) * params.decay_factor)
    dirs = sample_emission_directions(geom, params.k_L, rng, count)
    cos_a = dirs @ params.k_L
    in_cone = cos_a > math.cos(params.alpha_det)
    in_bin = rng.random(count) < params.interference_factor
    hits = np.flatnonzero(in_cone & in_bin)
    if hits.size == 0:
        return TrialRecord(
            count, False, residual_out=min(1.0, residual_in + residual_left) * params.decay_factor
        )
    k_det = dirs[hits[0]]
    mf = float(min(1.0, _coherence_direct(geom, params.k_L, k_det[None, :])[0] / geom.n))
    bf = broadening_factor(detunings, params.t_det)
    double = count >= 2
    return TrialRecord(
        emissions=count,
        detected=True,
        direction=tuple(float(v) for v in k_det),
        double_emission=double,
        fidelity=0.0 if double else mf * bf,
        mismatch_fidelity=mf,
        broadening_factor=bf,
        residual_out=residual_in,
    )


def run_trial(
    params: ProtocolParams,
    rng: np.random.Generator,
    residual_excitation: float = 0.0,
    detunings: Optional[np.ndarray] = None,
) -> TrialRecord:
    """Simulate one trial (both detection windows)."""
    if not (0.0 <= residual_excitation <= 1.0):
        raise ValueError("residual excitation must be a probability")
    if detunings is None:
        detunings = np.zeros(params.geometry.n)
    count = int(rng.poisson(params.mean_emissions))
    return _resolve(params, count, rng, detunings, residual_excitation)


def initialization_error(params: ProtocolParams, trials: int) -> float:
    """Conservative accrual: trials * N * (per-qubit residual) * exp(-T_init / tau)."""
    return min(1.0, trials * params.mean_emissions * params.decay_factor)


def run_until_success(params: ProtocolParams, rng: Optional[np.random.Generator] = None) -> PreparationResult:
    """Repeat trials until a herald or ``max_trials``; failure is a result, not an exception.

    Emission counts are drawn in blocks and only trials with photons are
    resolved, so long runs at small emission probability stay cheap.  The
    per-trial statistics are those of :func:`run_trial`.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    geom = params.geometry
    detunings = draw_detunings(params, rng)
    mu = params.mean_emissions
    per_trial = params.t_init + 2.0 * params.t_det
    done = 0
    while done < params.max_trials:
        block = min(_BLOCK, params.max_trials - done)
        counts = rng.poisson(mu, block)
        for i in np.flatnonzero(counts):
            rec = _resolve(params, int(counts[i]), rng, detunings, 0.0)
            if rec.detected:
                trials = done + int(i) + 1
                kappa = initialization_error(params, trials)
                f = rec.fidelity * (1.0 - kappa)
                return PreparationResult(
                    trials=trials,
                    success=True,
                    fidelity=f,
                    witness=statevec.witness_value(geom.n, f) if geom.n >= 2 else None,
                    budget={
                        "double_emission": 1.0 if rec.double_emission else 0.0,
                        "mismatch": 1.0 - rec.mismatch_fidelity,
                        "broadening": 1.0 - rec.broadening_factor,
                        "initialization": kappa,
                    },
                    prep_time=trials * per_trial,
                    emissions=rec.emissions,
                    direction=rec.direction,
                )
        done += block
    return PreparationResult(
        trials=params.max_trials,
        success=False,
        fidelity=0.0,
        witness=None,
        budget={"double_emission": 0.0, "mismatch": 0.0, "broadening": 0.0, "initialization": 0.0},
        prep_time=params.max_trials * per_trial,
    )


def run_rng(params: ProtocolParams, run_index: int) -> np.random.Generator:
    """Private stream for run ``run_index`` derived from the master seed."""
    return np.random.default_rng([int(params.seed), int(run_index)])


def _run_one(args) -> PreparationResult:
    params, i = args
    res = run_until_success(params, run_rng(params, i))
    res.run_index = i
    return res


def worker_count(default: Optional[int] = None) -> int:
    env = os.environ.get(THREADS_ENV)
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return default if default is not None else cpus


def run_many(params: ProtocolParams, runs: int, workers: Optional[int] = None) -> list[PreparationResult]:
    """Independent preparation runs; results come back in run order whatever the parallelism."""
    workers = worker_count() if workers is None else max(1, workers)
    jobs = [(params, i) for i in range(runs)]
    if workers == 1 or runs < 2:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, runs // (4 * workers))))


def summarize(results: Sequence[PreparationResult]) -> dict:
    """Order-independent aggregate of a batch of runs."""
    ok = [r for r in results if r.success]
    out = {
        "runs": len(results),
        "successes": len(ok),
        "success_fraction": len(ok) / len(results) if results else 0.0,
    }
    if not ok:
        out.update(
            median_trials=None,
            mean_trials=None,
            mean_fidelity=None,
            mean_infidelity=None,
            witness_negative_fraction=None,
            mean_prep_time=None,
            median_prep_time=None,
            budget={},
        )
        return out
    trials = np.array([r.trials for r in ok], dtype=float)
    fid = np.array([r.fidelity for r in ok])
    wit = [r.witness for r in ok if r.witness is not None]
    out.update(
        median_trials=float(np.median(trials)),
        mean_trials=float(trials.mean()),
        mean_fidelity=float(fid.mean()),
        mean_infidelity=float(1.0 - fid.mean()),
        witness_negative_fraction=(float(np.mean(np.array(wit) < 0.0)) if wit else None),
        mean_prep_time=float(np.mean([r.prep_time for r in ok])),
        median_prep_time=float(np.median([r.prep_time for r in ok])),
        budget={k: float(np.mean([r.budget[k] for r in ok])) for k in ok[0].budget},
    )
    return out


def analytic_detection_probability(params: ProtocolParams, eta_det: float) -> float:
    """Per-trial herald probability: Poisson thinning with cone fraction and interference factor."""
    return -math.expm1(-params.mean_emissions * eta_det * params.interference_factor)


def oracle_replay(
    params: ProtocolParams,
    trial: TrialRecord,
    geom: Optional[EnsembleGeometry] = None,
    detunings: Optional[np.ndarray] = None,
) -> float:
    """Exact fidelity of a heralded trial from the state-vector engine (N <= 10).

    The herald is replayed as the averaged detection operator with the
    photon leaving along the recorded direction, followed by the phases
    accrued from the detunings during the window.  With a single source of
    phase error this equals the factorized contribution stored in the trial.
    """
    geom = params.geometry if geom is None else geom
    if geom.n > 10:
        raise ValueError(f"oracle replay is limited to 10 qubits, got {geom.n}")
    if not trial.detected:
        raise ValueError("only heralded trials can be replayed")
    if trial.double_emission:
        return 0.0
    state = statevec.apply_m_ent(
        statevec.ground_state(geom.n), params.phi_L, geom, params.k_L, k_emit=np.asarray(trial.direction)
    )
    if detunings is not None:
        state = statevec.apply_phases(state, np.asarray(detunings) * params.t_det)
    return statevec.fidelity(statevec.normalize(state), statevec.w_state(geom, params.k_L))
