"""Acceptance criteria, one test each, with a one-line verdict echoed in the terminal summary.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance criteria"
section at the end, or run this file directly for the same lines on stdout.
"""
import math
import sys

import numpy as np
import pytest

from dicke_forge import protocol as pr
from dicke_forge import statevec as sv
from dicke_forge.cli import main
from dicke_forge.design import DesignInputs, design_report, expected_trials
from dicke_forge.radiation import (
    QuadratureSpec,
    chain_coherence,
    coherence_factor,
    cylinder_expected_coherence,
    default_quadrature,
    detection_fraction,
    emission_rate_S,
    integrate_direction_function,
)
from dicke_forge.ensemble import DipolePattern
from dicke_forge.verify import operator_identity, random_geometry
from helpers import ACCEPTANCE_LINES, cs_chain, nv_cylinder
from oracles import LIFETIME, TABLE

TITLES = {
    1: "operator identities and heralded W state",
    2: "mismatch identity",
    3: "T_det regression",
    4: "alpha_det regression",
    5: "S regression",
    6: "N_tr identity",
    7: "T_prep regression",
    8: "Monte Carlo vs analytic",
    9: "entanglement certification",
    10: "emission pattern reproduction",
    11: "property suite",
}

KEYS = [(m, n) for m in ("cs", "nv") for n in (10, 30, 100)]


def verdict(k, checks):
    """Record the verdict for criterion ``k`` from a list of (ok, description) and assert."""
    failed = [d for ok, d in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    detail = f"{len(failed)} of {len(checks)} checks failed: " + "; ".join(failed) if failed else "; ".join(d for _, d in checks)
    ACCEPTANCE_LINES[k] = f"criterion {k:2d} {status}  {TITLES[k]}: {detail}"
    print(ACCEPTANCE_LINES[k])
    assert not failed, ACCEPTANCE_LINES[k]


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="module")
def reports():
    out = {}
    for m, n in KEYS:
        if m == "cs":
            out[(m, n)] = design_report(DesignInputs(cs_chain(n)))
        else:
            out[(m, n)] = design_report(DesignInputs(nv_cylinder(n), inhomogeneous_fwhm=20e9))
    return out


def params_for(key, rep, seed=2024):
    m, n = key
    geom = cs_chain(n) if m == "cs" else nv_cylinder(n)
    return pr.ProtocolParams(
        geom, rep.S, rep.alpha_det, rep.t_det, rep.t_init,
        inhomogeneous_fwhm=20e9 if m == "nv" else 0.0, seed=seed,
    )


# ---------------------------------------------------------------------------


def test_criterion_01_operator_identities():
    checks = []
    for n in (2, 4, 6):
        for name, a, b in (("M_det", sv.apply_m_det, sv.m_det_expansion), ("M_ent", sv.apply_m_ent, sv.m_ent_expansion)):
            ok, detail = operator_identity(name, n, a, b, seed=77).run()
            checks.append((ok, f"{name} N={n} {detail}"))
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 11))
        g = random_geometry(n, rng)
        k = rng.normal(size=3)
        k /= np.linalg.norm(k)
        out = sv.normalize(sv.apply_m_ent(sv.ground_state(n), rng.uniform(0, 6.3), g, k))
        worst = max(worst, abs(1 - sv.fidelity(out, sv.w_state(g, k))))
    checks.append((worst <= 1e-12, f"herald |1-F| {worst:.1e} over 100 geometries"))
    verdict(1, checks)


def test_criterion_02_mismatch_identity():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        g = random_geometry(n, rng)
        k = rng.normal(size=3)
        k /= np.linalg.norm(k)
        f = sv.fidelity(sv.w_state(g), sv.w_state(g, k))
        worst = max(worst, abs(f - coherence_factor(g, None, k) / n))
    verdict(2, [(worst <= 1e-12, f"worst |F - zeta/N| {worst:.1e} over 200 cases")])


def test_criterion_03_t_det(reports):
    checks = []
    for key, tol in ((("cs", 10), 0.03), (("cs", 30), 0.03), (("cs", 100), 0.03), (("nv", 30), 0.05), (("nv", 100), 0.05)):
        r, ref = reports[key], TABLE[key]["t_det_ps"]
        got = r.t_det * 1e12
        checks.append((rel(got, ref) <= tol and r.t_det_binding == "DOUBLE_EMISSION",
                       f"{key[0]}{key[1]} {got:.3g} ps vs {ref} ({rel(got, ref):.1%})"))
    r = reports[("nv", 10)]
    got = r.t_det * 1e12
    checks.append((0.5 <= got / 1.6 <= 2.0 and r.t_det_binding == "BROADENING",
                   f"nv10 {got:.3g} ps vs 1.6 (Gaussian dephasing, factor {got / 1.6:.2f})"))
    verdict(3, checks)


def test_criterion_04_alpha(reports):
    checks = []
    for n in (10, 30, 100):
        got = reports[("cs", n)].alpha_det * 1e3
        ref = TABLE[("cs", n)]["alpha_mrad"]
        checks.append((rel(got, ref) <= 0.15, f"cs{n} {got:.1f} mrad vs {ref} ({rel(got, ref):.1%})"))
    verdict(4, checks)


def test_criterion_05_emission_rate():
    checks = []
    for n in (10, 30, 100):
        s = emission_rate_S(cs_chain(n))
        checks.append((abs(s - 1.2) <= 0.15, f"cs{n} {s:.3f}"))
    for n in (10, 30, 100):
        vals = [emission_rate_S(nv_cylinder(n, seed=k)) for k in range(50)]
        s, ref = float(np.mean(vals)), TABLE[("nv", n)]["S"]
        checks.append((rel(s, ref) <= 0.25, f"nv{n} {s:.2f} vs {ref} (50 seeds)"))
    verdict(5, checks)


def test_criterion_06_trials_identity(reports):
    checks = []
    for key in KEYS:
        row = TABLE[key]
        tau, n = LIFETIME[key[0]], key[1]
        t_det = row["t_det_ps"] * 1e-12
        from_table = math.log(2) * tau / (row["S"] * n * t_det * row["eta"])
        computed_eta = math.log(2) * tau / (row["S"] * n * t_det * reports[key].eta_det)
        checks.append((rel(from_table, row["n_tr"]) <= 0.10,
                       f"{key[0]}{key[1]} table-eta {from_table:.0f} vs {row['n_tr']}"))
        checks.append((0.5 <= computed_eta / row["n_tr"] <= 2.0,
                       f"{key[0]}{key[1]} computed-eta {computed_eta:.0f}"))
    verdict(6, checks)


def test_criterion_07_prep_time(reports):
    checks = []
    for key in KEYS:
        row = TABLE[key]
        t = row["n_tr"] * (row["t_init_ns"] * 1e-9 + 2 * row["t_det_ps"] * 1e-12) * 1e6
        checks.append((rel(t, row["t_prep_us"]) <= 0.10, f"{key[0]}{key[1]} table inputs {t:.0f} us vs {row['t_prep_us']}"))
    for key in KEYS:
        got = reports[key].t_prep * 1e6
        ref = TABLE[key]["t_prep_us"]
        checks.append((rel(got, ref) <= 0.25, f"{key[0]}{key[1]} end-to-end {got:.0f} us vs {ref} ({(got - ref) / ref:+.0%})"))
    verdict(7, checks)


def test_criterion_08_monte_carlo(reports):
    key = ("cs", 10)
    rep = reports[key]
    params = params_for(key, rep)
    rng = np.random.default_rng(8)
    m = 100_000
    hits = sum(pr.run_trial(params, rng).detected for _ in range(m))
    p = pr.analytic_detection_probability(params, rep.eta_det)
    sigma = math.sqrt(p * (1 - p) / m)
    checks = [(abs(hits / m - p) <= 3 * sigma, f"per-trial {hits / m:.3e} vs {p:.3e} ({abs(hits / m - p) / sigma:.1f} sigma)")]
    runs = pr.run_many(params, 2000)
    med = float(np.median([r.trials for r in runs]))
    n_tr = expected_trials(p)
    checks.append((rel(med, n_tr) <= 0.10, f"median trials {med:.0f} vs {n_tr} over 2000 runs"))
    verdict(8, checks)


def test_criterion_09_certification(reports):
    checks = []
    for key in KEYS:
        n = key[1]
        runs = pr.run_many(params_for(key, reports[key], seed=9), 2000)
        s = pr.summarize(runs)
        bound = 3 * 0.2 / n + s["budget"]["initialization"]
        ok = s["success_fraction"] == 1.0 and s["mean_infidelity"] <= bound and s["witness_negative_fraction"] >= 0.95
        checks.append((ok, f"{key[0]}{key[1]} 1-F {s['mean_infidelity']:.4f} <= {bound:.4f}, "
                           f"witness<0 {s['witness_negative_fraction']:.1%}"))
    verdict(9, checks)


def test_criterion_10_pattern(tmp_path):
    from test_cli import read_pattern

    assert main(["pattern", "--preset", "cs", "--n", "1,30", "--out", str(tmp_path)]) == 0
    _, _, rows = read_pattern(tmp_path / "pattern_n30.csv")
    theta, zeta = rows[:, 0], rows[:, 3]
    first = np.flatnonzero((zeta[1:-1] < zeta[:-2]) & (zeta[1:-1] <= zeta[2:]))[0] + 1
    predicted = math.acos(1 - 852 / (30 * 532))
    step = theta[1] - theta[0]
    _, _, single = read_pattern(tmp_path / "pattern_n1.csv")
    shape = np.max(np.abs(single[:, 1] / single[0, 1] - 0.5 * (1 + np.cos(single[:, 0]) ** 2)))
    verdict(10, [
        (zeta[0] == 30.0, f"zeta(0) = {float(zeta[0])!r}"),
        (abs(theta[first] - predicted) <= 1.5 * step, f"first null {theta[first]:.4f} rad vs {predicted:.4f}"),
        (shape < 1e-6 and np.allclose(single[:, 3], 1.0), f"N=1 follows the bare dipole to {shape:.1e}, zeta = 1"),
    ])


def test_criterion_11_properties():
    rng = np.random.default_rng(11)
    checks = []

    lo, hi = np.inf, -np.inf
    for _ in range(200):
        n = int(rng.integers(1, 30))
        g = random_geometry(n, rng)
        d = rng.normal(size=(64, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        z = coherence_factor(g, d[0], d) / n
        lo, hi = min(lo, z.min()), max(hi, z.max())
    checks.append((lo >= 0 and hi <= 1 + 1e-12, f"zeta/N in [{lo:.2g}, {hi:.12g}]"))

    g = cs_chain(10)
    t = g.translated([3e-6, -1e-6, 4e-6])
    q = QuadratureSpec(256, 16)
    dz = max(abs(emission_rate_S(g, None, q) - emission_rate_S(t, None, q)),
             abs(detection_fraction(g, None, 0.2, q) - detection_fraction(t, None, 0.2, q)))
    checks.append((dz <= 1e-12, f"translation {dz:.1e}"))

    norm = max(abs(integrate_direction_function(lambda d, p=p: p.density(d[:, 2]), QuadratureSpec(64, 4)) - 1)
               for p in DipolePattern)
    checks.append((norm <= 1e-9, f"pattern normalization {norm:.1e}"))

    th = rng.uniform(0, math.pi, 500)
    dirs = np.stack([np.sin(th), np.zeros_like(th), np.cos(th)], axis=1)
    cf = float(np.max(np.abs(coherence_factor(cs_chain(30), None, dirs) - chain_coherence(30, 532e-9, 852e-9, th))))
    checks.append((cf <= 1e-9, f"chain closed form {cf:.1e}"))

    probe = np.linspace(0.0, 0.8, 10)
    pd = np.stack([np.sin(probe), np.zeros_like(probe), np.cos(probe)], axis=1)
    acc = np.zeros(10)
    seeds = 4000
    for s in range(seeds):
        acc += coherence_factor(nv_cylinder(100, seed=s), None, pd)
    c = nv_cylinder(100).cylinder
    exp = cylinder_expected_coherence(100, c.radius, c.length, 637e-9, [0, 0, 1], pd)
    dev = float(np.max(np.abs(acc / seeds - exp) / exp))
    checks.append((dev <= 0.05, f"cylinder seed average {dev:.1%}"))

    same = (np.array_equal(nv_cylinder(30, seed=5).positions, nv_cylinder(30, seed=5).positions)
            and design_report(DesignInputs(cs_chain(10))).to_dict() == design_report(DesignInputs(cs_chain(10))).to_dict())
    rep = design_report(DesignInputs(cs_chain(10)))
    p = params_for(("cs", 10), rep, seed=5)
    same = same and pr.run_until_success(p, pr.run_rng(p, 0)).to_dict() == pr.run_until_success(p, pr.run_rng(p, 0)).to_dict()
    checks.append((same, "seeded determinism"))

    sq = default_quadrature(cs_chain(100))
    conv = abs(emission_rate_S(cs_chain(100), None, sq) - emission_rate_S(cs_chain(100), None, sq.doubled()))
    checks.append((conv < 1e-6, f"quadrature doubling {conv:.1e}"))
    verdict(11, checks)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
