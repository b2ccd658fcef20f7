"""Acceptance suite: one test per published-result criterion.

Each test prints a PASS/FAIL line (run with `pytest tests/test_acceptance.py
-v -s` to see them).  Tolerances are fixed here, not tuned elsewhere.
"""

import contextlib
import time

import numpy as np
import pytest

from uplinksim.bsm import ACCEPTED_OUTCOMES, BsmModel, teleport_expected
from uplinksim.experiment import (
    analytic_fidelities,
    classical_baseline,
    default_config,
    error_budget,
    estimate_fidelity,
    fibre_comparison,
    run_campaign,
)
from uplinksim.linkgeom import LinkModel, PassGeometry, link_loss_db, slant_range
from uplinksim.qstate import PureState, fidelity, mub_states


@contextlib.contextmanager
def report(num: int, label: str):
    try:
        yield
    except BaseException:
        print(f"criterion {num:>2}: FAIL - {label}")
        raise
    print(f"criterion {num:>2}: PASS - {label}")


def test_criterion_1_ideal_protocol_exact():
    with report(1, "ideal protocol teleports every test state exactly"):
        start = time.perf_counter()
        for state in mub_states().values():
            exp = teleport_expected(state, 1.0, BsmModel(mode_overlap=1.0))
            for outcome in ACCEPTED_OUTCOMES:
                assert fidelity(state, exp.corrected[outcome]) > 1 - 1e-12
            assert abs(exp.average_fidelity - 1.0) < 1e-12
        assert time.perf_counter() - start < 1.0


def test_criterion_2_noisy_resource_closed_form():
    with report(2, "white-noise resource fidelity follows (1+p)/2"):
        p = (4 * 0.933 - 1) / 3
        closed_form = (1 + p) / 2
        assert abs(closed_form - 0.955333) < 5e-7
        values = [
            teleport_expected(s, 0.933, BsmModel(1.0)).average_fidelity
            for s in mub_states().values()
        ]
        for v in values:
            assert abs(v - closed_form) < 1e-9
        assert max(values) - min(values) < 1e-9


def test_criterion_3_distinguishability_asymmetry():
    with report(3, "zero overlap halves superpositions, spares poles"):
        p = (4 * 0.933 - 1) / 3
        pole_value = (1 + p) / 2
        f = {
            k: teleport_expected(s, 0.933, BsmModel(0.0)).average_fidelity
            for k, s in mub_states().items()
        }
        for label in ("+", "-", "R", "L"):
            assert abs(f[label] - 0.5) < 1e-10
        for label in ("H", "V"):
            assert abs(f[label] - pole_value) < 1e-9


def test_criterion_4_pass_geometry():
    with report(4, "slant range endpoints and pass duration"):
        g = PassGeometry()  # 500 km, 76 deg culmination, 14.5 deg tracking

        def closed_form(elev_deg):
            r, h = g.earth_radius_km, g.orbit_altitude_km
            s = np.sin(np.radians(elev_deg))
            return np.sqrt(r * r * s * s + 2 * r * h + h * h) - r * s

        far = slant_range(14.5, g)
        near = slant_range(76.0, g)
        assert abs(far - closed_form(14.5)) < 1e-9
        assert abs(near - closed_form(76.0)) < 1e-9
        assert abs(far - 1432.0) <= 1.0
        # The closed form gives 514.15 km at 76 deg (the quoted 513 km is
        # not reproducible from it); the published anchor is ~500 km.
        assert abs(near - 514.15) <= 1.0
        assert abs(near - 500.0) / 500.0 < 0.03
        assert abs(2 * g.half_duration_s() - 350.0) <= 20.0


def test_criterion_5_link_endpoints():
    with report(5, "attenuation endpoints and culmination bump"):
        cfg = default_config()
        g = cfg.geometry(cfg.orbits[0])
        edge = link_loss_db(14.5, g.half_duration_s(), g, cfg.link)
        culm = link_loss_db(76.0, 0.0, g, cfg.link)
        assert abs(edge - 52.0) <= 2.0
        assert abs(culm - 41.0) <= 2.0
        quiet = LinkModel(
            zenith_transmittance=cfg.link.zenith_transmittance,
            system_efficiency_db=cfg.link.system_efficiency_db,
            slew_degradation_k=0.0,
        )
        assert culm > link_loss_db(76.0, 0.0, g, quiet) + 0.2


def test_criterion_6_campaign_reproduction():
    with report(6, "32-orbit campaign: counts, mean fidelity, margins"):
        start = time.perf_counter()
        result = run_campaign(default_config())
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        assert 700 <= result.total_fourfolds <= 1150
        assert abs(result.mean_fidelity - 0.80) <= 0.03
        for summary in result.per_state.values():
            assert summary.fidelity - 3.0 * summary.sigma > 2 / 3


def test_criterion_7_error_budget():
    with report(7, "per-source fidelity deficits match the published split"):
        budget = error_budget(default_config())
        published = {
            "double_pair": 0.06,
            "distinguishability": 0.10,
            "polarization": 0.03,
            "background": 0.04,
        }
        for source, target in published.items():
            assert abs(budget[source] - target) <= 0.02


def test_criterion_8_classical_baseline():
    with report(8, "measure-and-resend converges to the 2/3 limit"):
        rng = np.random.default_rng(123456)
        value = classical_baseline(10**6, rng)
        assert abs(value - 2 / 3) < 0.002


def test_criterion_9_counting_statistics():
    with report(9, "fidelity ratio and propagated sigma behave"):
        f, sigma = estimate_fidelity(8, 2)
        assert f == 0.8
        assert sigma == np.sqrt(8 * 2 / 10**3)
        assert round(sigma, 4) == 0.1265

        base = default_config()
        samples = {label: [] for label in base.input_schedule}
        formula = {label: [] for label in base.input_schedule}
        for seed in range(100):
            result = run_campaign(default_config(seed=90000 + seed))
            for label, summary in result.per_state.items():
                samples[label].append(summary.fidelity)
                formula[label].append(summary.sigma)
        for label in samples:
            empirical = np.std(samples[label], ddof=1)
            predicted = np.mean(formula[label])
            assert abs(empirical - predicted) / predicted < 0.20


def test_criterion_10_fibre_comparison():
    with report(10, "1200 km fibre: 240 dB, waiting time band"):
        out = fibre_comparison(8210.0, 1200.0, 0.2)
        assert abs(out.total_loss_db - 240.0) < 1e-9
        assert 1e11 < out.expected_wait_years < 1e13


def _oracle_average_fidelity(amps, f_ent, m):
    """From-scratch three-qubit conditioning, independent of the package."""
    chi = amps / np.linalg.norm(amps)
    rho_in = np.outer(chi, chi.conj())
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    p = (4 * f_ent - 1) / 3
    resource = p * np.outer(phi, phi.conj()) + (1 - p) * np.eye(4) / 4
    rho = np.kron(rho_in, resource)

    plus = np.zeros((4, 4), dtype=complex)
    plus[0, 0] = plus[3, 3] = 0.5
    plus[0, 3] = plus[3, 0] = 0.5 * m
    minus = plus.copy()
    minus[0, 3] = minus[3, 0] = -0.5 * m
    z = np.diag([1.0, -1.0]).astype(complex)

    weighted = total = 0.0
    for effect, flip in ((plus, False), (minus, True)):
        big = np.kron(effect, np.eye(2, dtype=complex))
        prob = float(np.real(np.trace(big @ rho)))
        rho3 = np.einsum("ijkijm->km", (big @ rho).reshape(2, 2, 2, 2, 2, 2)) / prob
        if flip:
            rho3 = z @ rho3 @ z
        weighted += prob * float(np.real(chi.conj() @ rho3 @ chi))
        total += prob
    return weighted / total


def test_criterion_11_oracle_equivalence():
    with report(11, "teleporter matches brute-force conditioning"):
        rng = np.random.default_rng(777)
        for _ in range(200):
            amps = rng.normal(size=2) + 1j * rng.normal(size=2)
            f_ent = rng.uniform(0.25, 1.0)
            m = rng.uniform(0.0, 1.0)
            expected = _oracle_average_fidelity(amps, f_ent, m)
            got = teleport_expected(
                PureState(amps), f_ent, BsmModel(m)
            ).average_fidelity
            assert abs(got - expected) < 1e-10


def test_monte_carlo_agrees_with_analytic_tier():
    # Cross-tier consistency backing criteria 6 and 7: the sampled per-state
    # fidelities sit within three of their own sigmas of the exact pipeline.
    cfg = default_config()
    expected = analytic_fidelities(cfg)
    result = run_campaign(cfg)
    for label, summary in result.per_state.items():
        assert abs(summary.fidelity - expected[label]) < 3 * summary.sigma
