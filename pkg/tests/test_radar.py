import csv
import io

import numpy as np
import pytest

from qmetro.errors import InputError
from qmetro.fisher import cfim, trace_ratio
from qmetro.radar import (RadarModel, doppler_factor, optimal_radar_measurement, outcome_model,
                          product_from_cfim, radar_fisher, range_velocity, reference_overlaps,
                          refined_ak_bound, returned_state, signal, simulate)

from conftest import haar_basis


# -- time-domain oracles ---------------------------------------------------------

def _single_wave(t, sigma, tb, wb):
    return (2 * sigma ** 2 / np.pi) ** 0.25 * np.exp(-(t - tb) ** 2 * sigma ** 2 - 1j * wb * (t - tb))


def _single_basis(t, sigma, tb, wb):
    e1 = _single_wave(t, sigma, tb, wb)
    x = sigma * (t - tb)
    return np.array([e1, 2 * x * e1, (1 - 4 * x ** 2) / np.sqrt(2) * e1])


def _bi_wave(t, ti, sigma, si, kappa, tb, wb, t0=0.0, wi=3.0):
    n = np.sqrt(2 * sigma * si / np.pi) * (1 - kappa ** 2) ** 0.25
    u, w = t - tb, ti - t0
    return n * np.exp(-1j * wb * u - 1j * wi * w - u ** 2 * sigma ** 2 - w ** 2 * si ** 2
                      + 2 * kappa * u * w * sigma * si)


def _bi_basis(t, ti, sigma, si, kappa, tb, wb):
    e1 = _bi_wave(t, ti, sigma, si, kappa, tb, wb)
    u, w = sigma * (t - tb), si * ti
    return np.array([e1, np.sqrt(2 * (1 - kappa)) * (u + w) * e1, np.sqrt(2 * (1 + kappa)) * (u - w) * e1])


def _phase_fixed(c):
    return c * np.exp(-1j * np.angle(c[0]))


@pytest.mark.parametrize("d, dw", [(0.0, 0.0), (0.05, 0.0), (0.0, 0.08), (0.1, -0.15), (-0.3, 0.4)])
def test_single_photon_overlaps_quadrature(d, dw):
    sigma, wref, tref = 1.4, 6.0, 0.3
    t = np.linspace(tref - 10, tref + 10, 200001)
    dt = t[1] - t[0]
    E = _single_basis(t, sigma, tref, wref)
    psi = _single_wave(t, sigma, tref + d, wref + dw)
    quad = (E.conj() @ psi) * dt
    c, _ = reference_overlaps(signal(sigma, photons="single", omega_bar=wref + dw), d, dw)
    np.testing.assert_allclose(_phase_fixed(c), _phase_fixed(quad), atol=1e-9)


@pytest.mark.parametrize("kappa", [0.0, 0.5, 0.8])
@pytest.mark.parametrize("d, dw", [(0.0, 0.0), (0.07, -0.05), (-0.2, 0.3)])
def test_biphoton_overlaps_quadrature(kappa, d, dw):
    sigma, si, wref = 1.2, 0.7, 5.0
    t = np.linspace(-8 / sigma, 8 / sigma, 801)
    ti = np.linspace(-8 / si, 8 / si, 801)
    T, TI = np.meshgrid(t, ti, indexing="ij")
    w = (t[1] - t[0]) * (ti[1] - ti[0])
    E = _bi_basis(T, TI, sigma, si, kappa, 0.0, wref)
    psi = _bi_wave(T, TI, sigma, si, kappa, d, wref + dw)
    quad = np.array([np.sum(e.conj() * psi) for e in E]) * w
    np.testing.assert_allclose(np.sum(np.abs(E[0]) ** 2) * w, 1.0, atol=1e-9)
    c, _ = reference_overlaps(signal(sigma, kappa, omega_bar=wref + dw), d, dw)
    np.testing.assert_allclose(_phase_fixed(c), _phase_fixed(quad), atol=1e-8)


@pytest.mark.parametrize("kappa", [0.0, 0.6])
def test_biphoton_derivative_quadrature(kappa):
    sigma, si, wb = 0.9, 1.3, 4.0
    t = np.linspace(-8 / sigma, 8 / sigma, 801)
    ti = np.linspace(-8 / si, 8 / si, 801)
    T, TI = np.meshgrid(t, ti, indexing="ij")
    w = (t[1] - t[0]) * (ti[1] - ti[0])
    E = _bi_basis(T, TI, sigma, si, kappa, 0.0, wb)
    h = 1e-5
    d_t = (_bi_wave(T, TI, sigma, si, kappa, h, wb) - _bi_wave(T, TI, sigma, si, kappa, -h, wb)) / (2 * h)
    d_w = (_bi_wave(T, TI, sigma, si, kappa, 0, wb + h) - _bi_wave(T, TI, sigma, si, kappa, 0, wb - h)) / (2 * h)
    emb = signal(sigma, kappa, omega_bar=wb).embedding
    for j, dd in enumerate((d_t, d_w)):
        quad = np.array([np.sum(e.conj() * dd) for e in E]) * w
        np.testing.assert_allclose(quad, emb.derivatives[j], atol=1e-7)


def test_overlap_derivatives_match_finite_difference():
    for sig in (signal(1.1, photons="single"), signal(0.8, 0.4)):
        d, dw, h = 0.13, -0.2, 1e-6
        _, dc = reference_overlaps(sig, d, dw)
        fd_t = (reference_overlaps(sig, d + h, dw)[0] - reference_overlaps(sig, d - h, dw)[0]) / (2 * h)
        fd_w = (reference_overlaps(sig, d, dw + h)[0] - reference_overlaps(sig, d, dw - h)[0]) / (2 * h)
        np.testing.assert_allclose(dc[0], fd_t, atol=1e-8)
        np.testing.assert_allclose(dc[1], fd_w, atol=1e-8)


def test_outcome_model_at_reference_matches_cfim():
    for sig in (signal(1.0, photons="single"), signal(1.5, 0.7)):
        opt = optimal_radar_measurement(sig)
        p, dp = outcome_model(sig, opt.measurement.basis, 0.0, 0.0)
        assert p[-1] == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(dp[:, -1], 0.0, atol=1e-14)
        keep = p > 1e-12
        F = (dp[:, keep] / p[keep]) @ dp[:, keep].T
        np.testing.assert_allclose(F, opt.F_C, atol=1e-12)


def test_outcome_model_leak_grows_off_reference():
    sig = signal(1.0, 0.3)
    basis = optimal_radar_measurement(sig).measurement.basis
    p, _ = outcome_model(sig, basis, 0.5, 0.5)
    assert p.sum() == pytest.approx(1.0)
    assert p[-1] > 1e-3


# -- model -----------------------------------------------------------------------

def test_returned_state_static():
    m = RadarModel(sigma0=1.3, omega0=7.0, t0=0.5, x=2.0, v=0.0, c=3.0)
    s = returned_state(m)
    assert (s.sigma, s.omega_bar) == (1.3, 7.0)
    assert s.t_bar == pytest.approx(0.5 + 4.0 / 3.0, abs=1e-15)
    assert returned_state(RadarModel(t0=0.25)).t_bar == 0.25


def test_returned_state_third_of_c():
    s = returned_state(RadarModel(sigma0=2.0, c=3.0, v=1.0))
    assert s.sigma == pytest.approx(1.0, abs=1e-15)


def test_transform_identities_random():
    rng = np.random.default_rng(8)
    for _ in range(500):
        c = rng.uniform(0.5, 5)
        m = RadarModel(sigma0=rng.uniform(0.1, 3), omega0=rng.uniform(1, 20), t0=rng.uniform(-1, 1),
                       kappa=rng.uniform(0, 0.99), c=c, x=rng.uniform(0, 10), v=rng.uniform(-0.9, 0.9) * c)
        s = returned_state(m)
        r = (m.c - m.v) / (m.c + m.v)
        assert abs(s.sigma - r * m.sigma0) < 1e-12
        assert abs(s.omega_bar - r * m.omega0) < 1e-12
        assert abs(s.t_bar - (m.t0 + 2 * m.x / (m.c - m.v))) < 1e-12
        x, v = range_velocity(s.t_bar, s.omega_bar, m)
        assert abs(x - m.x) < 1e-9 and abs(v - m.v) < 1e-12
        assert doppler_factor(m.c, m.v) == pytest.approx(r, abs=1e-15)


@pytest.mark.parametrize("kw", [dict(kappa=1.0), dict(kappa=-0.1), dict(v=1.0), dict(sigma0=0.0),
                                dict(photons="triple"), dict(photons="single", kappa=0.3)])
def test_model_validation(kw):
    with pytest.raises(InputError):
        RadarModel(**kw)


def test_refined_bound():
    assert refined_ak_bound(0.0) == 1.0
    assert refined_ak_bound(0.8) == pytest.approx(1 / 3, abs=1e-15)
    assert refined_ak_bound(0.5) == pytest.approx(np.sqrt(1 / 3))
    assert refined_ak_bound(1 - 1e-12) < 1e-5
    with pytest.raises(InputError):
        refined_ak_bound(1.0)


# -- optimal measurements --------------------------------------------------------

@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_separable_measurement(sigma):
    opt = optimal_radar_measurement(signal(sigma, photons="single"))
    np.testing.assert_allclose(opt.F_C, np.diag([2 * sigma ** 2, 1 / (2 * sigma ** 2)]), atol=1e-9)
    assert product_from_cfim(opt.F_C) == pytest.approx(1.0, abs=1e-9)
    assert len(opt.measurement.basis) == 3


@pytest.mark.parametrize("kappa", [0.0, 0.2, 0.5, 0.8, 0.95])
@pytest.mark.parametrize("sigma", [0.7, 1.0])
def test_entangled_measurement(kappa, sigma):
    sig = signal(sigma, kappa)
    opt = optimal_radar_measurement(sig)
    want = np.diag([2 * sigma ** 2 * (1 + kappa), 1 / (2 * sigma ** 2 * (1 - kappa))])
    np.testing.assert_allclose(opt.F_C, want, atol=1e-9)
    assert product_from_cfim(opt.F_C) == pytest.approx(refined_ak_bound(kappa), abs=1e-9)
    b = radar_fisher(sig)
    assert trace_ratio(b.F_Q, opt.F_C) == pytest.approx(1 + kappa, abs=1e-9)


@pytest.mark.parametrize("kappa", [0.0, 0.4, 0.9])
def test_no_basis_beats_bound(kappa):
    sig = signal(1.0, kappa)
    st = sig.state()
    b = radar_fisher(sig)
    for seed in range(200):
        F_C = cfim(st.vector(), b.l_vectors, haar_basis(3, seed))
        assert trace_ratio(b.F_Q, F_C) <= 1 + kappa + 1e-8


# -- Monte Carlo -------------------------------------------------------------------

def test_simulation_small_run():
    run = simulate(signal(1.0, 0.5), shots=20000, batches=30, seed=3)
    assert run.batches == 30 and run.failed == 0
    assert np.all(run.counts.sum(axis=1) == 20000)
    assert np.all(np.linalg.eigvalsh(run.empirical_cov) > 0)
    np.testing.assert_allclose(run.predicted_cov, np.linalg.inv(20000 * run.F_C))
    # estimates scatter around the truth on the scale of the CRB
    z = (run.estimates.mean(axis=0) - run.truth) / np.sqrt(np.diag(run.predicted_cov) / run.batches)
    assert np.all(np.abs(z) < 5)
    assert 0.5 < run.empirical_product / run.predicted_product < 1.5


def test_simulation_is_deterministic():
    a = simulate(signal(1.0, 0.2), shots=10000, batches=5, seed=11)
    b = simulate(signal(1.0, 0.2), shots=10000, batches=5, seed=11)
    assert a.to_csv() == b.to_csv()
    c = simulate(signal(1.0, 0.2), shots=10000, batches=5, seed=12)
    assert a.to_csv() != c.to_csv()


def test_simulation_csv_layout():
    run = simulate(signal(1.0, photons="single"), shots=10000, batches=4, seed=0)
    rows = list(csv.reader(io.StringIO(run.to_csv())))
    assert rows[0][:5] == ["kappa", "shots", "batch", "t_hat", "omega_hat"]
    assert len(rows) == 1 + 4 + 2
    assert {len(r) for r in rows} == {len(rows[0])}
    assert rows[-2][2] == "empirical" and rows[-1][2] == "predicted"
    assert float(rows[-1][-1]) == pytest.approx(1.0, abs=1e-9)


def test_simulation_reference_offset():
    sig = signal(1.0, 0.5)
    run = simulate(sig, shots=50000, batches=20, seed=1, reference_offset=(0.02, -0.03))
    assert run.failed == 0
    # measurement tuned to a wrong point still gives a consistent estimator
    z = (run.estimates.mean(axis=0) - run.truth) / np.sqrt(np.diag(run.predicted_cov) / run.batches)
    assert np.all(np.abs(z) < 5)
    # and less information than at the reference point
    local = optimal_radar_measurement(sig).F_C
    assert np.trace(np.linalg.solve(local, run.F_C)) < 2


def test_simulation_from_model_and_inputs():
    m = RadarModel(kappa=0.3, x=1.0, v=0.1)
    run = simulate(m, shots=10000, batches=3)
    assert run.kappa == 0.3
    assert run.truth[0] == pytest.approx(returned_state(m).t_bar)
    with pytest.raises(InputError):
        simulate(m, kappa=0.5, batches=3)
    with pytest.raises(InputError):
        simulate(signal(), shots=0)
    with pytest.raises(InputError):
        simulate("radar")
    s = simulate(signal(1.0, 0.0), kappa=0.6, shots=10000, batches=3)
    assert s.kappa == 0.6


def test_summary_fields():
    run = simulate(signal(1.0, 0.8), shots=10000, batches=5)
    d = run.summary()
    assert d["schema"] == "1" and d["batches"] == 5
    assert d["predicted_product"] == pytest.approx(1 / 3, abs=1e-9)
    assert d["refined_bound"] == pytest.approx(1 / 3)
