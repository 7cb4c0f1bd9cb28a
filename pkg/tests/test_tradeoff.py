import json

import numpy as np
import pytest

from qmetro.errors import InputError, NumericalInconsistencyError
from qmetro.fisher import fisher_bundle, mixed_bundle, pure_bundle
from qmetro.radar import radar_fisher, signal
from qmetro.states import MixedState, qubit_fixture, qutrit_fixture
from qmetro.tradeoff import (chen_bound, gill_massar_bound, incompatibility_moduli, matsumoto_lower,
                             report, tight_bound, tight_bound_from_moduli)

from conftest import random_pure_instance

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def test_fully_incompatible_pair():
    assert tight_bound(np.eye(2), J2) == pytest.approx(1.0)


def test_compatible_pair():
    assert tight_bound(np.eye(2), np.zeros((2, 2))) == pytest.approx(2.0)


def test_radar_biphoton_bound():
    b = radar_fisher(signal(1.0, 0.6))
    assert tight_bound(b.F_Q, b.F_Im) == pytest.approx(1.6, abs=1e-12)


def test_bound_closed_form_random_beta():
    for beta in np.linspace(0, 1, 11):
        assert tight_bound(np.eye(2), beta * J2) == pytest.approx(1 + np.sqrt(1 - beta ** 2), abs=1e-12)


def test_moduli_clamped_and_rejected():
    lam = incompatibility_moduli(np.eye(2), (1 + 5e-10) * J2)
    assert np.all(lam <= 1.0)
    with pytest.raises(NumericalInconsistencyError):
        incompatibility_moduli(np.eye(2), 1.01 * J2)
    with pytest.raises(NumericalInconsistencyError):
        tight_bound_from_moduli([1.1])


def test_gill_massar():
    assert gill_massar_bound(2) == 1
    assert gill_massar_bound(3) == 2
    with pytest.raises(InputError):
        gill_massar_bound(1)


def test_gill_massar_recovery_qubit():
    b = pure_bundle(qubit_fixture(0.3, 0.6))
    lam = incompatibility_moduli(b.F_Q, b.F_Im)
    np.testing.assert_allclose(lam, 1.0, atol=1e-9)
    assert tight_bound(b.F_Q, b.F_Im) == pytest.approx(gill_massar_bound(2), abs=1e-9)


def test_gill_massar_recovery_generic_qutrit(rng):
    # four real parameters of a generic qutrit are 2d - 2
    for _ in range(20):
        st = random_pure_instance(rng, d=3, n=4)
        b = pure_bundle(st)
        np.testing.assert_allclose(incompatibility_moduli(b.F_Q, b.F_Im), 1.0, atol=1e-9)
        assert tight_bound(b.F_Q, b.F_Im) == pytest.approx(2.0, abs=1e-9)


def test_matsumoto():
    assert matsumoto_lower([1.0, 1.0]) == pytest.approx(4.0)
    assert matsumoto_lower([0.0, 0.0]) == pytest.approx(2.0)
    assert matsumoto_lower([0.8, 0.8]) == pytest.approx(2.5)


def test_chen():
    assert chen_bound(np.eye(2), J2, 0.25) == pytest.approx(1.5)
    assert chen_bound(np.eye(2), J2, 0.2) == pytest.approx(1.6)
    assert chen_bound(np.eye(3), np.zeros((3, 3))) == pytest.approx(3.0)
    with pytest.raises(InputError):
        chen_bound(np.eye(2), J2, 0.3)


def test_bound_chain_random(rng):
    for _ in range(300):
        b = pure_bundle(random_pure_instance(rng))
        t = tight_bound(b.F_Q, b.F_Im)
        c4 = chen_bound(b.F_Q, b.F_Im, 0.25)
        c5 = chen_bound(b.F_Q, b.F_Im, 0.2)
        assert t <= c4 + 1e-10 <= c5 + 2e-10 <= b.n + 3e-10


def test_tight_equals_n_iff_compatible(rng):
    assert tight_bound(np.diag([2.0, 3.0, 1.0]), np.zeros((3, 3))) == 3.0
    for _ in range(50):
        b = pure_bundle(random_pure_instance(rng))
        if np.max(np.abs(b.F_Im)) > 1e-6:
            assert tight_bound(b.F_Q, b.F_Im) < b.n


def test_report_fields_and_json():
    st = qutrit_fixture(0.0, np.pi / 4)
    b = pure_bundle(st)
    rep = report(b, F_C=np.diag([0.5, 2.0]))
    assert rep.gill_massar == 2
    assert rep.achieved == pytest.approx(0.5 / 0.75 + 0.5)
    assert rep.gap == pytest.approx(rep.tight_bound - rep.achieved)
    assert rep.achieved_inverse == pytest.approx(0.75 / 0.5 + 4 / 2)
    d = json.loads(rep.to_json())
    assert d["schema"] == "1" and d["note"] == "tight for pure states"
    assert d["tight_bound"] == pytest.approx(1 + np.sqrt(2 / 3))
    no_c = report(b)
    assert no_c.achieved is None and no_c.gap is None


def test_report_singular_cfim_has_no_inverse_metric():
    b = pure_bundle(qubit_fixture(0.1, 0.5))
    rep = report(b, F_C=np.diag([0.0, 1.0]))
    assert rep.achieved_inverse is None


def test_mixed_report_flag():
    def rho(x):
        v = np.array([np.cos(x[0]), np.exp(1j * x[1]) * np.sin(x[0])])
        return 0.9 * np.outer(v, v.conj()) + 0.05 * np.eye(2)

    b = mixed_bundle(MixedState(rho, [0.6, 0.3]))
    rep = report(b)
    assert rep.mixed and rep.note == "upper bound, not guaranteed tight"
    assert rep.tight_bound <= rep.n


def test_one_parameter_bound():
    b = fisher_bundle(np.array([[0, 1.0]]))
    assert tight_bound(b.F_Q, b.F_Im) == 1.0
