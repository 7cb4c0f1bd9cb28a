import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import unitary_group

from qmetro.states import custom_state


def random_unit(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_pure_instance(rng, d=None, n=None):
    """Random state and derivative vectors with Re<psi|d_j> = 0."""
    if d is None:
        d = int(rng.integers(2, 6))
    if n is None:
        n = int(rng.integers(2, min(4, 2 * d - 2) + 1))
    psi = random_unit(rng, d)
    dpsi = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    dpsi -= np.real(dpsi.conj() @ psi)[:, None] * psi[None, :]
    return custom_state(psi, dpsi, name=f"random-d{d}-n{n}")


def haar_basis(d, seed):
    """Rows of a Haar-random unitary, used as bras."""
    return unitary_group.rvs(d, random_state=seed)


def fock_ops(N):
    a = np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)
    return a, a.conj().T


def squeezed_frame(x, N=90):
    """Frame vectors D(eta) S(r)|n>, n = 0..3, in truncated Fock space."""
    a, ad = fock_ops(N)
    eta = x[0] + 1j * x[1]
    D = expm(eta * ad - np.conj(eta) * a)
    S = expm(0.5 * x[2] * (a @ a - ad @ ad))
    return (D @ S)[:, :4].T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
