"""Parametrized pure and mixed states with derivative access.

Continuous-variable examples are carried in small orthonormal "frame"
bases that move with the parameters (for instance ``D(eta) S(r) |n>``).
In such a frame the state vector is constant, so the derivatives must be
supplied analytically and finite differences of ``psi`` are meaningless;
those states are flagged with ``fixed_frame=False``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InputError

NORM_TOL = 1e-10
FD_STEP = 1e-6
EIG_FLOOR = 1e-12


def _step(x: float, h: float) -> float:
    return h * abs(x) if abs(x) > 1.0 else h


@dataclass(frozen=True)
class PureState:
    """A pure state family ``psi(x)`` evaluated at ``params``.

    ``dpsi(x)`` returns an ``(n, dim)`` array of partial derivatives; when it
    is None the derivatives come from central finite differences.
    """

    psi: Callable[[np.ndarray], np.ndarray]
    params: np.ndarray
    dpsi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    fixed_frame: bool = True
    labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        object.__setattr__(self, "params", np.atleast_1d(np.asarray(self.params, dtype=float)))

    @property
    def n(self) -> int:
        return len(self.params)

    @property
    def dim(self) -> int:
        return len(self.vector())

    def vector(self, x=None) -> np.ndarray:
        x = self.params if x is None else np.asarray(x, dtype=float)
        return np.asarray(self.psi(x), dtype=complex)

    def derivatives(self, x=None) -> np.ndarray:
        x = self.params if x is None else np.asarray(x, dtype=float)
        if self.dpsi is not None:
            return np.atleast_2d(np.asarray(self.dpsi(x), dtype=complex))
        if not self.fixed_frame:
            raise InputError(f"state {self.name!r} lives in a moving frame and needs analytic derivatives")
        at = self.with_params(x)
        return np.array([finite_difference_derivative(at, j) for j in range(self.n)])

    def with_params(self, x) -> "PureState":
        return PureState(self.psi, np.asarray(x, dtype=float), self.dpsi, self.name,
                         self.fixed_frame, self.labels)

    def check(self):
        v = self.vector()
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > NORM_TOL:
            raise InputError(f"state {self.name!r} is not normalized (norm {nrm:.12g})")
        return self


def finite_difference_derivative(state: PureState, j: int, h: float = FD_STEP) -> np.ndarray:
    """Central difference of ``psi`` along parameter ``j``.

    The displaced vectors are rephased so that their overlap with
    ``psi(x)`` is real and positive; the result is therefore the derivative
    in the gauge where ``<psi|dpsi>`` is zero.
    """
    if h <= 0:
        raise InputError("step must be positive")
    x = state.params
    step = _step(x[j], h)
    v0 = state.vector()
    out = []
    for sgn in (1.0, -1.0):
        xs = x.copy()
        xs[j] += sgn * step
        vs = state.vector(xs)
        ov = np.vdot(v0, vs)
        if abs(ov) > 0:
            vs = vs * (abs(ov) / ov)
        out.append(vs)
    return (out[0] - out[1]) / (2.0 * step)


def horizontal(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    """Remove the component of ``dpsi`` along ``psi`` that is pure phase."""
    return dpsi - 1j * np.imag(np.vdot(psi, dpsi)) * psi


# -- fixtures -----------------------------------------------------------------

def qubit_fixture(alpha: float, theta: float) -> PureState:
    """``(e^{i alpha} sin theta, cos theta)`` with parameters (alpha, theta)."""

    def psi(x):
        a, t = x
        return np.array([np.exp(1j * a) * np.sin(t), np.cos(t)])

    def dpsi(x):
        a, t = x
        return np.array([
            [1j * np.exp(1j * a) * np.sin(t), 0.0],
            [np.exp(1j * a) * np.cos(t), -np.sin(t)],
        ])

    return PureState(psi, [alpha, theta], dpsi, name="qubit")


def qutrit_fixture(alpha1: float, theta1: float) -> PureState:
    """Three-level state with alpha_2 = 0 and theta_2 = pi/4 held fixed."""
    s2 = np.sqrt(2.0) / 2.0

    def psi(x):
        a, t = x
        return np.array([s2 * np.exp(1j * a) * np.sin(t), s2 * np.sin(t), np.cos(t)])

    def dpsi(x):
        a, t = x
        return np.array([
            [1j * s2 * np.exp(1j * a) * np.sin(t), 0.0, 0.0],
            [s2 * np.exp(1j * a) * np.cos(t), s2 * np.cos(t), -np.sin(t)],
        ])

    return PureState(psi, [alpha1, theta1], dpsi, name="qutrit")


def squeezed_fixture(x1: float, x2: float, x3: float) -> PureState:
    """Squeezed coherent state ``D(eta) S(r)|0>`` in the frame ``D S |n>``, n < 4.

    Parameters are ``(Re eta, Im eta, r)``.
    """

    def psi(x):
        return np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)

    def dpsi(x):
        a, b, r = x
        return np.array([
            [-1j * b, np.exp(r), 0.0, 0.0],
            [1j * a, 1j * np.exp(-r), 0.0, 0.0],
            [0.0, 0.0, -np.sqrt(2.0) / 2.0, 0.0],
        ])

    return PureState(psi, [x1, x2, x3], dpsi, name="squeezed", fixed_frame=False,
                     labels=("|eta,r,0>", "|eta,r,1>", "|eta,r,2>", "|eta,r,3>"))


def custom_state(psi, dpsi, name: str = "custom_matrix") -> PureState:
    """State given only at one point by explicit vector and derivatives."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.atleast_2d(np.asarray(dpsi, dtype=complex))
    if dpsi.shape[1] != len(psi):
        raise InputError(f"derivative length {dpsi.shape[1]} does not match state length {len(psi)}")
    n = dpsi.shape[0]
    return PureState(lambda x: psi, np.zeros(n), lambda x: dpsi, name=name, fixed_frame=False)


@dataclass(frozen=True)
class SubspaceEmbedding:
    """A labeled orthonormal basis together with the state and its
    derivatives expanded in it."""

    labels: tuple
    state: np.ndarray
    derivatives: np.ndarray
    param_names: tuple = field(default=())

    def as_pure_state(self, name: str = "embedded") -> PureState:
        st = custom_state(self.state, self.derivatives, name=name)
        return PureState(st.psi, st.params, st.dpsi, name=name, fixed_frame=False, labels=self.labels)


# -- mixed states -------------------------------------------------------------

@dataclass(frozen=True)
class MixedState:
    """A density-matrix family ``rho(x)`` evaluated at ``params``."""

    rho: Callable[[np.ndarray], np.ndarray]
    params: np.ndarray
    drho: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "mixed"

    def __post_init__(self):
        object.__setattr__(self, "params", np.atleast_1d(np.asarray(self.params, dtype=float)))

    @property
    def n(self) -> int:
        return len(self.params)

    @property
    def dim(self) -> int:
        return self.matrix().shape[0]

    def matrix(self, x=None) -> np.ndarray:
        x = self.params if x is None else np.asarray(x, dtype=float)
        return np.asarray(self.rho(x), dtype=complex)

    def derivatives(self, x=None) -> np.ndarray:
        x = self.params if x is None else np.asarray(x, dtype=float)
        if self.drho is not None:
            return np.asarray(self.drho(x), dtype=complex).reshape(self.n, self.dim, self.dim)
        out = []
        for j in range(self.n):
            step = _step(x[j], FD_STEP)
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            out.append((self.matrix(xp) - self.matrix(xm)) / (2 * step))
        return np.array(out)

    def check(self):
        r = self.matrix()
        if np.max(np.abs(r - r.conj().T)) > NORM_TOL:
            raise InputError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1.0) > NORM_TOL:
            raise InputError("density matrix does not have unit trace")
        if np.linalg.eigvalsh(r).min() < -NORM_TOL:
            raise InputError("density matrix is not positive semidefinite")
        return self


def _purification_matrix(rho: np.ndarray) -> np.ndarray:
    # row e holds sqrt(lambda_e) * psi_e; eigenvalues descending, pivot entry real positive
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    w = np.where(w < EIG_FLOOR, 0.0, w)
    for k in range(v.shape[1]):
        piv = np.argmax(np.abs(v[:, k]))
        v[:, k] *= abs(v[piv, k]) / v[piv, k]
    return np.sqrt(w)[:, None] * v.T


def partial_trace_env(vec: np.ndarray, env_dim: int) -> np.ndarray:
    """Reduced density matrix of ``vec`` on (env ⊗ system), tracing the env."""
    x = vec.reshape(env_dim, -1)
    return x.T @ x.conj()


def purify(state: MixedState, h: float = FD_STEP) -> PureState:
    """Eigen-form purification ``sum_j sqrt(p_j) |j_E>|psi_j>``.

    Derivatives use central differences in which the purification at the
    displaced points is first rotated on the environment (unitary Procrustes
    fit) onto the purification at ``x``; this removes the arbitrariness of
    eigenvector phases and orderings, including at degeneracies.
    """
    state.check()
    x0 = state.params

    def psi(x):
        return _purification_matrix(state.matrix(x)).reshape(-1)

    def dpsi(x):
        base = _purification_matrix(state.matrix(x))
        out = []
        for j in range(len(x)):
            step = _step(x[j], h)
            pair = []
            for sgn in (1.0, -1.0):
                xs = np.array(x, dtype=float)
                xs[j] += sgn * step
                disp = _purification_matrix(state.matrix(xs))
                u, _, vh = np.linalg.svd(disp @ base.conj().T)
                pair.append((vh.conj().T @ u.conj().T) @ disp)
            out.append(((pair[0] - pair[1]) / (2 * step)).reshape(-1))
        return np.array(out)

    return PureState(psi, x0, dpsi, name=f"purified[{state.name}]", fixed_frame=False)
