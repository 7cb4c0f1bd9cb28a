"""SLD vectors, the Fisher bundle F = F_Q + i F_Im, and classical Fisher
information of projective measurements."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError, NumericalInconsistencyError, SingularFisherError, SingularOutcomeError
from .states import EIG_FLOOR, MixedState, PureState, purify

HERM_TOL = 1e-10
P_FLOOR = 1e-12
DP_FLOOR = 1e-9


def extend(vec: np.ndarray, ancilla_dim: int = 1) -> np.ndarray:
    """``vec ⊗ |0>`` on system ⊗ ancilla (system index major)."""
    if ancilla_dim < 1:
        raise InputError("ancilla_dim must be at least 1")
    xi = np.zeros(ancilla_dim, dtype=complex)
    xi[0] = 1.0
    return np.kron(np.asarray(vec, dtype=complex), xi)


def sld_vectors(state: PureState, ancilla_dim: int = 1) -> np.ndarray:
    """Rows ``|l_j> = (2|d_j psi> + 2<d_j psi|psi>|psi>) ⊗ |xi>``."""
    state.check()
    psi = state.vector()
    dpsi = state.derivatives()
    if dpsi.shape[1] != len(psi):
        raise InputError("derivative vectors do not match the state dimension")
    rows = [2.0 * d + 2.0 * np.vdot(d, psi) * psi for d in dpsi]
    return np.array([extend(r, ancilla_dim) for r in rows])


def mixed_sld_matrices(state: MixedState) -> np.ndarray:
    """SLD operators solving ``d_j rho = (rho L_j + L_j rho) / 2``.

    Entries are solved in the eigenbasis of rho; pairs with
    ``p_a + p_b < 1e-12`` are set to zero.
    """
    rho = state.matrix()
    drho = state.derivatives()
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    denom = w[:, None] + w[None, :]
    mask = denom >= EIG_FLOOR
    out = []
    for d in drho:
        de = v.conj().T @ d @ v
        le = np.zeros_like(de)
        le[mask] = 2.0 * de[mask] / denom[mask]
        L = v @ le @ v.conj().T
        out.append(0.5 * (L + L.conj().T))
    return np.array(out)


@dataclass(frozen=True)
class FisherBundle:
    """Gram matrix ``F_jk = <l_j|l_k>`` of the SLD vectors.

    ``system_dim`` is the dimension of the physical system (without
    ancilla or environment); it is needed for the Gill-Massar comparison.
    """

    l_vectors: np.ndarray
    F: np.ndarray
    system_dim: Optional[int] = None
    mixed: bool = False

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def F_Q(self) -> np.ndarray:
        return self.F.real

    @property
    def F_Im(self) -> np.ndarray:
        return self.F.imag

    def check(self, state_ext: Optional[np.ndarray] = None):
        F = self.F
        if np.max(np.abs(F - F.conj().T)) > HERM_TOL * max(1.0, np.max(np.abs(F))):
            raise NumericalInconsistencyError("F is not Hermitian")
        if np.linalg.eigvalsh(self.F_Q).min() < -HERM_TOL * max(1.0, np.max(np.abs(F))):
            raise NumericalInconsistencyError("F_Q is not positive semidefinite")
        if state_ext is not None and not self.mixed:
            ov = self.l_vectors.conj() @ state_ext
            if np.max(np.abs(ov), initial=0.0) > 1e-9 * max(1.0, np.sqrt(np.max(np.abs(F)))):
                raise NumericalInconsistencyError("SLD vectors are not orthogonal to the state")
        return self

    def transformed(self, J: np.ndarray) -> "FisherBundle":
        """Bundle of the reparametrized vectors ``l'_j = sum_k J_jk l_k``."""
        J = np.asarray(J, dtype=float)
        return fisher_bundle(J @ self.l_vectors, system_dim=self.system_dim, mixed=self.mixed)


def fisher_bundle(l_vectors, system_dim: Optional[int] = None, mixed: bool = False) -> FisherBundle:
    lv = np.atleast_2d(np.asarray(l_vectors, dtype=complex))
    F = lv.conj() @ lv.T
    F = 0.5 * (F + F.conj().T)
    return FisherBundle(lv, F, system_dim=system_dim, mixed=mixed)


def pure_bundle(state: PureState, ancilla_dim: int = 1) -> FisherBundle:
    return fisher_bundle(sld_vectors(state, ancilla_dim), system_dim=state.dim).check(
        extend(state.vector(), ancilla_dim))


def mixed_bundle(state: MixedState) -> FisherBundle:
    """Bundle with ``F_jk = Tr(rho L_j L_k)``.

    The vectors are ``(I_E ⊗ L_j)|Psi>`` for the eigen-form purification
    ``|Psi>``, whose Gram matrix is exactly ``Tr(rho L_j L_k)``.
    """
    state.check()
    Ls = mixed_sld_matrices(state)
    pur = purify(state).vector()
    d = state.dim
    lv = np.array([np.kron(np.eye(d), L) @ pur for L in Ls])
    return fisher_bundle(lv, system_dim=d, mixed=True).check()


def inverse_sqrt_psd(F_Q: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """``F_Q^{-1/2}`` by symmetric eigendecomposition.

    Raises SingularFisherError naming the uninformative parameter
    direction if an eigenvalue is below ``floor`` (relative to the largest).
    """
    F_Q = 0.5 * (F_Q + F_Q.T)
    w, v = np.linalg.eigh(F_Q)
    scale = max(np.max(np.abs(w)), 1.0)
    if w[0] < floor * scale:
        raise SingularFisherError(
            "quantum Fisher information matrix is singular; null direction "
            + np.array2string(v[:, 0], precision=6),
            null_direction=v[:, 0],
        )
    return (v / np.sqrt(w)) @ v.T


def outcome_probabilities(state_ext: np.ndarray, l_vectors: np.ndarray, basis: np.ndarray):
    """Probabilities and their parameter derivatives.

    ``basis`` holds the measurement bras as rows (``<m| = basis[m]``).
    Uses ``d_j p_m = Re(<Psi|m><m|l_j>)``.
    """
    amp = basis @ state_ext
    p = np.abs(amp) ** 2
    dp = np.real(amp.conj()[None, :] * (np.atleast_2d(l_vectors) @ basis.T))
    return p, dp


def classical_fisher_from_probabilities(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    """``sum_m dp_j dp_k / p`` with the small-probability rules.

    Outcomes with ``p < 1e-12`` are skipped when every derivative is below
    1e-9; otherwise a SingularOutcomeError is raised.
    """
    p = np.asarray(p, dtype=float)
    dp = np.atleast_2d(np.asarray(dp, dtype=float))
    small = p < P_FLOOR
    if np.any(small):
        bad = small & np.any(np.abs(dp) >= DP_FLOOR, axis=0)
        if np.any(bad):
            raise SingularOutcomeError(
                f"outcomes {np.flatnonzero(bad).tolist()} have vanishing probability but "
                "non-vanishing derivative; perturb the parameters or supply a limit rule")
    keep = ~small
    g = dp[:, keep] / np.sqrt(p[keep])
    return g @ g.T


def cfim(state_ext: np.ndarray, l_vectors: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Classical Fisher information matrix of a projective measurement."""
    basis = np.asarray(basis, dtype=complex)
    gram = basis @ basis.conj().T
    if np.max(np.abs(gram - np.eye(len(basis)))) > 1e-9:
        raise InputError("measurement basis is not orthonormal")
    p, dp = outcome_probabilities(state_ext, l_vectors, basis)
    return classical_fisher_from_probabilities(p, dp)


def trace_ratio(F_Q: np.ndarray, F_C: np.ndarray) -> float:
    """``Tr(F_Q^{-1} F_C)``."""
    S = inverse_sqrt_psd(F_Q)
    return float(np.trace(S @ F_C @ S))
