"""Optimal observables and the projective measurement that saturates the
tight tradeoff bound."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import InputError, NumericalInconsistencyError, SaturationError
from .fisher import FisherBundle, cfim, extend, inverse_sqrt_psd, pure_bundle
from .linalg import (BlockForm, complete_basis, dense_first_column_orthogonal,
                     gram_schmidt, is_orthonormal, skew_block_diagonalize)
from .states import PureState
from .tradeoff import TradeoffReport, report

DEGENERATE_TOL = 1e-9
REAL_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-8


def gap_tolerance() -> float:
    """Saturation-gap tolerance, overridable through ``QMETRO_TOL``."""
    raw = os.environ.get("QMETRO_TOL")
    if raw is None or raw.strip() == "":
        return DEFAULT_GAP_TOL
    try:
        tol = float(raw)
    except ValueError as exc:
        raise InputError(f"QMETRO_TOL must be a number, got {raw!r}") from exc
    if not tol > 0:
        raise InputError("QMETRO_TOL must be positive")
    return tol


def canonical_parametrization(bundle: FisherBundle):
    """Reparametrize so that F_Q = I and F_Im is in canonical block form.

    Returns ``(J, bundle', blocks)`` with ``l'_j = sum_k J_jk l_k`` and
    ``J = P F_Q^{-1/2}``.  In terms of parameters, ``x' = J^{-T} x``; Fisher
    matrices transform as ``F' = J F J^T``.
    """
    S = inverse_sqrt_psd(bundle.F_Q)
    tilde = 0.5 * (S @ bundle.F_Im @ S - (S @ bundle.F_Im @ S).T)
    blocks = skew_block_diagonalize(tilde)
    J = blocks.P @ S
    new = bundle.transformed(J)
    if np.max(np.abs(new.F_Q - np.eye(bundle.n))) > 1e-9:
        raise NumericalInconsistencyError("canonical reparametrization did not normalize F_Q")
    if np.max(np.abs(new.F_Im - blocks.canonical())) > 1e-9:
        raise NumericalInconsistencyError("canonical reparametrization did not block-diagonalize F_Im")
    return J, new, blocks


def block_coefficients(beta: float):
    """``(a, b)`` for a pair with ``<l_1|l_2> = i beta`` and ``|beta| < 1``."""
    phi = np.arcsin(beta)
    c = np.cos(phi)
    return (1.0 + c) / (2.0 * c), -np.sin(phi) / (2.0 * c)


def nondegenerate_pair(l1, l2, beta):
    a, b = block_coefficients(beta)
    return a * l1 - 1j * b * l2, 1j * b * l1 + a * l2


def degenerate_pair(l1, l_perp, beta_sign: float = 1.0, varphi: float = 0.0):
    """Observables for a pair with ``|beta| = 1``.

    ``l_perp`` must be a unit vector orthogonal to the state, with
    ``Im<l_perp|l1> = 0``.
    """
    s, c = np.sin(2 * varphi), np.cos(2 * varphi)
    o1 = 0.5 * (1 - s) * l1 + 0.5j * beta_sign * c * l_perp
    o2 = 0.5j * beta_sign * (1 + s) * l1 + 0.5 * c * l_perp
    return o1, o2


@dataclass
class OptimalObservables:
    o_vectors: np.ndarray
    used_ancilla: bool
    perp_vectors: np.ndarray
    varphi: float
    betas: np.ndarray
    degenerate: list = field(default_factory=list)

    def check(self, state_ext: Optional[np.ndarray] = None):
        o = self.o_vectors
        G = o.conj() @ o.T
        scale = max(1.0, float(np.max(np.abs(G), initial=0.0)))
        if np.max(np.abs(G.imag), initial=0.0) > 1e-9 * scale:
            raise NumericalInconsistencyError("observable vectors have complex mutual inner products")
        if state_ext is not None:
            if np.max(np.abs(o.conj() @ state_ext), initial=0.0) > 1e-9 * np.sqrt(scale):
                raise NumericalInconsistencyError("observable vectors are not orthogonal to the state")
        return self


def optimal_observables(bundle: FisherBundle, blocks: BlockForm, state_ext: np.ndarray,
                        perp_vectors=None, varphi: float = 0.0) -> OptimalObservables:
    """Build ``o_j`` for a bundle already in canonical form.

    ``perp_vectors`` supplies one unit vector per degenerate block; each
    must be orthogonal to the state, every ``l_j`` and the other supplied
    vectors.
    """
    lv = bundle.l_vectors
    if np.max(np.abs(bundle.F_Q - np.eye(bundle.n))) > 1e-9:
        raise InputError("bundle is not in canonical parametrization")
    degenerate = [j for j, b in enumerate(blocks.betas) if b >= 1.0 - DEGENERATE_TOL]
    perp = np.zeros((0, lv.shape[1]), dtype=complex) if perp_vectors is None else \
        np.atleast_2d(np.asarray(perp_vectors, dtype=complex))
    if len(perp) < len(degenerate):
        raise InputError(
            f"{len(degenerate)} block(s) have |beta| = 1 but only {len(perp)} orthogonal "
            "direction(s) are available; enlarge the ancilla")
    if len(perp):
        stacked = np.vstack([state_ext[None, :], lv, perp])
        cross = perp.conj() @ stacked.T
        expect = np.zeros_like(cross)
        expect[:, 1 + len(lv):] = np.eye(len(perp))
        if np.max(np.abs(cross - expect)) > 1e-9:
            raise InputError("perp vectors must be orthonormal and orthogonal to the state and all l_j")

    out = np.array(lv, dtype=complex)
    used = 0
    for j, beta in enumerate(blocks.betas):
        i1, i2 = 2 * j, 2 * j + 1
        if j in degenerate:
            out[i1], out[i2] = degenerate_pair(lv[i1], perp[used], 1.0, varphi)
            used += 1
        else:
            out[i1], out[i2] = nondegenerate_pair(lv[i1], lv[i2], beta)
    return OptimalObservables(out, used_ancilla=False, perp_vectors=perp[:used], varphi=varphi,
                              betas=np.array(blocks.betas), degenerate=degenerate).check(state_ext)


@dataclass
class Measurement:
    """Projective measurement; ``basis[m]`` holds the bra ``<m|``."""

    basis: np.ndarray
    A: np.ndarray
    B: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def probabilities(self, state_ext) -> np.ndarray:
        return np.abs(self.basis @ np.asarray(state_ext, dtype=complex)) ** 2

    def to_dict(self) -> dict:
        def pairs(m):
            return np.stack([m.real, m.imag], axis=-1).tolist()

        meta = {}
        for k, v in self.metadata.items():
            if isinstance(v, np.ndarray):
                meta[k] = pairs(v) if np.iscomplexobj(v) else v.tolist()
            elif isinstance(v, (np.floating, np.integer)):
                meta[k] = v.item()
            else:
                meta[k] = v
        return {"dim": self.dim, "basis": pairs(self.basis), "metadata": meta}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Measurement":
        arr = np.asarray(d["basis"], dtype=float)
        basis = arr[..., 0] + 1j * arr[..., 1]
        if not is_orthonormal(basis, 1e-9):
            raise InputError("measurement basis is not orthonormal")
        return cls(basis, np.conj(basis).T, np.eye(len(basis)), dict(d.get("metadata", {})))


def build_measurement(state_ext, o_vectors, B=None, completion=None) -> Measurement:
    """Rows of ``U = B A^{-1}`` from the state and observable vectors.

    ``A`` has columns ``a_0 = state, a_1..`` from Gram-Schmidt of
    ``{state, o_1, ..., o_n}`` followed by a completion, which may be given
    explicitly.  ``B`` defaults to the Householder matrix with a uniform
    first column.
    """
    state_ext = np.asarray(state_ext, dtype=complex)
    o = np.atleast_2d(np.asarray(o_vectors, dtype=complex))
    D = len(state_ext)
    G = o.conj() @ o.T
    if np.max(np.abs(G.imag), initial=0.0) > 1e-9 * max(1.0, float(np.max(np.abs(G), initial=0.0))):
        raise NumericalInconsistencyError("Im<o_j|o_k> is nonzero; no measurement realizes these observables")
    a, dropped = gram_schmidt(np.vstack([state_ext[None, :], o]))
    if 0 in dropped:
        raise InputError("state vector is zero")
    if completion is not None:
        extra = np.atleast_2d(np.asarray(completion, dtype=complex))
        a = np.vstack([a, extra])
        if not is_orthonormal(a, 1e-9):
            raise InputError("completion vectors are not orthonormal to the Gram-Schmidt set")
    a = complete_basis(a, D)
    if B is None:
        B = dense_first_column_orthogonal(D)
    B = np.asarray(B, dtype=float)
    if B.shape != (D, D) or np.max(np.abs(B.T @ B - np.eye(D))) > 1e-10:
        raise InputError(f"B must be a real orthogonal {D}x{D} matrix")
    if np.min(np.abs(B[:, 0])) < 1e-12:
        raise InputError("first column of B has a zero entry")
    A = a.T
    U = B @ a.conj()
    amp = U @ state_ext
    U = U * (np.abs(amp) / amp)[:, None]
    amp = U @ state_ext
    f = (U @ o.T) / amp[:, None]
    if np.max(np.abs(f.imag), initial=0.0) > REAL_TOL * max(1.0, float(np.max(np.abs(f), initial=0.0))):
        raise NumericalInconsistencyError("f_j(m) = <m|o_j>/<m|psi> is not real")
    return Measurement(U, A, B, {"dropped": list(dropped), "f": f.real})


@dataclass
class OptimalResult:
    state_ext: np.ndarray
    bundle: FisherBundle
    J: np.ndarray
    canonical: FisherBundle
    blocks: BlockForm
    observables: OptimalObservables
    measurement: Measurement
    ancilla_dim: int

    @property
    def F_C(self) -> np.ndarray:
        return cfim(self.state_ext, self.bundle.l_vectors, self.measurement.basis)

    def canonical_F_C(self) -> np.ndarray:
        return cfim(self.state_ext, self.canonical.l_vectors, self.measurement.basis)

    def errors(self) -> np.ndarray:
        """``eps_j^2 = ||o_j - l_j||^2`` in the canonical parametrization."""
        d = self.observables.o_vectors - self.canonical.l_vectors
        return np.sum(np.abs(d) ** 2, axis=1)


def _degenerate_count(bundle: FisherBundle) -> int:
    _, _, blocks = canonical_parametrization(bundle)
    return int(np.sum(blocks.betas >= 1.0 - DEGENERATE_TOL))


def _system_perp(state_ext, l_vectors, k):
    # orthonormal directions outside span{state, l_j}
    q, _ = gram_schmidt(np.vstack([state_ext[None, :], l_vectors]), tol=1e-10)
    if len(q) + k > len(state_ext):
        raise InputError(
            f"system space has no room for {k} orthogonal direction(s); use an ancilla")
    full = complete_basis(q, len(state_ext))
    return full[len(q):len(q) + k]


def optimal_measurement(state: PureState, ancilla: Union[str, int] = "auto",
                        varphi: float = 0.0, B=None, completion=None) -> OptimalResult:
    """Construct the measurement saturating the tight bound.

    ``ancilla`` is ``"auto"`` (ancilla of dimension #degenerate blocks + 1
    when any block has |beta| = 1, none otherwise), ``"none"`` (degenerate
    blocks use directions in the system space), or an explicit dimension.
    """
    base = pure_bundle(state, 1)
    k = _degenerate_count(base)
    if ancilla == "auto":
        adim = k + 1 if k else 1
    elif ancilla == "none":
        adim = 1
    elif isinstance(ancilla, (int, np.integer)) and ancilla >= 1:
        adim = int(ancilla)
    else:
        raise InputError(f"ancilla must be 'auto', 'none' or a positive integer, got {ancilla!r}")

    bundle = pure_bundle(state, adim)
    psi = state.vector()
    state_ext = extend(psi, adim)
    J, canon, blocks = canonical_parametrization(bundle)
    if k == 0:
        perp = None
    elif adim > k:
        perp = np.array([np.kron(psi, np.eye(adim)[j + 1]) for j in range(k)])
    else:
        perp = _system_perp(state_ext, canon.l_vectors, k)
    obs = optimal_observables(canon, blocks, state_ext, perp, varphi)
    obs.used_ancilla = adim > 1
    meas = build_measurement(state_ext, obs.o_vectors, B=B, completion=completion)
    meas.metadata.update({"ancilla_dim": adim, "betas": blocks.betas.tolist(), "varphi": float(varphi)})
    return OptimalResult(state_ext, bundle, J, canon, blocks, obs, meas, adim)


def verify_saturation(result: OptimalResult, tol: Optional[float] = None) -> TradeoffReport:
    """Recompute F_C from the measurement and check it attains the bound."""
    tol = gap_tolerance() if tol is None else tol
    F_C = result.F_C
    rep = report(result.bundle, F_C)
    if abs(rep.gap) > tol:
        Fc = result.canonical_F_C()
        bad = []
        for j, beta in enumerate(result.blocks.betas):
            want = 1.0 + np.sqrt(max(0.0, 1.0 - min(beta, 1.0) ** 2))
            got = Fc[2 * j, 2 * j] + Fc[2 * j + 1, 2 * j + 1]
            if abs(got - want) > tol:
                bad.append(f"block {j} (beta={beta:.6g}): trace {got:.12g}, expected {want:.12g}")
        for t in range(2 * result.blocks.r, result.blocks.n):
            if abs(Fc[t, t] - 1.0) > tol:
                bad.append(f"tail parameter {t}: F_C {Fc[t, t]:.12g}, expected 1")
        raise SaturationError(f"construction misses the bound by {rep.gap:.3g}; " + "; ".join(bad or ["no block isolated"]))
    rep.extra["ancilla_dim"] = result.ancilla_dim
    rep.extra["betas"] = result.blocks.betas.tolist()
    return rep
