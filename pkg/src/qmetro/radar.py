"""Range/velocity estimation with single photons and entangled bi-photons.

Everything runs in the three-dimensional subspace spanned by the returned
pulse ``e_1`` and the two first-order excitations ``e_2``, ``e_3`` that the
SLDs connect it to.  For the single photon ``e_3`` is the second Hermite
excitation, which is the direction used for the degenerate block.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputError
from .fisher import FisherBundle, pure_bundle
from .measurement import OptimalResult, optimal_measurement
from .states import SubspaceEmbedding

SINGLE = "single"
BIPHOTON = "biphoton"


@dataclass(frozen=True)
class RadarModel:
    """Transmitted pulse, target kinematics and bi-photon correlation.

    Natural units by default (c = 1, sigma0 = 1).  ``photons`` selects the
    single-photon or bi-photon source; ``kappa`` must be 0 for single photons.
    """

    sigma0: float = 1.0
    omega0: float = 10.0
    t0: float = 0.0
    kappa: float = 0.0
    sigma_i0: float = 1.0
    omega_i0: float = 10.0
    c: float = 1.0
    x: float = 0.0
    v: float = 0.0
    photons: str = BIPHOTON

    def __post_init__(self):
        if not self.sigma0 > 0 or not self.sigma_i0 > 0:
            raise InputError("bandwidths must be positive")
        if not 0.0 <= self.kappa < 1.0:
            raise InputError("kappa must lie in [0, 1)")
        if not self.c > 0 or not abs(self.v) < self.c:
            raise InputError("need |v| < c")
        if self.photons not in (SINGLE, BIPHOTON):
            raise InputError(f"photons must be {SINGLE!r} or {BIPHOTON!r}")
        if self.photons == SINGLE and self.kappa != 0.0:
            raise InputError("single-photon model has no correlation parameter")


@dataclass(frozen=True)
class ReturnedSignal:
    sigma: float
    t_bar: float
    omega_bar: float
    kappa: float
    photons: str
    embedding: SubspaceEmbedding
    model: Optional[RadarModel] = None

    def state(self):
        return self.embedding.as_pure_state(name=f"radar-{self.photons}")


def doppler_factor(c: float, v: float) -> float:
    return (c - v) / (c + v)


def embedding(sigma: float, omega_bar: float, kappa: float, photons: str) -> SubspaceEmbedding:
    """State and (t_bar, omega_bar) derivatives in the basis (e_1, e_2, e_3)."""
    psi = np.array([1.0, 0.0, 0.0], dtype=complex)
    if photons == SINGLE:
        if kappa != 0.0:
            raise InputError("single-photon model has no correlation parameter")
        d_t = [1j * omega_bar, sigma, 0.0]
        d_w = [0.0, -0.5j / sigma, 0.0]
        labels = ("e1", "e2", "e3")
    else:
        sm, sp = np.sqrt(1.0 - kappa), np.sqrt(1.0 + kappa)
        r2 = np.sqrt(2.0)
        d_t = [1j * omega_bar, sigma * sm / r2, sigma * sp / r2]
        d_w = [0.0, -0.5j / (sigma * r2 * sm), -0.5j / (sigma * r2 * sp)]
        labels = ("e1", "e2", "e3")
    return SubspaceEmbedding(labels, psi, np.array([d_t, d_w], dtype=complex), ("t_bar", "omega_bar"))


def returned_state(model: RadarModel) -> ReturnedSignal:
    r = doppler_factor(model.c, model.v)
    sigma = r * model.sigma0
    t_bar = model.t0 + 2.0 * model.x / (model.c - model.v)
    omega_bar = r * model.omega0
    emb = embedding(sigma, omega_bar, model.kappa, model.photons)
    return ReturnedSignal(sigma, t_bar, omega_bar, model.kappa, model.photons, emb, model)


def signal(sigma: float = 1.0, kappa: float = 0.0, photons: str = BIPHOTON,
           t_bar: float = 0.0, omega_bar: float = 10.0) -> ReturnedSignal:
    """Returned pulse specified directly by its parameters."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    if not 0.0 <= kappa < 1.0:
        raise InputError("kappa must lie in [0, 1)")
    return ReturnedSignal(sigma, t_bar, omega_bar, kappa, photons, embedding(sigma, omega_bar, kappa, photons))


def range_velocity(t_bar: float, omega_bar: float, model: RadarModel):
    """Invert the return map for display: (t_bar, omega_bar) -> (x, v)."""
    r = omega_bar / model.omega0
    v = model.c * (1.0 - r) / (1.0 + r)
    x = 0.5 * (t_bar - model.t0) * (model.c - v)
    return x, v


def radar_fisher(sig: ReturnedSignal) -> FisherBundle:
    return pure_bundle(sig.state())


def refined_ak_bound(kappa: float) -> float:
    """Lower bound sqrt((1 - kappa)/(1 + kappa)) on sigma_t * sigma_omega."""
    if not 0.0 <= kappa < 1.0:
        raise InputError("kappa must lie in [0, 1)")
    return float(np.sqrt((1.0 - kappa) / (1.0 + kappa)))


def optimal_radar_measurement(sig: ReturnedSignal, varphi: float = 0.0) -> OptimalResult:
    """Three-outcome measurement on the embedded subspace (no ancilla)."""
    return optimal_measurement(sig.state(), ancilla="none", varphi=varphi)


def product_from_cfim(F_C: np.ndarray) -> float:
    return float(1.0 / np.sqrt(F_C[0, 0] * F_C[1, 1]))


# -- overlaps away from the reference point ----------------------------------

def _alphas(sig: ReturnedSignal, d: float, dw: float):
    """Mode amplitudes of the true pulse seen from the reference pulse, and
    their derivatives with respect to (t_bar, omega_bar)."""
    s = sig.sigma
    if sig.photons == SINGLE:
        a = np.array([s * d - 0.5j * dw / s])
        da = np.array([[s], [-0.5j / s]], dtype=complex)
        return a, da
    g = np.array([np.sqrt(1.0 - sig.kappa), np.sqrt(1.0 + sig.kappa)])
    r2 = np.sqrt(2.0)
    a = (g * s * d - 0.5j * dw / (s * g)) / r2
    da = np.vstack([g * s / r2, -0.5j / (s * g * r2)]).astype(complex)
    return a, da


def reference_overlaps(sig: ReturnedSignal, d: float, dw: float):
    """Components ``c_k = <e^_k|psi>`` of the true state in the reference
    basis, with ``d = t_bar - t_ref`` and ``dw = omega_bar - omega_ref``.

    Returns ``(c, dc)`` where ``dc[j]`` is the derivative along the true
    parameter j.  A common phase is dropped; it cancels in probabilities.
    """
    a, da = _alphas(sig, d, dw)
    E = np.exp(-0.5 * np.sum(np.abs(a) ** 2))
    dE = -E * np.real(np.conj(a)[None, :] * da).sum(axis=1)
    if sig.photons == SINGLE:
        al = a[0]
        poly = np.array([1.0, al, -al ** 2 / np.sqrt(2.0)])
        dpoly = np.array([[0.0, 1.0, -np.sqrt(2.0) * al]]) * da[:, 0][:, None]
    else:
        poly = np.array([1.0, a[0], a[1]])
        dpoly = np.zeros((2, 3), dtype=complex)
        dpoly[:, 1] = da[:, 0]
        dpoly[:, 2] = da[:, 1]
    c = E * poly
    dc = dE[:, None] * poly[None, :] + E * dpoly
    return c, dc


def outcome_model(sig: ReturnedSignal, basis: np.ndarray, d: float, dw: float):
    """Probabilities of the basis outcomes plus a final "outside the
    subspace" outcome, with derivatives along (t_bar, omega_bar)."""
    c, dc = reference_overlaps(sig, d, dw)
    amp = basis @ c
    damp = dc @ basis.T
    p = np.abs(amp) ** 2
    dp = 2.0 * np.real(np.conj(amp)[None, :] * damp)
    leak = max(0.0, 1.0 - float(np.sum(p)))
    p = np.append(p, leak)
    dp = np.hstack([dp, -dp.sum(axis=1, keepdims=True)])
    return p, dp


# -- Monte Carlo ---------------------------------------------------------------

MAX_ITER = 100
STEP_TOL = 1e-10
DAMPING = 0.5
P_MIN = 1e-300


@dataclass
class EstimationRun:
    kappa: float
    shots: int
    seed: int
    photons: str
    truth: np.ndarray
    reference_offset: np.ndarray
    counts: np.ndarray
    estimates: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    F_C: np.ndarray
    sigma: float

    @property
    def batches(self) -> int:
        return len(self.counts)

    @property
    def failed(self) -> int:
        return int(np.sum(~self.converged))

    @property
    def empirical_cov(self) -> np.ndarray:
        est = self.estimates[self.converged]
        if len(est) < 2:
            raise InputError("fewer than two converged batches")
        return np.cov(est.T, ddof=1)

    @property
    def predicted_cov(self) -> np.ndarray:
        return np.linalg.inv(self.shots * self.F_C)

    @property
    def empirical_product(self) -> float:
        """``std(t) * std(omega) * shots``, comparable with the analytic product."""
        cov = self.empirical_cov
        return float(np.sqrt(cov[0, 0] * cov[1, 1]) * self.shots)

    @property
    def predicted_product(self) -> float:
        return product_from_cfim(self.F_C)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kappa", "shots", "batch", "t_hat", "omega_hat", "converged", "std_t", "std_omega", "product"])
        fmt = "%.17g"
        for b in range(self.batches):
            w.writerow([fmt % self.kappa, self.shots, b, fmt % self.estimates[b, 0],
                        fmt % self.estimates[b, 1], int(self.converged[b]), "", "", ""])
        cov = self.empirical_cov
        pred = self.predicted_cov
        w.writerow([fmt % self.kappa, self.shots, "empirical", "", "", self.batches - self.failed,
                    fmt % np.sqrt(cov[0, 0]), fmt % np.sqrt(cov[1, 1]), fmt % self.empirical_product])
        w.writerow([fmt % self.kappa, self.shots, "predicted", "", "", "",
                    fmt % np.sqrt(pred[0, 0]), fmt % np.sqrt(pred[1, 1]), fmt % self.predicted_product])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "schema": "1",
            "kappa": self.kappa,
            "photons": self.photons,
            "shots": self.shots,
            "batches": self.batches,
            "seed": self.seed,
            "failed_batches": self.failed,
            "empirical_cov": self.empirical_cov.tolist(),
            "predicted_cov": self.predicted_cov.tolist(),
            "empirical_product": self.empirical_product,
            "predicted_product": self.predicted_product,
            "refined_bound": refined_ak_bound(self.kappa),
        }


def _log_likelihood(counts, p):
    mask = counts > 0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(np.sum(counts[mask] * np.log(p[mask])))


def _fit(sig, basis, counts, start, scale):
    """Fisher scoring on the scaled offset ``u`` of the parameters from the
    reference point, in units where sigma = 1."""
    shots = counts.sum()
    u = np.array(start, dtype=float)

    def model(u):
        d = u[0] / scale[0]
        dw = u[1] / scale[1]
        p, dp = outcome_model(sig, basis, d, dw)
        return p, dp / scale[:, None]

    p, dp = model(u)
    ll = _log_likelihood(counts, p)
    for it in range(1, MAX_ITER + 1):
        keep = p > P_MIN
        grad = dp[:, keep] @ (counts[keep] / p[keep])
        info = shots * (dp[:, keep] / p[keep]) @ dp[:, keep].T
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            return u, False, it
        t = 1.0
        while True:
            cand = u + t * step
            pc, dpc = model(cand)
            llc = _log_likelihood(counts, pc)
            if llc >= ll or np.max(np.abs(t * step)) < STEP_TOL:
                break
            t *= DAMPING
        moved = np.max(np.abs(cand - u))
        u, p, dp, ll = cand, pc, dpc, max(ll, llc)
        if moved < STEP_TOL:
            return u, True, it
    return u, False, MAX_ITER


def simulate(target: Union[RadarModel, ReturnedSignal], kappa: Optional[float] = None,
             shots: int = 100_000, seed: int = 0, batches: int = 200,
             reference_offset: Sequence[float] = (0.0, 0.0)) -> EstimationRun:
    """Sample outcome counts of the optimal measurement and fit (t_bar, omega_bar).

    The measurement is built at the reference point ``truth -
    reference_offset``; with the default zero offset this is local
    estimation at the true parameters.  Each batch draws a multinomial
    sample of ``shots`` outcomes from its own child generator and is
    fitted by maximum likelihood with Fisher scoring.
    """
    if isinstance(target, RadarModel):
        if kappa is not None and kappa != target.kappa:
            raise InputError("kappa given twice with different values")
        sig = returned_state(target)
    elif isinstance(target, ReturnedSignal):
        sig = target
        if kappa is not None and kappa != sig.kappa:
            sig = signal(sig.sigma, kappa, sig.photons, sig.t_bar, sig.omega_bar)
    else:
        raise InputError("target must be a RadarModel or ReturnedSignal")
    if shots < 1 or batches < 2:
        raise InputError("need shots >= 1 and batches >= 2")

    ref = np.asarray(reference_offset, dtype=float)
    opt = optimal_radar_measurement(sig)
    basis = opt.measurement.basis
    p_true, dp_true = outcome_model(sig, basis, ref[0], ref[1])
    keep = p_true > 1e-12
    F_C = (dp_true[:, keep] / p_true[keep]) @ dp_true[:, keep].T
    crb = np.sqrt(np.diag(np.linalg.inv(shots * F_C)))
    scale = np.array([sig.sigma, 1.0 / sig.sigma])
    truth = np.array([sig.t_bar, sig.omega_bar])

    streams = np.random.SeedSequence(seed).spawn(batches)
    counts = np.zeros((batches, len(p_true)), dtype=np.int64)
    est = np.zeros((batches, 2))
    ok = np.zeros(batches, dtype=bool)
    iters = np.zeros(batches, dtype=int)
    p_sample = np.clip(p_true, 0.0, None)
    p_sample = p_sample / p_sample.sum()
    for b, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        counts[b] = rng.multinomial(shots, p_sample)
        start = ref + crb * rng.standard_normal(2)
        u, conv, it = _fit(sig, basis, counts[b], start * scale, scale)
        est[b] = truth - ref + u / scale
        ok[b] = conv
        iters[b] = it
    return EstimationRun(sig.kappa, shots, seed, sig.photons, truth, ref, counts, est, ok, iters, F_C, sig.sigma)
