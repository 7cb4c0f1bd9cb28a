"""Tight tradeoff bound on Tr(F_Q^{-1} F_C) and the bounds it is compared with."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, NumericalInconsistencyError
from .fisher import FisherBundle, inverse_sqrt_psd

LAMBDA_TOL = 1e-9
SCHEMA_VERSION = "1"


def normalized_imaginary(F_Q, F_Im) -> np.ndarray:
    """``F_Q^{-1/2} F_Im F_Q^{-1/2}``."""
    S = inverse_sqrt_psd(np.asarray(F_Q, dtype=float))
    M = S @ np.asarray(F_Im, dtype=float) @ S
    return 0.5 * (M - M.T)


def incompatibility_moduli(F_Q, F_Im) -> np.ndarray:
    """Moduli ``|lambda_q|`` of the (purely imaginary) eigenvalues of the
    normalized imaginary part, with multiplicity, in descending order.

    Values within LAMBDA_TOL of 1 (on either side) are snapped to 1, the
    same threshold the measurement construction uses for degenerate
    blocks; anything larger means the input is not a Gram matrix.
    """
    M = normalized_imaginary(F_Q, F_Im)
    mags = np.sort(np.abs(np.linalg.eigvalsh(1j * M)))[::-1]
    if mags.size and mags[0] > 1.0 + LAMBDA_TOL:
        raise NumericalInconsistencyError(
            f"|lambda| = {mags[0]:.12g} exceeds 1; F is not the Gram matrix of SLD vectors")
    return _snap(mags)


def _snap(lams) -> np.ndarray:
    # sqrt(1 - |lambda|^2) turns 1e-16 of roundoff into 1e-8 of bound error
    lams = np.clip(np.asarray(lams, dtype=float), 0.0, 1.0)
    return np.where(lams >= 1.0 - LAMBDA_TOL, 1.0, lams)


def _deficits(lams) -> np.ndarray:
    lams = _snap(lams)
    return 1.0 - np.sqrt(1.0 - lams ** 2)


def tight_bound(F_Q, F_Im) -> float:
    """``n - 1/2 sum_q (1 - sqrt(1 - |lambda_q|^2))``."""
    lams = incompatibility_moduli(F_Q, F_Im)
    return float(len(lams) - 0.5 * _deficits(lams).sum())


def tight_bound_from_moduli(lams) -> float:
    lams = np.asarray(lams, dtype=float)
    if lams.size and lams.max() > 1.0 + LAMBDA_TOL:
        raise NumericalInconsistencyError("|lambda| exceeds 1")
    return float(len(lams) - 0.5 * _deficits(lams).sum())


def gill_massar_bound(d: int) -> float:
    if d < 2:
        raise InputError("Gill-Massar bound needs system dimension >= 2")
    return float(d - 1)


def matsumoto_lower(lams) -> float:
    """Lower bound ``sum_q 2 / (1 + sqrt(1 - |lambda_q|^2))`` on Tr(F_Q F_C^{-1})."""
    lams = _snap(lams)
    return float(np.sum(2.0 / (1.0 + np.sqrt(1.0 - lams ** 2))))


def chen_bound(F_Q, F_Im, coefficient: float = 0.2) -> float:
    """``n - c * ||F_Q^{-1/2} F_Im F_Q^{-1/2}||_F^2`` for c in {1/5, 1/4}."""
    if not (np.isclose(coefficient, 0.2) or np.isclose(coefficient, 0.25)):
        raise InputError("coefficient must be 1/5 or 1/4")
    M = normalized_imaginary(F_Q, F_Im)
    return float(M.shape[0] - coefficient * np.sum(np.abs(M) ** 2))


@dataclass
class TradeoffReport:
    n: int
    lambdas: np.ndarray
    tight_bound: float
    gill_massar: Optional[float]
    matsumoto_lower: float
    chen_bound: float
    chen_bound_tightened: float
    F_Q: np.ndarray
    F_Im: np.ndarray
    achieved: Optional[float] = None
    achieved_inverse: Optional[float] = None
    F_C: Optional[np.ndarray] = None
    mixed: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def gap(self) -> Optional[float]:
        if self.achieved is None:
            return None
        return self.tight_bound - self.achieved

    @property
    def note(self) -> str:
        if self.mixed:
            return "upper bound, not guaranteed tight"
        return "tight for pure states"

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()

        return {
            "schema": SCHEMA_VERSION,
            "n": self.n,
            "lambdas": arr(self.lambdas),
            "tight_bound": self.tight_bound,
            "gill_massar": self.gill_massar,
            "matsumoto_lower": self.matsumoto_lower,
            "chen_bound": self.chen_bound,
            "chen_bound_tightened": self.chen_bound_tightened,
            "F_Q": arr(self.F_Q),
            "F_Im": arr(self.F_Im),
            "F_C": arr(self.F_C),
            "achieved": self.achieved,
            "achieved_inverse": self.achieved_inverse,
            "gap": self.gap,
            "mixed": self.mixed,
            "note": self.note,
            **self.extra,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def report(bundle: FisherBundle, F_C=None) -> TradeoffReport:
    F_Q, F_Im = bundle.F_Q, bundle.F_Im
    lams = incompatibility_moduli(F_Q, F_Im)
    gm = None
    if bundle.system_dim is not None and bundle.system_dim >= 2:
        gm = gill_massar_bound(bundle.system_dim)
    achieved = achieved_inv = None
    if F_C is not None:
        F_C = np.asarray(F_C, dtype=float)
        S = inverse_sqrt_psd(F_Q)
        achieved = float(np.trace(S @ F_C @ S))
        w = np.linalg.eigvalsh(F_C)
        if w.min() > 1e-12 * max(1.0, w.max()):
            achieved_inv = float(np.trace(F_Q @ np.linalg.inv(F_C)))
    return TradeoffReport(
        n=bundle.n,
        lambdas=lams,
        tight_bound=tight_bound_from_moduli(lams),
        gill_massar=gm,
        matsumoto_lower=matsumoto_lower(lams),
        chen_bound=chen_bound(F_Q, F_Im, 0.2),
        chen_bound_tightened=chen_bound(F_Q, F_Im, 0.25),
        F_Q=F_Q,
        F_Im=F_Im,
        achieved=achieved,
        achieved_inverse=achieved_inv,
        F_C=F_C,
        mixed=bundle.mixed,
    )


REPORT_KEYS = {
    "schema": str, "n": int, "lambdas": list, "tight_bound": float, "matsumoto_lower": float,
    "chen_bound": float, "chen_bound_tightened": float, "F_Q": list, "F_Im": list, "mixed": bool,
    "note": str,
}


def validate_report(d: dict) -> dict:
    """Check a serialized report against schema "1" and its invariants."""
    if not isinstance(d, dict):
        raise InputError("report must be a JSON object")
    for key, typ in REPORT_KEYS.items():
        if key not in d:
            raise InputError(f"report lacks {key!r}")
        ok = isinstance(d[key], (int, float)) and not isinstance(d[key], bool) if typ is float \
            else isinstance(d[key], typ)
        if not ok:
            raise InputError(f"report field {key!r} should be {typ.__name__}")
    if d["schema"] != SCHEMA_VERSION:
        raise InputError(f"unsupported report schema {d['schema']!r}")
    n = d["n"]
    if len(d["lambdas"]) != n or np.shape(d["F_Q"]) != (n, n) or np.shape(d["F_Im"]) != (n, n):
        raise InputError("report matrix shapes do not match n")
    if any(abs(x) > 1.0 + LAMBDA_TOL for x in d["lambdas"]):
        raise NumericalInconsistencyError("report has |lambda| > 1")
    if d["tight_bound"] > n + 1e-12:
        raise NumericalInconsistencyError("report bound exceeds n")
    if d.get("achieved") is not None and not d["mixed"] and d["tight_bound"] - d["achieved"] < -1e-8:
        raise NumericalInconsistencyError("report achieved value exceeds the bound")
    return d
