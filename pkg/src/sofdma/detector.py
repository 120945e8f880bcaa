"""Robust subcarrier detection: zeroton test, phase reference, singleton checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .codebook import Codebook

__all__ = [
    "SubcarrierVerdict",
    "detect_zeroton",
    "estimate_phase",
    "decode_candidate",
    "verify_singleton",
    "classify",
]

ZEROTON = "zeroton"
SINGLETON = "singleton"
MULTITON = "multiton"


@dataclass(frozen=True)
class SubcarrierVerdict:
    kind: str
    residual_energy: float
    id: Optional[int] = None
    message: Optional[int] = None
    A_dot: Optional[complex] = None
    theta_hat: Optional[float] = None

    @property
    def is_singleton(self) -> bool:
        return self.kind == SINGLETON


def detect_zeroton(Y_dot_b: np.ndarray, eta: float) -> bool:
    """True when the subframe-1 energy falls below ``eta``."""
    return float(np.vdot(Y_dot_b, Y_dot_b).real) < eta


def estimate_phase(y0: complex) -> float:
    """Phase of the reference-symbol observation, in ``(-pi, pi]``.

    A zero observation carries no phase; it raises ``ValueError`` and callers
    treat the subcarrier as a multiton.
    """
    if y0 == 0:
        raise ValueError("zero reference observation has no phase")
    theta = math.atan2(y0.imag, y0.real)
    return math.pi if theta == -math.pi else theta


def decode_candidate(Y_tilde_b: np.ndarray, theta_hat: float, codebook: Codebook,
                     b: int) -> Optional[tuple[int, int]]:
    """Hard-decide symbols ``1 .. C0-1`` after phase correction and decode.

    The decoded identity must hash onto subcarrier ``b``; otherwise ``None``.
    """
    soft = (np.asarray(Y_tilde_b[1:]) * np.exp(-1j * theta_hat)).real
    hard = np.sign(soft)
    decoded = codebook.decode(hard)
    if decoded is None:
        return None
    if not codebook.contains(decoded[0], b):
        return None
    return decoded


def verify_singleton(Y_dot_b: np.ndarray, g_dot: np.ndarray,
                     eta: float) -> tuple[bool, complex, float]:
    """Least-squares fit of the signature; accept when the residual is within ``eta``.

    Returns ``(accept, A_dot, residual_energy)``.
    """
    C1 = g_dot.size
    if C1 < 1:
        raise ValueError("singleton verification needs C1 >= 1")
    A = complex(g_dot @ Y_dot_b) / C1
    r = Y_dot_b - A * g_dot
    res = float(np.vdot(r, r).real)
    return res <= eta, A, res


def classify(Y_b: np.ndarray, codebook: Codebook, b: int) -> SubcarrierVerdict:
    """Full verdict for one subcarrier's ``C0 + C1`` observations."""
    p = codebook.params
    Y_tilde, Y_dot = Y_b[: p.C0], Y_b[p.C0:]
    energy = float(np.vdot(Y_dot, Y_dot).real)
    if energy < p.eta:
        return SubcarrierVerdict(ZEROTON, energy)
    try:
        theta = estimate_phase(complex(Y_tilde[0]))
    except ValueError:
        return SubcarrierVerdict(MULTITON, energy)
    decoded = decode_candidate(Y_tilde, theta, codebook, b)
    if decoded is None:
        return SubcarrierVerdict(MULTITON, energy, theta_hat=theta)
    k, msg = decoded
    ok, A, res = verify_singleton(Y_dot, codebook.g_dot(k), p.eta_verify)
    if not ok:
        return SubcarrierVerdict(MULTITON, res, theta_hat=theta)
    return SubcarrierVerdict(SINGLETON, res, id=k, message=msg, A_dot=A, theta_hat=theta)
