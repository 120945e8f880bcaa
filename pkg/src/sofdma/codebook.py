"""Device codewords: subcarrier hashing and the BPSK sequences of each subframe.

Everything a device sends is a pure function of ``(public_seed, id, message)``
and the system parameters, so the receiver regenerates any codeword from a
decoded identity.  Pseudorandom parts come from a counter-based Philox
generator keyed by ``(PRF_VERSION, public_seed, tag, id)``; bump
``PRF_VERSION`` whenever the derivation changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .params import SystemParams, ceil_log2

__all__ = [
    "PRF_VERSION",
    "DeviceCodeword",
    "Codebook",
    "prf_generator",
    "assign_subcarriers",
    "encode_subframe0",
    "decode_subframe0",
    "encode_subframe1",
    "encode_subframe2",
]

PRF_VERSION = 1
_TAG_SUBCARRIERS = 1
_TAG_SUBFRAME1 = 2
_TAG_SUBFRAME2 = 3


def prf_generator(public_seed: int, device_id: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence([PRF_VERSION, int(public_seed), int(tag), int(device_id)])
    return np.random.Generator(np.random.Philox(ss))


def _bpsk(gen: np.random.Generator, n: int) -> np.ndarray:
    return 1.0 - 2.0 * gen.integers(0, 2, size=n)


def assign_subcarriers(device_id: int, B: int, D: int, public_seed: int) -> np.ndarray:
    """Sorted ``D``-subset of ``range(B)``, uniform over all such subsets."""
    if D > B:
        raise ValueError(f"cannot pick D = {D} subcarriers out of B = {B}")
    gen = prf_generator(public_seed, device_id, _TAG_SUBCARRIERS)
    return np.sort(gen.choice(B, size=D, replace=False))


def _check_repetition(R: float) -> int:
    r = round(1 / R)
    if r < 1 or abs(r * R - 1) > 1e-9:
        raise ValueError(f"the repetition codec needs R = 1/r with integer r, got {R}")
    return r


def encode_subframe0(device_id: int, message: int, N: int, S: int, R: float,
                     C0: int) -> np.ndarray:
    """Reference symbol ``+1`` followed by the repetition-coded index ``id*S + message``.

    Bits go out MSB first; bit ``b`` becomes ``1/R`` copies of ``(-1)**b``.
    Remaining positions are padded with ``+1``.
    """
    if not 0 <= device_id < N:
        raise ValueError(f"device id {device_id} outside [0, {N})")
    if not 0 <= message < S:
        raise ValueError(f"message {message} outside [0, {S})")
    r = _check_repetition(R)
    nbits = ceil_log2(N * S)
    if C0 < 1 + nbits * r:
        raise ValueError(f"C0 = {C0} cannot hold {nbits} bits at rate {R}")
    x = device_id * S + message
    out = np.ones(C0)
    for i in range(nbits):
        if (x >> (nbits - 1 - i)) & 1:
            out[1 + i * r: 1 + (i + 1) * r] = -1.0
    return out


def decode_subframe0(hard: np.ndarray, N: int, S: int, R: float) -> Optional[tuple[int, int]]:
    """Majority-vote decode of the ``C0 - 1`` sign decisions after the reference.

    Returns ``None`` on a tied repetition block or an index ``>= N*S``.
    """
    r = _check_repetition(R)
    nbits = ceil_log2(N * S)
    hard = np.asarray(hard, dtype=float)
    if hard.size < nbits * r:
        raise ValueError(f"need at least {nbits * r} decisions, got {hard.size}")
    votes = hard[: nbits * r].reshape(nbits, r).sum(axis=1)
    if np.any(votes == 0):
        return None
    x = 0
    for v in votes:
        x = (x << 1) | int(v < 0)
    if x >= N * S:
        return None
    return divmod(x, S)


def encode_subframe1(device_id: int, C1: int, public_seed: int) -> np.ndarray:
    """Fair i.i.d. BPSK signature used for singleton verification."""
    return _bpsk(prf_generator(public_seed, device_id, _TAG_SUBFRAME1), C1)


def encode_subframe2(device_id: int, C2: int, public_seed: int) -> np.ndarray:
    """Fair i.i.d. BPSK chips for delay estimation."""
    return _bpsk(prf_generator(public_seed, device_id, _TAG_SUBFRAME2), C2)


@dataclass(frozen=True)
class DeviceCodeword:
    id: int
    message: int
    subcarriers: np.ndarray
    g_tilde: np.ndarray
    g_dot: np.ndarray
    chips: Optional[np.ndarray]

    @property
    def g(self) -> np.ndarray:
        """Concatenated subframe-0/1 symbols."""
        return np.concatenate([self.g_tilde, self.g_dot])


class Codebook:
    """Regenerates codewords for one parameter set, caching per-id draws."""

    def __init__(self, params: SystemParams, public_seed: int = 0):
        self.params = params
        self.public_seed = int(public_seed)
        self._subcarriers: dict[int, np.ndarray] = {}
        self._g_dot: dict[int, np.ndarray] = {}
        self._chips: dict[int, np.ndarray] = {}

    def subcarriers(self, device_id: int) -> np.ndarray:
        s = self._subcarriers.get(device_id)
        if s is None:
            p = self.params
            s = assign_subcarriers(device_id, p.B, p.D, self.public_seed)
            self._subcarriers[device_id] = s
        return s

    def contains(self, device_id: int, b: int) -> bool:
        return bool(np.any(self.subcarriers(device_id) == b))

    def g_tilde(self, device_id: int, message: int) -> np.ndarray:
        p = self.params
        return encode_subframe0(device_id, message, p.N, p.S, p.R, p.C0)

    def g_dot(self, device_id: int) -> np.ndarray:
        g = self._g_dot.get(device_id)
        if g is None:
            g = encode_subframe1(device_id, self.params.C1, self.public_seed)
            self._g_dot[device_id] = g
        return g

    def chips(self, device_id: int) -> np.ndarray:
        c = self._chips.get(device_id)
        if c is None:
            if self.params.C2 is None:
                raise ValueError("C2 is not set; no subframe-2 chips")
            c = encode_subframe2(device_id, self.params.C2, self.public_seed)
            self._chips[device_id] = c
        return c

    def g(self, device_id: int, message: int) -> np.ndarray:
        return np.concatenate([self.g_tilde(device_id, message), self.g_dot(device_id)])

    def decode(self, hard: np.ndarray) -> Optional[tuple[int, int]]:
        p = self.params
        return decode_subframe0(hard, p.N, p.S, p.R)

    def codeword(self, device_id: int, message: int = 0) -> DeviceCodeword:
        chips = self.chips(device_id) if self.params.C2 is not None else None
        return DeviceCodeword(id=int(device_id), message=int(message),
                              subcarriers=self.subcarriers(device_id),
                              g_tilde=self.g_tilde(device_id, message),
                              g_dot=self.g_dot(device_id), chips=chips)
