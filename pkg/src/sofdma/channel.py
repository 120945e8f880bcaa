"""Near-far channel draws and synthesis of what the access point observes.

Subframes 0 and 1 are observed in the frequency domain, one row per
subcarrier and one column per OFDM symbol: a delay ``tau`` acts on
subcarrier ``b`` as the phase factor ``exp(-2j*pi*b*tau/(B*T))``.

Subframe 2 is kept in continuous time as an exact piecewise-constant
:class:`Waveform`.  Its time axis is local to the subframe (``t = 0`` at the
subframe start ``C (B + M) T``), and only the observation window
``[M T, C2 T)`` is stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .codebook import DeviceCodeword
from .params import SystemParams

__all__ = [
    "ChannelRealization",
    "Waveform",
    "Observation",
    "FrameTruth",
    "draw_channel",
    "draw_delay",
    "outage_probability",
    "synth_frequency",
    "synth_subframe2",
    "observe",
]


@dataclass(frozen=True)
class ChannelRealization:
    a: complex
    tau: float
    outage: bool = False
    distance: float = float("nan")


def draw_channel(rng: np.random.Generator, dmin: float, dmax: float, alpha: float,
                 a_lo: float, a_hi: float, fading: bool = True) -> tuple[complex, bool, float]:
    """Draw ``a = G d**-alpha`` with ``d ~ U[dmin, dmax]``.

    ``G`` is unit-power circularly-symmetric Rayleigh fading; with
    ``fading=False`` it is a unit-modulus random phase.  Returns
    ``(a, outage, d)`` where outage means ``|a|`` falls outside ``(a_lo, a_hi)``.
    """
    if not 0 < dmin < dmax:
        raise ValueError(f"need 0 < dmin < dmax, got {dmin}, {dmax}")
    if alpha < 0:
        raise ValueError(f"path-loss exponent must be non-negative, got {alpha}")
    d = rng.uniform(dmin, dmax)
    if fading:
        G = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
    else:
        G = np.exp(2j * np.pi * rng.uniform())
    a = complex(G * d ** (-alpha))
    mag = abs(a)
    return a, not (a_lo < mag < a_hi), float(d)


def outage_probability(dmin: float, dmax: float, alpha: float, a_lo: float,
                       a_hi: float) -> float:
    """Closed-form-in-``G`` outage probability, integrated over distance."""
    from scipy.integrate import quad

    def inside(d):
        s = d ** alpha
        return np.exp(-(a_lo * s) ** 2) - np.exp(-(a_hi * s) ** 2)

    val, _ = quad(inside, dmin, dmax, limit=200)
    return 1.0 - val / (dmax - dmin)


def draw_delay(rng: np.random.Generator, M: int, T: float = 1.0) -> float:
    """Continuous delay, uniform on ``[0, M T]``."""
    if M < 0:
        raise ValueError(f"M must be non-negative, got {M}")
    if M == 0:
        return 0.0
    return float(rng.uniform(0.0, M * T))


@dataclass(frozen=True)
class Waveform:
    """Piecewise-constant complex function on ``[breakpoints[0], breakpoints[-1])``.

    ``values[j]`` holds on ``[breakpoints[j], breakpoints[j+1])``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    T: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if bp.ndim != 1 or bp.size < 2 or vals.size != bp.size - 1:
            raise ValueError("need n+1 breakpoints for n values")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def interval(self) -> tuple[float, float]:
        """The observation window in absolute slot time."""
        lo, hi = self.window
        return self.origin + lo, self.origin + hi

    @cached_property
    def _cumulative_at_breakpoints(self) -> np.ndarray:
        F = np.zeros(self.breakpoints.size, dtype=complex)
        np.cumsum(self.values * np.diff(self.breakpoints), out=F[1:])
        return F

    def __call__(self, t) -> np.ndarray:
        """Evaluate at local times; zero outside the window."""
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = (j >= 0) & (j < self.values.size)
        out = np.zeros(t.shape, dtype=complex)
        out[inside] = self.values[j[inside]]
        return out

    def cumulative(self, t) -> np.ndarray:
        """``integral_{window start}^{t}`` of the waveform, clamped to the window."""
        return np.interp(t, self.breakpoints, self._cumulative_at_breakpoints)

    def increments(self, phase: float, n_chips: int) -> np.ndarray:
        """``F((n+1) T + phase) - F(n T + phase)`` for ``n = 0 .. n_chips + M - 1``.

        ``F`` is the running integral clamped to the window and ``M`` is the
        window start in samples.  Cached per ``(phase, n_chips)``.
        """
        key = (float(phase), int(n_chips))
        inc = self._increments.get(key)
        if inc is None:
            lo, _ = self.window
            m = round(lo / self.T)
            pts = self.T * np.arange(n_chips + m + 1) + phase
            inc = np.diff(self.cumulative(pts))
            self._increments[key] = inc
        return inc

    @cached_property
    def _increments(self) -> dict:
        return {}

    @cached_property
    def kink_phases(self) -> np.ndarray:
        """Distinct breakpoint positions modulo ``T``, in ``[0, T)``."""
        ph = np.round(np.mod(self.breakpoints, self.T) / self.T, 10)
        ph = np.unique(np.mod(ph, 1.0))
        return ph * self.T


@dataclass
class Observation:
    Y: np.ndarray
    waveform2: Waveform
    noise_psd: float


@dataclass
class FrameTruth:
    """Ground truth for test mode: transmitting devices and the noise draw."""

    codewords: list[DeviceCodeword]
    channels: list[ChannelRealization]
    W: np.ndarray
    targets: set = field(default_factory=set)


def _transmitting(codewords, channels, include_outage):
    if len(codewords) != len(channels):
        raise ValueError("codewords and channels must pair up")
    return [(cw, ch) for cw, ch in zip(codewords, channels)
            if include_outage or not ch.outage]


def synth_frequency(codewords: Sequence[DeviceCodeword],
                    channels: Sequence[ChannelRealization], p: SystemParams,
                    rng: Optional[np.random.Generator] = None,
                    include_outage: bool = False,
                    return_noise: bool = False):
    """Frequency-domain observation of subframes 0 and 1, ``B x (C0 + C1)``.

    Noise is circularly-symmetric Gaussian with variance ``sigma2 / B`` per
    real dimension; it is omitted when ``rng`` is ``None`` or ``sigma2 == 0``.
    """
    C = p.C
    Y = np.zeros((p.B, C), dtype=complex)
    for cw, ch in _transmitting(codewords, channels, include_outage):
        g = np.concatenate([cw.g_tilde, cw.g_dot])
        if g.size != C:
            raise ValueError(f"device {cw.id} has {g.size} symbols, expected {C}")
        b = cw.subcarriers
        A = ch.a * np.exp(-2j * np.pi * b * ch.tau / (p.B * p.T))
        Y[b] += A[:, None] * g[None, :]
    W = np.zeros_like(Y)
    if rng is not None and p.sigma2 > 0:
        std = np.sqrt(p.sigma2 / p.B)
        W = std * (rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape))
        Y = Y + W
    return (Y, W) if return_noise else Y


def synth_subframe2(codewords: Sequence[DeviceCodeword],
                    channels: Sequence[ChannelRealization], p: SystemParams,
                    include_outage: bool = False) -> Waveform:
    """Noiseless superposition ``sum_k a_k s_k(t - tau_k)`` on the window.

    Breakpoints are the window ends plus every chip edge ``tau_k + j T``
    falling strictly inside the window.
    """
    if p.C2 is None:
        raise ValueError("C2 is not set")
    T = p.T
    lo, hi = p.M * T, p.C2 * T
    active = _transmitting(codewords, channels, include_outage)
    # each device contributes a jump a*(c[j] - c[j-1]) at tau + j T
    pos = [np.array([lo, hi])]
    jump = [np.zeros(2, dtype=complex)]
    start = 0j
    for cw, ch in active:
        chips = cw.chips
        if chips is None or chips.size != p.C2:
            raise ValueError(f"device {cw.id} lacks {p.C2} subframe-2 chips")
        j0 = int(np.floor((lo - ch.tau) / T + 1e-9))
        if 0 <= j0 < p.C2:
            start += ch.a * chips[j0]
        e = ch.tau + T * np.arange(p.C2 + 1)
        padded = np.concatenate([[0.0], chips, [0.0]])
        d = ch.a * np.diff(padded)
        inside = (e > lo) & (e < hi)
        pos.append(e[inside])
        jump.append(d[inside])
    pos = np.concatenate(pos)
    jump = np.concatenate(jump)
    # edges closer than 1e-9 T are merged into one breakpoint
    order = np.argsort(pos, kind="stable")
    pos, jump = pos[order], jump[order]
    new_group = np.concatenate([[True], np.diff(pos) > 1e-9 * T])
    gid = np.cumsum(new_group) - 1
    bp = pos[new_group]
    bp[-1] = hi
    dj = (np.bincount(gid, jump.real, minlength=bp.size)
          + 1j * np.bincount(gid, jump.imag, minlength=bp.size))
    dj[0] = start
    vals = np.cumsum(dj[:-1])
    return Waveform(bp, vals, T=T, origin=p.C * (p.B + p.M) * T)


def observe(codewords: Sequence[DeviceCodeword], channels: Sequence[ChannelRealization],
            p: SystemParams, rng: Optional[np.random.Generator],
            include_outage: bool = False) -> tuple[Observation, FrameTruth]:
    """Synthesize a full frame and keep the ground truth beside it."""
    Y, W = synth_frequency(codewords, channels, p, rng, include_outage, return_noise=True)
    wf = synth_subframe2(codewords, channels, p, include_outage)
    pairs = _transmitting(codewords, channels, include_outage)
    truth = FrameTruth(codewords=[cw for cw, _ in pairs], channels=[ch for _, ch in pairs],
                       W=W, targets={(cw.id, cw.message) for cw, _ in pairs})
    return Observation(Y=Y, waveform2=wf, noise_psd=p.sigma2), truth
