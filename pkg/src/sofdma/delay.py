"""Two-step delay estimation on subframe 2.

The statistic for device ``k`` at candidate delay ``tau`` is the overlap
integral of the received waveform with the device's chips shifted by
``tau``, plus a Gaussian noise term of per-dimension variance
``I * sigma2 * T``.  The integral is evaluated exactly: with ``F`` the
running integral of the (piecewise-constant) waveform, chip ``i`` contributes
``chips[i] * (F(tau + (i+1) T) - F(tau + i T))``.

Between consecutive points where ``tau`` is congruent modulo ``T`` to some
waveform breakpoint, that sum is affine in ``tau``.  Dense grids are
therefore evaluated exactly at those kinks and interpolated, which is
exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import Waveform
from .params import SystemParams

__all__ = [
    "DelaySearchState",
    "CrudeResult",
    "DelayEstimate",
    "noiseless_statistic",
    "statistic_on_grid",
    "correlate",
    "crude_threshold",
    "fine_step",
    "crude_estimate",
    "refine_estimate",
    "estimate_delay",
]

_TAU_SLACK = 1e-9


def noiseless_statistic(waveform: Waveform, chips: np.ndarray, taus) -> np.ndarray:
    """Exact ``integral x(t) s_k(t - tau) dt`` over the window, for each tau.

    Delays sharing a fractional phase reuse one array of waveform increments,
    so each evaluation reduces to a dot product with the chips.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    chips = np.asarray(chips, dtype=float)
    n = chips.size
    T = waveform.T
    m = np.floor(taus / T + 1e-12).astype(np.int64)
    phase = taus - m * T
    out = np.empty(taus.size, dtype=complex)
    for ph in np.unique(phase):
        sel = np.flatnonzero(phase == ph)
        inc = waveform.increments(ph, n)
        windows = np.lib.stride_tricks.sliding_window_view(inc, n)
        out[sel] = windows[m[sel]] @ chips
    return out


def statistic_on_grid(waveform: Waveform, chips: np.ndarray, grid) -> np.ndarray:
    """Noiseless statistic on a sorted grid via exact evaluation at kinks."""
    grid = np.asarray(grid, dtype=float)
    g0, g1 = grid[0], grid[-1]
    T = waveform.T
    ph = waveform.kink_phases
    m = np.arange(math.floor(g0 / T), math.floor(g1 / T) + 1)
    cand = (m[:, None] * T + ph[None, :]).ravel()
    cand = cand[(cand > g0) & (cand < g1)]
    nodes = np.unique(np.concatenate([[g0, g1], cand]))
    if nodes.size >= grid.size:
        return noiseless_statistic(waveform, chips, grid)
    return np.interp(grid, nodes, noiseless_statistic(waveform, chips, nodes))


def _noise(rng: Optional[np.random.Generator], p: SystemParams, n: int) -> np.ndarray:
    if rng is None or p.sigma2 == 0:
        return np.zeros(n, dtype=complex)
    std = math.sqrt(p.I * p.sigma2 * p.T)
    return std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def _check_taus(taus: np.ndarray, p: SystemParams):
    top = p.M * p.T
    if np.any(taus < -_TAU_SLACK * p.T) or np.any(taus > top + _TAU_SLACK * p.T):
        raise ValueError(f"candidate delays must lie in [0, {top}]")


def correlate(waveform2: Waveform, chips_k: np.ndarray, tau, p: SystemParams,
              rng: Optional[np.random.Generator] = None,
              shared_noise: Optional[complex] = None) -> np.ndarray:
    """Delay statistic at each candidate ``tau``.

    Each evaluation gets an independent noise draw from ``rng``; pass
    ``shared_noise`` instead to add one fixed value to every evaluation.
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    _check_taus(taus, p)
    stat = noiseless_statistic(waveform2, chips_k, taus)
    if shared_noise is not None:
        return stat + shared_noise
    return stat + _noise(rng, p, taus.size)


def crude_threshold(p: SystemParams) -> float:
    return p.a_lo * p.T * p.I / 4


def fine_step(p: SystemParams) -> float:
    """Fine grid step ``T / ceil(2 T (log K)^2 / rho)``."""
    return p.T / math.ceil(2 * p.T * p.log_k ** 2 / p.rho)


@dataclass(frozen=True)
class DelaySearchState:
    T_bar: float
    psi: float
    lam: Optional[float]
    tau_star: Optional[float]
    I: int
    rho: float


@dataclass(frozen=True)
class CrudeResult:
    slot: Optional[tuple[float, float]]
    magnitudes: np.ndarray
    exceed: tuple[int, ...]

    @property
    def failed(self) -> bool:
        return self.slot is None


@dataclass(frozen=True)
class DelayEstimate:
    tau_hat: float
    interval: tuple[float, float]
    failed: bool
    crude: CrudeResult
    state: DelaySearchState


def _crude_rule(exceed: tuple[int, ...], M: int, T: float) -> Optional[tuple[float, float]]:
    if len(exceed) == 1:
        i = exceed[0]
        if i == 0:
            return 0.0, T
        if i == M:
            return (M - 1) * T, M * T
        return i * T - T / 2, i * T + T / 2
    if len(exceed) == 2 and exceed[1] == exceed[0] + 1:
        i = exceed[0]
        return i * T, (i + 1) * T
    return None


def crude_estimate(waveform2: Waveform, chips_k: np.ndarray, p: SystemParams,
                   rng: Optional[np.random.Generator] = None,
                   shared_noise: Optional[complex] = None) -> CrudeResult:
    """Threshold test on the sample grid ``{0, T, ..., M T}``.

    A single grid point above threshold places the delay in the half-sample
    neighbourhood of that point (the end slots at the two edges); two
    adjacent points place it between them.  Anything else is a failure.
    """
    grid = p.T * np.arange(p.M + 1)
    mags = np.abs(correlate(waveform2, chips_k, grid, p, rng, shared_noise))
    exceed = tuple(int(i) for i in np.flatnonzero(mags > crude_threshold(p)))
    if p.M == 0:
        return CrudeResult((0.0, 0.0) if exceed == (0,) else None, mags, exceed)
    return CrudeResult(_crude_rule(exceed, p.M, p.T), mags, exceed)


def refine_estimate(waveform2: Waveform, chips_k: np.ndarray, slot: tuple[float, float],
                    p: SystemParams, rng: Optional[np.random.Generator] = None,
                    shared_noise: Optional[complex] = None
                    ) -> tuple[tuple[float, float], float, float]:
    """Argmax over the fine grid of one crude slot.

    Returns ``(interval, tau_star, lam)`` where the interval of half-width
    ``rho / (2 (log K)^2)`` around ``lam + tau_star`` is clipped to
    ``[0, M T]``.  Ties go to the smallest delay.
    """
    lam = slot[0]
    top = p.M * p.T
    n = round(p.T / fine_step(p))
    offsets = p.T * np.arange(n + 1) / n
    taus = np.clip(lam + offsets, 0.0, top)
    _check_taus(taus, p)
    stat = statistic_on_grid(waveform2, chips_k, taus)
    if shared_noise is not None:
        stat = stat + shared_noise
    else:
        stat = stat + _noise(rng, p, taus.size)
    j = int(np.argmax(np.abs(stat)))
    tau_star = float(offsets[j])
    half = p.rho / (2 * p.log_k ** 2)
    interval = (max(0.0, tau_star - half + lam), min(tau_star + half + lam, top))
    return interval, tau_star, lam


def estimate_delay(waveform2: Waveform, chips_k: np.ndarray, p: SystemParams,
                   rng: Optional[np.random.Generator] = None,
                   shared_noise: Optional[complex] = None,
                   fallback: bool = True) -> DelayEstimate:
    """Crude then refined search; the estimate is the refined interval's midpoint.

    On a crude failure the result is flagged ``failed``.  With ``fallback``
    the refinement still runs on the slot centred at the largest crude
    statistic so callers can continue for diagnostics.
    """
    psi = fine_step(p)
    if p.M == 0:
        state = DelaySearchState(crude_threshold(p), psi, 0.0, 0.0, p.I, p.rho)
        crude = CrudeResult((0.0, 0.0), np.zeros(1), (0,))
        return DelayEstimate(0.0, (0.0, 0.0), False, crude, state)
    crude = crude_estimate(waveform2, chips_k, p, rng, shared_noise)
    slot = crude.slot
    if slot is None:
        if not fallback:
            state = DelaySearchState(crude_threshold(p), psi, None, None, p.I, p.rho)
            return DelayEstimate(float("nan"), (float("nan"),) * 2, True, crude, state)
        i = int(np.argmax(crude.magnitudes))
        slot = _crude_rule((i,), p.M, p.T)
    interval, tau_star, lam = refine_estimate(waveform2, chips_k, slot, p, rng, shared_noise)
    state = DelaySearchState(crude_threshold(p), psi, lam, tau_star, p.I, p.rho)
    tau_hat = 0.5 * (interval[0] + interval[1])
    return DelayEstimate(tau_hat, interval, crude.slot is None, crude, state)
