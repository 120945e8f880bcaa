"""Scheme parameters: derivation, validation, codelength and grouping plans.

Two derivation modes are supported:

* ``theorem``: every length follows from the scaling constants
  ``beta0, beta1, beta2`` and the code rate ``R``.
* ``simulation``: the desk-scale operating point used for the error-rate
  experiments (``B = 6K``, ``D = 3``, ``C0 = 2 + 2 ceil(log2 N)``,
  ``C1 = ceil(log2 K)``), with the subframe-2 length ``C2`` supplied by the
  experiment.

All logarithms are base 2 except the noise-floor bound on ``eta`` in
:func:`check_eta_admissible`, which uses the natural logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

__all__ = [
    "SystemParams",
    "GroupPlan",
    "GroupingPlan",
    "ceil_log2",
    "derive_theorem_params",
    "derive_simulation_params",
    "codelength",
    "plan_grouping",
    "check_eta_admissible",
    "refinement_constants",
]


def ceil_log2(x: int) -> int:
    """Exact ``ceil(log2(x))`` for a positive integer."""
    if x < 1:
        raise ValueError(f"ceil_log2 needs a positive integer, got {x}")
    return (int(x) - 1).bit_length()


def _log2(x: float) -> float:
    return math.log2(x) if x > 0 else float("-inf")


def _rate(R: float) -> Fraction:
    r = Fraction(R).limit_denominator(1 << 12)
    if not 0 < r <= 1:
        raise ValueError(f"code rate must lie in (0, 1], got {R}")
    return r


def _ceil_div_rate(n: int, R: float) -> int:
    return math.ceil(Fraction(n) / _rate(R))


@dataclass(frozen=True)
class SystemParams:
    """Every scalar of the scheme.

    ``C2`` may be ``None`` in simulation mode until the experiment fixes it.
    ``rho`` (time units) and ``varrho`` (amplitude units) default to ``T/8``
    and ``sqrt(eta)/8``.  ``eta_verify`` defaults to ``eta``.
    """

    K: int
    N: int
    S: int
    B: int
    M: int
    D: int
    C0: int
    C1: int
    C2: Optional[int]
    R: float
    sigma2: float
    a_lo: float
    a_hi: float
    eta: float
    beta0: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    rho: Optional[float] = None
    varrho: Optional[float] = None
    T: float = 1.0
    eta_verify: Optional[float] = None
    mode: str = "custom"
    provenance: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for name in ("K", "N", "S", "B", "D"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.C0 < 1 or self.C1 < 0 or self.M < 0:
            raise ValueError("C0 >= 1, C1 >= 0 and M >= 0 are required")
        # M = 0 needs no delay search, so an empty subframe 2 is allowed there
        if self.C2 is not None and self.C2 < self.M + (self.M > 0):
            raise ValueError(f"C2 = {self.C2} leaves no samples after discarding M = {self.M}")
        if self.D < 3:
            raise ValueError(f"D must be at least 3, got {self.D}")
        if self.D > self.B:
            raise ValueError(f"D = {self.D} exceeds the subcarrier count B = {self.B}")
        if self.M >= self.B:
            raise ValueError(f"delay bound M = {self.M} must be smaller than B = {self.B}")
        if not self.a_lo < self.a_hi:
            raise ValueError(f"need a_lo < a_hi, got {self.a_lo} >= {self.a_hi}")
        if self.a_lo < 0 or self.sigma2 < 0 or self.T <= 0:
            raise ValueError("a_lo, sigma2 must be non-negative and T positive")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        _rate(self.R)
        if self.rho is None:
            object.__setattr__(self, "rho", self.T / 8)
        if self.varrho is None:
            object.__setattr__(self, "varrho", math.sqrt(self.eta) / 8)
        if self.eta_verify is None:
            object.__setattr__(self, "eta_verify", self.eta)

    @property
    def f(self) -> float:
        """Subcarrier spacing, ``1/(B T)``."""
        return 1.0 / (self.B * self.T)

    @property
    def C(self) -> int:
        """OFDM symbols carried on each subcarrier (subframes 0 and 1)."""
        return self.C0 + self.C1

    @property
    def I(self) -> int:  # noqa: E743
        """Samples of subframe 2 kept after discarding the first M."""
        if self.C2 is None:
            raise ValueError("C2 is not set")
        return self.C2 - self.M

    @property
    def log_k(self) -> float:
        """``log2 K`` floored at 1 so delay grids stay finite for K < 2."""
        return max(1.0, math.log2(self.K))

    @property
    def info_bits(self) -> int:
        return ceil_log2(self.N * self.S)

    @property
    def repetition(self) -> int:
        r = _rate(self.R)
        if r.numerator != 1:
            raise ValueError(f"repetition codec needs R = 1/r with integer r, got {self.R}")
        return r.denominator

    def with_c2(self, C2: int) -> "SystemParams":
        prov = dict(self.provenance, C2="experiment input")
        return replace(self, C2=int(C2), provenance=prov)

    def as_rows(self) -> list[tuple[str, object]]:
        names = ["mode", "K", "N", "S", "B", "M", "D", "C0", "C1", "C2", "R",
                 "sigma2", "a_lo", "a_hi", "eta", "eta_verify", "beta0", "beta1",
                 "beta2", "rho", "varrho", "T"]
        rows = [(n, getattr(self, n)) for n in names]
        rows.append(("f", self.f))
        return rows


def derive_theorem_params(K: int, N: int, S: int, M: int, R: float, D: int,
                          beta0: float, beta1: float, beta2: float,
                          a_lo: float, a_hi: float, sigma2: float,
                          T: float = 1.0, rho: Optional[float] = None) -> SystemParams:
    """Parameters of the asymptotic construction, with ``eta = a_lo**2``."""
    if D < 3:
        raise ValueError(f"D must be at least 3, got {D}")
    if beta0 < D * (D - 1) + 1:
        raise ValueError(f"beta0 = {beta0} is below D(D-1)+1 = {D * (D - 1) + 1}")
    if not a_lo < a_hi:
        raise ValueError(f"need a_lo < a_hi, got {a_lo} >= {a_hi}")
    if K < 2:
        raise ValueError("theorem mode needs K >= 2 (log K = 0 empties subframe 1)")
    if beta1 <= 0 or beta2 <= 0:
        raise ValueError("beta1 and beta2 must be positive")
    B = beta0 * K
    if B != int(B):
        raise ValueError(f"beta0 * K must be an integer, got {B}")
    lk = math.log2(K)
    C0 = _ceil_div_rate(ceil_log2(N * S), R) + 1
    C1 = math.ceil(beta1 * lk)
    ratio = a_hi / a_lo
    C2 = M + math.ceil(beta2 * ratio ** 2 * lk ** 4 * K * math.log2(K * M + 1))
    prov = {
        "B": "beta0*K",
        "C0": "ceil(ceil(log2(N*S))/R)+1",
        "C1": "ceil(beta1*log2 K)",
        "C2": "M+ceil(beta2*(a_hi/a_lo)^2*(log2 K)^4*K*log2(K*M+1))",
        "eta": "a_lo^2",
    }
    return SystemParams(K=K, N=N, S=S, B=int(B), M=M, D=D, C0=C0, C1=C1, C2=C2,
                        R=R, sigma2=sigma2, a_lo=a_lo, a_hi=a_hi, eta=a_lo ** 2,
                        beta0=beta0, beta1=beta1, beta2=beta2, rho=rho, T=T,
                        mode="theorem", provenance=prov)


def derive_simulation_params(K: int, N: int, M: int, sigma2: float,
                             a_lo: float, a_hi: float, C2: Optional[int] = None,
                             S: int = 1, T: float = 1.0,
                             rho: Optional[float] = None) -> SystemParams:
    """Desk-scale operating point; ``C2`` stays unset unless given."""
    if K < 2 or N < 2:
        raise ValueError(f"simulation mode needs K >= 2 and N >= 2, got K={K}, N={N}")
    C0 = 2 + 2 * ceil_log2(N)
    C1 = ceil_log2(K)
    prov = {"B": "6K", "D": "3", "C0": "2+2*ceil(log2 N)", "C1": "ceil(log2 K)",
            "eta": "a_lo^2"}
    if C2 is not None:
        prov["C2"] = "experiment input"
    return SystemParams(K=K, N=N, S=S, B=6 * K, M=M, D=3, C0=C0, C1=C1, C2=C2,
                        R=0.5, sigma2=sigma2, a_lo=a_lo, a_hi=a_hi, eta=a_lo ** 2,
                        beta0=6, beta1=1, rho=rho, T=T, mode="simulation",
                        provenance=prov)


def codelength(p: SystemParams) -> int:
    """Total samples per slot, ``(B+M)(C0+C1) + C2``."""
    if p.C2 is None:
        raise ValueError("codelength needs C2 to be set")
    return (p.B + p.M) * (p.C0 + p.C1) + p.C2


@dataclass(frozen=True)
class GroupPlan:
    lo: float
    hi: float
    size: int
    params: SystemParams
    codelength: int


@dataclass(frozen=True)
class GroupingPlan:
    groups: tuple[GroupPlan, ...]
    total_codelength: int
    hash_width_mode: str

    def group_of(self, amplitude: float) -> Optional[int]:
        """Index of the group whose ``[lo, hi)`` holds ``amplitude``."""
        for i, g in enumerate(self.groups):
            if g.lo <= amplitude < g.hi:
                return i
        return None


def plan_grouping(K: int, N: int, M: int, sigma2: float,
                  amplitude_ranges: Sequence[tuple[float, float]],
                  group_sizes: Sequence[int], C2_per_group: Sequence[int],
                  hash_width_mode: str = "shared", T: float = 1.0,
                  rho: Optional[float] = None) -> GroupingPlan:
    """Per-group parameters and codelengths for time-division grouping.

    In ``shared`` mode every group keeps the hash width of the undivided
    system (``B = 6K``, ``C1 = ceil(log2 K)``); in ``per-group`` mode each
    group is sized from its own member count.
    """
    if hash_width_mode not in ("shared", "per-group"):
        raise ValueError(f"unknown hash_width_mode {hash_width_mode!r}")
    n = len(amplitude_ranges)
    if n == 0 or len(group_sizes) != n or len(C2_per_group) != n:
        raise ValueError("ranges, sizes and C2 lists must be non-empty and of equal length")
    if any(s < 1 for s in group_sizes):
        raise ValueError("empty groups are not allowed")
    if sum(group_sizes) != K:
        raise ValueError(f"group sizes sum to {sum(group_sizes)}, expected K = {K}")
    for (lo, hi), (lo2, _) in zip(amplitude_ranges, amplitude_ranges[1:]):
        if hi != lo2:
            raise ValueError("amplitude ranges must be contiguous and increasing")
    for lo, hi in amplitude_ranges:
        if not lo < hi:
            raise ValueError(f"empty amplitude range [{lo}, {hi})")

    groups = []
    for (lo, hi), size, c2 in zip(amplitude_ranges, group_sizes, C2_per_group):
        k_eff = K if hash_width_mode == "shared" else size
        p = derive_simulation_params(k_eff, N, M, sigma2, lo, hi, C2=c2, T=T, rho=rho)
        groups.append(GroupPlan(lo=lo, hi=hi, size=size, params=p, codelength=codelength(p)))
    return GroupingPlan(groups=tuple(groups),
                        total_codelength=sum(g.codelength for g in groups),
                        hash_width_mode=hash_width_mode)


def check_eta_admissible(p: SystemParams) -> tuple[bool, float]:
    """Whether ``eta`` clears the noise floor ``32 s2 ceil(b1 log2 K) ln K / (b0 K)``.

    Returns ``(admissible, eta - bound)``.
    """
    if p.beta0 is None or p.beta1 is None:
        raise ValueError("eta admissibility needs beta0 and beta1")
    bound = (32 * p.sigma2 * math.ceil(p.beta1 * _log2(p.K)) * math.log(p.K)
             / (p.beta0 * p.K))
    return p.eta >= bound, p.eta - bound


def refinement_constants(p: SystemParams, alpha: float) -> tuple[float, float]:
    """Analysis values of ``(rho, varrho)`` given the hypergraph constant ``alpha``.

    These only guide configuration; the decoder uses ``p.rho`` and ``p.varrho``.
    """
    if p.beta0 is None or p.beta1 is None:
        raise ValueError("refinement constants need beta0 and beta1")
    common = (p.D - 1) * math.sqrt(p.eta) / (alpha * p.beta1 * (1 + _log2(p.beta0)) * p.D)
    varrho = common / 8
    rho = p.T * common / (32 * math.pi * p.a_hi)
    return rho, varrho
