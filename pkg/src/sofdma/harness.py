"""Experiment configuration, per-trial simulation, sweeps and grouping runs.

Every random draw of a trial comes from ``SeedSequence(seed, spawn_key=(trial,))``
split into three child streams: channels (ids, distances, fading, delays),
receiver noise, and delay-statistic noise.  The channel stream does not depend
on the SNR point or the arrangement, so all points of a sweep share the same
device population (common random numbers) and results cannot depend on how
trials are spread over workers.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, draw_channel, draw_delay, observe
from .codebook import Codebook
from .params import (GroupingPlan, SystemParams, codelength, derive_simulation_params,
                     derive_theorem_params, plan_grouping)
from .sic import peel

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "SweepRow",
    "SweepResult",
    "GroupingResult",
    "CSV_COLUMNS",
    "REFERENCE_CODELENGTHS",
    "load_config",
    "parse_config",
    "amplitude_for_snr",
    "lowest_snr_db",
    "point_params",
    "run_trial",
    "run_sweep",
    "run_grouping_experiment",
    "wilson_interval",
    "write_csv",
    "format_csv",
]

CSV_COLUMNS = ("snr_db", "dyn_db", "arrangement", "trials", "frame_errors", "error_rate",
               "wilson_lo", "wilson_hi", "mean_delay_err", "codelength")

# figures quoted for the grouping experiment, printed next to formula values
REFERENCE_CODELENGTHS = {"undivided": 31640, "divided": 29000}

UNDIVIDED = "undivided"
DIVIDED = "divided"


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of an experiment.

    ``snr_grid`` holds lowest-SNR values ``10 log10(a_lo**2 / (2 sigma2))`` in
    dB.  With ``sigma2`` fixed, each grid point sets ``a_lo`` and
    ``a_hi = a_lo * 10**(dyn/20)`` for every dynamic range in
    ``dynamic_range_db`` (paired with ``C2``).  ``group_split_db`` lists the
    interior group boundaries in dB above ``a_lo`` for the divided arrangement.
    """

    mode: str = "fig1"
    K: int = 50
    N: int = 2 ** 38
    S: int = 1
    M: int = 20
    T: float = 1.0
    trials: int = 500
    snr_grid: tuple[float, ...] = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    dynamic_range_db: tuple[float, ...] = (10.0,)
    C2: tuple[int, ...] = (2000,)
    sigma2: float = 1.0
    a_lo: Optional[float] = None
    a_hi: Optional[float] = None
    dmin: float = 0.5
    dmax: float = 4.0
    alpha: float = 3.0
    fading: bool = True
    outage_mode: str = "exclude"
    noise_mode: str = "independent"
    public_seed: int = 0
    seed: int = 0
    workers: int = 1
    rho: Optional[float] = None
    eta: Optional[float] = None
    eta_verify: Optional[float] = None
    R: float = 0.5
    D: int = 3
    beta0: float = 7.0
    beta1: float = 1.0
    beta2: float = 1.0
    B: Optional[int] = None
    C0: Optional[int] = None
    C1: Optional[int] = None
    group_split_db: tuple[float, ...] = ()
    group_C2: tuple[int, ...] = ()
    group_sizes: tuple[int, ...] = ()
    hash_width_mode: str = "shared"
    out_dir: str = "results"
    plot: bool = False

    def __post_init__(self):
        if self.mode not in ("fig1", "fig2", "theorem", "custom"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if len(self.snr_grid) == 0:
            raise ConfigError("snr_grid must not be empty")
        if len(self.dynamic_range_db) == 0:
            raise ConfigError("dynamic_range_db must not be empty")
        if len(self.C2) not in (1, len(self.dynamic_range_db)):
            raise ConfigError("C2 needs one value or one per dynamic range")
        if any(d <= 0 for d in self.dynamic_range_db):
            raise ConfigError("dynamic ranges must be positive")
        if self.outage_mode not in ("exclude", "include"):
            raise ConfigError(f"outage_mode must be exclude or include, got {self.outage_mode!r}")
        if self.noise_mode not in ("independent", "shared"):
            raise ConfigError(f"noise_mode must be independent or shared, got {self.noise_mode!r}")
        if self.hash_width_mode not in ("shared", "per-group"):
            raise ConfigError(f"unknown hash_width_mode {self.hash_width_mode!r}")
        if not 0 < self.dmin < self.dmax:
            raise ConfigError(f"need 0 < dmin < dmax, got {self.dmin}, {self.dmax}")
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.group_split_db:
            n = len(self.group_split_db) + 1
            if len(self.group_C2) != n:
                raise ConfigError(f"group_C2 needs {n} values for {n} groups")
            if self.group_sizes and len(self.group_sizes) != n:
                raise ConfigError(f"group_sizes needs {n} values for {n} groups")
            edges = (0.0,) + tuple(self.group_split_db) + (self.dynamic_range_db[0],)
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ConfigError("group_split_db must increase strictly inside the dynamic range")
        if self.a_lo is not None and self.a_hi is not None and not 0 < self.a_lo < self.a_hi:
            raise ConfigError(f"need 0 < a_lo < a_hi, got {self.a_lo}, {self.a_hi}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def for_mode(cls, mode: str = "fig1", **overrides) -> "ExperimentConfig":
        """Mode defaults with keyword overrides on top."""
        base = dict(_MODE_DEFAULTS.get(mode, {}))
        base.update(overrides)
        return cls(mode=mode, **base)

    @property
    def arrangements(self) -> tuple[str, ...]:
        return (UNDIVIDED, DIVIDED) if self.group_split_db else (UNDIVIDED,)

    def c2_for(self, dyn_index: int) -> int:
        return self.C2[dyn_index] if len(self.C2) > 1 else self.C2[0]

    def points(self) -> list[tuple[float, float, int, str]]:
        """Sweep points ``(snr_db, dyn_db, C2, arrangement)`` in output order."""
        pts = []
        for i, dyn in enumerate(self.dynamic_range_db):
            for arr in self.arrangements:
                for snr in self.snr_grid:
                    pts.append((float(snr), float(dyn), self.c2_for(i), arr))
        return pts


_MODE_DEFAULTS = {
    "fig1": dict(K=50, dynamic_range_db=(10.0,), C2=(2000,)),
    "fig2": dict(K=20, dynamic_range_db=(40.0,), C2=(20000,), group_split_db=(20.0,),
                 group_C2=(3000, 3000), trials=1000, snr_grid=(-4.0, 0.0, 4.0, 10.0)),
    "theorem": dict(K=16, N=2 ** 16, M=4, dynamic_range_db=(6.0,), C2=(0,),
                    snr_grid=(0.0,)),
    "custom": dict(),
}


# --- config files -------------------------------------------------------------

def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int(s: str) -> int:
    s = s.strip()
    if "**" in s:
        base, exp = s.split("**")
        return int(base) ** int(exp)
    if "^" in s:
        base, exp = s.split("^")
        return int(base) ** int(exp)
    return int(s)


def _parse_list(conv):
    def parse(s: str):
        return tuple(conv(x) for x in s.split(",") if x.strip())
    return parse


def _optional(conv):
    def parse(s: str):
        return None if s.strip().lower() in ("", "none") else conv(s)
    return parse


_FIELD_PARSERS = {
    "mode": str.strip, "K": _parse_int, "N": _parse_int, "S": _parse_int,
    "M": _parse_int, "T": float, "trials": _parse_int,
    "snr_grid": _parse_list(float), "dynamic_range_db": _parse_list(float),
    "C2": _parse_list(_parse_int), "sigma2": float,
    "a_lo": _optional(float), "a_hi": _optional(float),
    "dmin": float, "dmax": float, "alpha": float, "fading": _parse_bool,
    "outage_mode": str.strip, "noise_mode": str.strip, "public_seed": _parse_int,
    "seed": _parse_int, "workers": _parse_int, "rho": _optional(float),
    "eta": _optional(float), "eta_verify": _optional(float), "R": float,
    "D": _parse_int, "beta0": float, "beta1": float, "beta2": float,
    "B": _optional(_parse_int), "C0": _optional(_parse_int), "C1": _optional(_parse_int),
    "group_split_db": _parse_list(float), "group_C2": _parse_list(_parse_int),
    "group_sizes": _parse_list(_parse_int), "hash_width_mode": str.strip,
    "out_dir": str.strip, "plot": _parse_bool,
}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; keyword overrides win over file values."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for key, raw in cp["config"].items():
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    mode = values.pop("mode", "fig1")
    try:
        return ExperimentConfig.for_mode(mode, **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)


# --- operating points -----------------------------------------------------------

def amplitude_for_snr(snr_db: float, sigma2: float) -> float:
    """``a_lo`` whose lowest SNR ``a_lo**2 / (2 sigma2)`` equals ``snr_db``."""
    return math.sqrt(2 * sigma2 * 10 ** (snr_db / 10))


def lowest_snr_db(a_lo: float, sigma2: float) -> float:
    if sigma2 == 0:
        return math.inf
    return 10 * math.log10(a_lo ** 2 / (2 * sigma2))


def _amplitude_range(cfg: ExperimentConfig, snr_db: float, dyn_db: float) -> tuple[float, float]:
    if cfg.sigma2 > 0:
        a_lo = amplitude_for_snr(snr_db, cfg.sigma2)
        return a_lo, a_lo * 10 ** (dyn_db / 20)
    # noiseless runs have no SNR axis; the window comes from the config instead
    a_lo = cfg.a_lo or 1.0
    return a_lo, cfg.a_hi or a_lo * 10 ** (dyn_db / 20)


def _build_params(cfg: ExperimentConfig, K: int, a_lo: float, a_hi: float,
                  C2: Optional[int]) -> SystemParams:
    if cfg.mode == "theorem":
        p = derive_theorem_params(K, cfg.N, cfg.S, cfg.M, cfg.R, cfg.D, cfg.beta0,
                                  cfg.beta1, cfg.beta2, a_lo, a_hi, cfg.sigma2,
                                  T=cfg.T, rho=cfg.rho)
        if C2:
            p = p.with_c2(C2)
    else:
        p = derive_simulation_params(K, cfg.N, cfg.M, cfg.sigma2, a_lo, a_hi, C2=C2,
                                     S=cfg.S, T=cfg.T, rho=cfg.rho)
    changes = {}
    for name in ("B", "C0", "C1", "eta", "eta_verify"):
        v = getattr(cfg, name)
        if v is not None:
            changes[name] = v
    if cfg.D != p.D and cfg.mode != "theorem":
        changes["D"] = cfg.D
    if changes:
        if "eta" in changes and "eta_verify" not in changes:
            changes["eta_verify"] = changes["eta"]
        prov = dict(p.provenance, **{k: "config override" for k in changes})
        p = replace(p, varrho=None if "eta" in changes else p.varrho,
                    provenance=prov, **changes)
    return p


def point_params(cfg: ExperimentConfig, snr_db: float, dyn_db: float, C2: int) -> SystemParams:
    """Parameters of the undivided system at one sweep point."""
    a_lo, a_hi = _amplitude_range(cfg, snr_db, dyn_db)
    return _build_params(cfg, cfg.K, a_lo, a_hi, C2)


def group_plan(cfg: ExperimentConfig, snr_db: float, dyn_db: float) -> GroupingPlan:
    """Time-division plan: contiguous amplitude groups split at ``group_split_db``."""
    if not cfg.group_split_db:
        raise ConfigError("no grouping configured (group_split_db is empty)")
    a_lo, a_hi = _amplitude_range(cfg, snr_db, dyn_db)
    edges = [a_lo] + [a_lo * 10 ** (x / 20) for x in cfg.group_split_db] + [a_hi]
    n = len(edges) - 1
    sizes = cfg.group_sizes or _even_split(cfg.K, n)
    try:
        return plan_grouping(cfg.K, cfg.N, cfg.M, cfg.sigma2, list(zip(edges, edges[1:])),
                             sizes, cfg.group_C2, cfg.hash_width_mode, T=cfg.T, rho=cfg.rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _even_split(K: int, n: int) -> tuple[int, ...]:
    q, r = divmod(K, n)
    return tuple(q + (1 if i < r else 0) for i in range(n))


# --- trials ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    snr_db: float
    dyn_db: float
    arrangement: str
    K_active: int
    frame_error: bool
    miss_count: int
    false_count: int
    delay_failures: int
    delay_err_sum: float
    delay_err_count: int
    degenerate: bool
    wall_time: float = field(default=0.0, compare=False)

    @property
    def mean_delay_err(self) -> float:
        """Mean ``|tau_hat - tau|`` over correctly recovered devices."""
        if self.delay_err_count == 0:
            return math.nan
        return self.delay_err_sum / self.delay_err_count


@dataclass
class _Population:
    ids: np.ndarray
    messages: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    d: np.ndarray


def _trial_streams(seed: int, trial: int):
    ss = np.random.SeedSequence(seed, spawn_key=(trial,))
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def _draw_population(cfg: ExperimentConfig, rng: np.random.Generator) -> _Population:
    ids = rng.choice(cfg.N, size=cfg.K, replace=False)
    messages = rng.integers(0, cfg.S, size=cfg.K)
    a = np.empty(cfg.K, dtype=complex)
    d = np.empty(cfg.K)
    tau = np.empty(cfg.K)
    for k in range(cfg.K):
        # bounds only set the outage flag, which is recomputed per point
        a[k], _, d[k] = draw_channel(rng, cfg.dmin, cfg.dmax, cfg.alpha, 0.0, math.inf,
                                     fading=cfg.fading)
        tau[k] = draw_delay(rng, cfg.M, cfg.T)
    return _Population(ids, messages, a, tau, d)


def _decode_frame(cfg: ExperimentConfig, p: SystemParams, pop: _Population,
                  members: np.ndarray, outage: np.ndarray, noise_rng, stat_rng):
    cb = Codebook(p, cfg.public_seed)
    cws = [cb.codeword(int(pop.ids[k]), int(pop.messages[k])) for k in members]
    chs = [ChannelRealization(complex(pop.a[k]), float(pop.tau[k]), bool(outage[k]),
                              float(pop.d[k])) for k in members]
    include = cfg.outage_mode == "include"
    obs, truth = observe(cws, chs, p, noise_rng, include_outage=include)
    report = peel(obs, p, cb, stat_rng, truth=truth, noise_mode=cfg.noise_mode)
    return report, truth


def run_trial(cfg: ExperimentConfig, trial_idx: int, snr_db: Optional[float] = None,
              dyn_db: Optional[float] = None, arrangement: str = UNDIVIDED,
              C2: Optional[int] = None) -> TrialRecord:
    """Draw, synthesize, decode and score one slot.

    Defaults to the first SNR point and dynamic range of the config.
    """
    start = time.perf_counter()
    snr_db = cfg.snr_grid[0] if snr_db is None else snr_db
    if dyn_db is None:
        dyn_db = cfg.dynamic_range_db[0]
    if C2 is None:
        idx = cfg.dynamic_range_db.index(dyn_db) if dyn_db in cfg.dynamic_range_db else 0
        C2 = cfg.c2_for(idx)
    ch_rng, noise_rng, stat_rng = _trial_streams(cfg.seed, trial_idx)
    pop = _draw_population(cfg, ch_rng)
    a_lo, a_hi = _amplitude_range(cfg, snr_db, dyn_db)
    mag = np.abs(pop.a)
    outage = ~((mag > a_lo) & (mag < a_hi))
    include = cfg.outage_mode == "include"

    if arrangement == UNDIVIDED:
        p = point_params(cfg, snr_db, dyn_db, C2)
        frames = [(p, np.arange(cfg.K))]
    elif arrangement == DIVIDED:
        plan = group_plan(cfg, snr_db, dyn_db)
        frames = []
        for g, gp in enumerate(plan.groups):
            # genie grouping by amplitude; outage devices sit in no group
            in_g = (mag >= gp.lo) & (mag < gp.hi) & ~outage
            if include and g == 0:
                in_g |= outage
            frames.append((gp.params, np.flatnonzero(in_g)))
    else:
        raise ConfigError(f"unknown arrangement {arrangement!r}")

    miss = false = dfail = active = 0
    err_sum, err_n = 0.0, 0
    degenerate = False
    for p, members in frames:
        report, truth = _decode_frame(cfg, p, pop, members, outage, noise_rng, stat_rng)
        active += len(truth.targets)
        miss += report.miss_count
        false += report.false_count
        dfail += report.delay_failures
        degenerate |= report.degenerate
        good = {r.id for r in report.recovered if (r.id, r.message) in truth.targets}
        for k, e in report.delay_errors.items():
            if k in good:
                err_sum += abs(e)
                err_n += 1
    frame_error = miss > 0 or false > 0 or dfail > 0
    return TrialRecord(trial=trial_idx, seed=cfg.seed, snr_db=float(snr_db),
                       dyn_db=float(dyn_db), arrangement=arrangement, K_active=active,
                       frame_error=frame_error, miss_count=miss, false_count=false,
                       delay_failures=dfail, delay_err_sum=err_sum, delay_err_count=err_n,
                       degenerate=degenerate, wall_time=time.perf_counter() - start)


# --- sweeps ---------------------------------------------------------------------

def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    from scipy.stats import binomtest  # deferred: scipy.stats dominates CLI start-up

    ci = binomtest(errors, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    dyn_db: float
    arrangement: str
    trials: int
    frame_errors: int
    error_rate: float
    wilson_lo: float
    wilson_hi: float
    mean_delay_err: float
    codelength: int
    mean_active: float = field(default=math.nan, compare=False)

    def as_csv(self) -> list[str]:
        return [_fmt(self.snr_db), _fmt(self.dyn_db), self.arrangement, str(self.trials),
                str(self.frame_errors), _fmt(self.error_rate), _fmt(self.wilson_lo),
                _fmt(self.wilson_hi), _fmt(self.mean_delay_err), str(self.codelength)]


def _fmt(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else format(x, ".10g")


@dataclass
class SweepResult:
    rows: list[SweepRow]
    records: dict[tuple, list[TrialRecord]]

    def row(self, snr_db: float, dyn_db: float, arrangement: str = UNDIVIDED) -> SweepRow:
        for r in self.rows:
            if (r.snr_db, r.dyn_db, r.arrangement) == (snr_db, dyn_db, arrangement):
                return r
        raise KeyError((snr_db, dyn_db, arrangement))


def _task(args) -> TrialRecord:
    cfg, trial, snr, dyn, arr, c2 = args
    return run_trial(cfg, trial, snr, dyn, arr, c2)


def _point_codelength(cfg: ExperimentConfig, snr: float, dyn: float, c2: int, arr: str) -> int:
    if arr == DIVIDED:
        return group_plan(cfg, snr, dyn).total_codelength
    return codelength(point_params(cfg, snr, dyn, c2))


def aggregate(records: Sequence[TrialRecord], codelength_value: int) -> SweepRow:
    r0 = records[0]
    n = len(records)
    errors = sum(r.frame_error for r in records)
    lo, hi = wilson_interval(errors, n)
    cnt = sum(r.delay_err_count for r in records)
    mean_err = sum(r.delay_err_sum for r in records) / cnt if cnt else math.nan
    return SweepRow(snr_db=r0.snr_db, dyn_db=r0.dyn_db, arrangement=r0.arrangement,
                    trials=n, frame_errors=errors, error_rate=errors / n,
                    wilson_lo=lo, wilson_hi=hi, mean_delay_err=mean_err,
                    codelength=codelength_value,
                    mean_active=sum(r.K_active for r in records) / n)


def run_sweep(cfg: ExperimentConfig, out_dir: Optional[str] = None,
              csv_name: str = "sweep.csv", progress=None) -> SweepResult:
    """Run every ``(dynamic range, arrangement, SNR)`` point for ``cfg.trials`` trials.

    Writes ``csv_name`` (and ``sweep.svg`` when ``cfg.plot``) under ``out_dir``
    if one is given.  Results are independent of ``cfg.workers``.
    """
    points = cfg.points()
    lengths = [_point_codelength(cfg, s, d, c, a) for s, d, c, a in points]
    tasks = [(cfg, t, s, d, a, c) for (s, d, c, a) in points for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            flat = list(ex.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    else:
        flat = []
        for i, t in enumerate(tasks):
            flat.append(_task(t))
            if progress is not None:
                progress(i + 1, len(tasks))
    records, rows = {}, []
    for j, (pt, L) in enumerate(zip(points, lengths)):
        recs = flat[j * cfg.trials:(j + 1) * cfg.trials]
        records[(pt[0], pt[1], pt[3])] = recs
        rows.append(aggregate(recs, L))
    result = SweepResult(rows=rows, records=records)
    if out_dir is not None:
        write_csv(rows, Path(out_dir) / csv_name)
        if cfg.plot:
            plot_sweep(rows, Path(out_dir) / (Path(csv_name).stem + ".svg"))
    return result


def format_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_csv(rows))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def plot_sweep(rows: Sequence[SweepRow], path) -> Path:
    """Error rate vs lowest SNR, one curve per (dynamic range, arrangement)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    keys = sorted({(r.dyn_db, r.arrangement) for r in rows})
    for dyn, arr in keys:
        sel = [r for r in rows if (r.dyn_db, r.arrangement) == (dyn, arr)]
        x = [r.snr_db for r in sel]
        y = [r.error_rate for r in sel]
        err = [[r.error_rate - r.wilson_lo for r in sel], [r.wilson_hi - r.error_rate for r in sel]]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=f"{dyn:g} dB {arr}")
    ax.set_xlabel("lowest SNR (dB)")
    ax.set_ylabel("frame error rate")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return path


# --- grouping experiment ----------------------------------------------------------

@dataclass
class GroupingComparison:
    snr_db: float
    undivided: SweepRow
    divided: SweepRow
    divided_only_errors: int
    undivided_only_errors: int
    p_value: float

    @property
    def divided_not_worse(self) -> bool:
        """One-sided test at 5%: no evidence that dividing raises the error rate."""
        return self.p_value > 0.05


@dataclass
class GroupingResult:
    sweep: SweepResult
    comparisons: list[GroupingComparison]
    codelengths: dict[str, int]
    reference_codelengths: dict[str, int]


def paired_test(undivided: Sequence[TrialRecord], divided: Sequence[TrialRecord]):
    """Exact one-sided sign test on discordant trial pairs.

    Tests ``H1: divided error rate > undivided error rate``.  Returns
    ``(divided_only, undivided_only, p_value)``.
    """
    from scipy.stats import binomtest

    if len(undivided) != len(divided):
        raise ValueError("paired test needs equal trial counts")
    d_only = sum(1 for u, d in zip(undivided, divided) if d.frame_error and not u.frame_error)
    u_only = sum(1 for u, d in zip(undivided, divided) if u.frame_error and not d.frame_error)
    n = d_only + u_only
    p = 1.0 if n == 0 else float(binomtest(d_only, n, 0.5, alternative="greater").pvalue)
    return d_only, u_only, p


def run_grouping_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None,
                            progress=None) -> GroupingResult:
    """Undivided versus time-divided decoding on shared device populations."""
    if not cfg.group_split_db:
        raise ConfigError("grouping experiment needs group_split_db")
    cfg = replace(cfg, dynamic_range_db=cfg.dynamic_range_db[:1], C2=cfg.C2[:1])
    sweep = run_sweep(cfg, out_dir, csv_name="grouping.csv", progress=progress)
    dyn = cfg.dynamic_range_db[0]
    comps = []
    for snr in cfg.snr_grid:
        u = sweep.records[(float(snr), float(dyn), UNDIVIDED)]
        d = sweep.records[(float(snr), float(dyn), DIVIDED)]
        d_only, u_only, p = paired_test(u, d)
        comps.append(GroupingComparison(float(snr), sweep.row(snr, dyn, UNDIVIDED),
                                        sweep.row(snr, dyn, DIVIDED), d_only, u_only, p))
    snr0 = cfg.snr_grid[0]
    lengths = {UNDIVIDED: _point_codelength(cfg, snr0, dyn, cfg.C2[0], UNDIVIDED),
               DIVIDED: _point_codelength(cfg, snr0, dyn, cfg.C2[0], DIVIDED)}
    return GroupingResult(sweep=sweep, comparisons=comps, codelengths=lengths,
                          reference_codelengths=dict(REFERENCE_CODELENGTHS))


def config_fields() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
