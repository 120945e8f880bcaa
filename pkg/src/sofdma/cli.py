"""Command-line entry point: ``plan``, ``simulate``, ``sweep``, ``grouping``, ``oracle-check``.

Exit status is 0 on success, 1 on a configuration or I/O error and 2 when an
oracle check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .harness import (DIVIDED, REFERENCE_CODELENGTHS, UNDIVIDED, ConfigError, ExperimentConfig,
                      format_csv, group_plan, load_config, point_params, run_grouping_experiment,
                      run_sweep, run_trial)
from .oracles import run_oracles
from .params import check_eta_admissible, codelength

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 1, 2


def _config(args) -> ExperimentConfig:
    overrides = dict(seed=args.seed, trials=getattr(args, "trials", None),
                     out_dir=getattr(args, "out", None), workers=getattr(args, "workers", None))
    if getattr(args, "plot", False):
        overrides["plot"] = True
    if args.config is None:
        mode = args.mode or "fig1"
        return ExperimentConfig.for_mode(mode, **{k: v for k, v in overrides.items()
                                                  if v is not None})
    if args.mode is not None:
        overrides["mode"] = args.mode
    return load_config(args.config, **overrides)


def _table(rows: Sequence[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {_show(v)}" for k, v in rows)


def _show(v) -> str:
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def _plan_rows(cfg: ExperimentConfig) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []
    snr = cfg.snr_grid[0]
    for i, dyn in enumerate(cfg.dynamic_range_db):
        p = point_params(cfg, snr, dyn, cfg.c2_for(i))
        tag = f"[dyn={dyn:g}dB]" if len(cfg.dynamic_range_db) > 1 else ""
        rows += [(f"{k}{tag}", v) for k, v in p.as_rows()]
        L = codelength(p)
        rows.append((f"L{tag}", L))
        if p.beta0 is not None and p.beta1 is not None:
            ok, margin = check_eta_admissible(p)
            rows.append((f"eta_admissible{tag}", ok))
            rows.append((f"eta_margin{tag}", margin))
    if cfg.group_split_db:
        L_und = codelength(point_params(cfg, snr, cfg.dynamic_range_db[0], cfg.c2_for(0)))
        rows.append(("L_undivided", L_und))
        rows.append(("L_undivided_ref", REFERENCE_CODELENGTHS[UNDIVIDED]))
        rows.append(("L_undivided_rel_diff", _rel(L_und, REFERENCE_CODELENGTHS[UNDIVIDED])))
        for mode in ("shared", "per-group"):
            plan = group_plan(replace(cfg, hash_width_mode=mode), snr, cfg.dynamic_range_db[0])
            for g, gp in enumerate(plan.groups):
                rows.append((f"L_group{g}[{mode}]", gp.codelength))
            rows.append((f"L_divided[{mode}]", plan.total_codelength))
        L_div = group_plan(cfg, snr, cfg.dynamic_range_db[0]).total_codelength
        rows.append(("L_divided_ref", REFERENCE_CODELENGTHS[DIVIDED]))
        rows.append((f"L_divided_rel_diff[{cfg.hash_width_mode}]",
                     _rel(L_div, REFERENCE_CODELENGTHS[DIVIDED])))
    return rows


def _rel(x: float, ref: float) -> float:
    return (x - ref) / ref


def cmd_plan(args) -> int:
    cfg = _config(args)
    rows = _plan_rows(cfg)
    print(_table(rows))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "value"])
    for k, v in rows:
        w.writerow([k, _show(v)])
    print()
    print(buf.getvalue(), end="")
    if args.out:
        _write(Path(args.out) / "plan.csv", buf.getvalue())
    return EXIT_OK


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


_TRIAL_COLUMNS = ("trial", "seed", "snr_db", "dyn_db", "arrangement", "K_active",
                  "frame_error", "miss_count", "false_count", "delay_failures",
                  "mean_delay_err", "degenerate")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    snr = args.snr if args.snr is not None else cfg.snr_grid[-1]
    dyn = args.dyn if args.dyn is not None else cfg.dynamic_range_db[0]
    arr = args.arrangement
    if arr == DIVIDED and not cfg.group_split_db:
        raise ConfigError("divided arrangement needs group_split_db in the config")
    start = time.perf_counter()
    recs = [run_trial(cfg, t, snr, dyn, arr) for t in range(cfg.trials)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_TRIAL_COLUMNS)
    for r in recs:
        w.writerow([getattr(r, c) if c != "mean_delay_err" else _show(r.mean_delay_err)
                    for c in _TRIAL_COLUMNS])
    errors = sum(r.frame_error for r in recs)
    if args.out:
        _write(Path(args.out) / "trials.csv", buf.getvalue())
    else:
        print(buf.getvalue(), end="")
    print(f"snr={snr:g} dB dyn={dyn:g} dB {arr}: {errors}/{len(recs)} frame errors "
          f"in {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return EXIT_OK


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        print(f"\r{done}/{total} trials", end="" if done < total else "\n", file=sys.stderr)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = args.out or cfg.out_dir
    result = run_sweep(cfg, out, progress=_progress)
    print(format_csv(result.rows), end="")
    print(f"wrote {Path(out) / 'sweep.csv'}", file=sys.stderr)
    return EXIT_OK


def cmd_grouping(args) -> int:
    cfg = _config(args)
    if not cfg.group_split_db:
        cfg = replace(cfg, group_split_db=(20.0,), group_C2=(3000, 3000))
    out = args.out or cfg.out_dir
    res = run_grouping_experiment(cfg, out, progress=_progress)
    print(format_csv(res.sweep.rows), end="")
    print()
    rows = []
    for arr in (UNDIVIDED, DIVIDED):
        rows.append((f"L_{arr}", res.codelengths[arr]))
        rows.append((f"L_{arr}_ref", res.reference_codelengths[arr]))
    for c in res.comparisons:
        rows.append((f"snr={c.snr_db:g}dB divided-only/undivided-only errors",
                     f"{c.divided_only_errors}/{c.undivided_only_errors}"))
        rows.append((f"snr={c.snr_db:g}dB one-sided p (divided worse)", c.p_value))
    print(_table(rows))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    seed = args.seed if args.seed is not None else 0
    results = run_oracles(seed=seed, scale=args.scale)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  max_error={r.max_error:.3g}  "
              f"tolerance={r.tolerance:.3g}  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sofdma", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, trials=True):
        p.add_argument("config", nargs="?", help="key = value config file")
        p.add_argument("--mode", choices=("fig1", "fig2", "theorem", "custom"),
                       help="mode defaults to start from (overrides the file's mode)")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--out", help="output directory")
        if trials:
            p.add_argument("--trials", type=int, help="trials per point")
            p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("plan", help="print derived parameters and codelengths")
    common(p, trials=False)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run trials at one operating point")
    common(p)
    p.add_argument("--snr", type=float, help="lowest SNR in dB (default: top of the grid)")
    p.add_argument("--dyn", type=float, help="dynamic range in dB")
    p.add_argument("--arrangement", choices=(UNDIVIDED, DIVIDED), default=UNDIVIDED)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="error rate over the SNR grid, written as CSV")
    common(p)
    p.add_argument("--plot", action="store_true", help="also write sweep.svg")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("grouping", help="undivided versus time-divided comparison")
    common(p)
    p.add_argument("--plot", action="store_true", help="also write grouping.svg")
    p.set_defaults(func=cmd_grouping)

    p = sub.add_parser("oracle-check", help="run the independent oracle comparisons")
    p.add_argument("config", nargs="?", help="ignored; accepted for symmetry")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on probe counts")
    p.set_defaults(func=cmd_oracle_check)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
