"""
Time division by amplitude
==========================

Splitting devices into a strong and a weak group shortens subframe 2, because
each group needs only its own dynamic range.  Here are the codelengths and a
small paired comparison on shared populations.
"""

from dataclasses import replace

from sofdma.harness import (REFERENCE_CODELENGTHS, ExperimentConfig, group_plan, point_params,
                            run_grouping_experiment)
from sofdma.params import codelength

cfg = ExperimentConfig.for_mode("fig2")
snr, dyn = cfg.snr_grid[0], cfg.dynamic_range_db[0]

L_und = codelength(point_params(cfg, snr, dyn, cfg.C2[0]))
print(f"undivided  L={L_und}  (quoted {REFERENCE_CODELENGTHS['undivided']})")
for mode in ("shared", "per-group"):
    plan = group_plan(replace(cfg, hash_width_mode=mode), snr, dyn)
    parts = " + ".join(str(g.codelength) for g in plan.groups)
    print(f"divided[{mode}]  L={plan.total_codelength} = {parts}")
print(f"(quoted divided {REFERENCE_CODELENGTHS['divided']})")

small = replace(cfg, trials=40, snr_grid=(4.0, 10.0))
res = run_grouping_experiment(small, out_dir="demo_results")
for c in res.comparisons:
    print(f"{c.snr_db:5.1f} dB  undivided {c.undivided.error_rate:.3f}  "
          f"divided {c.divided.error_rate:.3f}  p(divided worse)={c.p_value:.3f}")
