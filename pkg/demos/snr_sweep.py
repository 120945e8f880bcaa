"""
Error rate against lowest SNR
=============================

A short version of the K=50 sweep.  Every SNR point reuses the same device
draws, so the curve is smooth even with few trials.
"""

from sofdma.harness import ExperimentConfig, format_csv, run_sweep

cfg = ExperimentConfig.for_mode("fig1", trials=60, snr_grid=(-4.0, 0.0, 4.0, 8.0), plot=True)
result = run_sweep(cfg, out_dir="demo_results")
print(format_csv(result.rows))

for row in result.rows:
    bar = "#" * int(round(60 * row.error_rate))
    print(f"{row.snr_db:5.1f} dB  {row.error_rate:5.3f}  {bar}")
print("CSV and SVG in demo_results/")
