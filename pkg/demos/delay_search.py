"""
Crude and fine delay search
===========================

The subframe-2 statistic peaks at the true delay.  A sample-spaced scan finds
the slot, a fine scan inside it finds the peak.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sofdma.channel import ChannelRealization, synth_subframe2
from sofdma.codebook import Codebook
from sofdma.delay import crude_threshold, estimate_delay, fine_step, noiseless_statistic
from sofdma.harness import amplitude_for_snr
from sofdma.params import derive_simulation_params

rng = np.random.default_rng(3)
a_lo = amplitude_for_snr(15.0, 1.0)
p = derive_simulation_params(50, 2 ** 38, 20, 1.0, a_lo, a_lo * 10 ** 0.5, C2=2000)
cw = Codebook(p).codeword(2024)

tau = 7.37
wf = synth_subframe2([cw], [ChannelRealization(p.a_lo * np.exp(0.4j), tau)], p)

# noiseless statistic on a dense grid: a triangle of half-width T on a noisy floor
grid = np.linspace(0, p.M * p.T, 4001)
stat = np.abs(noiseless_statistic(wf, cw.chips, grid))

est = estimate_delay(wf, cw.chips, p, rng)
print(f"threshold {crude_threshold(p):.1f}, crude hits at samples {est.crude.exceed}")
print(f"slot {est.crude.slot}, fine step {fine_step(p):.5f}")
print(f"tau={tau}  tau_hat={est.tau_hat:.5f}  error={est.tau_hat - tau:+.5f}")

fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(grid, stat, lw=0.8, label="|statistic|, noiseless")
ax.plot(np.arange(p.M + 1) * p.T, est.crude.magnitudes, "o", ms=3, label="crude grid, noisy")
ax.axhline(crude_threshold(p), color="k", ls=":", lw=0.8)
ax.axvline(tau, color="r", lw=0.6)
ax.set_xlabel("tau (samples)")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("delay_search.svg")
print("wrote delay_search.svg")
