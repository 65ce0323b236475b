"""Short-maturity rough Bergomi smile: exact sampler vs multifactor.

The exact mode samples the fractional integral jointly with the
Brownian path from the full covariance matrix; the multifactor mode
replaces the singular kernel by a 40-factor systematic exponential sum
whose factor integrals have an exact per-step recursion. Both modes run
from the same seed, so the price-driving noise is shared: near the money
the curve gap is dominated by the kernel approximation error rather than
Monte Carlo noise. (On the deep in-the-money wing the tiny vega blows
residual noise up in implied-vol units; the confidence band there is
correspondingly wide.)
"""

import numpy as np

from rvol import GridSpec
from rvol.bergomi import BergomiParams
from rvol.mc import McConfig, bergomi_smile

params = BergomiParams()  # H=0.07, v0=0.235^2, eta=1.9, rho=-0.9
grid = GridSpec(T=0.041, N=20)
cfg = McConfig(paths=50_000, seed=1)
strikes = np.linspace(-0.10, 0.05, 16)

rows = bergomi_smile(params, grid, cfg, strikes, kernel_factors=40)
by_mode = {"exact": {}, "multifactor": {}}
for mode, k, mean, half, vol in rows:
    by_mode[mode][round(k, 6)] = (mean, half, vol)

print(f"{'k':>8} {'iv exact':>10} {'iv multifactor':>15} {'gap':>9}")
for k in strikes:
    key = round(float(k), 6)
    _, _, vol_exact = by_mode["exact"][key]
    _, _, vol_multi = by_mode["multifactor"][key]
    print(f"{k:>8.3f} {vol_exact:>10.4f} {vol_multi:>15.4f} {vol_multi - vol_exact:>+9.4f}")

with open("bergomi_smile.csv", "w", encoding="utf-8") as fh:
    fh.write("mode,k,price,ci_halfwidth,implied_vol\n")
    for mode, k, mean, half, vol in rows:
        fh.write(f"{mode},{k:.6f},{mean:.8g},{half:.4g},{vol:.6f}\n")
print("\nsmile data written to bergomi_smile.csv")
