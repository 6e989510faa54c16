"""
Exact risk of the non-adaptive methods
======================================

Every method I-VI has a posterior mean of the form c_i * Ybar_i, so its risk
is a finite sum that can be evaluated without simulation.  Here the number of
machines grows as m = n^0.4 and we read off the log-log slope of the rmse.
"""
import math

import numpy as np

import distseq as ds

beta = 1.0
ns = [2**e for e in (12, 14, 16, 18, 20)]

# one boundary signal per truncation level; risk is exact, no seeds involved
table = {tag: [] for tag in ("I", "II", "III", "IV", "V", "VI")}
for n in ns:
    cfg = ds.ModelConfig(n, math.ceil(n**0.4))
    truth = ds.boundary_signal(beta, 1.0, cfg.trunc)
    for tag in table:
        table[tag].append((n, ds.exact_risk(tag, truth, cfg, beta).rmse))

optimal = -beta / (1 + 2 * beta)
print(f"minimax slope {optimal:+.3f}")
print("method  description                          slope")
for tag, pts in table.items():
    slope, _, r2 = ds.rate_fit(pts)
    print(f"{tag:>6}  {ds.aggregation.DESCRIPTIONS[tag]:<35}  {slope:+.3f}  (R^2 {r2:.4f})")

# the spreads tell the other half of the story: II is m times too narrow, VI m times too wide
cfg = ds.ModelConfig(4800, 40)
truth = ds.boundary_signal(beta, 1.0, cfg.trunc)
r = {tag: ds.exact_risk(tag, truth, cfg, beta) for tag in table}
print("\nat n=4800, m=40:  spread / (bias^2 + variance)")
for tag, x in r.items():
    print(f"{tag:>6}  {x.spread / x.rmse**2:8.3f}")
