"""Depth of a random string: prediction, exact value and simulation.

For p = 1/2 the steps are lattice and the mean depth carries a tiny
periodic wobble in log n.  The exact finite-n mean follows it.
"""

import math

import numpy as np

from renewtrie import sim, theory
from renewtrie.source import new_source


def exact_mean_depth(p, n):
    # P(D_n > k) is the chance some other string shares the first k letters
    q = 1 - p
    total = 0.0
    for k in range(0, 300):
        j = np.arange(k + 1)
        logc = np.array([math.lgamma(k + 1) - math.lgamma(i + 1) - math.lgamma(k - i + 1) for i in j])
        prob = np.exp(j * math.log(p) + (k - j) * math.log(q))
        with np.errstate(divide="ignore"):
            term = float(np.sum(np.exp(logc) * prob * -np.expm1((n - 1) * np.log1p(-prob))))
        total += term
        if k > 5 and term < 1e-15:
            break
    return total


half = new_source(0.5)
print("p=1/2: n, exact E D_n, smooth part, smooth + oscillation")
for k in range(8):
    n = int(2**16 * 2 ** (k / 8))
    pr = theory.predict_depth(half, n)
    print(f"  {n:7d}  {exact_mean_depth(0.5, n):.7f}  {pr.smooth:.7f}  {pr.value:.7f}")

src = new_source(0.3)
n = 4096
spec = sim.ExperimentSpec("depth", src, replicates=4000, n=n, method="counts")
summary = sim.run(spec)
pred = sim.predict_for(spec)
cmp = sim.compare(summary, pred, *sim.TOLERANCES["depth"])
print(f"\np=0.3, n={n}: simulated {summary.mean:.4f} +- {summary.stderr:.4f}, "
      f"predicted {pred.value:.4f}, exact {exact_mean_depth(0.3, n):.4f}, z={cmp.z:.2f}")
print(f"variance: simulated {summary.variance:.3f}, leading term sigma^2/H^3 ln n = {pred.variance:.3f}")
