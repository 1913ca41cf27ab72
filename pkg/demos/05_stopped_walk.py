"""The two-boundary stopped walk D = min(K + 1, first passage over V ln 2).

Moving K across V2/H walks through the normal, transition and degenerate
regimes.  In the transition band the prediction is first order: the
simulated means sit about one step higher, the size of the O(1) terms it
leaves out.
"""

import math

from renewtrie import sim, theory
from renewtrie.source import new_source

src = new_source(0.7)
V2 = 400.0
V = V2 / math.log(2)
print(f"p=0.7, V2={V2:g}, V2/H={V2 / src.H:.1f}")
for K in (500, 600, 640, 655, 670, 720, 800):
    w = theory.predict_stopped_walk(src, K, V)
    s = sim.run(sim.ExperimentSpec("stopped_walk", src, replicates=5000, K=K, V=V))
    print(f"  K={K}: regime {w.regime:3s} a={w.a:+.3f} predicted {w.mean:8.3f} (var {w.variance:7.2f}), "
          f"simulated {s.mean:8.3f} +- {s.stderr:.3f} (var {s.variance:7.2f})")
