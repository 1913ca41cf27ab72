"""Trie size, b-trie occupancy, Patricia saving and insertion cost."""

from renewtrie import sim, theory
from renewtrie.source import new_source

src = new_source(0.3)

c = theory.btrie_constants(src, 3)
print("b=3 occupancy constants pi_j:", [round(v, 6) for v in c.pi],
      f"(two evaluations agree to {c.max_disagreement():.1e})")

for kind, extra in (("trie_size", {}), ("btrie_occupancy", {"b": 3, "j": 2})):
    spec = sim.ExperimentSpec(kind, src, replicates=500, n=2000, method="counts", **extra)
    s = sim.run(spec)
    print(f"{kind:16s} {spec.size_param:16s} simulated {s.mean:.5f} +- {s.stderr:.5f}, "
          f"predicted {sim.predict_for(spec).value:.5f}")

print(f"\nPatricia saving at p=0.3: {theory.patricia_saving(src).value:.5f} levels per string")
spec = sim.ExperimentSpec("patricia_depth", src, replicates=3000, n=4096, method="counts")
s = sim.run(spec)
print(f"Patricia depth n=4096: simulated {s.mean:.4f} +- {s.stderr:.4f}, predicted {sim.predict_for(spec).value:.4f}")

ins = theory.predict_insert(src, 10**4)
spec = sim.ExperimentSpec("insert", src, replicates=5000, n=10**4, method="counts")
s = sim.run(spec)
print(f"\ninsertion: P(N=0) predicted {ins.p0:.4f}, simulated {s.histogram.get(0, 0.0):.4f}")
print(f"           E N predicted {ins.mean:.4f}, simulated {s.mean:.4f} +- {s.stderr:.4f}")

half = new_source(0.5)
osc = theory.trie_size_oscillation(half)
print(f"\np=1/2 size oscillation: first Fourier modulus {abs(osc.coeffs[0]):.4e}, "
      f"amplitude bound {osc.amplitude_bound() / half.H:.3e}")
