"""Sources, random strings and tries.

A source is a Bernoulli(p) letter model.  Strings are addressed by
(seed, id) and materialized lazily, so a trie only ever looks at the
letters it needs to separate its strings.
"""

from renewtrie.source import StringHandle, bit_at, new_source
from renewtrie.trie import (
    build_trie,
    depth_of,
    imbalance_of,
    occupancy_profile,
    to_dot,
    to_patricia,
)

src = new_source(0.3)
print(f"p=0.3: H={src.H:.6f} nats, Var X={src.varX:.6f}, {src.arith}")
print(f"p=0.5: {new_source(0.5).arith} (always a lattice source)")

h = StringHandle(src, seed=1, id=0)
print("first 20 letters of string (1, 0):", "".join(str(bit_at(h, k)) for k in range(1, 21)))

handles = [StringHandle(src, 1, i) for i in range(8)]
t = build_trie(src, handles)
print(t)
for i in range(8):
    print(f"  string {i}: depth {depth_of(t, i)}, imbalance {imbalance_of(t, i):+d}")

pt = to_patricia(t)
print(f"Patricia: {pt.internal_count} internal nodes for n=8 (always n-1)")

tb = build_trie(src, handles, b=2)
z, internal = occupancy_profile(tb)
print(f"b=2 trie: buckets by size {z}, internal {internal}")

print("\nDOT dump of the small trie:\n")
print(to_dot(build_trie(src, handles[:4])))
