"""Khodak and Tunstall dictionaries, parsing, and the VFC1 container."""

import math
from fractions import Fraction

from renewtrie import codes, theory
from renewtrie.source import StringHandle, new_source

src = new_source(Fraction(3, 5))
d = codes.tunstall_dictionary(src, 5)
st = codes.phrase_stats(d)
print("Tunstall, p=3/5, M=5:")
for i, (a, pr) in enumerate(zip(d.phrases, d.exact_probs)):
    print(f"  {i:03b}  {a:4s} {pr}")
print(f"  E D = {st.mean_len} exactly, rate {st.rate:.4f} bits/letter")

p3 = new_source(0.3)
for R in (1e3, 1e6):
    k = codes.khodak_dictionary(p3, R)
    pred = theory.predict_khodak(p3, R)
    same = codes.tunstall_dictionary(p3, k.M).phrases == k.phrases
    print(f"Khodak p=0.3 R={R:g}: M={k.M} (predicted {pred.M:.1f}), "
          f"E D={float(codes.phrase_stats(k).mean_len):.4f} (predicted {pred.mean_len.value:.4f}), "
          f"equals Tunstall(M): {same}")

R = math.exp(20)
M, law = codes.khodak_length_law(p3, R)
mean = sum(k * v for k, v in law.items())
print(f"R=e^20 without building the tree: M={M}, E D={mean:.4f}")

small = codes.khodak_dictionary(p3, 1e3)
h = StringHandle(p3, seed=5, id=0)
K, cw = codes.parse(small, h, 1000)
blob = codes.encode_stream(small, h, 1000)
_, back = codes.decode_stream(blob)
print(f"\nparsed 1000 letters into {K} phrases; VFC1 blob {len(blob)} bytes; "
      f"round trip exact: {back == h.word(1000)}")
