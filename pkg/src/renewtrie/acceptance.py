"""The acceptance suite, shared by ``tests/test_acceptance.py`` and the
``renewtrie selftest`` command.

Each check returns a :class:`CheckResult`; ``line()`` formats the one-line
verdict that both front ends print.  Checks are deterministic: every random
draw derives from :data:`SEED`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import optimize, stats

from renewtrie import codes, theory
from renewtrie.sim import ExperimentSpec, run
from renewtrie.source import StringHandle, derive_seed, new_source, string_keys
from renewtrie.trie import count_nodes, occupancy_profile, random_trie, to_patricia

SEED = 314159
AD_LEVEL_INDEX = -1  # scipy.stats.anderson critical value at the 1% level
KS_C_001 = 1.628  # asymptotic two-sample KS coefficient at the 1% level


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self, timing: bool = True) -> str:
        tag = "PASS" if self.passed else "FAIL"
        text = f"[{tag}] criterion {self.number:2d}: {self.title} -- {self.detail}"
        return text + (f" ({self.seconds:.1f}s)" if timing else "")


def _within(diff: float, se: float, tol: float) -> bool:
    return abs(diff) <= max(3 * se, tol)


def anderson_normal(x, dither_seed: int | None = None) -> tuple[float, float]:
    """Anderson-Darling statistic for normality of standardized ``x`` and the
    1% critical value.  With ``dither_seed`` each value is first spread
    uniformly over its unit integer cell (a continuity correction)."""
    x = np.asarray(x, dtype=float)
    if dither_seed is not None:
        x = x + np.random.default_rng(dither_seed).uniform(-0.5, 0.5, x.size)
    z = (x - x.mean()) / x.std(ddof=1)
    res = stats.anderson(z, "norm")
    return float(res.statistic), float(res.critical_values[AD_LEVEL_INDEX])


# -- 1..5: exact and analytic ---------------------------------------------------


def check_1() -> CheckResult:
    bad = []
    runs = 0
    for p in (0.5, 0.3):
        src = new_source(p)
        for n, reps in ((2, 50), (10, 50), (1000, 10), (100_000, 2)):
            for r in range(reps):
                pt = to_patricia(random_trie(src, n, derive_seed(SEED, 1000 * n + r)))
                runs += 1
                if pt.internal_count != n - 1 or pt.external_count != n:
                    bad.append((p, n, r, pt.internal_count))
    return CheckResult(1, "Patricia internal count = n-1", not bad,
                       f"{runs} tries, {len(bad)} violations")


def check_2() -> CheckResult:
    bad = 0
    runs = 0
    for b in (1, 2, 3, 4):
        for p in (0.3, 0.5):
            src = new_source(p)
            for n in (b + 1, 50, 3000):
                for r in range(5):
                    seed = derive_seed(SEED, 10_000 * b + 100 * n + r)
                    z, _ = occupancy_profile(random_trie(src, n, seed, b))
                    z2, _ = count_nodes(src, string_keys(seed, np.arange(n, dtype=np.uint64)), b)
                    runs += 1
                    bad += sum(j * c for j, c in z.items()) != n
                    bad += sum(j * c for j, c in z2.items()) != n
    return CheckResult(2, "occupancy conservation sum j*Z_j = n", bad == 0,
                       f"{runs} tries (b=1..4), {bad} violations")


def check_3() -> CheckResult:
    t = codes.tunstall_dictionary(new_source(Fraction(3, 5)), 5)
    ed = codes.phrase_stats(t).mean_len
    k = codes.khodak_dictionary(new_source(Fraction(1, 2)), 8)
    ok = ed == Fraction(59, 25) and k.M == 16 and all(len(a) == 4 for a in k.phrases)
    return CheckResult(3, "Tunstall(0.6,5) E D = 2.36 and Khodak(0.5,8) M = 16", ok,
                       f"E D = {ed}, Khodak M = {k.M}, lengths = {sorted({len(a) for a in k.phrases})}")


def check_4() -> CheckResult:
    half = new_source(0.5)
    osc = theory.trie_size_oscillation(half)
    c1 = abs(osc.coeffs[0])
    grid = np.linspace(0.0, half.arith.d, 4097)
    peak = float(np.max(np.abs(osc(grid)))) / half.H
    d = half.arith.d
    res = optimize.minimize_scalar(lambda x: float(theory.psi_tunstall(d, x)), bounds=(0, 1), method="bounded",
                                   options={"xatol": 1e-12})
    sig3 = float(f"{c1:.3g}")
    ok = sig3 == 0.542e-6 and peak <= 1.6e-6 and abs(res.fun + 0.086071) <= 1e-5
    return CheckResult(4, "trie-size Fourier constants and min psi_T", ok,
                       f"|c(1)| = {c1:.4e}, max osc = {peak:.4e}, min psi_T = {res.fun:.7f}")


def _table(b: int, p: float):
    q = 1 - p
    H = -p * math.log(p) - q * math.log(q)
    pq = p * q
    if b == 2:
        return [1 - 2 / H * pq, pq / H]
    if b == 3:
        return [1 - 5 / (2 * H) * pq, pq / (2 * H), pq / (2 * H)]
    return [
        1 - 17 / (6 * H) * pq + 2 / (3 * H) * pq**2,
        pq / (2 * H) - pq**2 / H,
        pq / (6 * H) + 2 / (3 * H) * pq**2,
        pq / (3 * H) - pq**2 / (6 * H),
    ]


def check_5() -> CheckResult:
    worst_series = worst_sum = worst_table = 0.0
    for b in (2, 3, 4):
        for p in (0.3, 0.5, 0.7):
            c = theory.btrie_constants(new_source(p), b)
            worst_series = max(worst_series, c.max_disagreement())
            worst_sum = max(worst_sum, abs(sum((j + 1) * v for j, v in enumerate(c.pi)) - 1))
            worst_table = max(worst_table, max(abs(a - t) for a, t in zip(c.pi, _table(b, p))))
    ok = worst_series <= 1e-10 and worst_sum <= 1e-10 and worst_table <= 1e-10
    return CheckResult(5, "b-trie constants: two forms, sum rule, table", ok,
                       f"max |closed - series| = {worst_series:.1e}, max |sum j pi_j - 1| = {worst_sum:.1e}, "
                       f"max |pi - table| = {worst_table:.1e}")


# -- 6..8: tries by Monte Carlo ------------------------------------------------------


def check_6() -> CheckResult:
    parts = []
    ok = True
    for p, n in ((0.5, 256), (0.3, 1024)):
        src = new_source(p)
        trie = run(ExperimentSpec("depth", src, replicates=10_000, seed=SEED + 6, n=n)).samples
        ren = run(ExperimentSpec("depth_via_renewal", src, replicates=10_000, seed=SEED + 66, n=n)).samples
        ks = stats.ks_2samp(trie, ren).statistic
        crit = KS_C_001 * math.sqrt(2 / 10_000)
        ok &= ks < crit
        parts.append(f"p={p} n={n}: D={ks:.4f} < {crit:.4f}")
    return CheckResult(6, "depth law: trie vs renewal representation (KS 1%)", ok, "; ".join(parts))


VARIANCE_GRID = (2**10, 2**13, 2**16, 2**19)


def check_7() -> CheckResult:
    src = new_source(0.3)
    n = 2**16
    s = run(ExperimentSpec("depth", src, replicates=10_000, seed=SEED + 7, n=n))
    pred = theory.predict_depth(src, n)
    mean_ok = _within(s.mean - pred.value, s.stderr, 0.1)
    # Var D_n = slope * ln n + O(1): the slope is fitted across n, since the
    # constant term is as large as the ln n part at this size.
    ln = np.log(VARIANCE_GRID)
    var = np.array([
        run(ExperimentSpec("depth", src, replicates=50_000, seed=SEED + 70 + i, n=m, method="counts")).variance
        for i, m in enumerate(VARIANCE_GRID)
    ])
    slope = float(np.polyfit(ln, var, 1)[0])
    target = pred.extra["var_slope"]
    slope_ok = abs(slope / target - 1) <= 0.10
    return CheckResult(7, "depth mean at p=0.3, n=2^16 and variance slope", mean_ok and slope_ok,
                       f"mean {s.mean:.4f} +- {s.stderr:.4f} vs {pred.value:.4f}; "
                       f"slope {slope:.4f} vs {target:.4f} ({100 * (slope / target - 1):+.1f}%); "
                       f"Var D at n=2^16 from 1e4 strings = {s.variance:.3f}")


def check_8() -> CheckResult:
    src = new_source(0.3)
    s = run(ExperimentSpec("trie_size", src, replicates=20, seed=SEED + 8, lam=1e5, poissonized=True))
    target = 1 / src.H
    ok = _within(s.mean - target, s.stderr, 0.02)
    return CheckResult(8, "Poissonized trie size E Y/lambda at lambda=1e5", ok,
                       f"{s.mean:.5f} +- {s.stderr:.5f} vs 1/H = {target:.5f}")


# -- 9..10: codes --------------------------------------------------------------------------


def check_9() -> CheckResult:
    src = new_source(Fraction(1, 2))
    exact = codes.tunstall_mean_lengths(src, 2**15)
    pow_diffs = {k: float(exact[2**k]) - theory.predict_tunstall(src, 2**k).mean_len.value for k in range(4, 16)}
    worst = 0.0
    worst_M = None
    for M in range(2**14, 2**15 + 1):
        dv = abs(float(exact[M]) - theory.predict_tunstall(src, M).mean_len.value)
        if dv > worst:
            worst, worst_M = dv, M
    ok = abs(pow_diffs[15]) <= 0.02 and worst <= 0.03
    return CheckResult(9, "Tunstall p=1/2: exact E D vs prediction", ok,
                       f"diff at M=2^15: {pow_diffs[15]:+.2e}; max diff on [2^14, 2^15]: {worst:.2e} (M={worst_M})")


def check_10() -> CheckResult:
    src = new_source(0.3)
    R = math.exp(20)
    s = run(ExperimentSpec("khodak_len", src, replicates=10_000, seed=SEED + 10, R=R))
    pred = theory.predict_khodak(src, R).mean_len.value
    mean_ok = _within(s.mean - pred, s.stderr, 0.05)
    a2, crit = anderson_normal(s.samples, dither_seed=SEED)
    a2_raw, _ = anderson_normal(s.samples)
    ok = mean_ok and a2 < crit
    return CheckResult(10, "Khodak length at R=e^20: normality (AD 1%) and mean", ok,
                       f"A2={a2:.2f} (undithered {a2_raw:.2f}) vs crit {crit:.3f}, skew={stats.skew(s.samples):.3f}; "
                       f"mean {s.mean:.4f} +- {s.stderr:.4f} vs {pred:.4f} ({'ok' if mean_ok else 'off'})")


# -- 11..14 -----------------------------------------------------------------------------------


def check_11() -> CheckResult:
    src = new_source(0.7)
    V2 = 400.0
    V = V2 / math.log(2)
    reps = 100_000
    out = []
    ok = True
    # regime (i): far above the transition
    s = run(ExperimentSpec("stopped_walk", src, replicates=reps, seed=SEED + 111, K=800, V=V))
    w = theory.predict_stopped_walk(src, 800, V)
    good = w.regime == "i" and abs(s.mean - w.mean) <= 3 * s.stderr and abs(s.variance / w.variance - 1) <= 0.15
    ok &= good
    out.append(f"(i) mean {s.mean:.3f}+-{s.stderr:.3f} vs {w.mean:.3f}, var {s.variance:.1f} vs {w.variance:.1f}")
    # degenerate regime: far below
    s = run(ExperimentSpec("stopped_walk", src, replicates=reps, seed=SEED + 112, K=500, V=V))
    w = theory.predict_stopped_walk(src, 500, V)
    at_top = s.histogram.get(501, 0.0)
    good = w.regime == "ii" and at_top >= 0.99 and abs(s.mean - 501) <= 0.05
    ok &= good
    out.append(f"(vi) P(D=K+1)={at_top:.4f}, mean {s.mean:.3f}")
    # transition with a = 0 (K the integer nearest V2/H)
    K = round(V2 / src.H)
    s = run(ExperimentSpec("stopped_walk", src, replicates=reps, seed=SEED + 113, K=K, V=V))
    w = theory.predict_stopped_walk(src, K, V)
    good = w.regime == "iii" and _within(s.mean - w.mean_first_order, s.stderr, 0.05 * math.sqrt(V2))
    ok &= good
    out.append(f"(iii) K={K} a={w.a:.4f} mean {s.mean:.3f}+-{s.stderr:.3f} vs {w.mean_first_order:.3f}")
    return CheckResult(11, "stopped walk regimes at p=0.7, V2=400", ok, "; ".join(out))


def check_12() -> CheckResult:
    src = new_source(0.3)
    n = 100_000
    s = run(ExperimentSpec("insert", src, replicates=10_000, seed=SEED + 12, n=n))
    x = s.samples.astype(int)
    pos = x[x >= 1]
    r = 2 * src.p * src.q
    # bins j = 1..J-1 plus a tail bin j >= J, with every expected count >= 5
    J = 1
    while pos.size * (1 - r) ** J * r >= 5:
        J += 1
    expected = np.array([r * (1 - r) ** (j - 1) for j in range(1, J)] + [(1 - r) ** (J - 1)]) * pos.size
    observed = np.array([np.sum(pos == j) for j in range(1, J)] + [np.sum(pos >= J)])
    chi = stats.chisquare(observed, expected)
    mean_ok = _within(s.mean - 1 / src.H, s.stderr, 0.05)
    ok = chi.pvalue > 0.01 and mean_ok
    return CheckResult(12, "insertion: geometric law (chi2 1%) and E N", ok,
                       f"chi2={chi.statistic:.2f} on {J - 1} df, p={chi.pvalue:.3f}; "
                       f"E N {s.mean:.4f} +- {s.stderr:.4f} vs 1/H = {1 / src.H:.4f}")


def check_13() -> CheckResult:
    rng = np.random.default_rng(SEED + 13)
    bad = 0
    for i in range(1000):
        p = float(rng.uniform(0.05, 0.95))
        M = int(rng.integers(2, 513))
        N = int(rng.integers(0, 4001))
        src = new_source(p)
        d = codes.tunstall_dictionary(src, M)
        h = StringHandle(src, derive_seed(SEED, i), 0)
        want = h.word(N)
        _, cw = codes.parse(d, h, N)
        got = codes.decode(d, cw)
        d2, bits = codes.decode_stream(codes.encode_stream(d, h, N))
        bad += got[:N] != want or bits != want or d2.phrases != d.phrases
    return CheckResult(13, "codec roundtrip on 1000 random (p, M, N)", bad == 0, f"{bad} mismatches")


def check_14() -> CheckResult:
    src = new_source(0.7)
    n = 2**16
    s = run(ExperimentSpec("imbalance", src, replicates=10_000, seed=SEED + 14, n=n))
    pred = theory.predict_imbalance(src, n)
    mean_ok = abs(s.mean - pred.value) <= 3 * s.stderr + 0.1
    a2, crit = anderson_normal(s.samples, dither_seed=SEED)
    ok = mean_ok and a2 < crit
    wald = pred.extra["wald_mean"]
    return CheckResult(14, "imbalance at p=0.7, n=2^16: mean and normality", ok,
                       f"mean {s.mean:.4f} +- {s.stderr:.4f} vs (p-q) ln n/H = {pred.value:.4f} "
                       f"({'ok' if mean_ok else 'off'}; (p-q) E D_n = {wald:.4f}); A2={a2:.2f} vs crit {crit:.3f}")


CHECKS: dict[int, Callable[[], CheckResult]] = {
    i: globals()[f"check_{i}"] for i in range(1, 15)
}


def run_check(number: int) -> CheckResult:
    t0 = time.perf_counter()
    res = CHECKS[number]()
    res.seconds = time.perf_counter() - t0
    return res


def run_all(numbers=None, echo: Callable[[str], None] | None = print, timing: bool = True) -> list[CheckResult]:
    out = []
    for i in numbers or sorted(CHECKS):
        res = run_check(i)
        if echo is not None:
            echo(res.line(timing))
        out.append(res)
    return out
