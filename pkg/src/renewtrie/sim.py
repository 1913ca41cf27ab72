"""Seeded Monte Carlo harness.

Replicate ``r`` of an experiment draws everything from
``derive_seed(spec.seed, r)``, so results do not depend on how replicates
are spread over worker processes; samples are always reduced in replicate
order.

Most kinds offer three sampling routes:

``"trie"``
    build the full :class:`~renewtrie.trie.Trie` object (slow, small n);
``"strings"``
    the same random strings, but only the prefix counts of the target
    string are tracked (default);
``"counts"``
    binomial thinning of the prefix counts, exact in law and independent
    of the string generator, for very large ``n``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from renewtrie import codes, theory
from renewtrie.source import SourceParams, StringHandle, derive_seed, string_keys
from renewtrie.trie import (
    MatchProfile,
    count_nodes,
    depth_of,
    imbalance_of,
    insert as trie_insert,
    match_profile,
    occupancy_profile,
    patricia_depth_of,
    random_trie,
    to_patricia,
)

__all__ = [
    "KINDS",
    "DEFAULT_SEED",
    "TOLERANCE_TABLE_VERSION",
    "TOLERANCES",
    "ExperimentSpec",
    "StatSummary",
    "Comparison",
    "run",
    "summarize",
    "predict_for",
    "compare",
    "sample_depth_via_renewal",
    "simulate_stopped_walk",
    "to_csv",
    "to_json",
]

KINDS = (
    "depth",
    "patricia_depth",
    "imbalance",
    "trie_size",
    "btrie_occupancy",
    "insert",
    "khodak_len",
    "tunstall_len",
    "parse_count",
    "stopped_walk",
    "depth_via_renewal",
)
POISSON_KINDS = ("trie_size", "btrie_occupancy")
METHODS = ("trie", "strings", "counts")

DEFAULT_SEED = 20240601

# (abs_tol, z_crit) per kind; abs_tol absorbs the dropped o(1) terms at
# desk-scale sizes.  Bump the version whenever an entry changes.
TOLERANCE_TABLE_VERSION = "2"
TOLERANCES: dict[str, tuple[float, float]] = {
    "depth": (0.1, 3.0),
    "patricia_depth": (0.1, 3.0),
    "imbalance": (0.1, 3.0),
    "trie_size": (0.02, 3.0),
    "btrie_occupancy": (0.02, 3.0),
    "insert": (0.05, 3.0),
    "khodak_len": (0.05, 3.0),
    "tunstall_len": (0.05, 3.0),
    "parse_count": (0.01, 3.0),
    "stopped_walk": (1.0, 3.0),
    "depth_via_renewal": (0.1, 3.0),
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    src: SourceParams
    replicates: int = 1000
    seed: int = DEFAULT_SEED
    n: int | None = None
    lam: float | None = None
    R: float | None = None
    M: int | None = None
    K: int | None = None
    V: float | None = None
    N: int | None = None
    b: int = 1
    j: int = 1
    poissonized: bool = False
    method: str = "strings"

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.poissonized and self.kind not in POISSON_KINDS:
            raise ValueError(f"{self.kind} has no Poissonized version")
        k = self.kind
        if k in POISSON_KINDS:
            if self.poissonized:
                _need(self.lam is not None and self.lam > 0, "Poissonized runs need lam > 0")
            else:
                _need(self.n is not None and self.n >= 1, f"{k} needs n >= 1")
            _need(self.b >= 1, "b must be at least 1")
            _need(1 <= self.j <= self.b, "need 1 <= j <= b")
            if k == "btrie_occupancy" and not self.poissonized:
                _need(self.n >= self.b + 1, "occupancy profiles need n >= b + 1")
        elif k in ("depth", "patricia_depth", "imbalance", "insert"):
            _need(self.n is not None and self.n >= 1, f"{k} needs n >= 1")
            if k == "patricia_depth":
                _need(self.n >= 2, "Patricia tries need n >= 2")
        elif k == "depth_via_renewal":
            _need(self.n is not None and self.n >= 2, "the renewal sampler needs n >= 2")
        elif k == "khodak_len":
            _need(self.R is not None and self.R > 1, "khodak_len needs R > 1")
        elif k == "tunstall_len":
            _need(self.M is not None and self.M >= 2, "tunstall_len needs M >= 2")
        elif k == "parse_count":
            _need((self.M is not None) != (self.R is not None), "parse_count needs exactly one of M or R")
            _need(self.N is not None and self.N >= 1, "parse_count needs N >= 1")
        elif k == "stopped_walk":
            _need(self.K is not None and self.K >= 0, "stopped_walk needs K >= 0")
            _need(self.V is not None and self.V > 0, "stopped_walk needs V > 0")

    @property
    def size_param(self) -> str:
        k = self.kind
        if k in POISSON_KINDS:
            base = f"lambda={self.lam:g}" if self.poissonized else f"n={self.n}"
            if k == "btrie_occupancy":
                base += f";b={self.b};j={self.j}"
            elif self.b != 1:
                base += f";b={self.b}"
            return base
        if k in ("khodak_len",):
            return f"R={self.R:g}"
        if k == "tunstall_len":
            return f"M={self.M}"
        if k == "parse_count":
            return (f"M={self.M}" if self.M is not None else f"R={self.R:g}") + f";N={self.N}"
        if k == "stopped_walk":
            return f"K={self.K};V={self.V:g}"
        return f"n={self.n}"


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class StatSummary:
    mean: float
    variance: float
    stderr: float
    replicates: int
    histogram: dict[int, float] | None = None
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StatSummary):
            return NotImplemented
        same = (self.mean, self.variance, self.stderr, self.replicates, self.histogram) == (
            other.mean, other.variance, other.stderr, other.replicates, other.histogram)
        if self.samples is None or other.samples is None:
            return same and self.samples is other.samples
        return same and np.array_equal(self.samples, other.samples)


def summarize(samples) -> StatSummary:
    x = np.asarray(samples, dtype=float)
    r = x.size
    if r == 0:
        raise ValueError("no samples")
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if r > 1 else 0.0
    hist = None
    if np.all(x == np.round(x)):
        vals, cnt = np.unique(x.astype(np.int64), return_counts=True)
        hist = {int(v): float(c) / r for v, c in zip(vals, cnt)}
    return StatSummary(mean, var, math.sqrt(var / r), r, hist, x)


# -- per-replicate samplers --------------------------------------------------------


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _thinned_profile(src: SourceParams, others: int, rng: np.random.Generator):
    """Prefix counts of a target against ``others`` strings, by thinning."""
    counts = [others]
    letters = []
    c = others
    while c > 0:
        t = int(rng.random() < src.p)
        c = int(rng.binomial(c, src.p if t else src.q))
        counts.append(c)
        letters.append(t)
    return MatchProfile(np.array(counts, dtype=np.int64), np.array(letters, dtype=np.uint8))


def _profile(spec: ExperimentSpec, seed: int, others: int):
    if spec.method == "counts":
        return _thinned_profile(spec.src, others, _rng(seed))
    keys = string_keys(seed, np.arange(others + 1, dtype=np.uint64))
    return match_profile(spec.src, keys[0], keys[1:])


def _thinned_tree(src: SourceParams, n: int, b: int, rng: np.random.Generator):
    z = {j: 0 for j in range(1, b + 1)}
    if n == 0:
        return z, 0
    level = np.array([n], dtype=np.int64)
    internal = 0
    while level.size:
        small = level <= b
        for j in level[small]:
            if j > 0:
                z[int(j)] += 1
        big = level[~small]
        internal += big.size
        ones = rng.binomial(big, src.p)
        level = np.concatenate([ones, big - ones])
    return z, internal


def _tree_counts(spec: ExperimentSpec, seed: int, n: int):
    if spec.method == "counts":
        return _thinned_tree(spec.src, n, spec.b, _rng(seed))
    if spec.method == "trie":
        if n <= spec.b:
            z = {j: 0 for j in range(1, spec.b + 1)}
            if n:
                z[n] = 1
            return z, 0
        return occupancy_profile(random_trie(spec.src, n, seed, spec.b))
    keys = string_keys(seed, np.arange(n, dtype=np.uint64))
    return count_nodes(spec.src, keys, spec.b)


def _level(src: SourceParams, t: float):
    """Threshold ``t`` in the units :func:`_first_exceed` compares against.

    Lattice sources count in multiples of the span so that ``S_k = t``
    exactly is recognised as a tie (which does not exceed ``t``).
    """
    if src.arith.is_arithmetic:
        return math.floor(t / src.arith.d + 1e-9)
    return t


def _first_exceed(src: SourceParams, level, rng: np.random.Generator, max_steps: int | None = None) -> int:
    """Smallest ``k`` with ``S_k > level``, or ``max_steps + 1`` if later."""
    done = 0
    total = 0
    block = 64
    while True:
        if max_steps is not None:
            block = min(block, max_steps - done)
            if block <= 0:
                return max_steps + 1
        ones = rng.random(block) < src.p
        if src.arith.is_arithmetic:
            steps = np.where(ones, src.arith.a, src.arith.b).astype(np.int64)
        else:
            steps = np.where(ones, src.step_one, src.step_zero)
        s = total + np.cumsum(steps)
        hit = np.nonzero(s > level)[0]
        if hit.size:
            return done + int(hit[0]) + 1
        done += block
        total = s[-1]
        block = min(block * 2, 4096)


def simulate_stopped_walk(src: SourceParams, K: int, V: float, seed: int) -> int:
    """One draw of ``min(K + 1, nu(V ln 2))``.

    In lattice mode the comparison ``S_n > V ln 2`` is made in integer
    multiples of the span; ``S_n`` equal to ``V ln 2`` does not stop.
    """
    if K < 0 or not V > 0:
        raise ValueError("need K >= 0 and V > 0")
    return _first_exceed(src, _level(src, V * math.log(2)), _rng(seed), max_steps=K)


def sample_depth_via_renewal(src: SourceParams, n: int, seed: int) -> int:
    """Depth ``D_n`` drawn from its delayed-renewal representation.

    With ``M`` the maximum of ``n - 1`` unit exponentials, ``D_n`` is the
    first ``k`` with ``S_k > M``; this is the exact law, no trie needed.
    """
    if n < 2:
        raise ValueError("the renewal representation needs n >= 2")
    rng = _rng(seed)
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    m = -math.log(-math.expm1(math.log(u) / (n - 1)))
    if src.p == 0.5:
        return max(1, math.ceil(m / math.log(2)))
    total = 0.0
    k = 0
    while True:
        ones = rng.random(64) < src.p
        s = total + np.cumsum(np.where(ones, src.step_one, src.step_zero))
        hit = np.nonzero(s > m)[0]
        if hit.size:
            return k + int(hit[0]) + 1
        k += 64
        total = s[-1]


@lru_cache(maxsize=16)
def _dictionary(src: SourceParams, M, R):
    return codes.tunstall_dictionary(src, M) if M is not None else codes.khodak_dictionary(src, R)


def _sample(spec: ExperimentSpec, r: int) -> float:
    seed = derive_seed(spec.seed, r)
    k = spec.kind
    src = spec.src
    if k in ("depth", "patricia_depth", "imbalance", "insert"):
        n = spec.n
        if k == "insert":
            if spec.method == "trie":
                t = random_trie(src, n, seed)
                return trie_insert(t, StringHandle(src, seed, n)).new_internal
            if spec.method == "strings":
                # same strings as the trie route: id n joins ids 0..n-1
                keys = string_keys(seed, np.arange(n + 1, dtype=np.uint64))
                return match_profile(src, keys[n], keys[:n]).insertion().new_internal
            return _profile(spec, seed, n).insertion().new_internal
        if n == 1:
            return 0.0
        if spec.method == "trie":
            t = random_trie(src, n, seed)
            if k == "depth":
                return depth_of(t, 0)
            if k == "imbalance":
                return imbalance_of(t, 0)
            return patricia_depth_of(to_patricia(t), 0)
        prof = _profile(spec, seed, n - 1)
        if k == "depth":
            return prof.depth
        if k == "imbalance":
            return prof.imbalance
        return prof.patricia_depth
    if k in POISSON_KINDS:
        if spec.poissonized:
            n = int(_rng(derive_seed(seed, 0)).poisson(spec.lam))
            scale = spec.lam
        else:
            n = spec.n
            scale = n
        z, internal = _tree_counts(spec, seed, n)
        if k == "trie_size":
            return internal / scale
        return z[spec.j] / scale
    if k == "depth_via_renewal":
        return sample_depth_via_renewal(src, spec.n, seed)
    if k == "stopped_walk":
        return simulate_stopped_walk(src, spec.K, spec.V, seed)
    if k == "khodak_len":
        return _first_exceed(src, _level(src, math.log(spec.R)), _rng(seed))
    if k == "tunstall_len":
        d = _dictionary(src, spec.M, None)
        _, cw = codes.parse(d, StringHandle(src, seed, 0), 1)
        return len(d.phrases[cw[0]])
    if k == "parse_count":
        d = _dictionary(src, spec.M, spec.R)
        count, _ = codes.parse(d, StringHandle(src, seed, 0), spec.N)
        return count / spec.N
    raise AssertionError(k)


def _run_range(spec: ExperimentSpec, lo: int, hi: int) -> list[float]:
    return [float(_sample(spec, r)) for r in range(lo, hi)]


def run(spec: ExperimentSpec, workers: int | None = 1) -> StatSummary:
    """Run all replicates of ``spec``.

    ``workers=None`` uses every core; results are identical for any value.
    """
    spec.validate()
    reps = spec.replicates
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or reps < 2:
        return summarize(_run_range(spec, 0, reps))
    chunk = max(1, -(-reps // (4 * workers)))
    bounds = [(lo, min(reps, lo + chunk)) for lo in range(0, reps, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_range, [spec] * len(bounds), *zip(*bounds))
        samples = [x for part in parts for x in part]
    return summarize(samples)


# -- predictions and comparison ------------------------------------------------------


def predict_for(spec: ExperimentSpec) -> theory.Prediction:
    """The theory prediction matching the mean of ``run(spec)``."""
    spec.validate()
    src, k = spec.src, spec.kind
    if k in ("depth", "imbalance", "insert", "patricia_depth") and spec.n == 1:
        return theory.Prediction(0.0, 0.0, 0.0, "exact")
    if k in ("depth", "imbalance", "patricia_depth", "depth_via_renewal") and spec.n == 2:
        # first disagreement of two strings is geometric with success 2pq
        ed = 1.0 / (2 * src.p * src.q)
        v = {"depth": ed, "depth_via_renewal": ed, "imbalance": (src.p - src.q) * ed, "patricia_depth": 1.0}[k]
        return theory.Prediction(v, v, 0.0, "exact/n=2")
    if k in ("depth", "depth_via_renewal"):
        return theory.predict_depth(src, spec.n)
    if k == "patricia_depth":
        return theory.predict_patricia_depth(src, spec.n)
    if k == "imbalance":
        return theory.predict_imbalance(src, spec.n)
    if k in POISSON_KINDS:
        size = spec.lam if spec.poissonized else spec.n
        if size < 2:
            return theory.Prediction(0.0, 0.0, 0.0, "exact")
        if k == "trie_size":
            if spec.b == 1:
                return theory.predict_trie_size(src, size)
            return theory.predict_btrie_internal(src, spec.b, size)
        return theory.predict_btrie_occupancy(src, spec.b, size, spec.j)
    if k == "insert":
        return theory.predict_insert(src, spec.n).as_prediction()
    if k == "khodak_len":
        return theory.predict_khodak(src, spec.R).mean_len
    if k == "tunstall_len":
        return theory.predict_tunstall(src, spec.M).mean_len
    if k == "parse_count":
        return _parse_count_prediction(_dictionary(src, spec.M, spec.R), spec.N)
    if k == "stopped_walk":
        w = theory.predict_stopped_walk(src, spec.K, spec.V)
        osc = w.refined.oscillation if w.refined is not None else 0.0
        return theory.Prediction(w.mean, w.mean - osc, osc, f"walk/{w.regime}", variance=w.variance)
    raise AssertionError(k)


def _parse_count_prediction(d: codes.Dictionary, N: int) -> theory.Prediction:
    """Exact ``E K_N / N``.

    ``K_N = nu(N - 1)`` for the renewal process of phrase lengths, and
    ``u(t) = E nu(t)`` solves ``u(t) = 1 + sum_l P(L = l) u(t - l)`` with
    ``u(t) = 0`` for ``t < 0``.
    """
    lengths = np.array([len(a) for a in d.phrases])
    pmf = np.bincount(lengths, weights=np.array(d.probs, dtype=float))
    support = np.nonzero(pmf)[0]
    u = np.zeros(N)
    for t in range(N):
        prev = t - support
        ok = prev >= 0
        u[t] = 1.0 + float(pmf[support[ok]] @ u[prev[ok]])
    lead = 1.0 / float(pmf @ np.arange(pmf.size))
    v = u[N - 1] / N
    return theory.Prediction(v, lead, v - lead, "parse-count/exact", extra={"rate_limit": lead})


@dataclass(frozen=True)
class Comparison:
    empirical: StatSummary
    predicted: theory.Prediction
    z: float
    abs_tol: float
    z_crit: float

    @property
    def diff(self) -> float:
        return self.empirical.mean - self.predicted.value

    @property
    def passed(self) -> bool:
        return abs(self.z) <= self.z_crit and abs(self.diff) <= self.abs_tol


def compare(summary: StatSummary, prediction, abs_tol: float, z_crit: float = 3.0) -> Comparison:
    """Both gates must hold: ``|z| <= z_crit`` and ``|mean - value| <= abs_tol``."""
    if not isinstance(prediction, theory.Prediction):
        v = float(prediction)
        prediction = theory.Prediction(v, v, 0.0, "given")
    diff = summary.mean - prediction.value
    if summary.stderr > 0:
        z = diff / summary.stderr
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return Comparison(summary, prediction, float(z), float(abs_tol), float(z_crit))


# -- output --------------------------------------------------------------------------

COLUMNS = ("kind", "p", "arith", "size_param", "replicates", "mean", "stderr",
           "variance", "predicted", "osc", "z", "pass")


def _record(spec: ExperimentSpec, cmp: Comparison) -> dict:
    return {
        "kind": spec.kind,
        "p": repr(spec.src.p),
        "arith": str(spec.src.arith),
        "size_param": spec.size_param,
        "replicates": cmp.empirical.replicates,
        "mean": repr(cmp.empirical.mean),
        "stderr": repr(cmp.empirical.stderr),
        "variance": repr(cmp.empirical.variance),
        "predicted": repr(cmp.predicted.value),
        "osc": repr(cmp.predicted.oscillation),
        "z": repr(cmp.z),
        "pass": cmp.passed,
    }


def to_csv(rows: list[tuple[ExperimentSpec, Comparison]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for spec, cmp in rows:
        rec = _record(spec, cmp)
        rec["pass"] = "true" if rec["pass"] else "false"
        w.writerow(rec)
    return buf.getvalue()


def to_json(rows: list[tuple[ExperimentSpec, Comparison]]) -> str:
    out = []
    for spec, cmp in rows:
        rec = _record(spec, cmp)
        for key in ("mean", "stderr", "variance", "predicted", "osc", "z"):
            rec[key] = float(rec[key])
        rec["p"] = spec.src.p
        hist = cmp.empirical.histogram
        rec["histogram"] = None if hist is None else {str(k): v for k, v in hist.items()}
        out.append(rec)
    return json.dumps(out, indent=2, allow_nan=True) + "\n"
