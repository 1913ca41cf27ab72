import json
import math

import numpy as np
import pytest

from renewtrie import sim, theory
from renewtrie.acceptance import anderson_normal
from renewtrie.codes import decode, khodak_dictionary, parse, phrase_stats, tunstall_dictionary
from renewtrie.source import StringHandle, arithmetic_source, derive_seed, new_source
from renewtrie.trie import depth_of, random_trie

HALF = new_source(0.5)
P3 = new_source(0.3)
P7 = new_source(0.7)


def spec(kind, src=P3, **kw):
    s = sim.ExperimentSpec(kind=kind, src=src, **kw)
    s.validate()
    return s


# -- basics ----------------------------------------------------------------------


def test_summarize():
    s = sim.summarize([1, 2, 3, 4])
    assert s.mean == 2.5
    assert s.variance == pytest.approx(5 / 3)
    assert s.stderr == pytest.approx(math.sqrt(5 / 12))
    assert s.histogram == {1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25}
    assert sim.summarize([0.5, 1.0]).histogram is None
    with pytest.raises(ValueError):
        sim.summarize([])


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="depth"),
        dict(kind="depth", n=0),
        dict(kind="bogus", n=3),
        dict(kind="khodak_len", R=1.0),
        dict(kind="parse_count", M=5, R=9.0, N=10),
        dict(kind="btrie_occupancy", n=2, b=2, j=1),
        dict(kind="depth", n=5, poissonized=True, lam=3.0),
        dict(kind="depth", n=5, method="magic"),
        dict(kind="depth", n=5, replicates=0),
    ],
)
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        sim.ExperimentSpec(src=P3, **kw).validate()


def test_depth_single_string():
    s = sim.run(spec("depth", n=1, replicates=50))
    assert s.mean == 0 and s.variance == 0
    pr = sim.predict_for(spec("depth", n=1))
    assert pr.value == 0


@pytest.mark.parametrize("method", ["strings", "counts"])
def test_depth_two_strings_half(method):
    s = sim.run(spec("depth", HALF, n=2, replicates=100_000, seed=7, method=method))
    assert abs(s.mean - 2) <= 3 * s.stderr
    assert sim.predict_for(spec("depth", HALF, n=2)).value == 2


def test_trie_route_equals_strings_route():
    for kind in ("depth", "imbalance", "patricia_depth", "insert"):
        a = sim.run(spec(kind, n=40, replicates=60, seed=3, method="trie"))
        b = sim.run(spec(kind, n=40, replicates=60, seed=3, method="strings"))
        assert a == b
    a = sim.run(spec("trie_size", n=50, replicates=40, seed=3, method="trie", b=2))
    assert a == sim.run(spec("trie_size", n=50, replicates=40, seed=3, method="strings", b=2))


def test_strings_route_reproduces_trie_depth():
    s = spec("depth", n=30, replicates=5, seed=11)
    samples = sim.run(s).samples
    direct = [depth_of(random_trie(P3, 30, derive_seed(11, r)), 0) for r in range(5)]
    assert list(samples) == direct


# -- determinism -----------------------------------------------------------------


def test_run_is_deterministic_and_worker_independent():
    s = spec("depth", n=64, replicates=300, seed=5)
    a = sim.run(s)
    assert sim.run(s) == a
    assert sim.run(s, workers=2) == a
    w = spec("stopped_walk", P7, K=50, V=30.0, replicates=200)
    assert sim.run(w) == sim.run(w, workers=3)


def test_seed_changes_samples():
    a = sim.run(spec("depth", n=64, replicates=200, seed=1))
    b = sim.run(spec("depth", n=64, replicates=200, seed=2))
    assert not np.array_equal(a.samples, b.samples)


# -- per-kind agreement with theory --------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="depth", n=1024, method="counts"),
        dict(kind="patricia_depth", n=1024, method="counts"),
        dict(kind="imbalance", src=HALF, n=1024, method="counts"),
        dict(kind="trie_size", n=1000, method="counts"),
        dict(kind="trie_size", src=HALF, lam=500.0, poissonized=True, method="counts"),
        dict(kind="btrie_occupancy", n=1000, b=3, j=2, method="counts"),
        dict(kind="insert", n=1024, method="counts"),
        dict(kind="khodak_len", R=math.exp(20)),
        dict(kind="tunstall_len", M=500),
        dict(kind="parse_count", M=5, N=500, src=new_source(0.6)),
        dict(kind="stopped_walk", src=P7, K=40, V=60.0),
        dict(kind="depth_via_renewal", n=1024),
    ],
)
def test_kind_matches_prediction(kw):
    kw = dict(kw)
    src = kw.pop("src", P3)
    s = spec(src=src, replicates=4000, seed=99, **kw)
    summary = sim.run(s)
    abs_tol, z_crit = sim.TOLERANCES[s.kind]
    cmp = sim.compare(summary, sim.predict_for(s), abs_tol, z_crit)
    assert cmp.passed, (s.kind, cmp.z, cmp.diff)


def test_imbalance_half_is_centred():
    s = sim.run(spec("imbalance", HALF, n=512, replicates=5000, method="counts"))
    assert abs(s.mean) <= 3 * s.stderr


def test_conservation_per_replicate():
    for seed in range(30):
        rng_n = 30 + seed
        z, internal = sim._tree_counts(spec("trie_size", n=rng_n, b=3), derive_seed(1, seed), rng_n)
        assert sum(j * c for j, c in z.items()) == rng_n
        zc, _ = sim._thinned_tree(P3, rng_n, 3, np.random.default_rng(seed))
        assert sum(j * c for j, c in zc.items()) == rng_n
    for seed in range(10):
        n = 100
        keys_ok = sim._profile(spec("patricia_depth", n=n), derive_seed(4, seed), n - 1)
        assert keys_ok.counts[0] == n - 1


def test_parse_roundtrip_prefix():
    src = new_source(0.6)
    d = tunstall_dictionary(src, 5)
    for r in range(20):
        h = StringHandle(src, derive_seed(0, r), 0)
        K, codes = parse(d, h, 300)
        assert decode(d, codes)[:300] == "".join(map(str, h.prefix(300)))


def test_parse_count_renewal_lln():
    src = P3
    d = khodak_dictionary(src, 300)
    # samples are K_N / N; the finite-N bias is about E D^2 / (2 (E D)^2 N),
    # so N is taken large enough for it to sit well inside one standard error
    s = spec("parse_count", src=src, R=300.0, N=50_000, replicates=200)
    summary = sim.run(s)
    assert abs(summary.mean - 1 / float(phrase_stats(d).mean_len)) <= 3 * summary.stderr


# -- renewal depth sampler ----------------------------------------------------------


def test_renewal_sampler_guard_and_half_formula():
    with pytest.raises(ValueError):
        sim.sample_depth_via_renewal(P3, 1, 0)
    n = 300
    for seed in range(50):
        rng = np.random.default_rng(seed)
        u = rng.random()
        m = -math.log(-math.expm1(math.log(u) / (n - 1)))
        # with S_k = k ln 2 the first passage over the max is a ceiling
        expected = math.floor(m / math.log(2)) + 1
        assert sim.sample_depth_via_renewal(HALF, n, seed) == expected


# -- stopped walk -------------------------------------------------------------------


def test_walk_trivial_cases():
    for seed in range(20):
        assert sim.simulate_stopped_walk(P7, 100, 0.01, seed) == 1
        assert sim.simulate_stopped_walk(P7, 0, 100.0, seed) == 1
    with pytest.raises(ValueError):
        sim.simulate_stopped_walk(P7, -1, 10.0, 0)


def test_walk_degenerate_regime():
    V2 = 400.0
    K = int(V2 / P7.H - 1.1 * math.log(V2) * math.sqrt(V2))
    s = spec("stopped_walk", P7, K=K, V=V2 / math.log(2), replicates=3000)
    summary = sim.run(s)
    assert theory.predict_stopped_walk(P7, K, V2 / math.log(2)).regime == "ii"
    assert summary.histogram.get(K + 1, 0.0) >= 0.99


def test_walk_transition_regime():
    V2 = 400.0
    K = round(V2 / P7.H)
    s = spec("stopped_walk", P7, K=K, V=V2 / math.log(2), replicates=20000)
    summary = sim.run(s)
    w = theory.predict_stopped_walk(P7, K, V2 / math.log(2))
    assert w.regime == "iii"
    assert abs(summary.mean - w.mean_first_order) <= 3 * summary.stderr + 0.05 * math.sqrt(V2)


def test_walk_lattice_tie_does_not_stop():
    # p = 1/2 steps are exactly ln 2, so V letters reach V ln 2 without exceeding it
    for V in (3, 10):
        assert sim.simulate_stopped_walk(HALF, 100, float(V), 0) == V + 1


# -- comparison and serialization ------------------------------------------------------


def _pred(v):
    return theory.Prediction(v, v, 0.0, "test")


def test_compare_gates():
    s = sim.StatSummary(2.0, 1.0, 0.1, 100)
    c = sim.compare(s, _pred(2.0), abs_tol=0.1)
    assert c.passed and c.z == 0
    c = sim.compare(s, _pred(1.0), abs_tol=0.1)
    assert c.z == pytest.approx(10) and not c.passed
    s = sim.StatSummary(2.04, 1.0, 0.01, 100)
    c = sim.compare(s, _pred(2.0), abs_tol=0.1, z_crit=3)
    assert abs(c.diff) <= 0.1 and c.z == pytest.approx(4) and not c.passed


def test_csv_and_json_carry_identical_numbers():
    s = spec("depth", n=100, replicates=200)
    cmp = sim.compare(sim.run(s), sim.predict_for(s), *sim.TOLERANCES["depth"])
    csv_text = sim.to_csv([(s, cmp)])
    rows = json.loads(sim.to_json([(s, cmp)]))
    header, line = csv_text.strip().split("\n")
    rec = dict(zip(header.split(","), line.split(",")))
    for key in ("mean", "stderr", "variance", "predicted", "osc", "z"):
        assert float(rec[key]) == rows[0][key]
    assert rec["pass"] == ("true" if rows[0]["pass"] else "false")
    assert sum(rows[0]["histogram"].values()) == pytest.approx(1.0)


def test_lattice_prediction_includes_oscillation():
    src = arithmetic_source(1, 2)
    p = sim.predict_for(spec("depth", src=src, n=5000))
    assert p.oscillation != 0
    assert p.value == pytest.approx(p.smooth + p.oscillation)


# -- normal-limit shape checks (Anderson-Darling, 1%, 10^4 samples) ------------------


def _ad_passes(samples, seed):
    a2, crit = anderson_normal(np.asarray(samples, float), dither_seed=seed)
    return a2 < crit, a2, crit


def test_depth_is_asymptotically_normal():
    s = sim.run(spec("depth", n=2**16, replicates=10_000, seed=31, method="counts"))
    ok, a2, crit = _ad_passes(s.samples, 1)
    assert ok, f"A2={a2:.2f} crit={crit:.3f}"


def test_imbalance_is_asymptotically_normal():
    s = sim.run(spec("imbalance", n=2**16, replicates=10_000, seed=32, method="counts"))
    ok, a2, crit = _ad_passes(s.samples, 2)
    assert ok, f"A2={a2:.2f} crit={crit:.3f}"


def test_khodak_length_is_asymptotically_normal():
    s = sim.run(spec("khodak_len", R=math.exp(20), replicates=10_000, seed=33))
    ok, a2, crit = _ad_passes(s.samples, 3)
    assert ok, f"A2={a2:.2f} crit={crit:.3f}"


def test_walk_normal_regime_is_normal():
    V2 = 400.0
    K = 800
    assert theory.predict_stopped_walk(P7, K, V2 / math.log(2)).regime == "i"
    s = sim.run(spec("stopped_walk", P7, K=K, V=V2 / math.log(2), replicates=10_000, seed=34))
    ok, a2, crit = _ad_passes(s.samples, 4)
    assert ok, f"A2={a2:.2f} crit={crit:.3f}"
