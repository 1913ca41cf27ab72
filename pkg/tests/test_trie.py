import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewtrie.source import StringHandle, bit_at, new_source, string_keys
from renewtrie.trie import (
    NONE,
    IndistinguishableStringsError,
    Trie,
    build_trie,
    count_nodes,
    depth_of,
    imbalance_of,
    insert,
    match_profile,
    occupancy_profile,
    patricia_depth_of,
    random_trie,
    to_dot,
    to_patricia,
)

HALF = new_source(0.5)
P3 = new_source(0.3)


def handles(src, seed, ids):
    return [StringHandle(src, seed, i) for i in ids]


def first_letters(src, seed, i, k):
    h = StringHandle(src, seed, i)
    return "".join(str(bit_at(h, j)) for j in range(1, k + 1))


def find_ids(src, seed, prefixes):
    """One string id per requested prefix."""
    found = {}
    i = 0
    while len(found) < len(prefixes):
        for pre in prefixes:
            if pre not in found and first_letters(src, seed, i, len(pre)) == pre:
                found[pre] = i
                break
        i += 1
    return [found[pre] for pre in prefixes]


def brute_depth(src, seed, ids, sid):
    """Smallest k such that no other string shares the first k letters of sid."""
    if len(ids) == 1:
        return 0
    k = 0
    while True:
        mine = first_letters(src, seed, sid, k)
        if all(first_letters(src, seed, o, k) != mine for o in ids if o != sid):
            return k
        k += 1


def test_single_string():
    t = build_trie(P3, handles(P3, 1, [0]))
    assert t.internal_count == 0
    assert t.external_count == 1
    assert depth_of(t, 0) == 0
    assert imbalance_of(t, 0) == 0


def test_two_strings_split_at_root():
    a, b = find_ids(HALF, 4, ["0", "1"])
    t = build_trie(HALF, handles(HALF, 4, [a, b]))
    assert t.internal_count == 1
    assert depth_of(t, a) == depth_of(t, b) == 1
    pt = to_patricia(t)
    assert pt.internal_count == 1
    assert patricia_depth_of(pt, a) == patricia_depth_of(pt, b) == 1


def test_depth_is_first_difference():
    for seed in range(20):
        t = build_trie(P3, handles(P3, seed, [0, 1]))
        k = 1
        while first_letters(P3, seed, 0, k) == first_letters(P3, seed, 1, k):
            k += 1
        assert depth_of(t, 0) == depth_of(t, 1) == k


def test_hand_btrie_profile():
    ids = find_ids(HALF, 9, ["00", "01", "1"])
    t = build_trie(HALF, handles(HALF, 9, ids), b=2)
    z, internal = occupancy_profile(t)
    assert z == {1: 1, 2: 1}
    assert internal == 1
    assert depth_of(t, ids[0]) == depth_of(t, ids[2]) == 1


def test_imbalance_of_path():
    # the string reaching depth 3 along 1,1,0 has imbalance +1
    ids = find_ids(HALF, 2, ["110", "111", "0"])
    t = build_trie(HALF, handles(HALF, 2, ids))
    assert depth_of(t, ids[0]) == 3
    assert imbalance_of(t, ids[0]) == 1
    assert imbalance_of(t, ids[2]) == -1


@pytest.mark.parametrize("seed", range(5))
def test_depth_matches_brute_force(seed):
    ids = list(range(12))
    t = build_trie(P3, handles(P3, seed, ids))
    for sid in ids:
        assert depth_of(t, sid) == brute_depth(P3, seed, ids, sid)


@pytest.mark.parametrize("p,b", [(0.5, 1), (0.3, 1), (0.3, 2), (0.8, 3)])
def test_structure_invariants(p, b):
    src = new_source(p)
    for seed in range(10):
        n = 50 + seed
        t = random_trie(src, n, seed, b=b)
        z, internal = occupancy_profile(t)
        assert sum(j * c for j, c in z.items()) == n
        if b == 1:
            assert t.external_count == n
        for v in range(t.node_count):
            kids = [c for c in t.child[v] if c != NONE]
            if t.is_internal(v):
                assert 1 <= len(kids) <= 2
            else:
                assert not kids
                assert 1 <= len(t.stored[v]) <= b
        if b == 1:
            pt = to_patricia(t)
            assert pt.internal_count == n - 1
            assert pt.external_count == n
            assert all(len([c for c in kids if c != NONE]) == 2
                       for kids, s in zip(pt.child, pt.stored) if s is None)


def test_patricia_thousand():
    for p in (0.5, 0.3, 0.9):
        pt = to_patricia(random_trie(new_source(p), 1000, 11))
        assert pt.internal_count == 999


def test_rebuild_equivalence_any_order():
    hs = handles(P3, 5, range(40))
    built = build_trie(P3, hs)
    rng = np.random.default_rng(0)
    for _ in range(3):
        t = Trie(P3)
        for i in rng.permutation(40):
            insert(t, hs[i])
        assert t == built
    assert random_trie(P3, 40, 5) == built


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 30), st.integers(1, 3), st.sampled_from([0.5, 0.3, 0.85]))
def test_rebuild_equivalence_property(seed, n, b, p):
    src = new_source(p)
    hs = handles(src, seed, range(n))
    built = build_trie(src, hs, b=b)
    assert build_trie(src, hs[::-1], b=b) == built
    if b == 1:
        # incremental insertion exists for b = 1 only
        t = Trie(src)
        for h in reversed(hs):
            t.insert(h)
        assert t == built


def test_insert_outcomes():
    t = Trie(P3)
    out = insert(t, StringHandle(P3, 3, 0))
    assert (out.depth, out.new_internal) == (0, 0)
    before = t.internal_count
    for i in range(1, 60):
        out = insert(t, StringHandle(P3, 3, i))
        assert t.internal_count - before == out.new_internal
        assert depth_of(t, i) == out.depth
        before = t.internal_count


def test_duplicate_string_rejected():
    h = StringHandle(P3, 1, 0)
    with pytest.raises(IndistinguishableStringsError):
        build_trie(P3, [h, StringHandle(P3, 1, 0)])
    with pytest.raises(ValueError):
        build_trie(P3, [])


def test_occupancy_needs_more_than_b():
    t = random_trie(P3, 2, 0, b=2)
    with pytest.raises(ValueError):
        occupancy_profile(t)


@pytest.mark.parametrize("b", [1, 2, 4])
def test_count_nodes_matches_trie(b):
    for seed in range(5):
        n = 100
        keys = string_keys(seed, np.arange(n, dtype=np.uint64))
        t = random_trie(P3, n, seed, b=b)
        assert count_nodes(P3, keys, b) == occupancy_profile(t)


def test_match_profile_matches_trie():
    n = 80
    for seed in range(4):
        keys = string_keys(seed, np.arange(n, dtype=np.uint64))
        t = random_trie(P3, n, seed)
        pt = to_patricia(t)
        for sid in (0, 17, 79):
            mp = match_profile(P3, keys[sid], np.delete(keys, sid))
            assert mp.depth == depth_of(t, sid)
            assert mp.imbalance == imbalance_of(t, sid)
            assert mp.patricia_depth == patricia_depth_of(pt, sid)
        for b in (2, 3):
            tb = random_trie(P3, n, seed, b=b)
            mp = match_profile(P3, keys[0], keys[1:])
            assert mp.bucket_depth(b) == depth_of(tb, 0)
        # inserting the last string into the trie of the others
        t = random_trie(P3, n - 1, seed)
        mp = match_profile(P3, keys[n - 1], keys[: n - 1])
        out = t.insert(StringHandle(P3, seed, n - 1))
        assert mp.insertion() == out


def test_to_dot():
    text = to_dot(random_trie(HALF, 3, 0))
    assert text.startswith("digraph trie {")
    assert text.count("shape=box") == 3
    assert "->" in text


def test_depth_symmetry_across_ids():
    # depth of id 0 and depth pooled over all ids have the same law
    n, reps = 16, 600
    first, pooled = [], []
    for r in range(reps):
        t = random_trie(P3, n, 1000 + r)
        d = [depth_of(t, i) for i in range(n)]
        first.append(d[0])
        pooled.append(np.mean(d))
    first = np.array(first, float)
    se = first.std(ddof=1) / math.sqrt(reps)
    assert abs(first.mean() - np.mean(pooled)) <= 4 * se


def test_two_string_depth_law():
    # P(D_2 = k) = (p^2 + q^2)^(k-1) 2pq, mean 1/(2pq)
    reps = 4000
    d = np.array([depth_of(random_trie(P3, 2, r), 0) for r in range(reps)], float)
    se = d.std(ddof=1) / math.sqrt(reps)
    assert abs(d.mean() - 1 / (2 * 0.21)) <= 3.5 * se
    s = 0.09 + 0.49
    p1 = np.mean(d == 1)
    assert abs(p1 - 0.42) <= 4 * math.sqrt(0.42 * 0.58 / reps)
    p2 = np.mean(d == 2)
    assert abs(p2 - s * 0.42) <= 4 * math.sqrt(s * 0.42 * (1 - s * 0.42) / reps)
