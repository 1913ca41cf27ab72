"""Tries, b-tries and Patricia tries over finite sets of random strings.

A trie is built level by level: at level ``k`` every node still holding more
than ``b`` strings becomes internal and its strings are split by letter
``k``.  Letters come straight from the strings' counter-addressed streams,
so only the prefixes the construction actually inspects are generated.

Node storage is a set of parallel Python lists so that :meth:`Trie.insert`
can grow the structure in place.  Node 0 is the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from renewtrie.source import (
    SourceParams,
    StringHandle,
    letters_from_keys,
    string_keys,
)

__all__ = [
    "IndistinguishableStringsError",
    "Trie",
    "PatriciaTrie",
    "InsertOutcome",
    "build_trie",
    "random_trie",
    "depth_of",
    "imbalance_of",
    "occupancy_profile",
    "to_patricia",
    "patricia_depth_of",
    "insert",
    "to_dot",
    "materialization_cap",
    "count_nodes",
    "MatchProfile",
    "match_profile",
]

NONE = -1


class IndistinguishableStringsError(ValueError):
    """Strings agree on every letter up to the materialization cap."""


def materialization_cap(src: SourceParams, n: int) -> int:
    """Deepest level the builder will inspect before declaring a tie."""
    bits = max(1, math.ceil(math.log2(max(n, 2))))
    return math.ceil(64 * bits / min(src.step_one, src.step_zero))


@dataclass(frozen=True)
class InsertOutcome:
    depth: int
    new_internal: int


class Trie:
    """A (b-)trie.  Build it with :func:`build_trie` or :func:`random_trie`."""

    def __init__(self, src: SourceParams, b: int = 1):
        if b < 1:
            raise ValueError("bucket capacity b must be at least 1")
        self.src = src
        self.b = int(b)
        # per node
        self.depth: list[int] = []
        self.parent: list[int] = []
        self.letter: list[int] = []  # letter on the edge from the parent
        self.child: list[list[int]] = []  # [child on 0, child on 1]
        self.stored: list[list[int] | None] = []  # None marks an internal node
        # per string
        self._keys: dict[int, np.uint64] = {}
        self._leaf: dict[int, int] = {}
        self.cap = 0

    # -- basic queries ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self._leaf)

    @property
    def node_count(self) -> int:
        return len(self.depth)

    def is_internal(self, node: int) -> bool:
        return self.stored[node] is None

    @property
    def internal_count(self) -> int:
        return sum(1 for s in self.stored if s is None)

    @property
    def external_count(self) -> int:
        return sum(1 for s in self.stored if s is not None)

    def ids(self) -> list[int]:
        return list(self._leaf)

    def leaf_of(self, sid: int) -> int:
        try:
            return self._leaf[sid]
        except KeyError:
            raise KeyError(f"string id {sid} is not stored in this trie") from None

    def prefix(self, node: int) -> str:
        out = []
        while self.parent[node] != NONE:
            out.append("1" if self.letter[node] else "0")
            node = self.parent[node]
        return "".join(reversed(out))

    def letters(self, sid: int, length: int) -> np.ndarray:
        """First ``length`` letters of stored string ``sid``."""
        key = np.array([self._keys[sid]], dtype=np.uint64)
        return letters_from_keys(key, np.arange(1, length + 1, dtype=np.uint64), self.src.p)

    def prefix_map(self) -> dict[str, frozenset[int] | None]:
        """Canonical form: node prefix -> stored ids (``None`` if internal)."""
        return {
            self.prefix(v): (None if s is None else frozenset(s))
            for v, s in enumerate(self.stored)
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trie):
            return NotImplemented
        return self.b == other.b and self.prefix_map() == other.prefix_map()

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"Trie(n={self.n}, b={self.b}, internal={self.internal_count}, "
            f"external={self.external_count})"
        )

    # -- construction -------------------------------------------------------

    def _new_node(self, depth: int, parent: int, letter: int, stored) -> int:
        self.depth.append(depth)
        self.parent.append(parent)
        self.letter.append(letter)
        self.child.append([NONE, NONE])
        self.stored.append(stored)
        return len(self.depth) - 1

    def _fill(self, ids: np.ndarray, keys: np.ndarray) -> None:
        n = ids.size
        if len(set(ids.tolist())) != n:
            raise ValueError("string ids stored in one trie must be distinct")
        self.cap = materialization_cap(self.src, n)
        self._keys = dict(zip(ids.tolist(), keys.tolist()))
        if n == 0:
            return
        if n <= self.b:
            self._new_node(0, NONE, 0, ids.tolist())
            self._leaf = {i: 0 for i in ids.tolist()}
            return

        self._new_node(0, NONE, 0, None)
        leaf = {}
        pos = np.arange(n)
        node = np.zeros(n, dtype=np.int64)
        k = 0
        while pos.size:
            k += 1
            if k > self.cap:
                raise IndistinguishableStringsError(
                    f"{pos.size} strings still share a prefix at depth {self.cap}"
                )
            bits = letters_from_keys(keys[pos], np.uint64(k), self.src.p).astype(np.int64)
            code = node * 2 + bits
            order = np.argsort(code, kind="stable")
            code, pos = code[order], pos[order]
            uniq, start, counts = np.unique(code, return_index=True, return_counts=True)
            keep = np.zeros(pos.size, dtype=bool)
            for c, s, m in zip(uniq.tolist(), start.tolist(), counts.tolist()):
                par, bit = divmod(c, 2)
                if m > self.b:
                    v = self._new_node(k, par, bit, None)
                    keep[s : s + m] = True
                    code[s : s + m] = v
                else:
                    members = ids[pos[s : s + m]].tolist()
                    v = self._new_node(k, par, bit, members)
                    for sid in members:
                        leaf[sid] = v
                self.child[par][bit] = v
            pos = pos[keep]
            node = code[keep]
        self._leaf = leaf

    # -- insertion ----------------------------------------------------------

    def insert(self, handle: StringHandle) -> InsertOutcome:
        """Insert one string (b = 1 only) and count the new internal nodes."""
        if self.b != 1:
            raise ValueError("insertion is only defined for b = 1 tries")
        if handle.src.p != self.src.p:
            raise ValueError("handle comes from a different source")
        sid = handle.id
        if sid in self._leaf:
            raise ValueError(f"string id {sid} is already stored")
        key = handle.key
        keyarr = np.array([key], dtype=np.uint64)
        self._keys[sid] = key
        self.cap = max(self.cap, materialization_cap(self.src, self.n + 1))

        def letter_of(k: int) -> int:
            return int(letters_from_keys(keyarr, np.uint64(k), self.src.p)[0])

        if not self.depth:
            self._new_node(0, NONE, 0, [sid])
            self._leaf[sid] = 0
            return InsertOutcome(depth=0, new_internal=0)

        v = 0
        while self.stored[v] is None:
            k = self.depth[v] + 1
            bit = letter_of(k)
            w = self.child[v][bit]
            if w == NONE:
                w = self._new_node(k, v, bit, [sid])
                self.child[v][bit] = w
                self._leaf[sid] = w
                return InsertOutcome(depth=k, new_internal=0)
            v = w

        (other,) = self.stored[v]
        other_key = np.array([self._keys[other]], dtype=np.uint64)
        k = self.depth[v]
        # v becomes internal; extend the chain while both strings agree
        self.stored[v] = None
        made = 1
        while True:
            k += 1
            if k > self.cap:
                raise IndistinguishableStringsError(
                    f"string {sid} agrees with {other} on {self.cap} letters"
                )
            mine = letter_of(k)
            theirs = int(letters_from_keys(other_key, np.uint64(k), self.src.p)[0])
            if mine == theirs:
                w = self._new_node(k, v, mine, None)
                self.child[v][mine] = w
                v = w
                made += 1
                continue
            a = self._new_node(k, v, mine, [sid])
            c = self._new_node(k, v, theirs, [other])
            self.child[v][mine] = a
            self.child[v][theirs] = c
            self._leaf[sid] = a
            self._leaf[other] = c
            return InsertOutcome(depth=k, new_internal=made)


def _handle_arrays(handles: Sequence[StringHandle], src: SourceParams):
    for h in handles:
        if h.src.p != src.p:
            raise ValueError("all handles must come from the trie's source")
    ids = np.array([h.id for h in handles], dtype=np.uint64)
    keys = np.array([h.key for h in handles], dtype=np.uint64)
    return ids, keys


def build_trie(src: SourceParams, handles: Sequence[StringHandle], b: int = 1) -> Trie:
    """Trie over the strings of ``handles``; ``handle.id`` labels each string."""
    handles = list(handles)
    if not handles:
        raise ValueError("a trie needs at least one string")
    seen = set()
    for h in handles:
        if (h.seed, h.id) in seen:
            raise IndistinguishableStringsError(
                f"string (seed={h.seed}, id={h.id}) appears twice"
            )
        seen.add((h.seed, h.id))
    t = Trie(src, b)
    ids, keys = _handle_arrays(handles, src)
    t._fill(ids.astype(np.int64) if ids.max() < 2**63 else ids, keys)
    return t


def random_trie(src: SourceParams, n: int, seed: int, b: int = 1) -> Trie:
    """Trie over strings ``0..n-1`` of stream ``seed``, without handle objects."""
    if n < 1:
        raise ValueError("a trie needs at least one string")
    t = Trie(src, b)
    ids = np.arange(n, dtype=np.int64)
    t._fill(ids, string_keys(seed, ids.astype(np.uint64)))
    return t


def depth_of(trie: Trie, sid: int) -> int:
    """Depth of the external node holding string ``sid`` (root has depth 0)."""
    return trie.depth[trie.leaf_of(sid)]


def imbalance_of(trie: Trie, sid: int) -> int:
    """Right steps minus left steps on the path from the root to ``sid``."""
    d = depth_of(trie, sid)
    if d == 0:
        return 0
    ones = int(trie.letters(sid, d).sum())
    return 2 * ones - d


def occupancy_profile(trie: Trie) -> tuple[dict[int, int], int]:
    """``({j: Z_j for j in 1..b}, internal_count)``; the root is never a bucket."""
    if trie.n <= trie.b:
        raise ValueError(f"occupancy needs n >= b + 1 strings (n={trie.n}, b={trie.b})")
    z = {j: 0 for j in range(1, trie.b + 1)}
    internal = 0
    for s in trie.stored:
        if s is None:
            internal += 1
        else:
            z[len(s)] += 1
    return z, internal


def insert(trie: Trie, handle: StringHandle) -> InsertOutcome:
    return trie.insert(handle)


# -- Patricia ---------------------------------------------------------------


class PatriciaTrie:
    """Path-compressed trie: every internal node has two children.

    ``skip[v]`` is the number of one-child trie nodes removed from the edge
    entering ``v``; ``trie_depth[v]`` is the depth the node had in the trie.
    """

    def __init__(self):
        self.parent: list[int] = []
        self.child: list[list[int]] = []
        self.skip: list[int] = []
        self.depth: list[int] = []
        self.trie_depth: list[int] = []
        self.stored: list[list[int] | None] = []
        self._leaf: dict[int, int] = {}

    @property
    def n(self) -> int:
        return len(self._leaf)

    @property
    def internal_count(self) -> int:
        return sum(1 for s in self.stored if s is None)

    @property
    def external_count(self) -> int:
        return sum(1 for s in self.stored if s is not None)

    def depth_of(self, sid: int) -> int:
        try:
            return self.depth[self._leaf[sid]]
        except KeyError:
            raise KeyError(f"string id {sid} is not stored in this trie") from None


def to_patricia(trie: Trie) -> PatriciaTrie:
    if trie.b != 1:
        raise ValueError("Patricia compression is implemented for b = 1 tries")
    if trie.n < 2:
        raise ValueError("Patricia trie needs at least two strings")
    pt = PatriciaTrie()

    def descend(v: int) -> tuple[int, int]:
        removed = 0
        while trie.stored[v] is None:
            kids = [c for c in trie.child[v] if c != NONE]
            if len(kids) == 2:
                break
            v = kids[0]
            removed += 1
        return v, removed

    root, removed = descend(0)
    pt.parent.append(NONE)
    pt.child.append([NONE, NONE])
    pt.skip.append(removed)
    pt.depth.append(0)
    pt.trie_depth.append(trie.depth[root])
    pt.stored.append(None)
    stack = [(root, 0)]
    while stack:
        v, pv = stack.pop()
        for bit in (0, 1):
            w, removed = descend(trie.child[v][bit])
            u = len(pt.parent)
            pt.parent.append(pv)
            pt.child.append([NONE, NONE])
            pt.skip.append(removed)
            pt.depth.append(pt.depth[pv] + 1)
            pt.trie_depth.append(trie.depth[w])
            pt.child[pv][bit] = u
            if trie.stored[w] is None:
                pt.stored.append(None)
                stack.append((w, u))
            else:
                pt.stored.append(list(trie.stored[w]))
                for sid in trie.stored[w]:
                    pt._leaf[sid] = u
    return pt


def patricia_depth_of(pt: PatriciaTrie, sid: int) -> int:
    return pt.depth_of(sid)


# -- debug output -----------------------------------------------------------


def to_dot(trie: Trie, name: str = "trie") -> str:
    """Graphviz text; boxes are buckets, circles are internal nodes."""
    lines = [f"digraph {name} {{"]
    for v, s in enumerate(trie.stored):
        label = trie.prefix(v) or "ε"
        if s is None:
            lines.append(f'  n{v} [shape=circle, label="{label}"];')
        else:
            ids = ",".join(str(i) for i in sorted(s))
            lines.append(f'  n{v} [shape=box, label="{label}\\n{{{ids}}}"];')
    for v, kids in enumerate(trie.child):
        for bit, w in enumerate(kids):
            if w != NONE:
                lines.append(f'  n{v} -> n{w} [label="{bit}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- structure-free statistics ----------------------------------------------


def count_nodes(src: SourceParams, keys: np.ndarray, b: int = 1) -> tuple[dict[int, int], int]:
    """Bucket profile and internal-node count of the trie over ``keys``.

    Same level-by-level splitting as :func:`build_trie` but only group sizes
    are kept, which makes it cheap enough for large Monte Carlo runs.  Unlike
    :func:`occupancy_profile` a root holding ``n <= b`` strings is counted as
    a bucket.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    n = keys.size
    z = {j: 0 for j in range(1, b + 1)}
    if n == 0:
        return z, 0
    if n <= b:
        z[n] += 1
        return z, 0
    cap = materialization_cap(src, n)
    internal = 1
    node = np.zeros(n, dtype=np.int64)
    k = 0
    while keys.size:
        k += 1
        if k > cap:
            raise IndistinguishableStringsError(
                f"{keys.size} strings still share a prefix at depth {cap}"
            )
        code = node * 2 + letters_from_keys(keys, np.uint64(k), src.p)
        uniq, inverse, counts = np.unique(code, return_inverse=True, return_counts=True)
        small = counts <= b
        for j, m in zip(*np.unique(counts[small], return_counts=True)):
            z[int(j)] += int(m)
        big = ~small
        internal += int(big.sum())
        keep = big[inverse]
        relabel = np.cumsum(big) - 1
        keys = keys[keep]
        node = relabel[inverse[keep]]
    return z, internal


@dataclass(frozen=True)
class MatchProfile:
    """How many other strings share each prefix of a target string.

    ``counts[k]`` is the number of others beginning with the target's first
    ``k`` letters (``counts[0]`` is the number of others); the array ends at
    the first zero.  ``letters`` holds the target's first ``len(counts) - 1``
    letters.
    """

    counts: np.ndarray
    letters: np.ndarray

    @property
    def depth(self) -> int:
        """Depth of the target in the b = 1 trie over target + others."""
        return int(self.counts.size - 1) if self.counts[0] > 0 else 0

    def bucket_depth(self, b: int) -> int:
        """Depth of the target in the b-trie over target + others."""
        return int(np.argmax(self.counts <= b - 1))

    @property
    def patricia_depth(self) -> int:
        c = self.counts
        return int(np.count_nonzero(c[:-1] > c[1:]))

    @property
    def imbalance(self) -> int:
        d = self.depth
        return int(2 * self.letters[:d].sum()) - d

    def insertion(self) -> InsertOutcome:
        """Outcome of inserting the target into the trie over the others."""
        c = self.counts
        if c[0] == 0:
            return InsertOutcome(depth=0, new_internal=0)
        if c[0] == 1:
            # root leaf is split: root plus every shared level become internal
            lcp = c.size - 2
            return InsertOutcome(depth=lcp + 1, new_internal=lcp + 1)
        last_big = int(np.nonzero(c >= 2)[0][-1])
        if c[last_big + 1] == 0:
            return InsertOutcome(depth=last_big + 1, new_internal=0)
        lcp = c.size - 2
        return InsertOutcome(depth=lcp + 1, new_internal=lcp - last_big)


def match_profile(
    src: SourceParams,
    target_key,
    other_keys: np.ndarray,
    cap: int | None = None,
) -> MatchProfile:
    """Prefix-sharing counts of one string against a set of other strings."""
    others = np.asarray(other_keys, dtype=np.uint64)
    target = np.array([target_key], dtype=np.uint64)
    if cap is None:
        cap = materialization_cap(src, others.size + 1)
    counts = [others.size]
    letters = []
    k = 0
    while others.size:
        k += 1
        if k > cap:
            raise IndistinguishableStringsError(
                f"target agrees with {others.size} strings on {cap} letters"
            )
        t = letters_from_keys(target, np.uint64(k), src.p)[0]
        others = others[letters_from_keys(others, np.uint64(k), src.p) == t]
        counts.append(others.size)
        letters.append(t)
    return MatchProfile(np.array(counts, dtype=np.int64), np.array(letters, dtype=np.uint8))
