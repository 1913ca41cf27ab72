"""Khodak and Tunstall variable-to-fixed dictionaries, parsing and the VFC1
container format.

Phrases are ``str`` objects over ``"01"``.  A dictionary keeps its phrases
in lexicographic order, which is also the left-to-right leaf order of the
parsing tree; a phrase's codeword is its index in that order.

Phrase probabilities are compared through a cost that is exact whenever the
source allows it:

* lattice sources (``arith`` set): the integer ``a*ones + b*zeros``,
  proportional to ``-ln P``;
* sources built from a :class:`~fractions.Fraction`: ``1 / P`` as a Fraction;
* otherwise ``-ln P`` as a float, with costs within ``1e-12`` declared tied.
"""

from __future__ import annotations

import heapq
import math
import struct
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from renewtrie.source import SourceParams, StringHandle, new_source

__all__ = [
    "Dictionary",
    "PhraseStats",
    "TunstallBuilder",
    "khodak_dictionary",
    "tunstall_dictionary",
    "tunstall_mean_lengths",
    "khodak_length_law",
    "phrase_stats",
    "parse",
    "decode",
    "encode_stream",
    "decode_stream",
    "StreamExhaustedError",
    "MAGIC",
]

TIE_TOLERANCE = 1e-12
MAX_EXPLICIT_PHRASES = 1 << 24
MAGIC = b"VFC1"

Stream = Union[StringHandle, str, Sequence[int], np.ndarray]


class StreamExhaustedError(ValueError):
    """The input ended in the middle of a phrase."""


class _Cost:
    """Orders compositions ``(ones, zeros)`` by decreasing probability."""

    def __init__(self, src: SourceParams):
        self.src = src
        self.lattice = src.arith.is_arithmetic
        self.exact = src.p_exact is not None
        if self.exact:
            self._p = src.p_exact
            self._q = 1 - src.p_exact

    def __call__(self, ones: int, zeros: int):
        if self.lattice:
            return ones * self.src.arith.a + zeros * self.src.arith.b
        if self.exact:
            return 1 / (self._p**ones * self._q**zeros)
        return ones * self.src.step_one + zeros * self.src.step_zero

    @property
    def fuzzy(self) -> bool:
        return not (self.lattice or self.exact)

    def tied(self, c1, c2) -> bool:
        if self.fuzzy:
            return math.isclose(c1, c2, rel_tol=TIE_TOLERANCE, abs_tol=TIE_TOLERANCE)
        return c1 == c2

    def prob(self, ones: int, zeros: int):
        if self.exact:
            return self._p**ones * self._q**zeros
        return self.src.p**ones * self.src.q**zeros

    def khodak_limit(self, R):
        """Largest cost that is still an internal node at threshold ``1/R``."""
        if self.lattice:
            x = math.log(R) / self.src.arith.d
            return math.floor(x + 1e-9)
        if self.exact:
            return Fraction(R)
        lr = math.log(R)
        return lr + TIE_TOLERANCE * max(1.0, abs(lr))


@dataclass(frozen=True)
class PhraseStats:
    mean_len: float | Fraction
    var_len: float | Fraction
    rate: float


@dataclass
class Dictionary:
    """Complete prefix-free phrase set (the leaves of a full binary tree)."""

    src: SourceParams
    phrases: list[str]
    probs: list[float]
    origin: tuple
    exact_probs: list[Fraction] | None = None
    _tree: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def M(self) -> int:
        return len(self.phrases)

    @property
    def ell(self) -> int:
        return max(1, math.ceil(math.log2(self.M)))

    @property
    def max_len(self) -> int:
        return max(len(a) for a in self.phrases)

    def index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.phrases)}

    @classmethod
    def from_phrases(cls, src: SourceParams, phrases: Iterable[str], origin=("explicit",)):
        """Validate and wrap an arbitrary phrase list."""
        phrases = sorted(phrases)
        cost = _Cost(src)
        comps = [(a.count("1"), a.count("0")) for a in phrases]
        d = cls(
            src,
            phrases,
            [src.p**i * src.q**j for i, j in comps],
            tuple(origin),
            [cost.prob(i, j) for i, j in comps] if cost.exact else None,
        )
        d.tree()  # raises unless complete and prefix-free
        return d

    def tree(self):
        """Parsing tree as ``(child0, child1)`` lists.

        Entry ``>= 0`` is an internal node index, ``< 0`` encodes leaf
        ``-1 - codeword``.
        """
        if self._tree is not None:
            return self._tree
        if self.M < 2:
            raise ValueError("a dictionary needs at least two phrases")
        child = [[None, None]]
        index = {"": 0}
        for code, phrase in enumerate(self.phrases):
            if not phrase or phrase.strip("01"):
                raise ValueError(f"invalid phrase {phrase!r}")
            v = 0
            for depth, ch in enumerate(phrase[:-1], start=1):
                bit = ch == "1"
                w = child[v][bit]
                if w is None:
                    w = len(child)
                    child.append([None, None])
                    index[phrase[:depth]] = w
                    child[v][bit] = w
                elif w < 0:
                    raise ValueError(f"phrase {self.phrases[-1 - w]!r} is a prefix of {phrase!r}")
                v = w
            bit = phrase[-1] == "1"
            if child[v][bit] is not None:
                raise ValueError(f"phrase {phrase!r} is a prefix of another phrase")
            child[v][bit] = -1 - code
        for v, kids in enumerate(child):
            if None in kids:
                raise ValueError("phrase set is not complete: some internal node has one child")
        c0 = [k[0] for k in child]
        c1 = [k[1] for k in child]
        self._tree = (c0, c1)
        return self._tree


def khodak_dictionary(src: SourceParams, R) -> Dictionary:
    """Phrases are the strings with ``P < 1/R`` whose parent has ``P >= 1/R``.

    Ties ``P = 1/R`` count as internal, so ``M(R)`` is right-continuous.
    """
    if not R > 1:
        raise ValueError("R must exceed 1")
    cost = _Cost(src)
    limit = cost.khodak_limit(R)

    def internal(i, j):
        return cost(i, j) <= limit

    phrases: list[str] = []
    stack = [("", 0, 0)]
    while stack:
        alpha, i, j = stack.pop()
        if internal(i, j):
            stack.append((alpha + "1", i + 1, j))
            stack.append((alpha + "0", i, j + 1))
            if len(phrases) + len(stack) > MAX_EXPLICIT_PHRASES:
                raise ValueError(f"Khodak dictionary for R={R} exceeds {MAX_EXPLICIT_PHRASES} phrases")
        else:
            phrases.append(alpha)
    if phrases == [""]:
        raise ValueError("R is too small: the empty phrase is already a leaf")
    return Dictionary.from_phrases(src, phrases, origin=("khodak", R))


class TunstallBuilder:
    """Grows a Tunstall parsing tree one split at a time.

    Among the most probable leaves the lexicographically smallest is split.
    ``mean_len`` is kept up to date (exactly, for Fraction sources).
    """

    def __init__(self, src: SourceParams):
        self.src = src
        self.cost = _Cost(src)
        self._groups: dict = {}
        self._heap: list = []
        self.M = 1
        self.mean_len = Fraction(0) if self.cost.exact else 0.0
        self._add("", 0, 0)

    def _gkey(self, c, i, j):
        return (i, j) if self.cost.fuzzy else c

    def _add(self, alpha: str, i: int, j: int) -> None:
        c = self.cost(i, j)
        g = self._gkey(c, i, j)
        bucket = self._groups.get(g)
        if bucket is None:
            bucket = self._groups[g] = []
            heapq.heappush(self._heap, (c, g))
        heapq.heappush(bucket, (alpha, i, j))

    def _top(self):
        while True:
            c, g = self._heap[0]
            if self._groups.get(g):
                return c, g
            heapq.heappop(self._heap)
            self._groups.pop(g, None)

    def split(self) -> str:
        """Split one most probable leaf; return the phrase that was split."""
        c, g = self._top()
        chosen = g
        if self.cost.fuzzy:
            popped = []
            while self._heap:
                c2, g2 = self._heap[0]
                if not self._groups.get(g2):
                    heapq.heappop(self._heap)
                    continue
                if not self.cost.tied(c, c2):
                    break
                popped.append(heapq.heappop(self._heap))
            chosen = min((e[1] for e in popped), key=lambda gk: self._groups[gk][0][0])
            for e in popped:
                heapq.heappush(self._heap, e)
        alpha, i, j = heapq.heappop(self._groups[chosen])
        self.mean_len += self.cost.prob(i, j)
        self._add(alpha + "0", i, j + 1)
        self._add(alpha + "1", i + 1, j)
        self.M += 1
        return alpha

    def leaves(self) -> list[str]:
        return sorted(a for bucket in self._groups.values() for a, _, _ in bucket)

    def dictionary(self) -> Dictionary:
        return Dictionary.from_phrases(self.src, self.leaves(), origin=("tunstall", self.M))


def tunstall_dictionary(src: SourceParams, M: int) -> Dictionary:
    """Start from the empty phrase and split a most probable leaf ``M - 1`` times."""
    if M < 2:
        raise ValueError("Tunstall dictionaries need M >= 2")
    if M > MAX_EXPLICIT_PHRASES:
        raise ValueError(f"M={M} exceeds {MAX_EXPLICIT_PHRASES} phrases")
    t = TunstallBuilder(src)
    while t.M < M:
        t.split()
    return t.dictionary()


def tunstall_mean_lengths(src: SourceParams, M_max: int) -> list:
    """Exact mean phrase length of the Tunstall code for every ``M <= M_max``.

    Entry ``m`` of the returned list belongs to ``M = m`` (entry 0 is unused
    and entry 1 is the empty dictionary, length 0).
    """
    t = TunstallBuilder(src)
    out = [None, t.mean_len]
    while t.M < M_max:
        t.split()
        out.append(t.mean_len)
    return out


def khodak_length_law(src: SourceParams, R) -> tuple[int, dict[int, float]]:
    """``(M(R), {length: probability})`` by counting leaf compositions.

    A string with ``i`` ones and ``j`` zeros is a leaf iff it is not internal
    and its parent is; parents of a given composition are either all
    internal or all not, so leaves can be counted with binomials instead of
    enumerated.  Works for thresholds far beyond explicit construction.
    """
    if not R > 1:
        raise ValueError("R must exceed 1")
    cost = _Cost(src)
    limit = cost.khodak_limit(R)

    def internal(i, j):
        return i >= 0 and j >= 0 and cost(i, j) <= limit

    M = 0
    law: dict[int, float] = {}
    n = 0
    while True:
        n += 1
        any_parent = False
        mass = 0.0
        for i in range(n + 1):
            j = n - i
            if internal(i, j):
                continue
            # last letter 1 (parent (i-1, j)) or 0 (parent (i, j-1))
            ways = 0
            if i >= 1 and internal(i - 1, j):
                ways += math.comb(n - 1, i - 1)
            if j >= 1 and internal(i, j - 1):
                ways += math.comb(n - 1, i)
            if ways:
                any_parent = True
                M += ways
                mass += ways * src.p**i * src.q**j
        if any_parent:
            law[n] = mass
        elif not any(internal(i, n - i) for i in range(n + 1)):
            break
    return M, law


def phrase_stats(d: Dictionary) -> PhraseStats:
    """Exact mean and variance of the length of a random phrase."""
    probs = d.exact_probs if d.exact_probs is not None else d.probs
    lengths = [len(a) for a in d.phrases]
    mean = sum(w * n for w, n in zip(probs, lengths))
    second = sum(w * n * n for w, n in zip(probs, lengths))
    return PhraseStats(mean_len=mean, var_len=second - mean * mean, rate=math.log2(d.M) / float(mean))


# -- parsing ---------------------------------------------------------------


def _stream_bits(stream: Stream, need: int) -> np.ndarray:
    if isinstance(stream, StringHandle):
        return stream.prefix(need)
    if isinstance(stream, str):
        if stream.strip("01"):
            raise ValueError("bit string may only contain 0 and 1")
        return np.frombuffer(stream.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(stream, dtype=np.uint8)


def parse(d: Dictionary, stream: Stream, N: int) -> tuple[int, list[int]]:
    """Greedy unique parse covering the first ``N`` letters.

    Returns ``(K_N, codewords)``.  The last phrase may run past letter ``N``.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    c0, c1 = d.tree()
    bits = _stream_bits(stream, N + d.max_len).tolist()
    codes: list[int] = []
    pos = 0
    total = len(bits)
    while pos < N:
        v = 0
        while v >= 0:
            if pos >= total:
                raise StreamExhaustedError(f"stream ended at letter {pos} inside a phrase")
            v = c1[v] if bits[pos] else c0[v]
            pos += 1
        codes.append(-1 - v)
    return len(codes), codes


def decode(d: Dictionary, codewords: Iterable[int]) -> str:
    out = []
    for c in codewords:
        c = int(c)
        if not 0 <= c < d.M:
            raise ValueError(f"codeword {c} outside 0..{d.M - 1}")
        out.append(d.phrases[c])
    return "".join(out)


# -- VFC1 container -----------------------------------------------------------
# magic | M u32 | ell u8 | p f64 | M x (len u16, bits packed MSB-first)
# | codewords, ell bits each, MSB-first, zero-padded | N u64   (little-endian)


def _pack_bits(bits: str) -> bytes:
    if not bits:
        return b""
    arr = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return np.packbits(arr).tobytes()


def _unpack_bits(data: bytes, length: int) -> str:
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:length]
    return "".join("1" if v else "0" for v in arr)


def encode_stream(d: Dictionary, stream: Stream, N: int) -> bytes:
    """Parse ``N`` letters of ``stream`` and serialize dictionary + codewords."""
    _, codes = parse(d, stream, N)
    out = bytearray(MAGIC)
    out += struct.pack("<IBd", d.M, d.ell, d.src.p)
    for phrase in d.phrases:
        out += struct.pack("<H", len(phrase))
        out += _pack_bits(phrase)
    ell = d.ell
    if codes:
        shifts = np.arange(ell - 1, -1, -1)
        arr = ((np.asarray(codes, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)
        out += np.packbits(arr.ravel()).tobytes()
    out += struct.pack("<Q", N)
    return bytes(out)


def decode_stream(blob: bytes) -> tuple[Dictionary, str]:
    """Inverse of :func:`encode_stream`: the dictionary and the first ``N`` letters."""
    if blob[:4] != MAGIC:
        raise ValueError("not a VFC1 stream")
    M, ell, p = struct.unpack_from("<IBd", blob, 4)
    pos = 4 + struct.calcsize("<IBd")
    phrases = []
    for _ in range(M):
        (length,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        nbytes = -(-length // 8)
        phrases.append(_unpack_bits(blob[pos : pos + nbytes], length))
        pos += nbytes
    (N,) = struct.unpack_from("<Q", blob, len(blob) - 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        src = new_source(p)
    d = Dictionary.from_phrases(src, phrases, origin=("vfc1",))
    if d.ell != ell:
        raise ValueError(f"header says ell={ell} but {M} phrases need ell={d.ell}")
    payload = np.unpackbits(np.frombuffer(blob[pos : len(blob) - 8], dtype=np.uint8))
    weights = 1 << np.arange(ell - 1, -1, -1)
    out = []
    covered = 0
    i = 0
    while covered < N:
        chunk = payload[i * ell : (i + 1) * ell]
        if chunk.size < ell:
            raise StreamExhaustedError("codeword payload ended before N letters were covered")
        code = int(chunk @ weights)
        if code >= M:
            raise ValueError(f"codeword {code} outside 0..{M - 1}")
        phrase = d.phrases[code]
        out.append(phrase)
        covered += len(phrase)
        i += 1
    return d, "".join(out)[:N]
