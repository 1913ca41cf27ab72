"""Memoryless binary source: letter probabilities, entropy constants,
lattice classification and lazily materialized random strings.

Random strings are counter-addressable: letter ``k`` of string ``id`` under
``seed`` is a pure function of the triple, computed with a SplitMix64
stream (see :data:`RNG_VERSION`).  Nothing is stored beyond the prefix a
:class:`StringHandle` has already been asked for.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "RNG_VERSION",
    "ArithmeticClass",
    "NON_ARITHMETIC",
    "HintMismatchError",
    "SourceParams",
    "StringHandle",
    "new_source",
    "arithmetic_source",
    "solve_arithmetic_p",
    "prefix_probability",
    "prefix_log_probability",
    "sample_string",
    "bit_at",
    "string_keys",
    "letters_from_keys",
    "derive_seed",
]

#: Identifies the bit generator; bump whenever the stream changes.
RNG_VERSION = "splitmix64-stream-v1"

HINT_TOLERANCE = 1e-9
PROBE_MAX_DENOMINATOR = 64

Bits = Union[str, Sequence[int], np.ndarray]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_MASK64 = (1 << 64) - 1


class HintMismatchError(ValueError):
    """An ``(a, b)`` lattice hint does not match the given ``p``."""


@dataclass(frozen=True)
class ArithmeticClass:
    """Lattice type of the step ``X = -ln P(letter)``.

    ``a``, ``b`` and ``d`` are all ``None`` in the non-arithmetic case.
    Otherwise ``ln p / ln q = a / b`` in lowest terms and ``d`` is the span.
    """

    a: int | None = None
    b: int | None = None
    d: float | None = None

    @property
    def is_arithmetic(self) -> bool:
        return self.a is not None

    def __str__(self) -> str:
        if not self.is_arithmetic:
            return "non-arithmetic"
        return f"{self.a}:{self.b}"


NON_ARITHMETIC = ArithmeticClass()


@dataclass(frozen=True)
class SourceParams:
    """Bernoulli(p) letter model with its derived constants (all in nats)."""

    p: float
    q: float
    H: float
    H2: float
    varX: float
    arith: ArithmeticClass = NON_ARITHMETIC
    p_exact: Fraction | None = field(default=None, compare=False)

    @property
    def step_one(self) -> float:
        """``-ln p``, the step for letter 1."""
        return -math.log(self.p)

    @property
    def step_zero(self) -> float:
        """``-ln q``, the step for letter 0."""
        return -math.log(self.q)

    @property
    def sigma2(self) -> float:
        """Var X, also written ``H2 - H^2``."""
        return self.varX


def _check_p(p) -> None:
    if not (0 < p < 1):
        raise ValueError(f"p must lie strictly between 0 and 1, got {p!r}")


def _looks_arithmetic(p: float) -> tuple[int, int] | None:
    ratio = math.log(p) / math.log1p(-p)
    approx = Fraction(ratio).limit_denominator(PROBE_MAX_DENOMINATOR)
    if abs(float(approx) - ratio) <= HINT_TOLERANCE:
        return approx.numerator, approx.denominator
    return None


def new_source(p, arith_hint: tuple[int, int] | None = None) -> SourceParams:
    """Build a source with letter-1 probability ``p``.

    ``p`` may be a float or a :class:`~fractions.Fraction`; a Fraction is kept
    alongside the float so that dictionary code can use exact arithmetic.

    Lattice (arithmetic) mode is opt-in through ``arith_hint=(a, b)`` meaning
    ``ln p / ln q = a / b``.  The single exception is ``p == 1/2`` exactly,
    where ``ln p = ln q`` holds in floating point too and the source is
    classified ``1:1`` with span ``ln 2``.  A bare ``p`` that merely looks
    rational in that ratio only triggers a warning.
    """
    p_exact = None
    if isinstance(p, Fraction):
        _check_p(p)
        p_exact = p
        p = float(p)
    else:
        p = float(p)
        _check_p(p)
    q = 1.0 - p
    lp, lq = math.log(p), math.log1p(-p)
    H = -p * lp - q * lq
    H2 = p * lp * lp + q * lq * lq
    varX = p * q * (lp - lq) ** 2

    if arith_hint is not None:
        a, b = (int(v) for v in arith_hint)
        if a < 1 or b < 1 or math.gcd(a, b) != 1:
            raise ValueError(f"arith_hint must be coprime positive integers, got {arith_hint!r}")
        if abs(lp / lq - a / b) > HINT_TOLERANCE * max(1.0, a / b):
            raise HintMismatchError(
                f"ln p / ln q = {lp / lq!r} does not match {a}/{b} for p={p!r}"
            )
        arith = ArithmeticClass(a, b, -lp / a)
    elif p == 0.5:
        arith = ArithmeticClass(1, 1, math.log(2.0))
    else:
        arith = NON_ARITHMETIC
        guess = _looks_arithmetic(p)
        if guess is not None:
            warnings.warn(
                f"p={p!r} has ln p / ln q within {HINT_TOLERANCE} of "
                f"{guess[0]}/{guess[1]}; pass arith_hint to use lattice mode",
                stacklevel=2,
            )
    return SourceParams(p=p, q=q, H=H, H2=H2, varX=varX, arith=arith, p_exact=p_exact)


def solve_arithmetic_p(a: int, b: int) -> float:
    """Return the ``p`` in (0, 1) with ``ln p / ln q = a / b``.

    Equivalently the root of ``p**b = (1 - p)**a``; ``p > 1/2`` when
    ``a < b``.
    """
    a, b = int(a), int(b)
    if a < 1 or b < 1:
        raise ValueError("a and b must be positive integers")
    if math.gcd(a, b) != 1:
        raise ValueError(f"a={a} and b={b} are not coprime")
    if a == b:
        return 0.5

    def g(p):
        return b * math.log(p) - a * math.log1p(-p)

    # g is increasing; the root sits on the side of 1/2 fixed by a < b
    lo, hi = (0.5, math.nextafter(1.0, 0.0)) if a < b else (math.nextafter(0.0, 1.0), 0.5)
    p = brentq(g, lo, hi, xtol=1e-17, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(p)


def arithmetic_source(a: int, b: int) -> SourceParams:
    """Shorthand for ``new_source(solve_arithmetic_p(a, b), (a, b))``."""
    return new_source(solve_arithmetic_p(a, b), (a, b))


def _as_bit_list(alpha: Bits) -> list[int]:
    if isinstance(alpha, str):
        if alpha.strip("01"):
            raise ValueError(f"bit string may only contain 0 and 1: {alpha!r}")
        return [ch == "1" for ch in alpha]
    return [int(v) for v in alpha]


def prefix_probability(src: SourceParams, alpha: Bits) -> float:
    """Probability that a random string begins with ``alpha``."""
    bits = _as_bit_list(alpha)
    ones = sum(bits)
    return src.p**ones * src.q ** (len(bits) - ones)


def prefix_log_probability(src: SourceParams, alpha: Bits) -> float:
    """``ln P(alpha)``, i.e. minus the partial sum of the steps."""
    bits = _as_bit_list(alpha)
    ones = sum(bits)
    return -(ones * src.step_one + (len(bits) - ones) * src.step_zero)


# -- counter-addressable bit generator -------------------------------------


def _fmix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _u64(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype.kind == "O":
        arr = np.array([int(v) & _MASK64 for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)
    if arr.dtype.kind not in "iub":
        raise TypeError(f"expected integer values, got dtype {arr.dtype}")
    return arr.astype(np.uint64, copy=False)


def string_keys(seed, ids) -> np.ndarray:
    """Per-string stream state for ``(seed, id)`` pairs (broadcasting)."""
    s = np.uint64(int(seed) & _MASK64) if np.isscalar(seed) else _u64(seed)
    i = _u64(np.atleast_1d(ids))
    with np.errstate(over="ignore"):
        return _fmix(_fmix(s + _GOLDEN) + (i + np.uint64(1)) * _GOLDEN)


def _threshold(p: float) -> np.uint64:
    return np.uint64(int(round(p * (1 << 53))))


def letters_from_keys(keys: np.ndarray, ks, p: float) -> np.ndarray:
    """Letters ``k`` (1-based) of the strings with stream states ``keys``."""
    k = _u64(ks)
    with np.errstate(over="ignore"):
        u = _fmix(keys + k * _GOLDEN)
    return ((u >> _S11) < _threshold(p)).astype(np.uint8)


def derive_seed(base: int, index: int) -> int:
    """Independent-looking 64-bit seed for replicate ``index`` of ``base``."""
    key = string_keys(base, np.array([index], dtype=np.uint64))
    with np.errstate(over="ignore"):
        return int(_fmix(key ^ np.uint64(0x5DEECE66D))[0])


class StringHandle:
    """An infinite random bit string, extended on demand in 64-letter blocks.

    Letters are indexed from 1.  Distinct ``(seed, id)`` pairs give
    independent strings; the same pair always gives the same letters.
    """

    BLOCK = 64

    __slots__ = ("src", "seed", "id", "_key", "_buf")

    def __init__(self, src: SourceParams, seed: int, id: int):
        self.src = src
        self.seed = int(seed) & _MASK64
        self.id = int(id) & _MASK64
        self._key = string_keys(self.seed, np.array([self.id], dtype=np.uint64))
        self._buf = np.zeros(0, dtype=np.uint8)

    def __repr__(self) -> str:
        return f"StringHandle(p={self.src.p}, seed={self.seed}, id={self.id})"

    @property
    def key(self) -> np.uint64:
        return self._key[0]

    @property
    def materialized(self) -> np.ndarray:
        """Read-only view of the letters generated so far."""
        view = self._buf.view()
        view.flags.writeable = False
        return view

    def _extend(self, length: int) -> None:
        have = self._buf.size
        if length <= have:
            return
        want = -(-length // self.BLOCK) * self.BLOCK
        ks = np.arange(have + 1, want + 1, dtype=np.uint64)
        more = letters_from_keys(self._key, ks, self.src.p)
        self._buf = np.concatenate([self._buf, more])

    def prefix(self, length: int) -> np.ndarray:
        """The first ``length`` letters as a uint8 array."""
        if length < 0:
            raise ValueError("length must be non-negative")
        self._extend(length)
        return self._buf[:length].copy()

    def word(self, length: int) -> str:
        """The first ``length`` letters as a string of ``0``/``1``."""
        return "".join("1" if v else "0" for v in self.prefix(length))

    def bit(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"letters are indexed from 1, got k={k}")
        self._extend(k)
        return int(self._buf[k - 1])

    def __iter__(self) -> Iterable[int]:
        k = 1
        while True:
            yield self.bit(k)
            k += 1


def sample_string(src: SourceParams, seed: int, id: int) -> StringHandle:
    return StringHandle(src, seed, id)


def bit_at(handle: StringHandle, k: int) -> int:
    """Letter ``k`` (1-based) of ``handle``."""
    return handle.bit(k)
