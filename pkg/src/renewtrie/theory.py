"""Closed-form asymptotic predictors and the special functions behind them.

Every predictor returns a :class:`Prediction` whose ``value`` splits into a
``smooth`` part and a d-periodic ``oscillation`` that is present only for
lattice (arithmetic) sources.  The o(1) remainders of the expansions are
dropped; ``regime`` records which expansion was used so that callers can
choose tolerances.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from renewtrie.source import SourceParams

__all__ = [
    "EULER_GAMMA",
    "Prediction",
    "FourierOscillation",
    "complex_gamma",
    "normal_phi",
    "normal_Phi",
    "normal_Psi",
    "var_min_normal",
    "frac_expectation_gumbel",
    "key_renewal_psi",
    "trie_g",
    "predict_depth",
    "depth_oscillation",
    "predict_imbalance",
    "predict_trie_size",
    "trie_size_oscillation",
    "trie_size_lattice_psi",
    "BTrieConstants",
    "btrie_constants",
    "predict_btrie_occupancy",
    "predict_btrie_internal",
    "patricia_saving",
    "patricia_saving_coefficients",
    "patricia_internal_coefficients",
    "predict_patricia_depth",
    "InsertPrediction",
    "predict_insert",
    "KhodakPrediction",
    "predict_khodak",
    "TunstallPrediction",
    "psi_tunstall",
    "predict_tunstall",
    "WalkPrediction",
    "predict_stopped_walk",
]

EULER_GAMMA = 0.57721566490153286

FOURIER_CUTOFF = 1e-18
FOURIER_MAX_TERMS = 100_000
LATTICE_CUTOFF = 1e-15
FRAC_SNAP = 1e-9


@dataclass(frozen=True)
class Prediction:
    value: float
    smooth: float
    oscillation: float
    regime: str
    variance: float | None = None
    extra: dict = field(default_factory=dict, compare=False)


# -- special functions -------------------------------------------------------


def complex_gamma(z) -> complex:
    """Gamma at a complex argument, through the principal log-gamma.

    Working in the log domain keeps tiny values such as ``|Gamma(1 + 200i)|``
    (around ``1e-134``) representable and accurate.
    """
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise ValueError(f"Gamma has a pole at {z.real:g}")
    return complex(np.exp(special.loggamma(z)))


def normal_phi(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


def normal_Phi(x):
    return special.ndtr(x)


def normal_Psi(x):
    """``Psi(x) = x Phi(x) + phi(x)``, the integral of Phi up to ``x``."""
    return x * normal_Phi(x) + normal_phi(x)


def var_min_normal(c: float) -> float:
    """``Var(min(Z, c))`` for standard normal ``Z``.

    ``E min(Z,c) = -Psi(-c)`` and
    ``E min(Z,c)^2 = Phi(c) - c phi(c) + c^2 Phi(-c)``.
    """
    m1 = -normal_Psi(-c)
    m2 = normal_Phi(c) - c * normal_phi(c) + c * c * normal_Phi(-c)
    return float(max(m2 - m1 * m1, 0.0))


# -- periodic functions -------------------------------------------------------


@dataclass(frozen=True)
class FourierOscillation:
    """Real d-periodic function ``t -> sum_m coeffs[m] exp(2 pi i m t / d)``.

    Only ``m >= 1`` is stored; the ``-m`` coefficient is the conjugate and
    the mean (``m = 0``) term is excluded, so an oscillation has average 0.
    """

    d: float
    coeffs: tuple[complex, ...]

    @classmethod
    def from_coefficients(cls, d: float, coef: Callable[[int], complex]) -> "FourierOscillation":
        out = []
        for m in range(1, FOURIER_MAX_TERMS + 1):
            c = complex(coef(m))
            if abs(c) < FOURIER_CUTOFF:
                break
            out.append(c)
        else:
            raise ArithmeticError(f"Fourier series with period {d} did not reach {FOURIER_CUTOFF}")
        return cls(d, tuple(out))

    @property
    def k_max(self) -> int:
        return len(self.coeffs)

    def complex_value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.zeros(t.shape, dtype=complex)
        for m, c in enumerate(self.coeffs, start=1):
            w = np.exp(2j * math.pi * m * t / self.d)
            total += c * w + np.conj(c) / w
        return total

    def __call__(self, t):
        v = self.complex_value(t).real
        return float(v) if np.ndim(v) == 0 else v

    def amplitude_bound(self) -> float:
        return 2.0 * sum(abs(c) for c in self.coeffs)


ZERO_OSCILLATION = FourierOscillation(1.0, ())


def _frac(x: float) -> float:
    """Fractional part, snapping values within ``FRAC_SNAP`` of 1 to 0."""
    f = x - math.floor(x)
    return 0.0 if f > 1 - FRAC_SNAP else f


def frac_expectation_gumbel(d: float, u: float) -> float:
    """``E frac((u - X0) / d)`` with ``-X0`` standard Gumbel.

    The characteristic function of ``-X0/d`` at ``2 pi n`` is
    ``Gamma(1 - 2 pi i n / d)``, which makes the Fourier series explicit.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    total = 0.0
    for n in range(1, FOURIER_MAX_TERMS + 1):
        term = complex_gamma(1 - 2j * math.pi * n / d) / (2j * math.pi * n) * cmath.exp(2j * math.pi * n * u / d)
        total += 2 * term.real
        if abs(term) < FOURIER_CUTOFF:
            break
    return 0.5 - total


def key_renewal_psi(g: Callable[[float], float], d: float, t: float) -> float:
    """Lattice sum ``d * sum_k g(k d - t)`` over all integers ``k``.

    The sum runs outwards from ``k = round(t/d)`` in both directions and
    stops once five consecutive terms are below ``1e-15``.
    """
    k0 = round(t / d)
    total = d * g(k0 * d - t)
    for step in (1, -1):
        small = 0
        k = k0
        for _ in range(1_000_000):
            k += step
            v = d * g(k * d - t)
            total += v
            small = small + 1 if abs(v) < LATTICE_CUTOFF else 0
            if small >= 5:
                break
        else:
            raise ArithmeticError("lattice sum did not converge")
    return total


def trie_g(t: float, b: int = 1) -> float:
    """``e^t f(e^-t)`` with ``f(x) = P(Poisson(x) >= b + 1)``."""
    if t < -700:
        return 0.0
    return math.exp(t) * float(special.gammainc(b + 1, math.exp(-t)))


# -- depth and imbalance -------------------------------------------------------


def depth_oscillation(src: SourceParams) -> FourierOscillation:
    if not src.arith.is_arithmetic:
        return ZERO_OSCILLATION
    d, H = src.arith.d, src.H
    return FourierOscillation.from_coefficients(d, lambda k: -complex_gamma(-2j * math.pi * k / d) / H)


def predict_depth(src: SourceParams, n) -> Prediction:
    """Mean, variance and normal-limit parameters of the depth ``D_n``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    H, H2 = src.H, src.H2
    ln = math.log(n)
    smooth = ln / H + H2 / (2 * H * H) + EULER_GAMMA / H
    osc = depth_oscillation(src)(ln) if src.arith.is_arithmetic else 0.0
    var = src.varX / H**3 * ln
    return Prediction(
        value=smooth + osc,
        smooth=smooth,
        oscillation=osc,
        regime="depth/" + ("arithmetic" if src.arith.is_arithmetic else "non-arithmetic"),
        variance=var,
        extra={"clt_mean": ln / H, "clt_var": var, "var_slope": src.varX / H**3},
    )


def predict_imbalance(src: SourceParams, n) -> Prediction:
    """Normal-limit mean and variance of the imbalance ``Delta_n``.

    ``extra["wald_mean"]`` is ``(p - q) E D_n``, which keeps the O(1)
    terms the leading-order mean drops.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    H, p, q = src.H, src.p, src.q
    ln = math.log(n)
    mean = (p - q) / H * ln
    var = p * q * math.log(p * q) ** 2 / H**3 * ln
    return Prediction(
        value=mean,
        smooth=mean,
        oscillation=0.0,
        regime="imbalance/clt",
        variance=var,
        extra={"mean_slope": (p - q) / H, "var_slope": var / ln, "wald_mean": (p - q) * predict_depth(src, n).value},
    )


# -- trie size and b-tries -------------------------------------------------------


def trie_size_oscillation(src: SourceParams) -> FourierOscillation:
    """``psi_trie``; the size oscillation itself is this divided by ``H``."""
    if not src.arith.is_arithmetic:
        return ZERO_OSCILLATION
    d = src.arith.d
    return FourierOscillation.from_coefficients(
        d, lambda k: complex_gamma(1 - 2j * math.pi * k / d) / (1 + 2j * math.pi * k / d)
    )


def trie_size_lattice_psi(d: float, t: float) -> float:
    """``psi_trie(t)`` evaluated as a lattice sum (the g-integral is 1)."""
    return key_renewal_psi(trie_g, d, t) - 1.0


def predict_trie_size(src: SourceParams, n) -> Prediction:
    """``E Y_n / n``, internal nodes per string."""
    if n < 2:
        raise ValueError("n must be at least 2")
    smooth = 1.0 / src.H
    osc = trie_size_oscillation(src)(math.log(n)) / src.H if src.arith.is_arithmetic else 0.0
    return Prediction(smooth + osc, smooth, osc, "trie-size/" + _mode(src))


def _mode(src: SourceParams) -> str:
    return "arithmetic" if src.arith.is_arithmetic else "non-arithmetic"


@dataclass(frozen=True)
class BTrieConstants:
    b: int
    c_closed: tuple[float, ...]
    c_series: tuple[float, ...]
    H: float

    @property
    def c(self) -> tuple[float, ...]:
        return self.c_closed

    @property
    def pi(self) -> tuple[float, ...]:
        return tuple(c / self.H for c in self.c_closed)

    def max_disagreement(self) -> float:
        return max(abs(a - b) for a, b in zip(self.c_closed, self.c_series))


def _pair(p, q, j, k):
    return p**j * q**k + q**j * p**k


def btrie_constants(src: SourceParams, b: int) -> BTrieConstants:
    """Limits ``c_j`` (and ``pi_j = c_j / H``) for ``E Z_j / n`` in a b-trie.

    Computed twice: from the finite closed form and from the tail series.
    """
    if b < 1:
        raise ValueError("b must be at least 1")
    p, q, H = src.p, src.q, src.H
    closed = []
    series = []
    for j in range(1, b + 1):
        if j == 1:
            c = H - sum(_pair(p, q, 1, k) / k for k in range(1, b))
        else:
            c = 1.0 / (j * (j - 1)) - sum(
                math.factorial(j + k - 2) / (math.factorial(j) * math.factorial(k)) * _pair(p, q, j, k)
                for k in range(0, b - j + 1)
            )
        closed.append(c)
        k = b - j + 1
        coef = math.exp(math.lgamma(j + k - 1) - math.lgamma(j + 1) - math.lgamma(k + 1))
        total = 0.0
        while True:
            term = coef * _pair(p, q, j, k)
            total += term
            if term < 1e-18:
                break
            coef *= (j + k - 1) / (k + 1)
            k += 1
        series.append(total)
    return BTrieConstants(b, tuple(closed), tuple(series), H)


def btrie_ghat(src: SourceParams, b: int, j: int, s: float) -> complex:
    """Transform ``int f_j(x) x^(-2+is) dx`` of the occupancy kernel (s != 0 if j = 1)."""
    p, q = src.p, src.q
    v = complex_gamma(j - 1 + 1j * s) / math.factorial(j) * (p ** (1 - 1j * s) + q ** (1 - 1j * s))
    for k in range(0, b - j + 1):
        v -= complex_gamma(j + k - 1 + 1j * s) / (math.factorial(j) * math.factorial(k)) * _pair(p, q, j, k)
    return v


def predict_btrie_occupancy(src: SourceParams, b: int, n, j: int) -> Prediction:
    """``E Z_j / n`` for a b-trie, ``1 <= j <= b``."""
    if not 1 <= j <= b:
        raise ValueError("need 1 <= j <= b")
    smooth = btrie_constants(src, b).pi[j - 1]
    osc = 0.0
    if src.arith.is_arithmetic:
        d = src.arith.d
        f = FourierOscillation.from_coefficients(d, lambda k: btrie_ghat(src, b, j, -2 * math.pi * k / d) / src.H)
        osc = f(math.log(n))
    return Prediction(smooth + osc, smooth, osc, f"btrie-occupancy/{_mode(src)}")


def predict_btrie_internal(src: SourceParams, b: int, n) -> Prediction:
    """Internal nodes per string in a b-trie, ``1/(H b)`` plus oscillation."""
    smooth = 1.0 / (src.H * b)
    osc = 0.0
    if src.arith.is_arithmetic:
        d = src.arith.d
        fb = math.factorial(b)
        f = FourierOscillation.from_coefficients(
            d, lambda k: complex_gamma(b - 2j * math.pi * k / d) / (1 + 2j * math.pi * k / d) / fb / src.H
        )
        osc = f(math.log(n))
    return Prediction(smooth + osc, smooth, osc, f"btrie-internal/{_mode(src)}")


# -- Patricia -----------------------------------------------------------------------


def patricia_saving(src: SourceParams) -> Prediction:
    """Expected depth saved by path compression; no oscillation in any mode."""
    p, q = src.p, src.q
    v = (-q * math.log(p) - p * math.log(q)) / src.H
    return Prediction(v, v, 0.0, "patricia-saving")


def _lattice_freqs(src: SourceParams, kmax: int):
    if not src.arith.is_arithmetic:
        raise ValueError("Fourier coefficients are only defined for lattice sources")
    d = src.arith.d
    return [-2 * math.pi * m / d for m in range(1, kmax + 1)]


def patricia_saving_coefficients(src: SourceParams, kmax: int = 8) -> list[complex]:
    """Fourier coefficients ``m = 1..kmax`` of the saving; all vanish."""
    p, q = src.p, src.q
    out = []
    for s in _lattice_freqs(src, kmax):
        g = complex_gamma(1j * s)
        out.append(g * (q * (p ** (-1j * s) - 1) + p * (q ** (-1j * s) - 1)))
    return out


def patricia_internal_coefficients(src: SourceParams, kmax: int = 8) -> list[complex]:
    """Fourier coefficients of the Patricia internal-node count; all vanish."""
    p, q = src.p, src.q
    return [
        (1 - p ** (1 - 1j * s) - q ** (1 - 1j * s)) * complex_gamma(-1 + 1j * s)
        for s in _lattice_freqs(src, kmax)
    ]


def predict_patricia_depth(src: SourceParams, n) -> Prediction:
    base = predict_depth(src, n)
    saving = patricia_saving(src).value
    return Prediction(
        base.value - saving,
        base.smooth - saving,
        base.oscillation,
        "patricia-depth/" + _mode(src),
        variance=base.variance,
    )


# -- insertion -------------------------------------------------------------------


@dataclass(frozen=True)
class InsertPrediction:
    p0: float
    pj: tuple[float, ...]  # pj[j-1] = P(N = j)
    mean: float
    oscillation: float
    regime: str

    def pmf(self, j: int) -> float:
        return self.p0 if j == 0 else self.pj[j - 1]

    def as_prediction(self) -> Prediction:
        return Prediction(self.mean, self.mean - self.oscillation, self.oscillation, self.regime)


def insert_oscillation(src: SourceParams) -> FourierOscillation:
    if not src.arith.is_arithmetic:
        return ZERO_OSCILLATION
    d, c = src.arith.d, 2 * src.p * src.q / src.H
    return FourierOscillation.from_coefficients(d, lambda k: c * complex_gamma(1 - 2j * math.pi * k / d))


def predict_insert(src: SourceParams, n, j_max: int = 60) -> InsertPrediction:
    """Law of the number ``N`` of internal nodes created by one insertion."""
    pq2 = 2 * src.p * src.q
    psi = insert_oscillation(src)(math.log(n)) if src.arith.is_arithmetic else 0.0
    hit = pq2 / src.H + psi
    pj = tuple(hit * pq2 * (1 - pq2) ** (j - 1) for j in range(1, j_max + 1))
    mean = 1 / src.H + psi / pq2
    return InsertPrediction(1 - hit, pj, mean, psi / pq2, "insert/" + _mode(src))


# -- codes ----------------------------------------------------------------------------


@dataclass(frozen=True)
class KhodakPrediction:
    M_over_R: Prediction
    M: float
    mean_len: Prediction
    var_len: float


def predict_khodak(src: SourceParams, R) -> KhodakPrediction:
    H, H2 = src.H, src.H2
    lr = math.log(R)
    smooth_ratio = 1 / H
    smooth_len = lr / H + H2 / (2 * H * H)
    if src.arith.is_arithmetic:
        d = src.arith.d
        fr = _frac(lr / d)
        ratio = d / (1 - math.exp(-d)) * math.exp(-d * fr) / H
        osc_len = d / H * (0.5 - fr)
    else:
        ratio, osc_len = smooth_ratio, 0.0
    mode = _mode(src)
    return KhodakPrediction(
        M_over_R=Prediction(ratio, smooth_ratio, ratio - smooth_ratio, "khodak-size/" + mode),
        M=ratio * R,
        mean_len=Prediction(smooth_len + osc_len, smooth_len, osc_len, "khodak-length/" + mode,
                            variance=src.varX / H**3 * lr),
        var_len=src.varX / H**3 * lr,
    )


def psi_tunstall(d: float, x):
    """``(e^(dx) - 1)/(e^d - 1) - x``; convex, zero at 0 and 1."""
    return np.expm1(np.multiply(d, x)) / math.expm1(d) - x


@dataclass(frozen=True)
class TunstallPrediction:
    mean_len: Prediction
    rate: float
    delta: float


def predict_tunstall(src: SourceParams, M) -> TunstallPrediction:
    """Mean phrase length and the corresponding compression rate."""
    if M < 2:
        raise ValueError("M must be at least 2")
    H, H2 = src.H, src.H2
    lm = math.log(M)
    smooth = lm / H + math.log(H) / H + H2 / (2 * H * H)
    delta = 0.0
    osc = 0.0
    if src.arith.is_arithmetic:
        d = src.arith.d
        const = math.log(math.sinh(d / 2) / (d / 2))
        x = _frac((lm + math.log(H * (1 - math.exp(-d)) / d)) / d)
        wave = d * float(psi_tunstall(d, x))
        delta = const + wave
        smooth += const / H
        osc = wave / H
    rate = H / math.log(2) * (1 - (math.log(H) + H2 / (2 * H) + delta) / lm)
    mean = Prediction(smooth + osc, smooth, osc, "tunstall-length/" + _mode(src),
                      variance=src.varX / H**3 * lm)
    return TunstallPrediction(mean, rate, delta)


# -- stopped walk ---------------------------------------------------------------------


@dataclass(frozen=True)
class WalkPrediction:
    regime: str  # "i" (normal), "ii" (degenerate at K+1) or "iii" (truncated normal)
    mean: float
    variance: float
    mean_first_order: float
    mean_first_order_alt: float
    a: float
    sigma_hat: float
    variance_is_little_o: bool
    refined: Prediction | None


def predict_stopped_walk(src: SourceParams, K: int, V: float) -> WalkPrediction:
    """Exit time of ``(K+1) ^ nu(V ln 2)``.

    The regime is picked from ``a = (K - V2/H)/sqrt(V2)``: ``a >= ln V2`` is
    the normal regime, ``a <= -ln V2`` the degenerate one, anything in
    between the truncated-normal transition.
    """
    if src.p == 0.5:
        raise ValueError("the stopped walk is deterministic for p = 1/2")
    if K < 1 or not V > 0:
        raise ValueError("need K >= 1 and V > 0")
    H, H2 = src.H, src.H2
    V2 = V * math.log(2)
    sh = math.sqrt((H2 - H * H) / H**3)
    scale = sh * math.sqrt(V2)
    m1 = V2 / H - scale * float(normal_Psi((V2 / H - K) / scale))
    m2 = K - scale * float(normal_Psi((K - V2 / H) / scale))
    a = (K - V2 / H) / math.sqrt(V2)
    gate = math.log(V2) if V2 > 1 else 0.0
    refined = None
    little_o = False
    if a >= gate:
        regime = "i"
        smooth = V2 / H + H2 / (2 * H * H)
        osc = src.arith.d / H * (0.5 - _frac(V2 / src.arith.d)) if src.arith.is_arithmetic else 0.0
        refined = Prediction(smooth + osc, smooth, osc, "walk/i/" + _mode(src))
        var = sh * sh * V2
        mean = refined.value
    elif a <= -gate:
        regime = "ii"
        refined = Prediction(K + 1.0, K + 1.0, 0.0, "walk/ii")
        var = 0.0
        little_o = True
        mean = refined.value
    else:
        regime = "iii"
        var = sh * sh * V2 * var_min_normal(a / sh)
        mean = m1
    return WalkPrediction(regime, mean, var, m1, m2, a, sh, little_o, refined)
