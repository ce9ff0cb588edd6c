"""Counter-based innovation streams.

Every innovation is a pure function of an integer key
``(seed, replication, series, time, channel)``.  There is no generator
state: any window of any replication can be materialised independently,
which is what makes coupled (primed / starred) streams cheap and makes
experiment sharding embarrassingly parallel while staying bit-exact.

``series`` distinguishes the base stream (0), the primed stream (1) used
by coupling constructions, and auxiliary streams (>= 2) reserved for
centering pre-passes and nested Monte Carlo.  ``channel`` separates
multiple draws needed at the same time index (e.g. rotation angle and
log-gain of a matrix increment).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, ndtri

from .errors import PreconditionError

__all__ = [
    "SERIES_BASE",
    "SERIES_PRIME",
    "SERIES_AUX",
    "InnovationLaw",
    "InnovationWindow",
    "LAWS",
    "get_law",
    "raw_words",
    "uniform01",
    "law_values",
    "draw_window",
    "primed_window",
    "starred_window",
]

SERIES_BASE = 0
SERIES_PRIME = 1
SERIES_AUX = 2

# splitmix64 constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_C_REP = np.uint64(0xD1342543DE82EF95)
_C_SER = np.uint64(0xAF251AF3B0F025B5)


def _finalize(z: np.ndarray) -> np.ndarray:
    """splitmix64 avalanche finalizer, vectorized over uint64 arrays.

    uint64 arithmetic is modulo 2^64 by design; the overflow warning that
    numpy raises for scalar operands is suppressed.
    """
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _as_u64(x) -> np.ndarray:
    """Map (possibly negative) integers to uint64 via two's complement."""
    return np.asarray(x, dtype=np.int64).astype(np.uint64)


def _stream_state(seed, replication, series, channel=0) -> np.ndarray:
    """Premixed 64-bit state for a (seed, rep, series, channel) key prefix.

    Vectorized over ``replication``.
    """
    with np.errstate(over="ignore"):
        h = _finalize(_as_u64(seed) + _GAMMA)
        h = _finalize(h ^ (_as_u64(replication) * _C_REP + _GAMMA))
        sc = _as_u64(series) + (_as_u64(channel) << np.uint64(8))
        return _finalize(h ^ (sc * _C_SER + _GAMMA))


def raw_words(seed, replication, series, times, channel=0) -> np.ndarray:
    """Raw 64-bit words for the given key(s).

    ``replication`` and ``times`` may be scalars or arrays; they broadcast
    against each other (a (R, 1) replication column against a (T,) time row
    yields an (R, T) block).
    """
    state = _stream_state(seed, replication, series, channel)
    with np.errstate(over="ignore"):
        t = _as_u64(times)
        return _finalize(state ^ (t * _GAMMA))


def uniform01(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to floats in (0, 1) using the top 53 bits."""
    return (words >> np.uint64(11)) * 2.0**-53 + 2.0**-54


def _gaussian(words):
    return ndtri(uniform01(words))


def _rademacher(words):
    return 1.0 - 2.0 * (words >> np.uint64(63)).astype(np.float64)


_SQRT12 = np.sqrt(12.0)


def _centered_uniform(words):
    return (uniform01(words) - 0.5) * _SQRT12


def _raw_bit(words):
    return (words >> np.uint64(63)).astype(np.float64)


@dataclass(frozen=True)
class InnovationLaw:
    """A marginal law for innovation streams.

    All laws except ``raw-bit`` have mean 0 and variance 1; ``raw-bit`` is
    the fair Bernoulli bit used by the doubling-map models.
    """

    kind: str

    def sample(self, words: np.ndarray) -> np.ndarray:
        return _TRANSFORMS[self.kind](words)

    @property
    def mean(self) -> float:
        return 0.5 if self.kind == "raw-bit" else 0.0

    @property
    def variance(self) -> float:
        return 0.25 if self.kind == "raw-bit" else 1.0

    def abs_moment(self, p: float) -> float:
        """E |eps|^p, analytic."""
        if p <= 0:
            raise ValueError("p must be positive")
        if self.kind == "standard-gaussian":
            return float(np.exp(0.5 * p * np.log(2.0) + gammaln((p + 1) / 2.0)
                                - 0.5 * np.log(np.pi)))
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "centered-uniform":
            # |U| with U uniform on [-sqrt(3), sqrt(3)]
            return float(3.0 ** (p / 2.0) / (p + 1.0))
        if self.kind == "raw-bit":
            return 0.5
        raise ValueError(f"unknown law kind {self.kind!r}")

    def central_moment(self, k: int) -> float:
        """E (eps - E eps)^k, analytic, for integer k."""
        if self.kind == "standard-gaussian":
            if k % 2:
                return 0.0
            return float(np.prod(np.arange(1, k, 2, dtype=float))) if k else 1.0
        if self.kind == "rademacher":
            return 0.0 if k % 2 else 1.0
        if self.kind == "centered-uniform":
            if k % 2:
                return 0.0
            return float(3.0 ** (k / 2) / (k + 1.0))
        if self.kind == "raw-bit":
            return 0.0 if k % 2 else 0.5 ** k
        raise ValueError(f"unknown law kind {self.kind!r}")


_TRANSFORMS = {
    "standard-gaussian": _gaussian,
    "rademacher": _rademacher,
    "centered-uniform": _centered_uniform,
    "raw-bit": _raw_bit,
}

LAWS = {kind: InnovationLaw(kind) for kind in _TRANSFORMS}


def get_law(kind) -> InnovationLaw:
    if isinstance(kind, InnovationLaw):
        return kind
    try:
        return LAWS[kind]
    except KeyError:
        raise PreconditionError(
            f"unknown law {kind!r}; available: {sorted(LAWS)}") from None


def law_values(law, seed, replication, series, times, channel=0) -> np.ndarray:
    """Innovation values for the given key(s); broadcasts like raw_words."""
    return get_law(law).sample(raw_words(seed, replication, series, times, channel))


@dataclass(frozen=True)
class InnovationWindow:
    """The most recent ``depth`` innovations of one replication at time
    ``anchor``, newest first: values[j] is the innovation at time anchor - j.

    The key prefix is carried along so coupled variants can be derived.
    ``primed`` marks, per slot, whether the value was taken from the primed
    series instead of the base series.
    """

    seed: int
    replication: int
    law: InnovationLaw
    anchor: int
    values: np.ndarray
    primed: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.values)


def draw_window(law, seed, replication, anchor, depth,
                series=SERIES_BASE) -> InnovationWindow:
    """Materialise a depth-``depth`` window ending at time ``anchor``."""
    law = get_law(law)
    times = anchor - np.arange(depth)
    values = law_values(law, seed, replication, series, times)
    return InnovationWindow(seed=int(seed), replication=int(replication),
                            law=law, anchor=int(anchor), values=values,
                            primed=np.zeros(depth, dtype=bool))


def _prime_slots(window: InnovationWindow, slots: np.ndarray) -> InnovationWindow:
    times = window.anchor - slots
    fresh = law_values(window.law, window.seed, window.replication,
                       SERIES_PRIME, times)
    values = window.values.copy()
    values[slots] = fresh
    primed = window.primed.copy()
    primed[slots] = True
    return replace(window, values=values, primed=primed)


def primed_window(window: InnovationWindow, lag: int) -> InnovationWindow:
    """Replace only the innovation at time anchor - lag by its primed copy."""
    if not 0 <= lag < window.depth:
        raise PreconditionError(
            f"lag {lag} outside window of depth {window.depth}")
    return _prime_slots(window, np.array([lag]))


def starred_window(window: InnovationWindow, lag: int) -> InnovationWindow:
    """Replace the innovations at times <= anchor - lag by primed copies."""
    if not 0 <= lag < window.depth:
        raise PreconditionError(
            f"lag {lag} outside window of depth {window.depth}")
    return _prime_slots(window, np.arange(lag, window.depth))
