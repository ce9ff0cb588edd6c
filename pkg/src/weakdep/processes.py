"""Bernoulli-shift process zoo.

Models evaluate X_k = g(eps_k, eps_{k-1}, ...) on innovation windows and
come with fast vectorized path / partial-sum engines:

* ``LinearModel`` — moving averages X_k = sum_j alpha_j eps_{k-j} with
  explicit, power-law, geometric or telescoping-difference coefficient
  schemes.
* ``HolderOfLinearModel`` — a Hoelder-continuous observable of a linear
  process, centered.
* ``DoublingModel`` — observables of the doubling map through its binary
  Bernoulli representation, iterated exactly in 64-bit integer registers
  (never by floating-point ``2x mod 1``, which erases one innovation bit
  per step).
* ``GLdWalkModel`` — the log-gain of a random rotation/diagonal matrix
  product acting on directions, quenched at a fixed start, centered by a
  reproducible Monte Carlo pre-pass.

``m_project`` builds the m-dependent approximation
X_{k,m} = E[X_k | eps_k .. eps_{k-m+1}] where it has a usable form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import zeta as hurwitz_zeta

from .errors import ModelMismatchError, PreconditionError
from .innovations import (
    SERIES_AUX,
    SERIES_BASE,
    InnovationLaw,
    InnovationWindow,
    get_law,
    law_values,
    raw_words,
)

__all__ = [
    "CoefficientScheme",
    "ExplicitScheme",
    "PowerLawScheme",
    "GeometricScheme",
    "DifferenceScheme",
    "identity_scheme",
    "LinearModel",
    "HolderOfLinearModel",
    "DoublingModel",
    "DoublingProjectedModel",
    "HolderProjectedModel",
    "GLdWalkModel",
    "evaluate",
    "sample_path",
    "partial_sums",
    "truncation_error",
    "m_project",
    "gl_center_profile",
]

# target element count for chunked replication loops
_CHUNK_ELEMS = 1 << 22

# reserved channels on the auxiliary series
_CH_CENTER = 0
_CH_TAIL = 16


# ---------------------------------------------------------------------------
# coefficient schemes
# ---------------------------------------------------------------------------

class CoefficientScheme:
    """Base class: a square-summable coefficient sequence alpha_0, alpha_1, ...

    ``coefficients`` is the stored (truncated) array of length ``length``;
    analytic totals and tail bounds account for everything beyond it.
    """

    length: int

    def _coefficients(self) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def coefficients(self) -> np.ndarray:
        c = np.asarray(self._coefficients(), dtype=np.float64)
        c.setflags(write=False)
        return c

    @cached_property
    def cumsum(self) -> np.ndarray:
        """C(t) = sum_{j<=t} alpha_j for t = 0..length-1."""
        c = np.cumsum(self.coefficients)
        c.setflags(write=False)
        return c

    def total_sum(self) -> float:
        """sum_{j>=0} alpha_j of the *untruncated* sequence (analytic)."""
        raise NotImplementedError

    def beyond_length_sumsq(self) -> float:
        """Upper bound on sum_{j>=length} alpha_j^2 (analytic)."""
        raise NotImplementedError

    def tail_sumsq(self, j0: int) -> float:
        """sum_{j>=j0} alpha_j^2: exact over the stored range plus the
        analytic beyond-truncation bound."""
        j0 = max(int(j0), 0)
        head = float(np.dot(self.coefficients[j0:], self.coefficients[j0:]))
        return head + self.beyond_length_sumsq()

    def truncate(self, m: int) -> "ExplicitScheme":
        """First-m-coefficients scheme (the linear m-projection)."""
        if m < 1:
            raise PreconditionError("truncation length must be >= 1")
        return ExplicitScheme(tuple(self.coefficients[:m]))

    @property
    def label(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class ExplicitScheme(CoefficientScheme):
    alpha: tuple

    def __post_init__(self):
        if len(self.alpha) == 0:
            raise PreconditionError("explicit scheme needs >= 1 coefficient")

    @property
    def length(self) -> int:
        return len(self.alpha)

    def _coefficients(self):
        return np.array(self.alpha, dtype=np.float64)

    def total_sum(self) -> float:
        return float(np.sum(self.coefficients))

    def beyond_length_sumsq(self) -> float:
        return 0.0


def identity_scheme() -> ExplicitScheme:
    return ExplicitScheme((1.0,))


@dataclass(frozen=True)
class PowerLawScheme(CoefficientScheme):
    """alpha_0 = 0, alpha_j = j^-a for j >= 1."""

    a: float
    length: int = 4096

    def __post_init__(self):
        if self.a <= 0.5:
            raise PreconditionError("power-law exponent must exceed 1/2")
        if self.length < 2:
            raise PreconditionError("length must be >= 2")

    def _coefficients(self):
        c = np.zeros(self.length)
        j = np.arange(1, self.length, dtype=np.float64)
        c[1:] = j ** (-self.a)
        return c

    def total_sum(self) -> float:
        if self.a <= 1.0:
            return float("inf")
        return float(hurwitz_zeta(self.a, 1))

    def beyond_length_sumsq(self) -> float:
        return float(hurwitz_zeta(2.0 * self.a, self.length))

    def analytic_cumsum(self, tmax: int) -> np.ndarray:
        """Untruncated partial sums C(t) = sum_{j<=t} j^-a, t = 0..tmax."""
        j = np.arange(tmax + 1, dtype=np.float64)
        terms = np.zeros(tmax + 1)
        terms[1:] = j[1:] ** (-self.a)
        return np.cumsum(terms)


@dataclass(frozen=True)
class GeometricScheme(CoefficientScheme):
    """alpha_j = rho^j."""

    rho: float
    length: int = 128

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise PreconditionError("geometric ratio must lie in (0, 1)")

    def _coefficients(self):
        return self.rho ** np.arange(self.length, dtype=np.float64)

    def total_sum(self) -> float:
        return 1.0 / (1.0 - self.rho)

    def beyond_length_sumsq(self) -> float:
        return self.rho ** (2 * self.length) / (1.0 - self.rho ** 2)


@dataclass(frozen=True)
class DifferenceScheme(CoefficientScheme):
    """Telescoping cancellation scheme: alpha_1 = a_1,
    alpha_j = a_j - a_{j-1}, with a_j = j^-beta ('power', beta in (0,1/2))
    or a_j = 1/log(j+1) ('log').  Partial sums telescope to C(t) = a_t and
    the full sum is 0, so the long-run variance degenerates.
    """

    kind: str = "power"
    beta: float = 0.25
    length: int = 4096

    def __post_init__(self):
        if self.kind not in ("power", "log"):
            raise PreconditionError("difference kind must be 'power' or 'log'")
        if self.kind == "power" and not 0.0 < self.beta < 0.5:
            raise PreconditionError("difference-scheme beta must be in (0, 1/2)")
        if self.length < 2:
            raise PreconditionError("length must be >= 2")

    def underlying(self, j) -> np.ndarray:
        """a_j of the cancellation construction (a_0 := 0)."""
        j = np.asarray(j, dtype=np.float64)
        # j = 0 hits 0**-beta inside np.where; the branch is discarded
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "power":
                out = np.where(j >= 1, j ** (-self.beta), 0.0)
            else:
                out = np.where(j >= 1, 1.0 / np.log(j + 1.0), 0.0)
        return out

    def _coefficients(self):
        a = self.underlying(np.arange(self.length))
        c = np.zeros(self.length)
        c[1:] = a[1:] - a[:-1]
        return c

    def total_sum(self) -> float:
        # partial sums are a_t -> 0
        return 0.0

    def beyond_length_sumsq(self) -> float:
        # |alpha_j| is decreasing, so sum_{j>=L} alpha_j^2
        #   <= |alpha_L| * sum_{j>=L} |alpha_j| = |alpha_L| * a_{L-1}
        a_prev = float(self.underlying(self.length - 1))
        a_last = float(self.underlying(self.length))
        return abs(a_last - a_prev) * a_prev


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _check_window(model, w: InnovationWindow):
    if w.depth < model.required_depth:
        raise PreconditionError(
            f"window depth {w.depth} < required depth {model.required_depth}")
    if w.law.kind != model.law.kind:
        raise ModelMismatchError(
            f"window law {w.law.kind!r} != model law {model.law.kind!r}")


@dataclass(frozen=True)
class LinearModel:
    """X_k = sum_j alpha_j eps_{k-j}."""

    scheme: CoefficientScheme
    law: InnovationLaw

    variant = "linear"

    def __post_init__(self):
        if self.law.kind == "raw-bit":
            raise ModelMismatchError(
                "raw-bit innovations are reserved for the doubling map; "
                "linear models need a centered unit-variance law")

    @property
    def required_depth(self) -> int:
        return self.scheme.length

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        """Linear readout on (..., J) arrays of newest-first innovations.
        J may be smaller than the scheme length; that is the depth-J
        truncated model (callers manage the truncation policy)."""
        J = values.shape[-1]
        return values @ self.scheme.coefficients[:J]


def _linear_core(model) -> LinearModel:
    return LinearModel(model.scheme, model.law)


_HOLDER_OBSERVABLES = ("cos-shift", "abs-center", "cube-clip")


def _holder_f(observable: str, c: float, beta: float, y: np.ndarray) -> np.ndarray:
    if observable == "cos-shift":
        return c * np.cos(y + 1.0)
    if observable == "abs-center":
        return c * np.abs(y) ** beta
    if observable == "cube-clip":
        return c * np.clip(y, -1.0, 1.0) ** 3
    raise ModelMismatchError(f"unknown observable {observable!r}")


# fixed seed for the internal centering pre-pass; deterministic across runs
_CENTER_SEED = 0x5EEDC0DE
_CENTER_REPS = 1 << 17


@dataclass(frozen=True)
class HolderOfLinearModel:
    """X_k = f(Y_k) - E f(Y_0) with Y the linear process for ``scheme``.

    ``beta``/``c`` are the Hoelder exponent and constant of f used by the
    truncation bound.  The centering offset is analytic for the
    Gaussian-law cos-shift and otherwise a fixed-seed Monte Carlo estimate.
    """

    scheme: CoefficientScheme
    law: InnovationLaw
    observable: str = "cos-shift"
    beta: float = 1.0
    c: float = 1.0

    variant = "holder"

    def __post_init__(self):
        if self.observable not in _HOLDER_OBSERVABLES:
            raise ModelMismatchError(
                f"observable must be one of {_HOLDER_OBSERVABLES}")
        if not 0.0 < self.beta <= 1.0:
            raise PreconditionError("Hoelder exponent must lie in (0, 1]")
        if self.law.kind == "raw-bit":
            raise ModelMismatchError(
                "raw-bit innovations are reserved for the doubling map")

    @property
    def required_depth(self) -> int:
        return self.scheme.length

    @cached_property
    def center(self) -> float:
        if (self.observable == "cos-shift"
                and self.law.kind == "standard-gaussian"):
            # Y_0 is exactly N(0, sum alpha_j^2)
            var = float(np.dot(self.scheme.coefficients,
                               self.scheme.coefficients))
            return float(self.c * np.cos(1.0) * np.exp(-var / 2.0))
        reps = np.arange(_CENTER_REPS)[:, None]
        times = -np.arange(self.scheme.length)
        eps = law_values(self.law, _CENTER_SEED, reps, SERIES_AUX, times,
                         channel=_CH_CENTER)
        y = eps @ self.scheme.coefficients
        return float(np.mean(_holder_f(self.observable, self.c, self.beta, y)))

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        J = values.shape[-1]
        y = values @ self.scheme.coefficients[:J]
        return _holder_f(self.observable, self.c, self.beta, y) - self.center


_DOUBLING_OBSERVABLES = ("cos2pi", "centered-x", "indicator-half")
_TWO63 = np.uint64(1) << np.uint64(63)


def _doubling_f_from_words(observable: str, w: np.ndarray) -> np.ndarray:
    """Observable of the doubling-map state held as a 64-bit register
    (u = w * 2^-64, newest bit at the MSB)."""
    if observable == "indicator-half":
        return np.where(w < _TWO63, 0.5, -0.5)
    u = w * 2.0 ** -64
    if observable == "cos2pi":
        return np.cos(2.0 * np.pi * u)
    if observable == "centered-x":
        return u - 0.5
    raise ModelMismatchError(f"unknown observable {observable!r}")


def _pack_bits(values: np.ndarray, nbits: int) -> np.ndarray:
    """Pack (..., J>=nbits) newest-first 0/1 values into integers with the
    newest bit at position nbits-1 (exact, no float rounding)."""
    bits = values[..., :nbits].astype(np.uint64)
    shifts = (np.uint64(nbits - 1) - np.arange(nbits, dtype=np.uint64))
    return (bits << shifts).sum(axis=-1, dtype=np.uint64)


@dataclass(frozen=True)
class DoublingModel:
    """X_k = f(T^k U) with Tx = 2x mod 1 through the binary representation
    T^k U = sum_{j>=0} 2^{-j-1} zeta_{k-j}, truncated at 64 bits."""

    observable: str = "cos2pi"
    depth: int = 64

    variant = "doubling"

    def __post_init__(self):
        if self.observable not in _DOUBLING_OBSERVABLES:
            raise ModelMismatchError(
                f"observable must be one of {_DOUBLING_OBSERVABLES}")
        if self.depth != 64:
            raise PreconditionError("doubling register depth is fixed at 64")

    @property
    def law(self) -> InnovationLaw:
        return get_law("raw-bit")

    @property
    def required_depth(self) -> int:
        return self.depth

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        w = _pack_bits(values, 64)
        return _doubling_f_from_words(self.observable, w)


@dataclass(frozen=True)
class DoublingProjectedModel:
    """E[f(T^k U) | top m bits]: the tail is uniform on [0, 2^-m), so the
    conditional mean of each canonical observable is in closed form."""

    observable: str
    m: int

    variant = "doubling-projected"

    def __post_init__(self):
        if self.observable not in _DOUBLING_OBSERVABLES:
            raise ModelMismatchError(
                f"observable must be one of {_DOUBLING_OBSERVABLES}")
        if not 1 <= self.m <= 64:
            raise PreconditionError("projection depth must be in 1..64")

    @property
    def law(self) -> InnovationLaw:
        return get_law("raw-bit")

    @property
    def required_depth(self) -> int:
        return self.m

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        m = self.m
        wm = _pack_bits(values, m)
        x = wm * 2.0 ** -m
        h = 2.0 ** -m
        if self.observable == "centered-x":
            return x + h / 2.0 - 0.5
        if self.observable == "cos2pi":
            return (np.sin(2 * np.pi * (x + h)) - np.sin(2 * np.pi * x)) \
                / (2 * np.pi * h)
        # indicator-half: x and 1/2 are multiples of 2^-m, so the cell
        # [x, x + 2^-m) never straddles 1/2
        return np.where(x + h <= 0.5, 0.5, -0.5)


@dataclass(frozen=True)
class HolderProjectedModel:
    """Nested-Monte-Carlo m-projection of HolderOfLinear: the conditional
    mean given the last m innovations is averaged over K fresh tail draws
    from a reserved stream, keyed by the window's (seed, rep, anchor)."""

    base: HolderOfLinearModel
    m: int
    K: int = 256

    variant = "holder-projected"

    def __post_init__(self):
        if self.m < 1 or self.K < 1:
            raise PreconditionError("m and K must be >= 1")

    @property
    def law(self) -> InnovationLaw:
        return self.base.law

    @property
    def required_depth(self) -> int:
        return self.m

    def evaluate_window(self, w: InnovationWindow) -> float:
        scheme = self.base.scheme
        L = scheme.length
        m = min(self.m, L)
        head = float(w.values[:m] @ scheme.coefficients[:m])
        if m == L:
            tail_y = np.zeros(self.K)
        else:
            times = w.anchor - np.arange(m, L)
            chans = (_CH_TAIL + np.arange(self.K))[:, None]
            tail_eps = law_values(self.law, w.seed, w.replication, SERIES_AUX,
                                  times, channel=chans)
            tail_y = tail_eps @ scheme.coefficients[m:]
        f = _holder_f(self.base.observable, self.base.c, self.base.beta,
                      head + tail_y)
        return float(np.mean(f)) - self.base.center


@dataclass(frozen=True)
class GLdWalkModel:
    """Left random walk on GL_d acting on directions: increments
    g = R(phi) diag(e^lam, e^-lam, 1, ..) with phi uniform on [0, 2pi) and
    lam uniform on [-lambda_max, lambda_max]; X_k = log||g_k Y_{k-1}|| minus
    a Monte Carlo centering profile, quenched at start direction e1."""

    d: int = 2
    lambda_max: float = 1.0
    burn_in: int = 256
    center_reps: int = 1 << 15

    variant = "gl-walk"

    def __post_init__(self):
        if self.d < 2:
            raise PreconditionError("dimension must be >= 2")
        if self.lambda_max < 0:
            raise PreconditionError("lambda_max must be >= 0")

    @property
    def law(self) -> InnovationLaw:
        # matrix entries are built from uniforms internally
        return get_law("centered-uniform")

    @property
    def required_depth(self) -> int:
        raise ModelMismatchError(
            "GL_d walk is not a fixed-depth Bernoulli shift; "
            "use sample_path/partial_sums")


# centering profiles, cached per (model, seed); dict ops are atomic under
# the GIL and values are deterministic, so racing writes are harmless
_GL_CENTER_CACHE: dict = {}


def _gl_draws(model: GLdWalkModel, seed, reps, k, series):
    """(phi_k, lambda_k) for the given replications at time k."""
    u_phi = (raw_words(seed, reps, series, k, channel=0)
             >> np.uint64(11)) * 2.0 ** -53
    u_lam = (raw_words(seed, reps, series, k, channel=1)
             >> np.uint64(11)) * 2.0 ** -53
    phi = 2.0 * np.pi * u_phi
    lam = model.lambda_max * (2.0 * u_lam - 1.0)
    return phi, lam


def _gl_step(model: GLdWalkModel, y: np.ndarray, phi, lam):
    """Apply g = R(phi) D(lam) to unit directions y (R, d); returns
    (log-gain, new unit direction).  Rotations preserve the norm, so the
    gain is ||D y||."""
    z = y.copy()
    z[:, 0] = y[:, 0] * np.exp(lam)
    z[:, 1] = y[:, 1] * np.exp(-lam)
    norm = np.sqrt(np.einsum("ij,ij->i", z, z))
    z /= norm[:, None]
    c, s = np.cos(phi), np.sin(phi)
    z0 = c * z[:, 0] - s * z[:, 1]
    z1 = s * z[:, 0] + c * z[:, 1]
    z[:, 0], z[:, 1] = z0, z1
    return np.log(norm), z


def _gl_start(model: GLdWalkModel, nreps: int) -> np.ndarray:
    y = np.zeros((nreps, model.d))
    y[:, 0] = 1.0
    return y


def _gl2_exact_mean(model: GLdWalkModel) -> float:
    """Exact stationary mean for d = 2.

    A uniform rotation makes the direction after every step uniform on the
    circle and independent of the past, so for k >= 2 the increment is
    log||D(lam) u|| with u uniform and lam independent:
    E X_k = E (1/2) log(e^{2 lam} cos^2 t + e^{-2 lam} sin^2 t),
    a smooth two-dimensional integral done by Gauss-Legendre quadrature.
    """
    from scipy.special import roots_legendre
    x, wq = roots_legendre(200)
    lam = model.lambda_max * x                     # uniform on [-L, L]
    t = 0.25 * np.pi * (x + 1.0)                   # uniform on [0, pi/2]
    c2 = np.cos(t) ** 2
    vals = 0.5 * np.log(np.exp(2.0 * lam)[:, None] * c2[None, :]
                        + np.exp(-2.0 * lam)[:, None]
                        * (1.0 - c2)[None, :])
    return float(wq @ vals @ wq / 4.0)


def gl_center_profile(model: GLdWalkModel, seed) -> np.ndarray:
    """E X_k for k = 1..burn_in plus one pooled stationary value appended
    at the end.  For d = 2 the profile is exact: the first increment is
    lam itself (mean 0) and every later increment has the stationary mean
    from the renewal argument in _gl2_exact_mean.  For d > 2 it is a
    Monte Carlo pre-pass from a reserved stream.  Cached per (model, seed).
    """
    key = (model, int(seed))
    cached = _GL_CENTER_CACHE.get(key)
    if cached is not None:
        return cached
    if model.d == 2:
        mu = np.full(model.burn_in + 1, _gl2_exact_mean(model))
        mu[0] = 0.0
        mu.setflags(write=False)
        _GL_CENTER_CACHE[key] = mu
        return mu
    reps = np.arange(model.center_reps)
    y = _gl_start(model, model.center_reps)
    mu = np.zeros(model.burn_in + 1)
    for k in range(1, model.burn_in + 1):
        phi, lam = _gl_draws(model, seed, reps, k, SERIES_AUX)
        gain, y = _gl_step(model, y, phi, lam)
        mu[k - 1] = gain.mean()
    mu[-1] = mu[model.burn_in // 2:model.burn_in].mean()
    mu.setflags(write=False)
    _GL_CENTER_CACHE[key] = mu
    return mu


def _gl_centering(model: GLdWalkModel, seed, n: int) -> np.ndarray:
    mu = gl_center_profile(model, seed)
    out = np.full(n, mu[-1])
    head = min(n, model.burn_in)
    out[:head] = mu[:head]
    return out


# ---------------------------------------------------------------------------
# generic operations
# ---------------------------------------------------------------------------

def evaluate(model, w: InnovationWindow) -> float:
    """X at the window's anchor time."""
    if isinstance(model, GLdWalkModel):
        raise ModelMismatchError("GL_d walk has no window evaluation")
    if isinstance(model, HolderProjectedModel):
        _check_window(model, w)
        return model.evaluate_window(w)
    _check_window(model, w)
    return float(model.evaluate_values(w.values[:model.required_depth]))


def _bn_weights(scheme: CoefficientScheme, n: int) -> tuple[np.ndarray, int]:
    """Beveridge-Nelson innovation weights for S_n = sum_t w_t eps_t.

    Returns (w, t0) with w[i] the weight of eps_{t0 + i}; weights of
    innovations older than t0 vanish for the truncated scheme.
    """
    L = scheme.length
    C = scheme.cumsum
    t = np.arange(2 - L, n + 1)

    def C_at(s):
        s = np.minimum(s, L - 1)
        out = np.where(s >= 0, C[np.clip(s, 0, L - 1)], 0.0)
        return out

    w = C_at(n - t) - C_at(-t)
    return w, 2 - L


def _rep_chunks(reps: np.ndarray, row_len: int):
    step = max(1, _CHUNK_ELEMS // max(row_len, 1))
    for i in range(0, len(reps), step):
        yield reps[i:i + step]


def partial_sums(model, seed, replications, n: int) -> np.ndarray:
    """S_n = X_1 + .. + X_n for each replication index; vectorized,
    deterministic, chunked with a fixed chunk size so reduction order (and
    hence every bit of the result) is independent of threading."""
    reps = np.asarray(replications, dtype=np.int64)
    if n < 1:
        raise PreconditionError("n must be >= 1")

    if isinstance(model, LinearModel):
        w, t0 = _bn_weights(model.scheme, n)
        times = np.arange(t0, n + 1)
        out = np.empty(len(reps))
        pos = 0
        for chunk in _rep_chunks(reps, len(times)):
            eps = law_values(model.law, seed, chunk[:, None], SERIES_BASE,
                             times)
            out[pos:pos + len(chunk)] = eps @ w
            pos += len(chunk)
        return out

    if isinstance(model, (HolderOfLinearModel, DoublingModel,
                          DoublingProjectedModel)):
        out = np.empty(len(reps))
        pos = 0
        for chunk in _rep_chunks(reps, n + model.required_depth):
            paths = _paths_matrix(model, seed, chunk, n)
            out[pos:pos + len(chunk)] = paths.sum(axis=1)
            pos += len(chunk)
        return out

    if isinstance(model, GLdWalkModel):
        mu_total = _gl_centering(model, seed, n).sum()
        out = np.empty(len(reps))
        pos = 0
        for chunk in _rep_chunks(reps, n * model.d):
            y = _gl_start(model, len(chunk))
            acc = np.zeros(len(chunk))
            for k in range(1, n + 1):
                phi, lam = _gl_draws(model, seed, chunk, k, SERIES_BASE)
                gain, y = _gl_step(model, y, phi, lam)
                acc += gain
            out[pos:pos + len(chunk)] = acc - mu_total
            pos += len(chunk)
        return out

    raise ModelMismatchError(f"unsupported model {type(model).__name__}")


def _paths_matrix(model, seed, reps: np.ndarray, n: int) -> np.ndarray:
    """(len(reps), n) matrix of X_1..X_n; helper for stationary models."""
    if isinstance(model, LinearModel) or isinstance(model, HolderOfLinearModel):
        L = model.scheme.length
        times = np.arange(2 - L, n + 1)
        eps = law_values(model.law, seed, reps[:, None], SERIES_BASE, times)
        alpha = model.scheme.coefficients
        if L == 1:
            y = eps * alpha[0]
        else:
            y = fftconvolve(eps, alpha[None, :], mode="valid", axes=1)
        if isinstance(model, LinearModel):
            return y
        return _holder_f(model.observable, model.c, model.beta, y) - model.center

    if isinstance(model, (DoublingModel, DoublingProjectedModel)):
        nbits = 64 if isinstance(model, DoublingModel) else model.m
        col = reps[:, None]
        # seed the register with the pre-sample bits
        init_times = 1 - nbits + np.arange(nbits)
        words = raw_words(seed, col, SERIES_BASE, init_times)
        bits = (words >> np.uint64(63)).astype(np.float64)
        w = _pack_bits(bits[:, ::-1], nbits)
        shift_in = np.uint64(nbits - 1)
        out = np.empty((len(reps), n))
        if isinstance(model, DoublingModel):
            f = lambda reg: _doubling_f_from_words(model.observable, reg)
        else:
            proj = model

            def f(reg):
                x = reg * 2.0 ** -nbits
                h = 2.0 ** -nbits
                if proj.observable == "centered-x":
                    return x + h / 2.0 - 0.5
                if proj.observable == "cos2pi":
                    return (np.sin(2 * np.pi * (x + h))
                            - np.sin(2 * np.pi * x)) / (2 * np.pi * h)
                return np.where(x + h <= 0.5, 0.5, -0.5)
        mask = (np.uint64(1) << np.uint64(nbits)) - np.uint64(1) \
            if nbits < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
        for k in range(1, n + 1):
            bit = raw_words(seed, reps, SERIES_BASE, k) >> np.uint64(63)
            w = ((w >> np.uint64(1)) | (bit << shift_in)) & mask
            out[:, k - 1] = f(w)
        return out

    raise ModelMismatchError(f"no path matrix for {type(model).__name__}")


def sample_path(model, seed, replication, n: int) -> np.ndarray:
    """X_1..X_n for one replication; entries equal window evaluations."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if isinstance(model, GLdWalkModel):
        rep = np.array([replication], dtype=np.int64)
        y = _gl_start(model, 1)
        path = np.empty(n)
        for k in range(1, n + 1):
            phi, lam = _gl_draws(model, seed, rep, k, SERIES_BASE)
            gain, y = _gl_step(model, y, phi, lam)
            path[k - 1] = gain[0]
        return path - _gl_centering(model, seed, n)
    if isinstance(model, HolderProjectedModel):
        from .innovations import draw_window
        out = np.empty(n)
        for k in range(1, n + 1):
            w = draw_window(model.law, seed, replication, k,
                            model.required_depth)
            out[k - 1] = model.evaluate_window(w)
        return out
    return _paths_matrix(model, seed, np.asarray([replication]), n)[0]


_DOUBLING_SCALE = {
    # L2-scale of f over one register step: Lipschitz constants where they
    # exist; indicator-half instead obeys w_2(f, t) <= sqrt(t)
    "cos2pi": ("lipschitz", 2.0 * np.pi),
    "centered-x": ("lipschitz", 1.0),
    "indicator-half": ("sqrt-modulus", 1.0),
}


def truncation_error(model, J: int) -> float:
    """Upper bound on ||X - X^{J-truncated}||_2."""
    if J < 0:
        raise PreconditionError("J must be >= 0")
    if isinstance(model, LinearModel):
        return float(np.sqrt(model.scheme.tail_sumsq(J)))
    if isinstance(model, HolderOfLinearModel):
        # ||f(Y) - f(Y_J)||_2 <= c E[|D|^{2 beta}]^{1/2} <= c (E D^2)^{beta/2}
        return float(model.c * model.scheme.tail_sumsq(J) ** (model.beta / 2))
    if isinstance(model, DoublingModel):
        kind, const = _DOUBLING_SCALE[model.observable]
        if kind == "lipschitz":
            return float(const * 2.0 ** -J)
        return float(const * np.sqrt(2.0 ** -J))
    raise ModelMismatchError(
        f"truncation_error unsupported for {type(model).__name__}")


def m_project(model, m: int, K: int = 256):
    """The m-dependent approximation X_{k,m} = E[X_k | eps_k..eps_{k-m+1}]."""
    if m < 1:
        raise PreconditionError("m must be >= 1")
    if isinstance(model, LinearModel):
        if m >= model.scheme.length:
            return model
        return LinearModel(model.scheme.truncate(m), model.law)
    if isinstance(model, DoublingModel):
        if m >= model.depth:
            return model
        return DoublingProjectedModel(model.observable, m)
    if isinstance(model, HolderOfLinearModel):
        if m >= model.scheme.length:
            return model
        return HolderProjectedModel(model, m, K)
    raise ModelMismatchError(
        f"m_project unsupported for {type(model).__name__}")
