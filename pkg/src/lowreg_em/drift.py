"""Separable drift fields b(t, x) = A * g(t) * h(x), applied component-wise.

The spatial factor h is bounded and Hölder continuous, the temporal factor g is
either constant or a power t^-beta. Separability gives closed forms for the
time integrals of g and for the control

    w(s, t) = int_s^t ||b(r)||_alpha^q dr = (A ||h||_alpha)^q int_s^t g(r)^q dr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DomainError, InvalidSpecError, NonIntegrableError

SPACE_KINDS = ("zero", "constant", "smooth", "capped_power", "weierstrass", "linear")
TIME_KINDS = ("one", "power")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_SQRT2 = math.sqrt(2.0)
_DYADIC_DEPTH = 31  # dyadic separations 2R * 2^-k, k = 0..30

DEFAULT_SEMINORM_PAIRS = 100_000
_REFINE_TOP = 16


@dataclass(frozen=True)
class SpaceProfile:
    """Spatial factor h; evaluated as ``base(x + shift)``.

    Use the classmethod constructors rather than filling fields by hand.
    ``exponent`` is the Hölder exponent of capped_power/weierstrass kinds.
    """

    kind: str
    level: float = 0.0
    wavenumber: float = 1.0
    exponent: float = 1.0
    cap: float = 1.0
    base: int = 2
    terms: int = 12
    slope: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise InvalidSpecError(f"unknown space profile kind {self.kind!r}")
        if self.kind == "capped_power":
            if not 0.0 < self.exponent <= 1.0:
                raise InvalidSpecError("capped_power exponent must lie in (0, 1]")
            if self.cap <= 0.0:
                raise InvalidSpecError("capped_power cap must be positive")
        if self.kind == "weierstrass":
            if int(self.base) != self.base or self.base < 2:
                raise InvalidSpecError("weierstrass base must be an integer >= 2")
            if not 0.0 < self.exponent < 1.0:
                raise InvalidSpecError("weierstrass exponent must lie in (0, 1)")
            if self.terms < 1:
                raise InvalidSpecError("weierstrass needs at least one term")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, level):
        return cls("constant", level=float(level))

    @classmethod
    def smooth(cls, wavenumber=1.0, shift=0.0):
        """h(x) = sin(k (x + shift))."""
        return cls("smooth", wavenumber=float(wavenumber), shift=float(shift))

    @classmethod
    def capped_power(cls, exponent, cap=1.0, shift=0.0):
        """h(x) = min(|x + shift|, cap)^exponent."""
        return cls("capped_power", exponent=float(exponent), cap=float(cap), shift=float(shift))

    @classmethod
    def weierstrass(cls, exponent, base=2, terms=12, shift=0.0):
        """h(x) = sum_{j=0..terms} base^(-j exponent) cos(base^j (x + shift))."""
        return cls(
            "weierstrass", exponent=float(exponent), base=int(base), terms=int(terms), shift=float(shift)
        )

    @classmethod
    def linear(cls, slope=1.0):
        """h(x) = slope * x. Unbounded; only meant for diagnostics with known moments."""
        return cls("linear", slope=float(slope))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        kind = self.kind
        if kind == "zero":
            return np.zeros_like(x)
        if kind == "constant":
            return np.full_like(x, self.level)
        if kind == "linear":
            return self.slope * x
        y = x + self.shift if self.shift else x
        if kind == "smooth":
            return np.sin(self.wavenumber * y)
        if kind == "capped_power":
            return np.minimum(np.abs(y), self.cap) ** self.exponent
        freqs, coeffs = _weierstrass_tables(self.base, self.exponent, self.terms)
        return np.cos(y[..., None] * freqs) @ coeffs

    def sup_bound(self):
        """Explicit bound on sup_x |h(x)|."""
        kind = self.kind
        if kind == "zero":
            return 0.0
        if kind == "constant":
            return abs(self.level)
        if kind == "smooth":
            return 1.0
        if kind == "capped_power":
            return self.cap ** self.exponent
        if kind == "weierstrass":
            return float(_weierstrass_tables(self.base, self.exponent, self.terms)[1].sum())
        return 0.0 if self.slope == 0.0 else math.inf

    def is_state_independent(self):
        return self.kind in ("zero", "constant")

    def holder_seminorm(self, alpha):
        """[h]_alpha: exact where a closed form exists, else the pair-search estimate."""
        kind = self.kind
        if kind in ("zero", "constant"):
            return 0.0
        if kind == "linear":
            return 0.0 if self.slope == 0.0 else math.inf
        if kind == "capped_power":
            if alpha > self.exponent:
                return math.inf
            # min(|x|, R)^e is e-Hölder with constant 1, so alpha-Hölder (alpha <= e) with
            # constant sup over |x-y| <= R of |x-y|^(e-alpha), attained against the origin.
            return self.cap ** (self.exponent - alpha)
        if kind == "smooth":
            return _sine_seminorm(self.wavenumber, alpha)
        return _cached_estimate(self, alpha)

    def holder_norm(self, alpha):
        """||h||_alpha = sup|h| + [h]_alpha."""
        return self.sup_bound() + self.holder_seminorm(alpha)

    def to_params(self):
        kind = self.kind
        if kind == "constant":
            return {"level": self.level}
        if kind == "smooth":
            return {"wavenumber": self.wavenumber}
        if kind == "capped_power":
            return {"exponent": self.exponent, "cap": self.cap}
        if kind == "weierstrass":
            return {"exponent": self.exponent, "base": self.base, "terms": self.terms}
        if kind == "linear":
            return {"slope": self.slope}
        return {}

    @classmethod
    def from_params(cls, kind, params=None, shift=0.0):
        params = dict(params or {})
        builders = {
            "zero": lambda: cls.zero(),
            "constant": lambda: cls.constant(**params),
            "smooth": lambda: cls.smooth(shift=shift, **params),
            "capped_power": lambda: cls.capped_power(shift=shift, **params),
            "weierstrass": lambda: cls.weierstrass(shift=shift, **params),
            "linear": lambda: cls.linear(**params),
        }
        if kind not in builders:
            raise InvalidSpecError(f"unknown space profile kind {kind!r}")
        try:
            return builders[kind]()
        except TypeError as exc:
            raise InvalidSpecError(f"bad params for {kind}: {exc}") from None


@lru_cache(maxsize=64)
def _weierstrass_tables(base, exponent, terms):
    j = np.arange(terms + 1, dtype=float)
    freqs = float(base) ** j
    coeffs = float(base) ** (-j * exponent)
    freqs.setflags(write=False)
    coeffs.setflags(write=False)
    return freqs, coeffs


@lru_cache(maxsize=64)
def _cached_estimate(profile, alpha):
    return holder_seminorm_estimate(profile, alpha, math.pi, DEFAULT_SEMINORM_PAIRS)


@lru_cache(maxsize=64)
def _sine_seminorm(k, alpha):
    if k == 0.0:
        return 0.0
    k = abs(k)
    if alpha >= 1.0:
        return k
    # |sin(kx) - sin(ky)| <= 2|sin(k d / 2)| with equality for suitable x; beyond d = pi/k the
    # numerator cannot grow while the denominator does.
    res = minimize_scalar(
        lambda d: -2.0 * math.sin(k * d / 2.0) / d ** alpha,
        bounds=(1e-12, math.pi / k),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(max(-res.fun, 2.0 * (k / math.pi) ** alpha))


@dataclass(frozen=True)
class TimeProfile:
    """Temporal factor g: ``one`` (g = 1) or ``power`` (g(t) = t^-beta)."""

    kind: str = "one"
    beta: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        if self.kind not in TIME_KINDS:
            raise InvalidSpecError(f"unknown time profile kind {self.kind!r}")
        if self.horizon <= 0.0:
            raise InvalidSpecError("horizon must be positive")
        if self.kind == "power" and self.beta < 0.0:
            raise InvalidSpecError("power profile needs beta >= 0")

    @classmethod
    def one(cls, horizon=1.0):
        return cls("one", 0.0, float(horizon))

    @classmethod
    def power(cls, beta, horizon=1.0):
        return cls("power", float(beta), float(horizon))

    @property
    def singular(self):
        return self.kind == "power" and self.beta > 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if not self.singular:
            return np.ones_like(t)
        if np.any(t <= 0.0):
            raise DomainError(f"g(t) = t^-{self.beta} is singular at t = 0")
        return t ** (-self.beta)

    def sup(self):
        return math.inf if self.singular else 1.0


def time_integral(profile, p, s, t):
    """int_s^t g(r)^p dr in closed form; vectorised over ``s`` and ``t``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if p < 1.0:
        raise ValueError("power p must be >= 1")
    if np.any(s < 0.0) or np.any(t < s):
        raise DomainError("need 0 <= s <= t")
    if not profile.singular:
        out = t - s
    else:
        e = 1.0 - profile.beta * p
        if e <= 0.0:
            raise NonIntegrableError(
                f"t^-{profile.beta} is not {p}-integrable at 0 (beta * p = {profile.beta * p} >= 1)"
            )
        out = (t ** e - s ** e) / e
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DriftSpec:
    """b(t, x)_k = amplitude * g(t) * h(x_k) for k = 1..dimension."""

    space: SpaceProfile
    time: TimeProfile = field(default_factory=TimeProfile)
    amplitude: float = 1.0
    alpha: float = 0.5
    q: float = math.inf
    dimension: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidSpecError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.q > 2.0 / (1.0 + self.alpha):
            raise InvalidSpecError(
                f"q = {self.q} violates q > 2/(1+alpha) = {2.0 / (1.0 + self.alpha):.6g}"
            )
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InvalidSpecError("dimension must be a positive integer")
        if self.time.singular:
            if math.isinf(self.q):
                raise InvalidSpecError("q = inf requires a bounded time profile")
            if self.time.beta * self.q >= 1.0:
                raise InvalidSpecError(
                    f"beta * q = {self.time.beta * self.q:.6g} >= 1: g is not in L^q"
                )

    @property
    def horizon(self):
        return self.time.horizon

    def __call__(self, t, x):
        return eval_drift(self, t, x)

    def is_zero(self):
        return self.amplitude == 0.0 or self.space.kind == "zero" or (
            self.space.kind == "constant" and self.space.level == 0.0
        )

    def is_state_independent(self):
        return self.is_zero() or self.space.is_state_independent()

    def spatial_norm(self):
        """A * ||h||_alpha, i.e. ||b(r)||_alpha / g(r)."""
        if self.is_zero():
            return 0.0
        return abs(self.amplitude) * self.space.holder_norm(self.alpha)

    def norm(self):
        """||b||_{q,alpha} = A ||h||_alpha ||g||_{L^q}."""
        c = self.spatial_norm()
        if c == 0.0:
            return 0.0
        if math.isinf(self.q):
            return c * self.time.sup()
        return c * time_integral(self.time, self.q, 0.0, self.horizon) ** (1.0 / self.q)

    def step_integrals(self, times):
        """int g over each consecutive pair of ``times``."""
        times = np.asarray(times, dtype=float)
        return time_integral(self.time, 1.0, times[:-1], times[1:])

    def control_w(self, s, t):
        return control_w(self, s, t)

    def control_weight(self, s, t):
        """w(s, t)^(1/q); identically 1 when q = inf."""
        if math.isinf(self.q):
            out = np.ones(np.broadcast(np.asarray(s), np.asarray(t)).shape)
        else:
            out = np.asarray(control_w(self, s, t)) ** (1.0 / self.q)
        return float(out) if out.ndim == 0 else out


def eval_drift(spec, t, x):
    """Evaluate b(t, x). ``x`` has a trailing axis of length ``spec.dimension``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (spec.dimension,):
        raise InvalidSpecError(f"x must end with an axis of length {spec.dimension}")
    if spec.is_zero():
        return np.zeros_like(x)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > spec.horizon * (1.0 + 1e-12)):
        raise DomainError(f"t outside [0, {spec.horizon}]")
    g = spec.time(t)
    return spec.amplitude * np.asarray(g)[..., None] * spec.space(x)


def control_w(spec, s, t):
    """w(s, t) = (A ||h||_alpha)^q int_s^t g^q; additive, hence superadditive."""
    if math.isinf(spec.q):
        raise InvalidSpecError("the control w is only defined for finite q; use control_weight")
    c = spec.spatial_norm()
    integral = time_integral(spec.time, spec.q, s, t)
    return c ** spec.q * integral


def _pair_set(pair_count, domain_radius):
    i = np.arange(pair_count, dtype=np.float64)
    span = 2.0 * domain_radius
    x = -domain_radius + span * np.mod((i + 1.0) * _GOLDEN, 1.0)
    k = np.arange(pair_count)
    dyadic = span * 2.0 ** (-((k // 2) % _DYADIC_DEPTH).astype(float))
    loguni = span * 2.0 ** (-(_DYADIC_DEPTH - 1) * np.mod((i + 1.0) * _SQRT2, 1.0))
    return x, np.where(k % 2 == 0, dyadic, loguni)


def _refine_pair(profile, alpha, x, delta, span):
    def neg_ratio(v):
        d = span * 2.0 ** -abs(v[1])
        return -abs(float(profile(v[0] + d) - profile(v[0]))) / d ** alpha

    start = np.array([x, -math.log2(delta / span)])
    res = minimize(
        neg_ratio,
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400, "initial_simplex": _simplex(start, delta)},
    )
    return max(-res.fun, -neg_ratio(start))


def _simplex(start, delta):
    return np.array([start, start + [0.25 * delta, 0.0], start + [0.0, 0.25]])


def holder_seminorm_estimate(profile, alpha, domain_radius=math.pi, pair_count=DEFAULT_SEMINORM_PAIRS):
    """Lower bound on [h]_alpha from a fixed, nested set of point pairs.

    Pair i has base point -R + 2R frac((i+1) phi) with phi the golden ratio. Even pairs use
    the dyadic separation 2R 2^-(i/2 mod 31); odd pairs use a log-uniform separation between
    2R and 2R 2^-30. At every checkpoint 1000 * 2^k <= pair_count the best pairs of that
    prefix are polished by a local search. Checkpoints of a smaller count are a subset of
    those of a larger one, so the estimate is non-decreasing in ``pair_count``.
    """
    if pair_count < 1000:
        raise ValueError("pair_count must be >= 1000")
    if domain_radius <= 0.0:
        raise ValueError("domain_radius must be positive")
    x, delta = _pair_set(pair_count, domain_radius)
    ratio = np.abs(profile(x + delta) - profile(x)) / delta ** alpha
    best = float(np.max(ratio))
    if best == 0.0:
        return 0.0
    span = 2.0 * domain_radius
    checkpoint = 1000
    while checkpoint <= pair_count:
        head = ratio[:checkpoint]
        for j in np.argsort(head, kind="stable")[::-1][:_REFINE_TOP]:
            best = max(best, _refine_pair(profile, alpha, x[j], delta[j], span))
        checkpoint *= 2
    return best
