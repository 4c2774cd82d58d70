"""Model weighted intervals ``(I, g dt)``, their mass functions and profiles.

A :class:`WeightedInterval` bundles an open interval with a positive
density.  Families with a closed-form cumulative mass (sphere, Euclidean
cone, Gaussian, exponential, double cone, uniform) use it; everything
else falls back to adaptive Gauss-Kronrod quadrature and bracketed
root finding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError, DomainError, RangeError

ABS_TOL = 1e-12
REL_TOL = 1e-12


def ball_volume(N: float) -> float:
    """Volume of the unit ball, extended to real ``N`` through Gamma."""
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def sphere_normalization(N: float) -> float:
    """``c_N = 1 / int_0^pi sin^(N-1)``."""
    return 1.0 / special.beta(N / 2, 0.5)


@dataclass(frozen=True, eq=False)
class WeightedInterval:
    """Open interval ``(lower, upper)`` carrying the measure ``density(t) dt``.

    ``closed_cdf`` and ``closed_inv`` are optional closed forms for the mass
    of ``(lower, x)`` and its inverse; without them quadrature is used.
    """

    lower: float
    upper: float
    density_fn: Callable
    family: dict
    total_mass: float = None
    closed_cdf: Optional[Callable] = None
    closed_inv: Optional[Callable] = None
    tol: float = ABS_TOL
    closed_sf: Optional[Callable] = None
    closed_isf: Optional[Callable] = None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigurationError(f"empty interval ({self.lower}, {self.upper})")
        if self.total_mass is None:
            object.__setattr__(self, "total_mass", self._full_mass())

    def _full_mass(self) -> float:
        if self.closed_cdf is not None:
            return float(self.closed_cdf(self.upper))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _, info, *_ = integrate.quad(
                self.density_fn, self.lower, self.upper,
                epsabs=self.tol, epsrel=REL_TOL, limit=400, full_output=True,
            )
        unbounded = math.isinf(self.lower) or math.isinf(self.upper)
        if unbounded and (info["last"] >= 400 or not math.isfinite(val) or val > 1e100):
            return math.inf
        return float(val)

    # -- basic evaluation -------------------------------------------------

    def density(self, x):
        return self.density_fn(x)

    def contains(self, x) -> bool:
        return self.lower < x < self.upper

    def _mass_to(self, x: float) -> float:
        """Mass of ``(lower, x)`` for ``x`` in the closed interval."""
        if x <= self.lower:
            return 0.0
        if x >= self.upper and self.total_mass is not None:
            return self.total_mass
        if self.closed_cdf is not None:
            return float(self.closed_cdf(x))
        val, _ = integrate.quad(
            self.density_fn, self.lower, x, epsabs=self.tol, epsrel=REL_TOL, limit=400
        )
        return float(val)

    def _tail(self, x: float) -> float:
        """Mass of ``(x, upper)`` from the closed survival form."""
        if x >= self.upper:
            return 0.0
        if x <= self.lower:
            return self.total_mass
        return float(self.closed_sf(x))

    def cdf(self, x: float) -> float:
        if not self.contains(x):
            raise DomainError(f"x={x} outside ({self.lower}, {self.upper})")
        return self._mass_to(x)

    def mass_between(self, a: float, b: float) -> float:
        """Mass of ``(a, b)``; endpoints may be the interval ends."""
        if b <= a:
            return 0.0
        if self.closed_cdf is not None:
            Fa = self._mass_to(a)
            if self.closed_sf is not None and Fa > 0.5 * self.total_mass:
                return self._tail(a) - self._tail(b)
            return self._mass_to(b) - Fa
        lo, hi = max(a, self.lower), min(b, self.upper)
        val, _ = integrate.quad(
            self.density_fn, lo, hi, epsabs=self.tol, epsrel=REL_TOL, limit=400
        )
        return float(val)

    def inv_cdf(self, v: float, tol: float = 1e-10) -> float:
        if not 0.0 < v < self.total_mass:
            raise RangeError(f"mass {v} outside (0, {self.total_mass})")
        if self.closed_inv is not None:
            x = float(self.closed_inv(v))
            g = float(self.density_fn(x))
            if g > 0 and self.lower < x < self.upper:
                step = (self._mass_to(x) - v) / g
                if abs(step) < 1e-6 * max(1.0, abs(x)):
                    x -= step
        else:
            x = self._bracketed_inverse(v)
        if abs(self._mass_to(x) - v) > tol * max(1.0, v):
            raise RangeError(f"inverse mass function did not reach {v}")
        return x

    def inv_sf(self, tail: float) -> float:
        """Point ``x`` with mass ``tail`` in ``(x, upper)``; accurate for tiny tails."""
        if not 0.0 < tail < self.total_mass:
            raise RangeError(f"tail mass {tail} outside (0, {self.total_mass})")
        if self.closed_isf is None:
            return self.inv_cdf(self.total_mass - tail)
        return float(self.closed_isf(tail))

    def _bracketed_inverse(self, v: float) -> float:
        f = lambda x: self._mass_to(x) - v
        lo, hi = self.lower, self.upper
        if math.isinf(lo) or math.isinf(hi):
            if math.isinf(lo) and math.isinf(hi):
                a, b = -1.0, 1.0
            elif math.isinf(hi):
                a, b = lo, lo + 1.0
            else:
                a, b = hi - 1.0, hi
            step = 1.0
            while math.isinf(hi) and f(b) <= 0:
                a, b, step = b, b + 2 * step, 2 * step
            step = 1.0
            while math.isinf(lo) and f(a) >= 0:
                a, b, step = a - 2 * step, a, 2 * step
            lo, hi = a, b
        return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    def profile(self, v: float) -> float:
        """Isoperimetric profile ``g(F^{-1}(v))``; zero at ``v = 0``."""
        if v < 0 or v > self.total_mass:
            raise RangeError(f"mass {v} outside [0, {self.total_mass}]")
        if v == 0:
            return 0.0
        if v == self.total_mass:
            return 0.0 if math.isinf(self.upper) else float(self.density_fn(self.upper))
        if math.isfinite(self.total_mass) and v > 0.5 * self.total_mass:
            return float(self.density_fn(self.inv_sf(self.total_mass - v)))
        return float(self.density_fn(self.inv_cdf(v)))

    def profile_of_tail(self, tail: float) -> float:
        """Profile at ``total - tail`` without forming the difference."""
        if not 0 < tail < self.total_mass:
            raise RangeError(f"tail mass {tail} outside (0, {self.total_mass})")
        return float(self.density_fn(self.inv_sf(tail)))

    # -- derived intervals -------------------------------------------------

    def restrict(self, a: float, b: float) -> "WeightedInterval":
        """Same density on the sub-interval ``(a, b)``."""
        if a < self.lower or b > self.upper or not a < b:
            raise ConfigurationError(f"({a}, {b}) is not inside ({self.lower}, {self.upper})")
        family = dict(self.family)
        family["restrict"] = [a, b]
        base_a = self._mass_to(a)
        closed_cdf = closed_inv = None
        if self.closed_cdf is not None:
            closed_cdf = lambda x: self._mass_to(x) - base_a
            if self.closed_inv is not None:
                closed_inv = lambda v: self.closed_inv(v + base_a)
        closed_sf = closed_isf = None
        if self.closed_sf is not None:
            tail_b = self._tail(b)
            closed_sf = lambda x: self._tail(x) - tail_b
            if self.closed_isf is not None:
                closed_isf = lambda t: self.closed_isf(t + tail_b)
        return WeightedInterval(
            a, b, self.density_fn, family, None, closed_cdf, closed_inv, self.tol, closed_sf, closed_isf
        )

    def scaled(self, k: float) -> "WeightedInterval":
        """The measure ``k * density dt``."""
        if not k > 0:
            raise ConfigurationError("scale factor must be positive")
        family = dict(self.family)
        family["scale"] = k * family.get("scale", 1.0)
        dens = lambda t: k * self.density_fn(t)
        closed_cdf = closed_inv = None
        if self.closed_cdf is not None:
            closed_cdf = lambda x: k * self._mass_to(x)
            if self.closed_inv is not None:
                closed_inv = lambda v: self.closed_inv(v / k)
        closed_sf = closed_isf = None
        if self.closed_sf is not None:
            closed_sf = lambda x: k * self._tail(x)
            if self.closed_isf is not None:
                closed_isf = lambda t: self.closed_isf(t / k)
        return WeightedInterval(
            self.lower, self.upper, dens, family, k * self.total_mass, closed_cdf, closed_inv, self.tol,
            closed_sf, closed_isf,
        )

    def to_json(self) -> dict:
        return dict(self.family)


# -- families -------------------------------------------------------------


def sphere(N: float) -> WeightedInterval:
    """``c_N sin^{N-1}(t) dt`` on ``(0, pi)``, a probability measure."""
    if not N > 1:
        raise ConfigurationError("sphere weight needs N > 1")
    c = sphere_normalization(N)
    a = N / 2

    def cdf(x):
        s2 = math.sin(x) ** 2
        if x <= math.pi / 2:
            return 0.5 * special.betainc(a, 0.5, s2)
        return 1.0 - 0.5 * special.betainc(a, 0.5, s2)

    def inv(v):
        w = min(v, 1.0 - v)
        if 2 * w < 0.5:
            x = math.asin(math.sqrt(special.betaincinv(a, 0.5, 2 * w)))
        else:
            x = math.acos(math.sqrt(special.betaincinv(0.5, a, 1.0 - 2 * w)))
        return x if v <= 0.5 else math.pi - x

    dens = lambda t: c * np.sin(t) ** (N - 1)
    sf = lambda x: cdf(math.pi - x)
    isf = lambda t: math.pi - inv(t)
    return WeightedInterval(
        0.0, math.pi, dens, {"family": "sphere", "N": N}, 1.0, cdf, inv, closed_sf=sf, closed_isf=isf
    )


def euclidean(N: float, avr: float = 1.0) -> WeightedInterval:
    """Cone weight ``AVR * N omega_N t^{N-1} dt`` on ``(0, inf)``."""
    if not N > 1 or not avr > 0:
        raise ConfigurationError("euclidean weight needs N > 1 and AVR > 0")
    k = avr * ball_volume(N)
    fam = {"family": "euclidean", "N": N}
    if avr != 1.0:
        fam["avr"] = avr
    return WeightedInterval(
        0.0, math.inf,
        lambda t: k * N * np.asarray(t, dtype=float) ** (N - 1),
        fam, math.inf,
        lambda x: k * x**N,
        lambda v: (v / k) ** (1.0 / N),
    )


def gaussian() -> WeightedInterval:
    return WeightedInterval(
        -math.inf, math.inf,
        lambda t: np.exp(-np.asarray(t, dtype=float) ** 2 / 2) / math.sqrt(2 * math.pi),
        {"family": "gaussian"}, 1.0,
        lambda x: float(special.ndtr(x)),
        lambda v: float(special.ndtri(v)),
        closed_sf=lambda x: float(special.ndtr(-x)),
        closed_isf=lambda t: -float(special.ndtri(t)),
    )


def exponential(h: float = 1.0) -> WeightedInterval:
    """``e^{h t} dt`` on the real line; the mass of ``(-inf, x)`` is ``e^{hx}/h``."""
    if not h > 0:
        raise ConfigurationError("exponential weight needs h > 0")
    return WeightedInterval(
        -math.inf, math.inf,
        lambda t: np.exp(h * np.asarray(t, dtype=float)),
        {"family": "exponential", "h": h}, math.inf,
        lambda x: math.exp(h * x) / h,
        lambda v: math.log(h * v) / h,
    )


def double_cone(Q: float, r: float) -> WeightedInterval:
    """``Q omega_Q min(t, 2r - t)^{Q-1} dt`` on ``(0, 2r)``; total mass ``2 omega_Q r^Q``."""
    if not Q > 1 or not r > 0:
        raise ConfigurationError("double cone needs Q > 1 and r > 0")
    wq = ball_volume(Q)
    total = 2 * wq * r**Q

    def cdf(x):
        if x <= r:
            return wq * x**Q
        return total - wq * (2 * r - x) ** Q

    def inv(v):
        if v <= total / 2:
            return (v / wq) ** (1.0 / Q)
        return 2 * r - ((total - v) / wq) ** (1.0 / Q)

    dens = lambda t: Q * wq * np.minimum(t, 2 * r - np.asarray(t, dtype=float)) ** (Q - 1)
    sf = lambda x: cdf(2 * r - x)
    isf = lambda t: 2 * r - inv(t)
    return WeightedInterval(
        0.0, 2 * r, dens, {"family": "double_cone", "Q": Q, "r": r}, total, cdf, inv,
        closed_sf=sf, closed_isf=isf,
    )


def uniform(lower: float = 0.0, upper: float = 1.0) -> WeightedInterval:
    """Lebesgue measure on ``(lower, upper)``; ``upper`` may be infinite."""
    return WeightedInterval(
        lower, upper,
        lambda t: np.ones_like(np.asarray(t, dtype=float)),
        {"family": "uniform", "lower": lower, "upper": upper},
        upper - lower,
        lambda x: x - lower,
        lambda v: lower + v,
    )


def log_convex(f, d: int) -> WeightedInterval:
    """``e^{f(t)} d omega_d t^{d-1} dt`` on ``(0, inf)``.

    ``f`` is either a vectorized callable or a list of polynomial
    coefficients ``[c0, c1, ...]`` (lowest degree first).
    """
    if d < 2 or int(d) != d:
        raise ConfigurationError("log-convex weight needs an integer d >= 2")
    if callable(f):
        fn, f_json = f, "<callable>"
    else:
        coeffs = [float(c) for c in f]
        fn = np.polynomial.Polynomial(coeffs)
        f_json = coeffs
    wd = ball_volume(d)

    def dens(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(fn(t)) * d * wd * t ** (d - 1)

    return WeightedInterval(0.0, math.inf, dens, {"family": "log_convex", "d": d, "f": f_json})


def custom(xs, gs) -> WeightedInterval:
    """Tabulated density with monotone cubic interpolation on ``(xs[0], xs[-1])``."""
    xs = np.asarray(xs, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
        raise ConfigurationError("custom density needs strictly increasing abscissae")
    if np.any(gs[1:-1] <= 0) or np.any(gs < 0):
        raise ConfigurationError("custom density must be positive inside the interval")
    interp = PchipInterpolator(xs, gs, extrapolate=False)
    anti = interp.antiderivative()
    base = float(anti(xs[0]))
    total = float(anti(xs[-1])) - base
    return WeightedInterval(
        float(xs[0]), float(xs[-1]), interp,
        {"family": "custom", "x": xs.tolist(), "g": gs.tolist()},
        total, lambda x: float(anti(x)) - base, None,
    )


_FACTORIES = {
    "sphere": lambda d: sphere(float(d["N"])),
    "euclidean": lambda d: euclidean(float(d["N"]), float(d.get("avr", 1.0))),
    "gaussian": lambda d: gaussian(),
    "exponential": lambda d: exponential(float(d.get("h", 1.0))),
    "double_cone": lambda d: double_cone(float(d["Q"]), float(d["r"])),
    "uniform": lambda d: uniform(float(d.get("lower", 0.0)), float(d.get("upper", 1.0))),
    "log_convex": lambda d: log_convex(d["f"], int(d["d"])),
    "custom": lambda d: custom(d["x"], d["g"]),
}


def weight_from_json(d: dict) -> WeightedInterval:
    try:
        make = _FACTORIES[d["family"]]
    except KeyError as exc:
        raise ConfigurationError(f"unknown weight family in {d!r}") from exc
    try:
        w = make(d)
    except KeyError as exc:
        raise ConfigurationError(f"missing parameter {exc} for {d['family']}") from exc
    if "restrict" in d:
        a, b = d["restrict"]
        w = w.restrict(float(a), float(b))
    if "scale" in d:
        w = w.scaled(float(d["scale"]))
    return w


# -- constants -------------------------------------------------------------


@dataclass(frozen=True)
class ModelConstants:
    p: float
    N: float
    p_conjugate: float = field(init=False)

    def __post_init__(self):
        if not self.p > 1 or not self.N > 1:
            raise DomainError("need p > 1 and N > 1")
        object.__setattr__(self, "p_conjugate", self.p / (self.p - 1))

    @property
    def sobolev_exponent(self) -> float:
        if self.p >= self.N:
            raise DomainError("critical exponent needs p < N")
        return self.p * self.N / (self.N - self.p)

    @property
    def sobolev(self) -> float:
        return sobolev_constant(self.p, self.N)

    @property
    def logsobolev(self) -> float:
        return logsobolev_constant(self.p, self.N)


def bbg_factor(N: float, D: float) -> float:
    """Diameter improvement ``(int_0^{pi/2} cos^{N-1} / int_0^{D/2} cos^{N-1})^{1/N}``."""
    if not 0 < D <= math.pi:
        raise RangeError(f"diameter {D} outside (0, pi]")
    if D == math.pi:
        return 1.0
    # int_0^x cos^{N-1} / int_0^{pi/2} cos^{N-1} = I_{sin^2 x}(1/2, N/2)
    frac = special.betainc(0.5, N / 2, math.sin(D / 2) ** 2)
    return float(frac ** (-1.0 / N))


def sobolev_constant(p: float, N: float) -> float:
    """Sharp Sobolev constant of the cone ``(0, inf), N omega_N t^{N-1} dt``."""
    if not 1 < p < N:
        raise DomainError(f"Sobolev constant needs 1 < p < N, got p={p}, N={N}")
    lg = math.lgamma
    log_ratio = lg(N + 1) - math.log(N * ball_volume(N)) - lg(N / p) - lg(N + 1 - N / p)
    return (1.0 / N) * (N * (p - 1) / (N - p)) ** ((p - 1) / p) * math.exp(log_ratio / N)


def logsobolev_constant(p: float, N: float) -> float:
    """Sharp ``L^p`` log-Sobolev constant ``(p/N)((p-1)/e)^{p-1}(omega_N Gamma(N/p'+1))^{-p/N}``."""
    if not p > 1 or not N > 1:
        raise DomainError("log-Sobolev constant needs p > 1 and N > 1")
    pc = p / (p - 1)
    return (p / N) * ((p - 1) / math.e) ** (p - 1) * (ball_volume(N) * math.gamma(N / pc + 1)) ** (-p / N)
