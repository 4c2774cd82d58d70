"""Distribution functions and decreasing rearrangements of atomic functions.

A function ``u`` on a measure space is represented by finitely many atoms
``(value, mass)``.  Its decreasing rearrangement into a weighted interval
``w`` is ``u*(x) = u#(F_w(x))``, a non-increasing left-continuous step
function on ``Omega* = (l*, r*)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateError, PreconditionError, RangeError
from .model_weights import WeightedInterval, weight_from_json

MASS_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Finite atomic surrogate of ``(u, m)``."""

    values: np.ndarray
    masses: np.ndarray
    source: Optional[object] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        if values.shape != masses.shape or values.size == 0:
            raise PreconditionError("atoms need matching, non-empty value and mass lists")
        if np.any(~np.isfinite(values)) or np.any(~np.isfinite(masses)):
            raise PreconditionError("atoms must be finite")
        if np.any(masses <= 0):
            raise PreconditionError("atom masses must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_atoms(cls, atoms: Sequence[Sequence[float]], source=None) -> "SampledFunction":
        arr = np.asarray(atoms, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], source)

    @classmethod
    def from_json(cls, d: dict) -> "SampledFunction":
        return cls.from_atoms(d["atoms"])

    def to_json(self) -> dict:
        return {"atoms": np.column_stack([self.values, self.masses]).tolist()}

    @property
    def ess_inf(self) -> float:
        return float(self.values.min())

    @property
    def ess_sup(self) -> float:
        return float(self.values.max())

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def merged(self):
        """Distinct values (ascending) and the aggregated mass at each."""
        levels, inverse = np.unique(self.values, return_inverse=True)
        return levels, np.bincount(inverse, weights=self.masses)

    def integral(self, G: Callable) -> float:
        return float(np.sum(G(self.values) * self.masses))


@dataclass(frozen=True, eq=False)
class DistributionFunction:
    """``mu(t) = m({u > t})`` as a right-continuous step function."""

    breakpoints: np.ndarray
    masses: np.ndarray
    total_mass: float

    @classmethod
    def of(cls, u: SampledFunction) -> "DistributionFunction":
        levels, level_mass = u.merged()
        above = np.concatenate([np.cumsum(level_mass[::-1])[::-1][1:], [0.0]])
        return cls(levels, above, u.total_mass)

    def __call__(self, t: float) -> float:
        # mass of atoms with value > t = mass strictly above the last breakpoint <= t
        j = np.searchsorted(self.breakpoints, t, side="right")
        if j == 0:
            return self.total_mass
        return float(self.masses[j - 1])

    @property
    def ess_inf(self) -> float:
        return float(self.breakpoints[0])

    @property
    def ess_sup(self) -> float:
        return float(self.breakpoints[-1])


def distribution(u: SampledFunction, t: float) -> float:
    """``m({u > t})`` as an exact finite sum."""
    return float(u.masses[u.values > t].sum())


def generalized_inverse(mu: DistributionFunction, s: float) -> float:
    """``u#(s) = inf{t > ess inf u : mu(t) < s}``, non-increasing and left-continuous."""
    if s < 0:
        raise RangeError(f"generalized inverse needs s > 0, got {s}")
    if s == 0:
        return mu.ess_sup
    below = np.nonzero(mu.masses < s)[0]
    return float(mu.breakpoints[below[0]])


@dataclass(frozen=True, eq=False)
class MonotoneProfile:
    """Non-increasing profile ``u*`` on ``Omega*`` inside a weighted interval.

    ``kind == "step"``: ``knots`` are the breaks ``x_0 < ... < x_k`` and
    ``values[j]`` is the value on ``(x_j, x_{j+1}]``.
    ``kind == "linear"``: ``values[j]`` is the value at ``knots[j]``, linear in
    between and constant out to ``domain``.
    """

    weight: WeightedInterval
    kind: str
    knots: np.ndarray
    values: np.ndarray
    domain: tuple = None
    note: str = ""
    mass_coords: Optional[np.ndarray] = field(default=None, repr=False)
    cell_mass: Optional[np.ndarray] = field(default=None, repr=False)
    fn: Optional[Callable] = field(default=None, repr=False)
    dfn: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if self.kind == "step":
            if knots.size != values.size + 1:
                raise PreconditionError("step profile needs one more break than values")
            dom = (float(knots[0]), float(knots[-1]))
        elif self.kind == "linear":
            if knots.size != values.size or knots.size < 1:
                raise PreconditionError("linear profile needs one value per knot")
            dom = self.domain or (float(knots[0]), float(knots[-1]))
        else:
            raise PreconditionError(f"unknown profile kind {self.kind!r}")
        if np.any(np.diff(knots) < 0):
            raise PreconditionError("profile knots must be sorted")
        if np.any(np.diff(values) > 0):
            raise PreconditionError("profile values must be non-increasing")
        object.__setattr__(self, "domain", dom)

    # -- evaluation --------------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "step":
            # left-continuous: value on (x_j, x_{j+1}] is values[j]
            j = np.searchsorted(self.knots, x, side="left") - 1
            j = np.clip(j, 0, self.values.size - 1)
            return self.values[j]
        return np.interp(x, self.knots, self.values)

    def slope(self, x: float) -> float:
        if self.kind != "linear":
            raise DegenerateError("step profiles have no classical derivative")
        j = int(np.searchsorted(self.knots, x, side="right")) - 1
        if j < 0 or j >= self.knots.size - 1:
            return 0.0
        return float((self.values[j + 1] - self.values[j]) / (self.knots[j + 1] - self.knots[j]))

    def level_point(self, t: float) -> float:
        """The point where a linear profile crosses level ``t``."""
        if self.kind != "linear":
            raise DegenerateError("level points need a linear profile")
        if not self.values[-1] <= t <= self.values[0]:
            raise RangeError(f"level {t} outside the range of the profile")
        return float(np.interp(-t, -self.values, self.knots))

    # -- measures of level sets ---------------------------------------------

    def cell_masses(self) -> np.ndarray:
        """Weighted mass of each step cell, recomputed from the breaks."""
        w = self.weight
        if w.closed_cdf is not None:
            F = np.array([w._mass_to(x) for x in self.knots])
            return np.diff(F)
        return np.array([w.mass_between(a, b) for a, b in zip(self.knots[:-1], self.knots[1:])])

    def superlevel_mass(self, t: float) -> float:
        """``w({u* > t})``."""
        l_star = self.domain[0]
        if self.kind == "step":
            j = int(np.count_nonzero(self.values > t))
            if self.mass_coords is not None:
                return float(self.mass_coords[j])
            return self.weight.mass_between(l_star, self.knots[j])
        if t >= self.values[0]:
            return 0.0
        if t < self.values[-1]:
            return self.weight.mass_between(*self.domain)
        x_t = self._upper_crossing(t)
        return self.weight.mass_between(l_star, x_t)

    def _upper_crossing(self, t: float) -> float:
        # right end of {u* > t} for a linear profile
        v = self.values
        strictly = np.nonzero(v <= t)[0]
        j = strictly[0]
        if j == 0:
            return self.domain[0]
        x0, x1, v0, v1 = self.knots[j - 1], self.knots[j], v[j - 1], v[j]
        return float(x0 + (v0 - t) * (x1 - x0) / (v0 - v1))

    def total_mass(self) -> float:
        return self.weight.mass_between(*self.domain)

    # -- conversions -------------------------------------------------------

    def atomize(self) -> SampledFunction:
        if self.kind != "step":
            raise PreconditionError("only step profiles convert back to atoms")
        masses = self.cell_mass if self.cell_mass is not None else self.cell_masses()
        return SampledFunction(self.values.copy(), masses)

    def piecewise_linear(self) -> "MonotoneProfile":
        """Linear interpolation through the mass-midpoints of the step cells."""
        if self.kind == "linear":
            return self
        w = self.weight
        cells = self.cell_mass if self.cell_mass is not None else self.cell_masses()
        coords = np.concatenate([[0.0], np.cumsum(cells)])
        base = w._mass_to(self.knots[0])
        mids = base + coords[:-1] + 0.5 * cells
        # beyond r*, plus the cells to the right: exact for tiny right tails
        beyond = 0.0 if self.knots[-1] >= w.upper else w.mass_between(self.knots[-1], w.upper)
        tails = beyond + np.cumsum(cells[::-1])[::-1] - 0.5 * cells
        xs = np.array([
            w.inv_sf(t) if m > 0.5 * w.total_mass else w.inv_cdf(m) for m, t in zip(mids, tails)
        ])
        xs = np.maximum.accumulate(xs)
        return MonotoneProfile(w, "linear", xs, self.values.copy(), self.domain, self.note)

    def to_json(self) -> dict:
        d = {
            "kind": self.kind,
            "breaks": self.knots.tolist(),
            "values": self.values.tolist(),
            "weight": self.weight.to_json(),
            "domain": list(self.domain),
        }
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_json(cls, d: dict) -> "MonotoneProfile":
        w = weight_from_json(d["weight"])
        dom = tuple(d["domain"]) if "domain" in d else None
        return cls(w, d.get("kind", "step"), d["breaks"], d["values"], dom, d.get("note", ""))

    def to_csv(self, grid) -> str:
        grid = np.asarray(grid, dtype=float)
        lines = ["x,u_star"]
        lines += [f"{x:.17g},{y:.17g}" for x, y in zip(grid, self(grid))]
        return "\n".join(lines) + "\n"

    @classmethod
    def sample(cls, f: Callable, weight: WeightedInterval, knots, df: Optional[Callable] = None) -> "MonotoneProfile":
        """Linear profile through ``f`` evaluated at ``knots``.

        ``f`` (and its derivative ``df`` when given) stay attached so that
        derivative checks can use the exact level points.
        """
        knots = np.asarray(knots, dtype=float)
        return cls(weight, "linear", knots, np.asarray(f(knots), dtype=float), fn=f, dfn=df)


# -- rearrangement ---------------------------------------------------------


def omega_star(w: WeightedInterval, total_mass: float) -> tuple:
    """``(l*, r*)``: the initial segment of ``w`` carrying ``total_mass``."""
    if not 0 < total_mass <= w.total_mass * (1 + MASS_RTOL):
        raise RangeError(f"mass {total_mass} outside (0, {w.total_mass}]")
    if total_mass >= w.total_mass:
        return (w.lower, w.upper)
    return (w.lower, w.inv_cdf(total_mass))


def rearrange(u: SampledFunction, w: WeightedInterval, note: str = "") -> MonotoneProfile:
    """Decreasing rearrangement ``u* = u# o F_w`` as an exact step function."""
    total = u.total_mass
    if total > w.total_mass * (1 + MASS_RTOL):
        raise PreconditionError(
            f"mass of u ({total}) exceeds the mass of the target interval ({w.total_mass})"
        )
    levels, level_mass = u.merged()
    values = levels[::-1]
    cells = level_mass[::-1].copy()
    coords = np.concatenate([[0.0], np.cumsum(cells)])
    full = total >= w.total_mass * (1 - MASS_RTOL)
    beyond = 0.0 if full else w.total_mass - total
    # mass to the right of each break, summed from the right so tiny tails survive
    tails = beyond + np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    breaks = np.empty(coords.size)
    breaks[0] = w.lower
    for j in range(1, coords.size):
        if j == coords.size - 1 and full:
            breaks[j] = w.upper
        elif coords[j] > 0.5 * w.total_mass and tails[j] > 0:
            breaks[j] = w.inv_sf(tails[j])
        else:
            breaks[j] = w.inv_cdf(coords[j])
    # cells thinner than one ulp may come back a rounding step out of order
    breaks = np.maximum.accumulate(breaks)
    return MonotoneProfile(w, "step", breaks, values, None, note, coords, cells)


def rearrange_interpolant(x, u, source: WeightedInterval, w: WeightedInterval,
                          note: str = "") -> MonotoneProfile:
    """Rearrangement of the piecewise-linear interpolant of ``u`` on the nodes ``x``.

    The superlevel mass ``source({u_h > t})`` is computed exactly at every
    nodal value ``t`` (full cells plus the crossed part of each cell), so a
    level crossed inside a heavy cell keeps the mass of that crossing.  The
    result is the linear profile through ``(F_w^{-1}(mu(t)), t)``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim != 1 or x.shape != u.shape or x.size < 2 or np.any(np.diff(x) <= 0):
        raise PreconditionError("need increasing nodes with one value each")
    ua, ub = u[:-1], u[1:]
    lo, hi = np.minimum(ua, ub), np.maximum(ua, ub)
    me = np.array([source.mass_between(a, b) for a, b in zip(x[:-1], x[1:])])
    total = float(me.sum())
    if total > w.total_mass * (1 + MASS_RTOL):
        raise PreconditionError(f"mass of u ({total}) exceeds the mass of the target interval ({w.total_mass})")
    levels = np.unique(u)

    # cells entirely above (lo >= t, not flat at t) or entirely below (hi <= t)
    order = np.argsort(lo, kind="stable")
    lo_sorted = lo[order]
    from_top = np.concatenate([np.cumsum(me[order][::-1])[::-1], [0.0]])
    above = from_top[np.searchsorted(lo_sorted, levels, "left")]
    flat = lo == hi
    if np.any(flat):
        idx = np.searchsorted(levels, lo[flat])
        above -= np.bincount(idx, weights=me[flat], minlength=levels.size)
    order = np.argsort(hi, kind="stable")
    from_bottom = np.concatenate([[0.0], np.cumsum(me[order])])
    below = from_bottom[np.searchsorted(hi[order], levels, "right")]

    # crossed cells: every level strictly inside (lo, hi)
    first = np.searchsorted(levels, lo, "right")
    last = np.searchsorted(levels, hi, "left")
    count = np.maximum(last - first, 0)
    cells = np.repeat(np.arange(lo.size), count)
    ks = np.concatenate([np.arange(a, b) for a, b in zip(first[count > 0], last[count > 0])]) if cells.size else cells
    for e, k in zip(cells, ks):
        t = levels[k]
        y = x[e] + (t - ua[e]) / (ub[e] - ua[e]) * (x[e + 1] - x[e])
        up = source.mass_between(y, x[e + 1]) if ub[e] > ua[e] else source.mass_between(x[e], y)
        above[k] += up
        below[k] += me[e] - up

    finite = math.isfinite(w.total_mass)
    beyond = max(w.total_mass - total, 0.0) if finite else math.inf
    radii = np.empty(levels.size)
    for k in range(levels.size):
        if above[k] <= 0:
            radii[k] = w.lower
        elif finite and above[k] > 0.5 * w.total_mass:
            tail = below[k] + beyond
            radii[k] = w.upper if tail <= 0 else w.inv_sf(tail)
        else:
            radii[k] = w.inv_cdf(min(above[k], w.total_mass))
    knots = np.maximum.accumulate(radii[::-1])
    return MonotoneProfile(w, "linear", knots, levels[::-1].copy(), None, note)


def level_radius(u: SampledFunction, w: WeightedInterval, t: float) -> float:
    """``r_t = F_w^{-1}(mu(t))``, the boundary point of ``{u* > t}``."""
    if not u.ess_inf < t < u.ess_sup:
        raise RangeError(f"level {t} outside ({u.ess_inf}, {u.ess_sup})")
    return w.inv_cdf(distribution(u, t))


def mu_derivative_check(u_star: MonotoneProfile, t: float, rel_step: float = 1e-3):
    """Compare ``-mu'(t)`` by central differences with ``g(r_t) / |u*'(r_t)|``.

    Returns ``(lhs, rhs)``.  Levels on a flat piece are refused.
    """
    prof = u_star.piecewise_linear()
    v, x = prof.values, prof.knots
    if not v[-1] < t < v[0]:
        raise RangeError(f"level {t} outside the open range of the profile")
    if prof.fn is not None:
        return _smooth_mu_check(prof, t, rel_step)
    j = int(np.nonzero(v <= t)[0][0])  # crossing lies on the segment (j-1, j]
    if v[j] == t:
        raise DegenerateError(f"level {t} sits on a knot of the profile (flat piece or kink)")
    hi, lo = v[j - 1], v[j]
    delta = min(rel_step * (hi - lo), 0.5 * (hi - t), 0.5 * (t - lo))
    lhs = (prof.superlevel_mass(t - delta) - prof.superlevel_mass(t + delta)) / (2 * delta)
    slope = (lo - hi) / (x[j] - x[j - 1])
    r_t = x[j - 1] + (hi - t) / (-slope)
    rhs = float(prof.weight.density(r_t)) / abs(slope)
    return float(lhs), rhs


def _smooth_mu_check(prof: MonotoneProfile, t: float, rel_step: float):
    # exact level points of the attached function, bracketed by the samples
    f, v, x, w = prof.fn, prof.values, prof.knots, prof.weight

    def point(s):
        j = int(np.nonzero(v <= s)[0][0])
        if v[j] == s:
            return float(x[j])
        return optimize.brentq(lambda y: float(f(y)) - s, x[j - 1], x[j], xtol=1e-15, rtol=1e-15)

    r_t = point(t)
    if prof.dfn is not None:
        slope = float(prof.dfn(r_t))
    else:
        e = 1e-5 * max(1.0, abs(r_t))
        slope = (float(f(r_t + e)) - float(f(r_t - e))) / (2 * e)
    if slope == 0.0:
        raise DegenerateError(f"u* is flat at the level point of {t}")
    delta = rel_step * min(v[0] - t, t - v[-1])
    lo = prof.domain[0]
    lhs = (w.mass_between(lo, point(t - delta)) - w.mass_between(lo, point(t + delta))) / (2 * delta)
    return float(lhs), float(w.density(r_t)) / abs(slope)


def equimeasurability_report(
    u: SampledFunction,
    u_star: MonotoneProfile,
    G: Optional[dict] = None,
    p_values: Sequence[float] = (1.0, 2.0),
) -> dict:
    """Check equimeasurability of ``u`` and ``u*`` on the atom value grid.

    Exact items (super/level/sublevel masses and ``L^p`` norms) use the mass
    function of the target weight at the breaks; the composition identity
    integrates ``G(u*) g`` by adaptive quadrature on each cell.
    """
    if u_star.kind != "step":
        raise PreconditionError("equimeasurability is checked on the step profile")
    w = u_star.weight
    mu = DistributionFunction.of(u)
    levels, level_mass = u.merged()
    breaks = u_star.knots
    F = np.array([w._mass_to(x) for x in breaks])
    F = F - F[0]
    cells = np.diff(F)
    star_vals = u_star.values

    grid = np.concatenate([levels, 0.5 * (levels[:-1] + levels[1:]), [levels[0] - 1, levels[-1] + 1]])

    def star_super(t):
        return F[int(np.count_nonzero(star_vals > t))]

    superlevel = max(abs(mu(t) - star_super(t)) for t in grid)
    level = 0.0
    for t, m in zip(levels, level_mass):
        level = max(level, abs(m - float(cells[star_vals == t].sum())))
    total = F[-1]
    sublevel = max(
        abs(float(u.masses[u.values < t].sum()) - (total - F[int(np.count_nonzero(star_vals >= t))]))
        for t in grid
    )
    norms = {}
    for p in p_values:
        lhs = float(np.sum(np.abs(u.values) ** p * u.masses)) ** (1 / p)
        rhs = float(np.sum(np.abs(star_vals) ** p * cells)) ** (1 / p)
        norms[p] = abs(lhs - rhs)
    composition = {}
    for name, fn in (G or {}).items():
        lhs = u.integral(fn)
        rhs = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            val, _ = integrate.quad(
                lambda x: float(fn(u_star(x))) * float(w.density(x)),
                a, b, epsabs=1e-13, epsrel=1e-12, limit=200,
            )
            rhs += val
        composition[name] = abs(lhs - rhs)
    exact = max([superlevel, level, sublevel] + list(norms.values()))
    return {
        "superlevel": superlevel,
        "level": level,
        "sublevel": sublevel,
        "norms": norms,
        "composition": composition,
        "worst_exact": exact,
        "worst": max([exact] + list(composition.values())),
    }
