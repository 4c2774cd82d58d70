"""Both sides of the rearrangement, stability and rigidity inequalities.

Discrete evaluators take a :class:`~pzkit.discrete_space.DiscreteSpace`
and vertex values; radial evaluators take a :class:`RadialProfile` and
integrate against a cone measure ``avr * N omega_N t^{N-1} dt`` with
adaptive quadrature.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from . import discrete_space as ds
from . import eigen1d
from . import model_weights as mw
from .errors import (
    ConfigurationError,
    DegenerateError,
    DomainError,
    InconsistencyError,
    IntegrabilityError,
    PreconditionError,
    SolverError,
)
from .rearrange import SampledFunction, rearrange, rearrange_interpolant

QUAD_TOL = 1e-12


# -- Polya-Szego -------------------------------------------------------------


@dataclass
class PZReport:
    lhs: float
    rhs_integral: float
    constant: float
    deficit: float
    metadata: dict = field(default_factory=dict)

    @property
    def relative_deficit(self) -> float:
        return abs(self.deficit) / self.lhs if self.lhs > 0 else abs(self.deficit)

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs_integral": self.rhs_integral,
            "constant": self.constant,
            "deficit": self.deficit,
            "relative_deficit": self.relative_deficit,
            "metadata": self.metadata,
        }


def _resolve(s: ds.DiscreteSpace, w, C):
    if w is None:
        if "target" not in s.metadata:
            raise ConfigurationError("space carries no target weight; pass one explicitly")
        w = s.target()
    source = "caller"
    if C is None:
        if "constant" not in s.metadata:
            raise ConfigurationError("space carries no isoperimetric constant; pass C explicitly")
        C = float(s.metadata["constant"])
        source = s.metadata.get("constant_source", "space metadata")
    if not C > 0:
        raise PreconditionError("the isoperimetric constant must be positive")
    return w, float(C), source


def _truncation_admissible(s: ds.DiscreteSpace, u) -> bool:
    """A chain cut out of an infinite-mass weight has a free outer end, so
    the inequality only applies when ``u`` takes its minimum there."""
    if not s.is_chain or math.isfinite(s.weight().total_mass):
        return True
    return bool(u[-1] <= u.min())


def pz_deficit(s: ds.DiscreteSpace, u, w: Optional[mw.WeightedInterval] = None,
               C: Optional[float] = None, p: float = 2.0) -> PZReport:
    """``int |Du|^p - C^p int |(u*)'|^p d omega`` on a graph.

    On chains ``u*`` is the rearrangement of the piecewise-linear
    interpolant of ``u`` under the chain's continuum weight.  On other
    graphs it is the step rearrangement of the vertex atoms refined to the
    linear profile through the mass-midpoints of its cells.  Either way
    the integral over each linear piece is ``|slope|^p`` times its weight.
    """
    w, C, source = _resolve(s, w, C)
    u = np.asarray(u, dtype=float)
    lhs = ds.dirichlet_energy(s, u, p)
    if s.is_chain:
        prof = rearrange_interpolant(s.positions, u, s.weight(), w)
    else:
        prof = rearrange(SampledFunction(u, s.masses), w).piecewise_linear()
    x, v = prof.knots, prof.values
    rhs = 0.0
    for j in range(x.size - 1):
        dv = v[j] - v[j + 1]
        if dv == 0.0 or x[j + 1] == x[j]:
            # the second case is a cell below float resolution in x
            continue
        slope = dv / (x[j + 1] - x[j])
        rhs += slope**p * w.mass_between(x[j], x[j + 1])
    meta = {
        "weight": w.to_json(), "p": p, "constant_source": source,
        "truncation_admissible": _truncation_admissible(s, u),
        "space": {k: s.metadata[k] for k in ("model", "N", "diameter", "avr", "resolution") if k in s.metadata},
    }
    return PZReport(lhs, float(rhs), C**p, lhs - C**p * rhs, meta)


def pz_bv_deficit(s: ds.DiscreteSpace, u, w: Optional[mw.WeightedInterval] = None,
                  C: Optional[float] = None, jump_threshold: Optional[float] = None) -> PZReport:
    """``|Du|(X) - C int g dTV(u*)`` with ``u*`` kept as an exact step function.

    Each jump of ``u*`` at a break ``x`` contributes ``g(x)`` times its
    size.  Jumps larger than ``jump_threshold`` (default: ten times the
    median positive jump) are reported separately as the singular part, on
    both sides.
    """
    w, C, source = _resolve(s, w, C)
    u = np.asarray(u, dtype=float)
    lhs = ds.total_variation(s, u)
    prof = rearrange(SampledFunction(u, s.masses), w)
    jumps = -np.diff(prof.values)
    at = prof.knots[1:-1]
    g = np.asarray(w.density(at), dtype=float) if at.size else np.zeros(0)
    rhs = float(np.sum(g * jumps))
    du = np.abs(u[s.edges[:, 1]] - u[s.edges[:, 0]])
    if jump_threshold is None:
        pos = np.concatenate([jumps[jumps > 0], du[du > 0]])
        jump_threshold = 10.0 * float(np.median(pos)) if pos.size else 0.0
    lhs_jump = float(np.sum(s.conductances[du > jump_threshold] * du[du > jump_threshold]))
    rhs_jump = float(np.sum((g * jumps)[jumps > jump_threshold]))
    meta = {
        "weight": w.to_json(), "constant_source": source, "jump_threshold": jump_threshold,
        "lhs_split": {"jump": lhs_jump, "diffuse": lhs - lhs_jump},
        "rhs_split": {"jump": rhs_jump, "diffuse": rhs - rhs_jump},
    }
    return PZReport(lhs, rhs, C, lhs - C * rhs, meta)


# -- quantitative stability on compact spaces -----------------------------------


@dataclass
class StabilityReport:
    geometric_side: float
    analytic_deficit: float
    metadata: dict = field(default_factory=dict)

    @property
    def empirical_ratio(self) -> float:
        if self.analytic_deficit > 0:
            return self.geometric_side / self.analytic_deficit
        return math.inf if self.geometric_side > 0 else math.nan

    def to_json(self) -> dict:
        return {
            "geometric_side": self.geometric_side,
            "analytic_deficit": self.analytic_deficit,
            "empirical_ratio": self.empirical_ratio,
            "metadata": self.metadata,
        }


def _geometric_side(N, diam):
    if not 0 < diam <= math.pi:
        raise DomainError(f"diameter {diam} outside (0, pi]")
    return (math.pi - diam) ** N


@functools.lru_cache(maxsize=64)
def model_gap(N: float, p: float, grid: int = eigen1d.DEFAULT_GRID) -> float:
    """``lambda_{p,N-1,N}``: first Neumann p-eigenvalue of the model sphere interval."""
    return eigen1d.neumann_eigenvalue(mw.sphere(N), p, grid=grid).lam


def lichnerowicz_deficit(N: float, p: float, diam: float, rq: float, tol: float = 1e-6) -> StabilityReport:
    """Geometric side ``(pi - diam)^N`` against ``rq - lambda_{p,N-1,N}``."""
    lam = model_gap(float(N), float(p))
    deficit = rq - lam
    if deficit < -tol * lam:
        raise InconsistencyError(
            f"Rayleigh quotient {rq} lies below the model gap {lam}; the input cannot come from a CD(N-1,N) space"
        )
    return StabilityReport(_geometric_side(N, diam), max(deficit, 0.0),
                           {"N": N, "p": p, "diam": diam, "rq": rq, "model_gap": lam})


def sobolev_norms(s: ds.DiscreteSpace, u, q: float) -> dict:
    """``L^2`` and ``L^q`` norms, ``L^2`` norm of the gradient and total mass of ``u`` on ``s``."""
    u = np.asarray(u, dtype=float)
    m = s.masses
    return {
        "l2": float(np.sum(m * u**2)) ** 0.5,
        "lq": float(np.sum(m * np.abs(u) ** q)) ** (1 / q),
        "grad_l2": ds.dirichlet_energy(s, u, 2.0) ** 0.5,
        "mass": s.total_mass,
    }


def sobolev_deficit_compact(N: float, q: float, diam: float, norms: dict) -> StabilityReport:
    """``(q-2)/N - (|u|_q^2 - m^{2/q-1}|u|_2^2) / (m^{2/q-1}|Du|_2^2)``."""
    if not q > 2:
        raise DomainError("the Sobolev deficit needs q > 2")
    in_range = True
    if N > 2:
        if q > 2 * N / (N - 2):
            raise DomainError(f"q={q} exceeds the critical exponent 2N/(N-2)")
    else:
        in_range = False
    m = norms["mass"]
    grad2 = norms["grad_l2"] ** 2
    if not grad2 > 0:
        raise DegenerateError("constant function: the Sobolev deficit is 0/0")
    c = m ** (2 / q - 1)
    deficit = (q - 2) / N - (norms["lq"] ** 2 - c * norms["l2"] ** 2) / (c * grad2)
    meta = {"N": N, "q": q, "diam": diam, "norms": dict(norms)}
    if not in_range:
        meta["note"] = "q-range for N <= 2 lies outside the stated range of the stability theorem"
    return StabilityReport(_geometric_side(N, diam), deficit, meta)


def logsobolev_deficit_compact(N: float, diam: float, s: ds.DiscreteSpace, u) -> StabilityReport:
    """``(int |u| log |u|)^{-1} int |Du|^2 / |u| - 2N`` with ``int |u| = 1`` enforced.

    The graph Fisher information uses the mean of ``|u|`` at the two ends of
    each edge; edges where that mean vanishes contribute nothing.
    """
    a = np.abs(np.asarray(u, dtype=float))
    total = float(np.sum(s.masses * a))
    if not total > 0:
        raise DegenerateError("u vanishes identically")
    a = a / total
    with np.errstate(divide="ignore", invalid="ignore"):
        ent_terms = np.where(a > 0, a * np.log(a), 0.0)
    entropy = float(np.sum(s.masses * ent_terms))
    if not entropy > 1e-300:
        raise DegenerateError("zero entropy: u is constant")
    i, j = s.edges[:, 0], s.edges[:, 1]
    mean = 0.5 * (a[i] + a[j])
    grad = (a[j] - a[i]) / s.lengths
    keep = mean > 0
    fisher = float(np.sum((s.conductances * s.lengths * grad**2)[keep] / mean[keep]))
    deficit = fisher / entropy - 2 * N
    return StabilityReport(_geometric_side(N, diam), deficit,
                           {"N": N, "diam": diam, "entropy": entropy, "fisher": fisher})


def bbg_quantitative_fit(N: float, diameters) -> dict:
    """Largest ``C`` with ``BBG_N(D)^2 - 1 >= C (pi - D)^N`` on the given grid."""
    D = np.asarray([d for d in diameters if d < math.pi], dtype=float)
    if D.size == 0:
        raise ConfigurationError("need at least one diameter below pi")
    lhs = np.array([mw.bbg_factor(N, d) ** 2 - 1 for d in D])
    geo = (math.pi - D) ** N
    ratios = lhs / geo
    C = float(ratios.min())
    return {
        "N": N,
        "fitted_constant": C,
        "argmin_diameter": float(D[int(np.argmin(ratios))]),
        "holds": bool(C > 0 and np.all(lhs >= C * geo * (1 - 1e-12))),
        "rows": [{"D": float(d), "bbg_sq_minus_1": float(l), "geometric": float(g)} for d, l, g in zip(D, lhs, geo)],
    }


# -- radial profiles on cones ------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    fn: Callable
    dfn: Callable
    label: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.fn(t)

    def derivative(self, t):
        return self.dfn(t)

    def rescaled(self, k: float) -> "RadialProfile":
        """``t -> u(k t)``."""
        return RadialProfile(lambda t: self.fn(k * t), lambda t: k * self.dfn(k * t),
                             f"{self.label} rescaled by {k}", {**self.params, "rescale": k})


def bliss_extremal(a: float, b: float, p: float, N: float) -> RadialProfile:
    """``t -> a (1 + b t^{p/(p-1)})^{-(N-p)/p}``, the Talenti-Bliss profile."""
    if a == 0 or not b > 0 or not 1 < p < N:
        raise DomainError("Bliss extremal needs a != 0, b > 0 and 1 < p < N")
    pc = p / (p - 1)
    e = (N - p) / p

    def fn(t):
        return a * (1 + b * np.power(t, pc)) ** (-e)

    def dfn(t):
        return -a * e * b * pc * np.power(t, pc - 1) * (1 + b * np.power(t, pc)) ** (-e - 1)

    return RadialProfile(fn, dfn, "bliss", {"a": a, "b": b, "p": p, "N": N})


def logsobolev_extremal(lam: float, p: float, N: float) -> RadialProfile:
    """``lam^{N/(p p')} (Gamma(N/p'+1) omega_N)^{-1/p} exp(-lam t^{p'} / p)``, unit ``L^p`` mass on the cone."""
    if not lam > 0 or not p > 1:
        raise DomainError("log-Sobolev extremal needs lam > 0 and p > 1")
    pc = p / (p - 1)
    c = lam ** (N / (p * pc)) * (math.gamma(N / pc + 1) * mw.ball_volume(N)) ** (-1 / p)

    def fn(t):
        return c * np.exp(-lam * np.power(t, pc) / p)

    def dfn(t):
        return -c * lam * (pc / p) * np.power(t, pc - 1) * np.exp(-lam * np.power(t, pc) / p)

    return RadialProfile(fn, dfn, "logsobolev", {"lam": lam, "p": p, "N": N})


def bump(radius: float = 1.0, power: float = 2.0) -> RadialProfile:
    """Compactly supported ``(1 - (t/radius)^2)_+^power``."""

    def fn(t):
        s = np.clip(1 - (np.asarray(t) / radius) ** 2, 0, None)
        return s**power

    def dfn(t):
        t = np.asarray(t)
        s = np.clip(1 - (t / radius) ** 2, 0, None)
        return -power * s ** (power - 1) * 2 * t / radius**2

    return RadialProfile(fn, dfn, "bump", {"radius": radius, "power": power})


def _cone_integral(fn: Callable, N: float, avr: float, support: float = math.inf) -> float:
    c = avr * N * mw.ball_volume(N)

    def integrand(t):
        return float(fn(t)) * c * t ** (N - 1)

    total, err = 0.0, 0.0
    pieces = [(0.0, min(1.0, support))]
    if support > 1.0:
        pieces.append((1.0, support))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in pieces:
            try:
                val, e = integrate.quad(integrand, lo, hi, epsabs=0, epsrel=QUAD_TOL, limit=400)
            except integrate.IntegrationWarning as exc:
                raise IntegrabilityError(f"quadrature failed on [{lo}, {hi}]: {exc}") from exc
            total += val
            err += e
    if not math.isfinite(total):
        raise IntegrabilityError("divergent norm")
    return total


def _support(u: RadialProfile) -> float:
    return float(u.params.get("radius", math.inf)) / float(u.params.get("rescale", 1.0))


def avr_sobolev_check(u: RadialProfile, p: float, N: float, avr: float = 1.0) -> dict:
    """Compare ``|u|_{p*}`` with ``S_{p,N} AVR^{-1/N} |u'|_p`` on the cone of volume ratio ``avr``.

    ``gap = 1 - lhs/rhs`` is zero exactly at equality.
    """
    if not 0 < avr <= 1:
        raise DomainError("AVR must lie in (0, 1]")
    S = mw.sobolev_constant(p, N)
    ps = p * N / (N - p)
    sup = _support(u)
    lhs = _cone_integral(lambda t: abs(u(t)) ** ps, N, avr, sup) ** (1 / ps)
    grad = _cone_integral(lambda t: abs(u.derivative(t)) ** p, N, avr, sup) ** (1 / p)
    rhs = S * avr ** (-1 / N) * grad
    return {"lhs": lhs, "rhs": rhs, "gap": 1 - lhs / rhs, "ratio": lhs / (S * grad),
            "sobolev_constant": S, "p": p, "N": N, "avr": avr, "profile": u.label}


def avr_logsobolev_check(u: RadialProfile, p: float, N: float, avr: float = 1.0, tol: float = 1e-8) -> dict:
    """``int |u|^p log |u|^p`` against ``(N/p) log(L_{p,N} AVR^{-p/N} |Du|_p^p)``."""
    if not 0 < avr <= 1:
        raise DomainError("AVR must lie in (0, 1]")
    sup = _support(u)
    mass = _cone_integral(lambda t: abs(u(t)) ** p, N, avr, sup)
    if abs(mass - 1) > tol:
        raise PreconditionError(f"u is not normalized: int |u|^p = {mass}")

    def ent(t):
        a = abs(u(t)) ** p
        return a * math.log(a) if a > 0 else 0.0

    lhs = _cone_integral(ent, N, avr, sup)
    grad = _cone_integral(lambda t: abs(u.derivative(t)) ** p, N, avr, sup)
    L = mw.logsobolev_constant(p, N)
    rhs = (N / p) * math.log(L * avr ** (-p / N) * grad)
    return {"lhs": lhs, "rhs": rhs, "gap": rhs - lhs, "logsobolev_constant": L,
            "p": p, "N": N, "avr": avr, "profile": u.label}


def normalized(u: RadialProfile, p: float, N: float, avr: float = 1.0) -> RadialProfile:
    """``u / |u|_p`` on the cone measure."""
    k = _cone_integral(lambda t: abs(u(t)) ** p, N, avr, _support(u)) ** (-1 / p)
    return RadialProfile(lambda t: k * u(t), lambda t: k * u.derivative(t), u.label, {**u.params, "scale": k})


@dataclass(frozen=True)
class OutsideConvexReport:
    p: float
    d: float
    printed: float
    verified: float
    sobolev_constant: float

    @property
    def ratio(self) -> float:
        return self.printed / self.verified

    @property
    def consistent(self) -> bool:
        return abs(self.ratio - 1) < 1e-6

    def to_json(self) -> dict:
        return {
            "p": self.p, "d": self.d,
            "printed_factor": self.printed, "verified_factor": self.verified,
            "printed_constant": self.printed * self.sobolev_constant,
            "verified_constant": self.verified * self.sobolev_constant,
            "ratio": self.ratio, "consistent": self.consistent,
            "note": "printed factor 2^(-1/d) disagrees with the half-space restriction of the Bliss extremal"
            if not self.consistent else "",
        }


def outside_convex_constant(p: float, d: float) -> OutsideConvexReport:
    """Printed factor ``2^{-1/d}`` next to the factor measured on a half-space.

    The half-space is the cone of volume ratio 1/2; the Bliss extremal
    restricted to it gives ``|u|_{p*} = f S_{p,d} |Du|_p`` and ``f`` is
    returned as ``verified``.
    """
    if not 1 < p < d:
        raise DomainError("need 1 < p < d")
    rep = avr_sobolev_check(bliss_extremal(1.0, 1.0, p, d), p, d, avr=0.5)
    return OutsideConvexReport(p, d, 2.0 ** (-1.0 / d), rep["ratio"], rep["sobolev_constant"])


# -- eigenvalue bounds ---------------------------------------------------------------


def log_convex_faber_krahn(f, d: int, p: float = 2.0, volume: float = math.pi,
                           grid: int = eigen1d.DEFAULT_GRID) -> dict:
    """Dirichlet p-eigenvalue of the centred ball of weighted volume ``volume`` for the density ``e^f``."""
    if not volume > 0:
        raise ConfigurationError("volume must be positive")
    w = mw.log_convex(f, d)

    def excess(r):
        return w.mass_between(0.0, r) - volume

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2
        if hi > 1e6 or hi >= w.upper:
            raise ConfigurationError(f"no radius encloses weighted volume {volume}")
    try:
        rho = optimize.brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-14)
    except ValueError as exc:
        raise ConfigurationError(f"volume root-find failed: {exc}") from exc
    res = eigen1d.dirichlet_eigenvalue(w, rho, p, grid=grid)
    return {
        "rho": rho,
        "lambda": res.lam,
        "rayleigh": res.rayleigh,
        "ode_residual": res.ode_residual,
        "ode_residual_log_convex": eigen1d.ode_residual_nondivergence(w, p, res.lam, res.x, res.f),
        "p": p, "d": d, "volume": volume, "weight": w.to_json(),
    }


def neumann_lower_bound(Q: float, C: float, p: float, mass: float, grid: int = eigen1d.DEFAULT_GRID) -> float:
    """``C^p 2^{p/Q} lambda^D_{p,Q,R}`` with ``omega_Q R^Q = mass``."""
    if not Q > 1 or not C > 0 or not mass > 0:
        raise DomainError("need Q > 1, C > 0 and mass > 0")
    R = (mass / mw.ball_volume(Q)) ** (1.0 / Q)
    lam = eigen1d.dirichlet_eigenvalue(mw.euclidean(Q), R, p, grid=grid).lam
    return C**p * 2.0 ** (p / Q) * lam


# -- Gaussian isoperimetry with a diameter bound ----------------------------------------

XI_BRACKET = (-80.0, 80.0)


def gaussian_isoperimetric_profile(v):
    """``I_inf(v) = phi(Phi^{-1}(v))``."""
    v = np.asarray(v, dtype=float)
    b = special.ndtri(v)
    return np.exp(-0.5 * b * b) / math.sqrt(2 * math.pi)


def _log_fD(xi, v, D):
    """``log f_D(xi, v)`` in log space, using survival functions on the right half."""
    xi = np.asarray(xi, dtype=float)
    left = xi + D / 2 <= 0
    lv, l1v = math.log(v), math.log1p(-v)
    out = np.empty_like(xi)
    # left half: work with Phi
    a, c = special.log_ndtr(xi[left]), special.log_ndtr(xi[left] + D)
    b = special.ndtri_exp(np.logaddexp(l1v + a, lv + c))
    out[left] = -0.5 * b * b - c - np.log1p(-np.exp(a - c))
    # right half: work with Q = 1 - Phi
    r = ~left
    qa, qc = special.log_ndtr(-xi[r]), special.log_ndtr(-xi[r] - D)
    b = -special.ndtri_exp(np.logaddexp(l1v + qa, lv + qc))
    out[r] = -0.5 * b * b - qa - np.log1p(-np.exp(qc - qa))
    return out - 0.5 * math.log(2 * math.pi)


def gaussian_diameter_profile(D: float, v: float, bracket=XI_BRACKET, n_grid: int = 16001) -> float:
    """``I_{D,inf}(v) = inf_xi phi(b) / (Phi(xi+D) - Phi(xi))`` with ``Phi(b) = Phi(xi) + v (Phi(xi+D) - Phi(xi))``.

    Grid search over ``bracket`` followed by bounded refinement; raises if
    the minimizer sits on the edge of the bracket.
    """
    if not D > 0 or not 0 < v < 1:
        raise DomainError("need D > 0 and 0 < v < 1")
    xs = np.linspace(bracket[0], bracket[1], n_grid)
    vals = _log_fD(xs, v, D)
    k = int(np.nanargmin(vals))
    if k == 0 or k == n_grid - 1:
        raise SolverError(f"minimizer escaped the search bracket {bracket}", last_iterate=float(xs[k]))
    res = optimize.minimize_scalar(
        lambda x: float(_log_fD(np.array([x]), v, D)[0]),
        bounds=(xs[k - 1], xs[k + 1]), method="bounded", options={"xatol": 1e-12},
    )
    return float(math.exp(min(res.fun, vals[k])))


def diameter_ratio_scan(D: float, vs) -> np.ndarray:
    """``I_{D,inf}(v) / I_inf(v)`` for each ``v``."""
    vs = np.asarray(vs, dtype=float)
    return np.array([gaussian_diameter_profile(D, v) for v in vs]) / gaussian_isoperimetric_profile(vs)
