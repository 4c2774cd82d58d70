"""First Dirichlet and Neumann p-eigenvalues of weighted intervals.

The Rayleigh quotient ``int |f'|^p g / int |f|^p g`` is discretized with
continuous piecewise-quadratic elements and Gauss-Legendre quadrature of
the weight.  For ``p = 2`` the discrete problem is a generalized symmetric
eigenproblem solved by shift-invert Lanczos.  For other ``p`` the p = 2
mode is continued in ``p`` by Newton's method on the discrete
Euler-Lagrange system, bordered with the normalization ``int |f|^p g = 1``.

Dirichlet problems carry the zero condition at the right endpoint only;
the left endpoint is free (natural), which is the correct condition at
the singular end of radial weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh, spsolve

from . import model_weights as mw
from .errors import ConfigurationError, PreconditionError, SolverError

DEFAULT_GRID = 2000
DEFAULT_TOL = 1e-8
TAIL_FRACTION = 1e-18
_GAUSS = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class EigenProblem:
    weight: mw.WeightedInterval
    a: float
    b: float
    p: float = 2.0
    boundary: str = "dirichlet"
    grid: int = DEFAULT_GRID

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigurationError("p must exceed 1")
        if self.boundary not in ("dirichlet", "neumann"):
            raise ConfigurationError(f"unknown boundary condition {self.boundary!r}")
        if not self.a < self.b or not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigurationError("eigenproblems live on finite intervals (truncate first)")
        if self.grid < 8:
            raise ConfigurationError("grid too coarse")


@dataclass
class EigenResult:
    lam: float
    x: np.ndarray
    f: np.ndarray
    rayleigh: float
    ode_residual: float
    p: float
    boundary: str
    grid: int
    iterations: int = 0
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "rayleigh": self.rayleigh,
            "ode_residual": self.ode_residual,
            "grid": self.grid,
            "p": self.p,
            "boundary": self.boundary,
            "iterations": self.iterations,
        }


class _P2Space:
    """Quadratic Lagrange elements on a uniform mesh of ``[a, b]``."""

    def __init__(self, weight, a, b, n):
        self.a, self.b, self.n = a, b, n
        self.h = (b - a) / n
        self.x = np.linspace(a, b, 2 * n + 1)
        self.conn = np.column_stack([2 * np.arange(n), 2 * np.arange(n) + 1, 2 * np.arange(n) + 2])
        xi, wq = _GAUSS
        xi = 0.5 * (xi + 1.0)
        wq = 0.5 * wq
        self.B = np.column_stack([(1 - xi) * (1 - 2 * xi), 4 * xi * (1 - xi), xi * (2 * xi - 1)])
        self.D = np.column_stack([4 * xi - 3, 4 - 8 * xi, 4 * xi - 1]) / self.h
        xq = a + self.h * (np.arange(n)[:, None] + xi[None, :])
        g = np.asarray(weight.density(xq), dtype=float)
        if np.any(~np.isfinite(g)) or np.any(g < 0):
            raise PreconditionError("weight density is not finite and nonnegative on the interval")
        self.Wg = self.h * wq[None, :] * g
        rows = np.repeat(self.conn, 3, axis=1)
        cols = np.tile(self.conn, (1, 3))
        self._rows, self._cols = rows.ravel(), cols.ravel()

    def at_quad(self, u):
        loc = u[self.conn]
        return loc @ self.B.T, loc @ self.D.T

    def _assemble_vec(self, local):
        return np.bincount(self.conn.ravel(), weights=local.ravel(), minlength=self.x.size)

    def _assemble_mat(self, coef, basis):
        local = np.einsum("eq,qi,qj->eij", coef, basis, basis)
        m = self.x.size
        return sparse.csr_matrix((local.ravel(), (self._rows, self._cols)), shape=(m, m))

    def linear_matrices(self):
        ones = self.Wg
        return self._assemble_mat(ones, self.D), self._assemble_mat(ones, self.B)

    def energy(self, u, p):
        _, dU = self.at_quad(u)
        return float(np.sum(self.Wg * np.abs(dU) ** p))

    def mass(self, u, p):
        U, _ = self.at_quad(u)
        return float(np.sum(self.Wg * np.abs(U) ** p))

    def derivatives(self, u, p, reg):
        """Gradients (divided by p) and Hessians of energy and mass."""
        U, dU = self.at_quad(u)
        aU, adU = np.abs(U), np.abs(dU)
        gE = self._assemble_vec((self.Wg * adU ** (p - 2) * dU) @ self.D)
        gM = self._assemble_vec((self.Wg * aU ** (p - 2) * U) @ self.B)
        if p < 2:
            sU = reg * max(aU.max(), 1e-300)
            sdU = reg * max(adU.max(), 1e-300)
            cE = (adU**2 + sdU**2) ** ((p - 2) / 2)
            cM = (aU**2 + sU**2) ** ((p - 2) / 2)
        else:
            cE, cM = adU ** (p - 2), aU ** (p - 2)
        HE = self._assemble_mat((p - 1) * self.Wg * cE, self.D)
        HM = self._assemble_mat((p - 1) * self.Wg * cM, self.B)
        return gE, gM, HE, HM


def _truncated_interval(w: mw.WeightedInterval, a=None, b=None):
    """Finite interval carrying all but a negligible tail of the weight."""
    lo = w.lower if a is None else a
    hi = w.upper if b is None else b
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    ref = 0.5 * (lo + hi) if math.isfinite(lo + hi) else (lo + 1.0 if math.isfinite(lo) else (hi - 1.0 if math.isfinite(hi) else 0.0))
    peak = float(w.density(ref))
    grid = ref + np.concatenate([-np.logspace(-2, 3, 2000)[::-1], np.logspace(-2, 3, 2000)])
    dens = np.asarray(w.density(grid), dtype=float)
    peak = max(peak, float(np.nanmax(dens)))
    small = dens < TAIL_FRACTION * peak
    if not math.isfinite(lo):
        left = np.nonzero(small & (grid < ref))[0]
        if left.size == 0:
            raise PreconditionError("weight has no negligible left tail")
        lo = float(grid[left[-1]])
    if not math.isfinite(hi):
        right = np.nonzero(small & (grid > ref))[0]
        if right.size == 0:
            raise PreconditionError("weight has no negligible right tail")
        hi = float(grid[right[0]])
    return lo, hi


def _solve_linear(space: _P2Space, dirichlet: bool):
    K, M = space.linear_matrices()
    if dirichlet:
        K, M = K[:-1, :-1], M[:-1, :-1]
    k = 1 if dirichlet else 2
    scale = K.diagonal().max() / max(M.diagonal().max(), 1e-300)
    shift = -1e-3 * min(1.0, scale)
    # fixed start vector: ARPACK otherwise draws a random one and the last digits wander
    v0 = np.linspace(1.0, 2.0, K.shape[0])
    vals, vecs = eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=shift, which="LM", tol=0, v0=v0)
    order = np.argsort(vals)
    lam = float(vals[order[-1]])
    vec = vecs[:, order[-1]]
    if dirichlet:
        vec = np.append(vec, 0.0)
    return lam, vec


def _normalize(space, u, p, dirichlet):
    u = u / space.mass(u, p) ** (1.0 / p)
    if dirichlet and u[0] < 0:
        u = -u
    if not dirichlet and u[0] < 0:
        u = -u
    return u


def _newton(space, u, lam, p, dirichlet, tol, max_iter=60, reg=1e-7):
    """Newton on ``grad E - lam grad M = 0``, ``M = 1`` (both divided by p)."""
    free = slice(0, -1) if dirichlet else slice(None)

    def residual(u, lam):
        gE, gM, HE, HM = space.derivatives(u, p, reg)
        R = (gE - lam * gM)[free]
        return R, gE, gM, HE, HM, space.mass(u, p) - 1.0

    R, gE, gM, HE, HM, c = residual(u, lam)
    scale = max(np.abs(gE[free]).max(), 1e-300)
    for it in range(1, max_iter + 1):
        J = (HE - lam * HM)[free, :][:, free]
        col = -gM[free][:, None]
        row = p * gM[free][None, :]
        A = sparse.bmat([[J, sparse.csr_matrix(col)], [sparse.csr_matrix(row), None]], format="csc")
        rhs = -np.concatenate([R, [c]])
        step = spsolve(A, rhs)
        if not np.all(np.isfinite(step)):
            raise SolverError("singular Newton system", last_iterate=(u, lam))
        du, dlam = step[:-1], step[-1]
        norm0 = np.linalg.norm(R) / scale + abs(c)
        t = 1.0
        while True:
            u_new = u.copy()
            u_new[free] += t * du
            lam_new = lam + t * dlam
            R_new, gE, gM, HE, HM, c_new = residual(u_new, lam_new)
            norm1 = np.linalg.norm(R_new) / scale + abs(c_new)
            if norm1 < norm0 or t < 1e-4:
                break
            t *= 0.5
        u, lam, R, c = u_new, lam_new, R_new, c_new
        # the residual stalls at a roundoff floor near 1e-10 relative
        if np.abs(R).max() <= 1e-7 * scale and abs(c) <= tol and abs(t * dlam) <= tol * abs(lam):
            return u, lam, it
    raise SolverError(f"Newton did not converge in {max_iter} iterations", last_iterate=(u, lam))


def solve(problem: EigenProblem, tol: float = DEFAULT_TOL) -> EigenResult:
    dirichlet = problem.boundary == "dirichlet"
    space = _P2Space(problem.weight, problem.a, problem.b, problem.grid)
    lam, u = _solve_linear(space, dirichlet)
    u = _normalize(space, u, 2.0, dirichlet)
    iterations = 0
    p_target = problem.p
    if p_target != 2.0:
        n_steps = max(1, int(math.ceil(abs(p_target - 2.0) / 0.25)))
        for p in np.linspace(2.0, p_target, n_steps + 1)[1:]:
            u = _normalize(space, u, p, dirichlet)
            lam = space.energy(u, p) / space.mass(u, p)
            u, lam, its = _newton(space, u, lam, p, dirichlet, min(tol, 1e-10))
            iterations += its
        u = _normalize(space, u, p_target, dirichlet)
    p = p_target
    rayleigh = space.energy(u, p) / space.mass(u, p)
    if abs(rayleigh - lam) > tol * abs(lam):
        raise SolverError(
            f"Rayleigh quotient {rayleigh} disagrees with eigenvalue {lam}", last_iterate=(u, lam)
        )
    res = ode_residual(problem.weight, p, lam, space.x, u)
    return EigenResult(
        lam=float(lam), x=space.x, f=u, rayleigh=float(rayleigh), ode_residual=res,
        p=p, boundary=problem.boundary, grid=problem.grid, iterations=iterations,
        info={"interval": [problem.a, problem.b], "weight": problem.weight.to_json()},
    )


def dirichlet_eigenvalue(w: mw.WeightedInterval, rho: float, p: float = 2.0,
                         grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL) -> EigenResult:
    """First eigenvalue on ``(lower, rho)`` with ``f(rho) = 0``."""
    if not w.lower < rho <= w.upper:
        raise ConfigurationError(f"rho={rho} outside ({w.lower}, {w.upper}]")
    a, _ = _truncated_interval(w, b=rho)
    return solve(EigenProblem(w, a, rho, p, "dirichlet", grid), tol)


def neumann_eigenvalue(w: mw.WeightedInterval, p: float = 2.0,
                       grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL) -> EigenResult:
    """First nontrivial eigenvalue under ``int |f|^{p-2} f g = 0``."""
    if not math.isfinite(w.total_mass):
        raise PreconditionError("Neumann eigenvalue needs a weight of finite total mass")
    a, b = _truncated_interval(w)
    return solve(EigenProblem(w, a, b, p, "neumann", grid), tol)


def _log_density_slope(w, x):
    """``(log g)'`` by a centred difference with a relative step."""
    step = 1e-6 * np.maximum(1.0, np.abs(x))
    gp = np.asarray(w.density(x + step), dtype=float)
    gm = np.asarray(w.density(x - step), dtype=float)
    return (np.log(gp) - np.log(gm)) / (2 * step)


def ode_residual(w: mw.WeightedInterval, p: float, lam: float, x, f) -> float:
    """Discrete ``L^1`` norm of ``(|f'|^{p-2} f' g)' + lam g |f|^{p-2} f``.

    ``x`` must be a uniform grid; fluxes are taken at cell midpoints and the
    residual at interior nodes.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    h = np.diff(x)
    if x.size < 3 or np.any(h <= 0):
        raise PreconditionError("ode residual needs an increasing grid of at least 3 points")
    mid = 0.5 * (x[:-1] + x[1:])
    df = np.diff(f) / h
    flux = np.abs(df) ** (p - 2) * df * np.asarray(w.density(mid), dtype=float)
    hc = 0.5 * (h[:-1] + h[1:])
    xi = x[1:-1]
    r = (flux[1:] - flux[:-1]) / hc + lam * np.asarray(w.density(xi), dtype=float) * np.abs(f[1:-1]) ** (p - 2) * f[1:-1]
    return float(np.sum(np.abs(r) * hc))


def ode_residual_nondivergence(w: mw.WeightedInterval, p: float, lam: float, x, f, trim: float = 0.05) -> float:
    """``L^1`` norm of ``(|f'|^{p-2}f')' + |f'|^{p-2}f' (log g)' + lam |f|^{p-2} f`` away from the ends.

    The outer ``trim`` fraction of the grid on each side is skipped, where
    ``(log g)'`` may blow up.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    h = np.diff(x)
    df = np.diff(f) / h
    w_mid = np.abs(df) ** (p - 2) * df
    hc = 0.5 * (h[:-1] + h[1:])
    xi = x[1:-1]
    w_node = 0.5 * (w_mid[1:] + w_mid[:-1])
    r = (w_mid[1:] - w_mid[:-1]) / hc + w_node * _log_density_slope(w, xi) + lam * np.abs(f[1:-1]) ** (p - 2) * f[1:-1]
    k = int(trim * xi.size)
    keep = slice(k, xi.size - k)
    return float(np.sum(np.abs(r[keep]) * hc[keep]))


def half_interval_check(Q: float, r: float, p: float = 2.0, grid: int = DEFAULT_GRID):
    """Neumann eigenvalue of the double cone on ``[0, 2r]`` and Dirichlet eigenvalue of ``[0, r)``.

    The two sides come from independent solves: a Neumann problem with the
    double-cone weight and a Dirichlet problem with the cone weight
    ``Q omega_Q t^{Q-1}``.
    """
    neumann = neumann_eigenvalue(mw.double_cone(Q, r), p, grid=grid)
    half = dirichlet_eigenvalue(mw.euclidean(Q), r, p, grid=grid)
    return neumann.lam, half.lam


def faber_krahn_constant(N: float, p: float = 2.0, grid: int = DEFAULT_GRID) -> float:
    """Dirichlet p-eigenvalue of the unit-volume ball of the cone ``N omega_N t^{N-1} dt``."""
    rho1 = mw.ball_volume(N) ** (-1.0 / N)
    return dirichlet_eigenvalue(mw.euclidean(N), rho1, p, grid=grid).lam


def sign_changes(f) -> int:
    s = np.sign(np.asarray(f)[np.abs(f) > 1e-12 * np.abs(f).max()])
    return int(np.count_nonzero(s[1:] != s[:-1]))
