"""Weighted graphs standing in for metric measure spaces.

Chain generators put vertices on the nodes ``a + i h`` of a uniform
partition of the model interval.  Each vertex carries the exact weighted
mass of its dual cell; the edge ``(i, i+1)`` has length ``h`` and
conductance equal to the continuum density at the edge midpoint, so a
graph cut reproduces the perimeter ``g(r)`` of a half-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import model_weights as mw
from .errors import ConfigurationError, PreconditionError
from .jsonio import digest


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    masses: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    conductances: np.ndarray
    metadata: dict = field(default_factory=dict)
    positions: np.ndarray = None

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(self.lengths, dtype=float)
        cond = np.asarray(self.conductances, dtype=float)
        n = masses.size
        if n == 0 or np.any(masses <= 0):
            raise PreconditionError("vertex masses must be positive")
        if lengths.shape != (edges.shape[0],) or cond.shape != lengths.shape:
            raise PreconditionError("one length and one conductance per edge")
        if np.any(lengths <= 0) or np.any(cond <= 0):
            raise PreconditionError("edge lengths and conductances must be positive")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise PreconditionError("edge endpoint out of range")
        if n > 1:
            adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
            if connected_components(adj, directed=False)[0] != 1:
                raise PreconditionError("space must be connected")
        for name, val in (("masses", masses), ("edges", edges), ("lengths", lengths), ("conductances", cond)):
            object.__setattr__(self, name, val)
        if self.positions is not None:
            object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))

    @property
    def n_vertices(self) -> int:
        return self.masses.size

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def is_chain(self) -> bool:
        """Path graph on increasing 1D positions carrying its continuum weight."""
        n = self.n_vertices
        return (
            "weight" in self.metadata and self.positions is not None and self.positions.shape == (n,)
            and self.edges.shape[0] == n - 1 and np.array_equal(self.edges[:, 1] - self.edges[:, 0], np.ones(n - 1))
            and np.array_equal(self.edges[:, 0], np.arange(n - 1)) and bool(np.all(np.diff(self.positions) > 0))
        )

    def metadata_hash(self) -> str:
        return digest(self.metadata)

    def to_json(self) -> dict:
        meta = dict(self.metadata)
        if self.positions is not None:
            meta["positions"] = self.positions.tolist()
        return {
            "vertices": self.masses.tolist(),
            "edges": [
                [int(i), int(j), float(l), float(c)]
                for (i, j), l, c in zip(self.edges, self.lengths, self.conductances)
            ],
            "metadata": meta,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DiscreteSpace":
        meta = dict(d.get("metadata", {}))
        positions = meta.pop("positions", None)
        edges = np.asarray(d["edges"], dtype=float).reshape(-1, 4)
        return cls(
            np.asarray(d["vertices"], dtype=float),
            edges[:, :2].astype(np.int64),
            edges[:, 2],
            edges[:, 3],
            meta,
            positions,
        )

    def weight(self) -> mw.WeightedInterval:
        """Continuum weight of a chain generator."""
        return mw.weight_from_json(self.metadata["weight"])

    def target(self) -> mw.WeightedInterval:
        """Model interval the space is rearranged into."""
        return mw.weight_from_json(self.metadata["target"])


def _indicator(s: DiscreteSpace, E) -> np.ndarray:
    E = np.asarray(E)
    if E.dtype == bool:
        if E.shape != (s.n_vertices,):
            raise PreconditionError("level set mask has the wrong length")
        return E
    mask = np.zeros(s.n_vertices, dtype=bool)
    mask[E.astype(np.int64)] = True
    return mask


def graph_perimeter(s: DiscreteSpace, E) -> float:
    """Total conductance of edges leaving ``E`` (boolean mask or index list)."""
    mask = _indicator(s, E)
    cut = mask[s.edges[:, 0]] != mask[s.edges[:, 1]]
    return float(s.conductances[cut].sum())


def _check_values(s: DiscreteSpace, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (s.n_vertices,):
        raise PreconditionError(f"expected {s.n_vertices} vertex values, got shape {u.shape}")
    return u


def dirichlet_energy(s: DiscreteSpace, u, p: float) -> float:
    """``sum_edges c * l * |du / l|^p``."""
    if not p > 1:
        raise PreconditionError("p-energy needs p > 1")
    u = _check_values(s, u)
    du = u[s.edges[:, 1]] - u[s.edges[:, 0]]
    return float(np.sum(s.conductances * s.lengths * np.abs(du / s.lengths) ** p))


def superlevel_perimeters(s: DiscreteSpace, u):
    """Distinct levels ``t_i`` and ``Per({u > t_i})`` for each of them."""
    u = _check_values(s, u)
    levels, inv = np.unique(u, return_inverse=True)
    a, b = inv[s.edges[:, 0]], inv[s.edges[:, 1]]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    # edge (a, b) is cut by {u > t_i} exactly for lo <= i < hi
    acc = np.zeros(levels.size + 1)
    np.add.at(acc, lo, s.conductances)
    np.add.at(acc, hi, -s.conductances)
    return levels, np.cumsum(acc)[:-1]


def total_variation(s: DiscreteSpace, u) -> float:
    """Coarea sum ``sum_i (t_{i+1} - t_i) Per({u > t_i})``."""
    levels, per = superlevel_perimeters(s, u)
    if levels.size < 2:
        return 0.0
    return float(np.sum(np.diff(levels) * per[:-1]))


# -- generators --------------------------------------------------------------


def chain(weight: mw.WeightedInterval, a: float, b: float, resolution: int, metadata: dict) -> DiscreteSpace:
    """Vertex-centred chain of ``resolution`` cells on ``[a, b]``."""
    if resolution < 16:
        raise ConfigurationError("resolution must be at least 16")
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ConfigurationError(f"chain needs a finite interval, got [{a}, {b}]")
    n = int(resolution)
    x = np.linspace(a, b, n + 1)
    h = (b - a) / n
    dual = np.concatenate([[a], 0.5 * (x[:-1] + x[1:]), [b]])
    masses = np.array([weight.mass_between(lo, hi) for lo, hi in zip(dual[:-1], dual[1:])])
    edges = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    cond = np.asarray(weight.density(0.5 * (x[:-1] + x[1:])), dtype=float)
    meta = dict(metadata)
    meta.setdefault("weight", weight.to_json())
    meta.update({"interval": [a, b], "resolution": n, "spacing": h})
    return DiscreteSpace(masses, edges, np.full(n, h), cond, meta, x)


def _sphere_chain(N, resolution, diam=math.pi):
    if not 0 < diam <= math.pi:
        raise ConfigurationError("suspension diameter must lie in (0, pi]")
    w = mw.sphere(N)
    if diam < math.pi:
        w = w.restrict(math.pi / 2 - diam / 2, math.pi / 2 + diam / 2)
        w = w.scaled(1.0 / w.total_mass)
    meta = {
        "model": "sphere" if diam == math.pi else "suspension",
        "N": N, "dimension": N, "diameter": diam,
        "target": mw.sphere(N).to_json(),
        "constant": mw.bbg_factor(N, diam),
        "constant_source": f"bbg_factor(N={N}, D={diam})",
    }
    return chain(w, w.lower, w.upper, resolution, meta)


def _cone_chain(N, avr, radius, resolution, model="cone"):
    w = mw.euclidean(N, avr)
    meta = {
        "model": model, "N": N, "dimension": N, "avr": avr, "radius": radius,
        "target": mw.euclidean(N).to_json(),
        "constant": avr ** (1.0 / N),
        "constant_source": f"AVR^(1/N) with AVR={avr}, N={N}",
    }
    return chain(w, 0.0, radius, resolution, meta)


def _line_chain(weight, half_width, resolution, meta):
    return chain(weight, -half_width, half_width, resolution, meta)


def grid2d(resolution: int) -> DiscreteSpace:
    """Unit-square lattice: masses ``h^2``, edge length and conductance ``h``.

    Cut weights give the anisotropic (l1) perimeter, which dominates the
    Euclidean one, so only qualitative comparisons are meaningful.
    """
    n = int(resolution)
    if n < 16:
        raise ConfigurationError("resolution must be at least 16")
    h = 1.0 / n
    idx = np.arange(n * n).reshape(n, n)
    right = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    down = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    edges = np.vstack([right, down])
    centers = (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(centers, centers)
    meta = {
        "model": "grid2d", "dimension": 2, "avr": 1.0, "resolution": n, "spacing": h,
        "target": mw.euclidean(2).to_json(), "constant": 1.0,
        "constant_source": "Euclidean isoperimetry in the plane (l1 cuts dominate)",
    }
    return DiscreteSpace(
        np.full(n * n, h * h), edges, np.full(len(edges), h), np.full(len(edges), h),
        meta, np.column_stack([X.ravel(), Y.ravel()]),
    )


def generate(model: dict) -> DiscreteSpace:
    """Build a space from a descriptor such as ``{"model": "sphere", "N": 2, "resolution": 1000}``."""
    d = dict(model)
    kind = d.get("model")
    res = int(d.get("resolution", 1000))
    try:
        if kind == "sphere":
            return _sphere_chain(float(d["N"]), res)
        if kind == "suspension":
            return _sphere_chain(float(d["N"]), res, float(d["diameter"]))
        if kind == "euclidean":
            return _cone_chain(float(d["N"]), 1.0, float(d.get("radius", 1.0)), res, "euclidean")
        if kind == "cone":
            return _cone_chain(float(d["N"]), float(d["avr"]), float(d.get("radius", 1.0)), res)
        if kind == "sector":
            aperture = float(d["aperture"])
            if not 0 < aperture <= 2 * math.pi:
                raise ConfigurationError("sector aperture must lie in (0, 2 pi]")
            space = _cone_chain(2.0, aperture / (2 * math.pi), float(d.get("radius", 1.0)), res, "sector")
            space.metadata["aperture"] = aperture
            return space
        if kind == "gaussian":
            L = float(d.get("half_width", 10.0))
            meta = {"model": "gaussian", "target": mw.gaussian().to_json(), "constant": 1.0,
                    "constant_source": "Gaussian isoperimetry", "half_width": L}
            return _line_chain(mw.gaussian(), L, res, meta)
        if kind == "exponential":
            h = float(d.get("h", 1.0))
            L = float(d.get("half_width", 10.0))
            meta = {"model": "exponential", "h": h, "target": mw.exponential(1.0).to_json(),
                    "constant": h, "constant_source": f"volume entropy h={h}", "half_width": L}
            return _line_chain(mw.exponential(h), L, res, meta)
        if kind == "double_cone":
            Q, r = float(d["Q"]), float(d["r"])
            w = mw.double_cone(Q, r)
            meta = {"model": "double_cone", "Q": Q, "r": r, "target": w.to_json(), "constant": 1.0,
                    "constant_source": "identity rearrangement"}
            return chain(w, 0.0, 2 * r, res, meta)
        if kind == "uniform":
            a, b = float(d.get("lower", 0.0)), float(d.get("upper", 1.0))
            w = mw.uniform(a, b)
            meta = {"model": "uniform", "target": w.to_json(), "constant": 1.0,
                    "constant_source": "identity rearrangement"}
            return chain(w, a, b, res, meta)
        if kind == "grid2d":
            return grid2d(res)
    except KeyError as exc:
        raise ConfigurationError(f"model {kind!r} is missing parameter {exc}") from exc
    raise ConfigurationError(f"unknown model {kind!r}")
