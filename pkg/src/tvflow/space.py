"""Finite weighted graphs viewed as metric measure spaces.

A space is a connected graph with strictly positive vertex measure ``mu``,
edge conductances ``w`` and edge lengths ``len``.  The metric is the
shortest-path distance over the lengths.  On top of that the module
provides open balls, the doubling constant of the measure, and a
per-function Poincare ratio used as diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (
    DisconnectedGraph,
    NonpositiveParameter,
    UnknownVertex,
    ValidationError,
)


@dataclass(frozen=True)
class MetricMeasureSpace:
    """Immutable vertex/edge arrays plus the precomputed all-pairs metric.

    Vertices are addressed by string id externally and by their index in
    ``ids`` internally.  Edges are stored once in a canonical orientation
    ``edge_u[e] -> edge_v[e]`` with ``edge_u[e] < edge_v[e]``.
    """

    ids: tuple
    mu: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    edge_len: np.ndarray
    dist: np.ndarray
    _index: dict = field(repr=False, default_factory=dict)
    _edge_lookup: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return len(self.edge_u)

    def index(self, vertex) -> int:
        """Internal index of a vertex id (ints pass through unchecked)."""
        if isinstance(vertex, (int, np.integer)):
            if not 0 <= vertex < self.n:
                raise UnknownVertex(f"vertex index {vertex} out of range")
            return int(vertex)
        try:
            return self._index[vertex]
        except KeyError:
            raise UnknownVertex(f"unknown vertex {vertex!r}") from None

    def indices(self, vertices) -> np.ndarray:
        return np.array(sorted(self.index(v) for v in vertices), dtype=int)

    def oriented_edge(self, x, y):
        """Return ``(edge index, sign)`` for the oriented pair (x, y)."""
        i, j = self.index(x), self.index(y)
        try:
            return self._edge_lookup[(i, j)]
        except KeyError:
            raise ValidationError(f"({x!r}, {y!r}) is not an edge") from None

    def total_mass(self, region=None) -> float:
        if region is None:
            return float(self.mu.sum())
        return float(self.mu[region_indices(self, region)].sum())


def region_indices(space: MetricMeasureSpace, region) -> np.ndarray:
    """Normalize a region (ids, indices or None for all) to an index array."""
    if region is None:
        return np.arange(space.n)
    arr = np.asarray(list(region))
    if arr.size == 0:
        return np.array([], dtype=int)
    if arr.dtype.kind in "iu":
        out = arr.astype(int)
        if out.min() < 0 or out.max() >= space.n:
            raise UnknownVertex("region index out of range")
        return np.unique(out)
    return space.indices(region)


def region_mask(space: MetricMeasureSpace, region) -> np.ndarray:
    mask = np.zeros(space.n, dtype=bool)
    mask[region_indices(space, region)] = True
    return mask


def build_space(vertex_measures, edge_list) -> MetricMeasureSpace:
    """Assemble a space from ``{id: mu}`` and ``(u, v, w, len)`` tuples.

    The all-pairs metric is computed once with Floyd-Warshall and
    symmetrized; the construction fails on empty, nonpositive,
    self-looped, duplicated or disconnected input.
    """
    items = list(vertex_measures.items())
    if not items:
        raise NonpositiveParameter("vertex list is empty")
    ids = tuple(str(k) for k, _ in items)
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate vertex ids")
    mu = np.array([float(v) for _, v in items])
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise NonpositiveParameter("vertex measures must be positive and finite")

    index = {vid: i for i, vid in enumerate(ids)}
    eu, ev, ew, el = [], [], [], []
    seen = set()
    for entry in edge_list:
        u, v, w, length = entry
        if u not in index or v not in index:
            raise UnknownVertex(f"edge ({u!r}, {v!r}) references an unknown vertex")
        i, j = index[u], index[v]
        if i == j:
            raise ValidationError(f"self-loop at {u!r}")
        if (min(i, j), max(i, j)) in seen:
            raise ValidationError(f"duplicate edge ({u!r}, {v!r})")
        seen.add((min(i, j), max(i, j)))
        w = float(w)
        length = float(length)
        if not (np.isfinite(w) and np.isfinite(length)) or w <= 0 or length <= 0:
            raise NonpositiveParameter(f"edge ({u!r}, {v!r}) needs positive w and len")
        if i > j:
            i, j = j, i
        eu.append(i)
        ev.append(j)
        ew.append(w)
        el.append(length)

    n = len(ids)
    edge_u = np.array(eu, dtype=int)
    edge_v = np.array(ev, dtype=int)
    edge_w = np.array(ew)
    edge_len = np.array(el)

    if n > 1:
        adj = csr_matrix((edge_len, (edge_u, edge_v)), shape=(n, n))
        adj = adj + adj.T
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise DisconnectedGraph(f"graph has {ncomp} components")
        dist = shortest_path(adj, method="FW", directed=False)
        dist = np.minimum(dist, dist.T)
    else:
        dist = np.zeros((1, 1))

    lookup = {}
    for e in range(len(edge_u)):
        lookup[(int(edge_u[e]), int(edge_v[e]))] = (e, 1.0)
        lookup[(int(edge_v[e]), int(edge_u[e]))] = (e, -1.0)

    for arr in (mu, edge_u, edge_v, edge_w, edge_len, dist):
        arr.setflags(write=False)
    return MetricMeasureSpace(
        ids=ids,
        mu=mu,
        edge_u=edge_u,
        edge_v=edge_v,
        edge_w=edge_w,
        edge_len=edge_len,
        dist=dist,
        _index=index,
        _edge_lookup=lookup,
    )


@dataclass(frozen=True)
class Domain:
    """Nested vertex sets: the core ``omega`` inside the halo ``omega_star``.

    The halo must absorb every edge leaving the core, the discrete analog
    of compact containment; the boundary ring is the set difference.
    """

    space: MetricMeasureSpace
    omega: np.ndarray
    omega_star: np.ndarray

    def __post_init__(self):
        om = region_indices(self.space, self.omega)
        os_ = region_indices(self.space, self.omega_star)
        if not np.all(np.isin(om, os_)):
            raise ValidationError("domain nesting: omega not inside omega_star")
        in_om = np.zeros(self.space.n, dtype=bool)
        in_om[om] = True
        in_os = np.zeros(self.space.n, dtype=bool)
        in_os[os_] = True
        touches = in_om[self.space.edge_u] | in_om[self.space.edge_v]
        inside = in_os[self.space.edge_u] & in_os[self.space.edge_v]
        if np.any(touches & ~inside):
            raise ValidationError(
                "domain nesting: an edge incident to omega leaves omega_star"
            )
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "omega_star", os_)
        om.setflags(write=False)
        os_.setflags(write=False)

    @property
    def ring(self) -> np.ndarray:
        return np.setdiff1d(self.omega_star, self.omega)

    @property
    def omega_ids(self):
        return tuple(self.space.ids[i] for i in self.omega)

    @property
    def ring_ids(self):
        return tuple(self.space.ids[i] for i in self.ring)


@dataclass(frozen=True)
class Ball:
    """Open metric ball: strictly closer to the center than the radius."""

    space: MetricMeasureSpace
    center: int
    radius: float
    members: np.ndarray

    @property
    def member_ids(self):
        return tuple(self.space.ids[i] for i in self.members)

    def measure(self) -> float:
        return float(self.space.mu[self.members].sum())


def ball(space: MetricMeasureSpace, x, r: float) -> Ball:
    """Open ball ``{y : d(x, y) < r}``; the center always belongs to it."""
    if r <= 0:
        raise NonpositiveParameter("ball radius must be positive")
    i = space.index(x)
    members = np.flatnonzero(space.dist[i] < r)
    members.setflags(write=False)
    return Ball(space=space, center=i, radius=float(r), members=members)


def doubling_constant(space: MetricMeasureSpace) -> float:
    """Least c with mu(B_2r) <= c mu(B_r) over all centers and radii.

    mu(B_r(x)) is a piecewise-constant function of r whose pieces are the
    intervals between consecutive values of {d(x, .)} and {d(x, .)/2}, and
    it is constant up to and including the right endpoint of each piece.
    Evaluating the ratio at those finitely many right endpoints therefore
    realizes the supremum exactly.
    """
    best = 1.0
    for i in range(space.n):
        d = space.dist[i]
        positive = np.unique(d[d > 0])
        if positive.size == 0:
            continue
        radii = np.unique(np.concatenate([positive, positive / 2.0]))
        for r in radii:
            inner = float(space.mu[d < r].sum())
            outer = float(space.mu[d < 2.0 * r].sum())
            best = max(best, outer / inner)
    return best


def pointwise_slope(space: MetricMeasureSpace, values: np.ndarray) -> np.ndarray:
    """Graph upper-gradient analog: max incident difference quotient."""
    g = np.zeros(space.n)
    quot = np.abs(values[space.edge_u] - values[space.edge_v]) / space.edge_len
    np.maximum.at(g, space.edge_u, quot)
    np.maximum.at(g, space.edge_v, quot)
    return g


def _candidate_radii(distances: np.ndarray) -> np.ndarray:
    """Per-center radii probing every ball: membership-change values plus a
    strictly-inside sample of each constancy interval (capped at twice the
    largest distance)."""
    positive = np.unique(distances[distances > 0])
    if positive.size == 0:
        return np.array([])
    breaks = np.concatenate([[0.0], positive, [2.0 * positive[-1]]])
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    return np.unique(np.concatenate([positive, mids]))


def poincare_ratio(space: MetricMeasureSpace, u, dilation: float = 1.0) -> float:
    """Worst ratio of mean oscillation to scaled mean slope over all balls.

    For each center the candidate radii enumerate every distinct ball with
    a representative radius per constancy interval.  The ratio is 0 when
    numerator and denominator both vanish and infinite when only the
    denominator does; the result is the least constant making the (1,1)
    mean-oscillation inequality hold for this function at this dilation.
    """
    if dilation < 1.0:
        raise NonpositiveParameter("dilation factor must be >= 1")
    values = vertex_values(space, u)
    g = pointwise_slope(space, values)
    mu = space.mu
    worst = 0.0
    for i in range(space.n):
        d = space.dist[i]
        for rho in _candidate_radii(d):
            inner = d < rho
            mass = mu[inner].sum()
            mean = float((mu[inner] * values[inner]).sum() / mass)
            osc = float((mu[inner] * np.abs(values[inner] - mean)).sum() / mass)
            outer = d < dilation * rho
            omass = mu[outer].sum()
            slope_mean = float((mu[outer] * g[outer]).sum() / omass)
            denom = rho * slope_mean
            if denom == 0.0:
                if osc > 1e-14 * (1.0 + np.abs(values).max()):
                    return float("inf")
                continue
            worst = max(worst, osc / denom)
    return worst


def vertex_values(space: MetricMeasureSpace, u) -> np.ndarray:
    """Coerce a VertexFunction, mapping or array to an (n,) value array."""
    if isinstance(u, dict):
        out = np.empty(space.n)
        filled = np.zeros(space.n, dtype=bool)
        for k, v in u.items():
            i = space.index(k)
            out[i] = float(v)
            filled[i] = True
        if not filled.all():
            raise ValidationError("coverage: function must assign every vertex")
        values = out
    else:
        values = getattr(u, "values", u)
    arr = np.asarray(values, dtype=float)
    if arr.shape != (space.n,):
        raise ValidationError(f"expected {space.n} vertex values, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("vertex values must be finite")
    return arr
