"""Graph total variation, antisymmetric edge fields and their pairing.

The primal total variation of u on a region A sums w_xy |u(x) - u(y)| over
edges with both endpoints in A.  The same number is recovered as the
supremum of the integration-by-parts pairing against unit-bounded
antisymmetric edge fields supported in A; the maximizer is the sign field
of u, so primal and dual values agree to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AntisymmetryViolated, InvalidParameter
from .space import MetricMeasureSpace, region_mask, vertex_values


@dataclass(frozen=True)
class VertexFunction:
    """A real function on the vertices of a fixed space."""

    space: MetricMeasureSpace
    values: np.ndarray

    def __post_init__(self):
        arr = vertex_values(self.space, self.values)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_mapping(cls, space, mapping) -> "VertexFunction":
        return cls(space, vertex_values(space, dict(mapping)))

    def __call__(self, vertex) -> float:
        return float(self.values[self.space.index(vertex)])

    def as_mapping(self) -> dict:
        return {vid: float(v) for vid, v in zip(self.space.ids, self.values)}


@dataclass(frozen=True)
class TVValue:
    """Total variation together with the region it was measured on."""

    value: float
    region: tuple

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class Derivation:
    """Bounded antisymmetric edge field F(x, y) = -F(y, x).

    The field is stored on the canonical orientation of each edge; the
    declared support (a vertex set, None meaning everything) must contain
    both endpoints of every edge carrying a nonzero value.
    """

    space: MetricMeasureSpace
    field: np.ndarray
    support: tuple | None = None

    def __post_init__(self):
        arr = np.asarray(self.field, dtype=float)
        if arr.shape != (self.space.m,):
            raise InvalidParameter(
                f"expected one value per edge ({self.space.m}), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidParameter("edge field must be finite")
        if self.support is not None:
            inside = region_mask(self.space, self.support)
            ok = inside[self.space.edge_u] & inside[self.space.edge_v]
            if np.any(arr[~ok] != 0.0):
                raise InvalidParameter("field does not vanish outside its support")
            object.__setattr__(
                self, "support", tuple(self.space.ids[i] for i in np.flatnonzero(inside))
            )
        arr.setflags(write=False)
        object.__setattr__(self, "field", arr)

    @classmethod
    def from_mapping(cls, space, mapping, support=None) -> "Derivation":
        """Build from oriented-pair values, checking antisymmetry exactly."""
        field = np.zeros(space.m)
        assigned = {}
        for (x, y), val in mapping.items():
            e, sign = space.oriented_edge(x, y)
            canonical = sign * float(val)
            if e in assigned and assigned[e] != canonical:
                raise AntisymmetryViolated(
                    f"edge ({x!r}, {y!r}): F(x,y) != -F(y,x)"
                )
            assigned[e] = canonical
            field[e] = canonical
        return cls(space, field, support)

    @property
    def bound(self) -> float:
        return float(np.max(np.abs(self.field))) if self.field.size else 0.0

    def __call__(self, x, y) -> float:
        e, sign = self.space.oriented_edge(x, y)
        return float(sign * self.field[e])


def _edges_inside(space: MetricMeasureSpace, region) -> np.ndarray:
    mask = region_mask(space, region)
    return np.flatnonzero(mask[space.edge_u] & mask[space.edge_v])


def _region_ids(space, region):
    if region is None:
        return tuple(space.ids)
    return tuple(space.ids[i] for i in np.flatnonzero(region_mask(space, region)))


def total_variation(u, region=None) -> TVValue:
    """Weighted sum of jumps over the edges inside the region."""
    space = u.space
    values = u.values
    sel = _edges_inside(space, region)
    jumps = np.abs(values[space.edge_u[sel]] - values[space.edge_v[sel]])
    return TVValue(float((space.edge_w[sel] * jumps).sum()), _region_ids(space, region))


def tv_of_values(space: MetricMeasureSpace, values: np.ndarray, region=None) -> float:
    """Array-level total variation used by the solvers."""
    sel = _edges_inside(space, region)
    jumps = np.abs(values[space.edge_u[sel]] - values[space.edge_v[sel]])
    return float((space.edge_w[sel] * jumps).sum())


def divergence(F: Derivation) -> VertexFunction:
    """div F(x) = (1/mu(x)) * sum over neighbors y of w_xy F(x, y)."""
    space = F.space
    out = np.zeros(space.n)
    flow = space.edge_w * F.field
    np.add.at(out, space.edge_u, flow)
    np.add.at(out, space.edge_v, -flow)
    return VertexFunction(space, out / space.mu)


def pairing(u, F: Derivation) -> float:
    """Integral of u against div F with respect to the vertex measure."""
    space = u.space
    if F.space is not space:
        raise InvalidParameter("function and field live on different spaces")
    div = divergence(F)
    return float((space.mu * u.values * div.values).sum())


def sign_field(u, region=None) -> Derivation:
    """Analytic maximizer of the pairing: the sign of the jump per edge."""
    space = u.space
    field = np.zeros(space.m)
    sel = _edges_inside(space, region)
    field[sel] = np.sign(u.values[space.edge_u[sel]] - u.values[space.edge_v[sel]])
    support = None if region is None else _region_ids(space, region)
    return Derivation(space, field, support)


def dual_total_variation(u, region=None) -> TVValue:
    """Supremum of the pairing over unit fields supported in the region.

    Finite-dimensional duality makes the supremum attained at the sign
    field, so this agrees with ``total_variation`` up to roundoff.
    """
    return TVValue(pairing(u, sign_field(u, region)), _region_ids(u.space, region))
