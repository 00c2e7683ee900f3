"""Independent reference solutions for the total variation flow.

Implicit Euler time stepping (minimizing movements) where every step is a
certified graph ROF solve, the closed-form dynamics of a free two-vertex
graph, and a brute-force grid minimizer for tiny problems.  These provide
the ground truth the space-time minimizers are compared against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge, InvalidOrder, NonpositiveParameter
from .solvers import rof_prox
from .space import Domain, vertex_values
from .timefn import SpaceTimeFunction, TimeGrid
from .tv import VertexFunction


@dataclass(frozen=True)
class Trajectory:
    """Reference trajectory with the method that produced it."""

    function: SpaceTimeFunction
    method: str
    inner_gap: float = 0.0

    @property
    def grid(self) -> TimeGrid:
        return self.function.grid

    @property
    def slices(self) -> np.ndarray:
        return self.function.slices


def rof_step(
    u_prev,
    dt: float,
    domain: Domain,
    tol: float = 1e-12,
    max_iter: int = 200000,
) -> VertexFunction:
    """One implicit Euler step of the flow.

    Minimizes TV(w; omega_star) + (1/(2 dt)) ||w - u_prev||^2 over vertex
    functions matching u_prev on the boundary ring; the ring therefore
    carries the Dirichlet datum throughout a flow.
    """
    if dt <= 0:
        raise NonpositiveParameter("time step must be positive")
    space = domain.space
    prev = vertex_values(space, u_prev)
    m_diag = space.mu / dt
    out, _ = rof_prox(
        space,
        region=domain.omega_star,
        free=domain.omega,
        fixed_values=prev,
        m_diag_full=m_diag,
        target_full=prev,
        beta_scale=1.0,
        tol=tol,
        max_iter=max_iter,
    )
    return VertexFunction(space, out)


def minimizing_movements(
    u0,
    grid: TimeGrid,
    domain: Domain,
    tol: float = 1e-12,
    max_iter: int = 200000,
) -> Trajectory:
    """Iterated implicit Euler steps from the datum."""
    space = domain.space
    slices = np.empty((grid.steps + 1, space.n))
    slices[0] = vertex_values(space, u0)
    current = VertexFunction(space, slices[0])
    for k in range(1, grid.steps + 1):
        current = rof_step(current, grid.dt, domain, tol=tol, max_iter=max_iter)
        slices[k] = current.values
    return Trajectory(
        function=SpaceTimeFunction(space, grid, slices),
        method="mm",
        inner_gap=tol,
    )


def two_point_analytic(mu_a: float, mu_b: float, w: float, u0, t):
    """Closed-form free flow of a single edge from ordered data (alpha, beta).

    The two values approach each other linearly, meet at
    t* = (alpha - beta) / (w (1/mu_a + 1/mu_b)) at the weighted mean, and
    stay there.  ``t`` may be a scalar or an array.
    """
    alpha, beta = float(u0[0]), float(u0[1])
    if alpha < beta:
        raise InvalidOrder("pass the two-point datum as (larger, smaller)")
    if min(mu_a, mu_b, w) <= 0:
        raise NonpositiveParameter("measures and conductance must be positive")
    t = np.asarray(t, dtype=float)
    if alpha == beta:
        flat = np.full_like(t, alpha)
        return flat, flat.copy()
    t_meet = (alpha - beta) / (w * (1.0 / mu_a + 1.0 / mu_b))
    mean = (mu_a * alpha + mu_b * beta) / (mu_a + mu_b)
    ua = np.where(t < t_meet, alpha - (w / mu_a) * t, mean)
    ub = np.where(t < t_meet, beta + (w / mu_b) * t, mean)
    return ua, ub


def brute_force_min(objective, box, resolution: float = 1e-4, refinements: int = 2):
    """Exhaustive grid search with two refinements around the incumbent.

    Works for at most four scalar variables.  The returned value lies
    within (Lipschitz constant of the objective) times the final grid
    spacing of the optimum.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    d = len(box)
    if d == 0 or d > 4:
        raise DimensionTooLarge("brute force handles 1 to 4 variables")
    budget = int(2e6)
    per_dim = max(9, int(budget ** (1.0 / d)))

    spans = [hi - lo for lo, hi in box]
    # choose the coarse resolution so the final pass reaches the request
    shrink = 4.0 / (per_dim - 1)
    centers = [0.5 * (lo + hi) for lo, hi in box]
    widths = list(spans)
    best_point, best_value = None, np.inf
    for level in range(refinements + 1):
        axes = []
        for dim in range(d):
            lo = max(box[dim][0], centers[dim] - widths[dim] / 2)
            hi = min(box[dim][1], centers[dim] + widths[dim] / 2)
            axes.append(np.linspace(lo, hi, per_dim))
        for point in itertools.product(*axes):
            val = float(objective(np.array(point)))
            if val < best_value:
                best_value = val
                best_point = np.array(point)
        centers = list(best_point)
        widths = [max(w * shrink * 2.0, resolution) for w in widths]
        if all(w / (per_dim - 1) <= resolution for w in widths) and level >= 1:
            break
    # final local pass at the requested resolution
    axes = [
        np.linspace(
            max(box[dim][0], best_point[dim] - 2 * resolution),
            min(box[dim][1], best_point[dim] + 2 * resolution),
            9,
        )
        for dim in range(d)
    ]
    for point in itertools.product(*axes):
        val = float(objective(np.array(point)))
        if val < best_value:
            best_value = val
            best_point = np.array(point)
    return best_point, best_value
