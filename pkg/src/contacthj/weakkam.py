"""Stationary solutions, conjugate pairs, and invariant-graph filtering.

A stationary viscosity solution of H(x, Du, u) = 0 is a fixed point of the
backward semigroup.  ``find_stationary`` iterates the grid operator until
unit-spaced snapshots stop moving; ``conjugate_forward`` produces the
companion forward-stationary profile u_+ <= u_- by running the conjugate
(forward) operator, stopping at the closest approach since the forward
direction amplifies discretization noise exponentially.

``extract_graph`` samples the 1-graph {(x, Du(x), u(x))} away from kinks,
discarding atoms whose Hamiltonian residual is out of tolerance, and
``mane_filter`` keeps the atoms whose forward orbits remain close to the
sampled graph, a numerical proxy for membership in the invariant set where
backward and forward solutions agree.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .circle import TWO_PI, angle_delta, wrap_angle
from .contact_flow import Diverged, flow_batch
from .semigroup import GridFunction, StepScheme, backward_step, forward_step

__all__ = [
    "StationaryResult",
    "GraphSample",
    "EmptyGraph",
    "EmptyAfterRelaxation",
    "NonConvergence",
    "find_stationary",
    "conjugate_forward",
    "extract_graph",
    "mane_filter",
]

logger = logging.getLogger(__name__)


class EmptyGraph(RuntimeError):
    """Every node was discarded while sampling a 1-graph."""


class EmptyAfterRelaxation(RuntimeError):
    """The orbit filter kept nothing even after relaxing its tolerance."""


class NonConvergence(RuntimeError):
    """An iteration ended without meeting its convergence target."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


@dataclass
class StationaryResult:
    """Outcome of a stationary-solution search.

    solution is the final grid profile (also on divergence, where it holds
    the last finite snapshot); residual is the last unit-spaced sup
    distance; history is a list of (t, residual) pairs; divergence is None,
    'to_plus_infinity', 'to_minus_infinity', or 'oscillating'.
    """

    solution: GridFunction
    converged: bool
    residual: float
    history: list = field(default_factory=list)
    divergence: str | None = None


@dataclass
class GraphSample:
    """Atoms (x, p, u) sampled from the 1-graph of a grid function.

    node_index maps each atom row back to its grid node; dropped counts
    nodes discarded (kinks plus residual failures); h_residual stores
    |H| at the kept atoms.
    """

    atoms: np.ndarray
    node_index: np.ndarray
    dropped: int
    h_residual: np.ndarray
    source: str = ""

    def __len__(self):
        return self.atoms.shape[0]


def _divergence_kind(values):
    """Label a blown-up profile by where its extreme values sit.

    The min-coupling in the backward operator lets one side of the profile
    run away while the other lags near its old range, so the label only
    requires the runaway side to pass +-1e3 and the other side to stay on
    this side of it.
    """
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return "oscillating"
    hi = float(np.max(finite))
    lo = float(np.min(finite))
    if hi > 1e3 and lo > -1e3:
        return "to_plus_infinity"
    if lo < -1e3 and hi < 1e3:
        return "to_minus_infinity"
    return "oscillating"


def find_stationary(model, scheme: StepScheme, phi0: GridFunction, *,
                    T_max=200.0, tol=1e-3, cap=1e6) -> StationaryResult:
    """Iterate the backward operator from phi0 until it stops moving.

    Convergence means the sup distance between snapshots one time unit
    apart drops below tol.  On blow-up (sup norm past ``cap``) or when
    T_max runs out with values beyond +-1e3, the result carries the
    divergence taxonomy instead of raising.
    """
    scheme.validate(model)
    steps_per_unit = max(1, int(round(1.0 / scheme.dt)))
    w = phi0
    history = []
    t = 0.0
    while t < T_max - 1e-9:
        prev = w
        try:
            for _ in range(steps_per_unit):
                w = backward_step(model, scheme, w)
                if not np.all(np.isfinite(w.values)) or w.sup_norm() > cap:
                    raise Diverged("stationary iteration blew up", partial=prev)
        except Diverged:
            kind = _divergence_kind(w.values)
            logger.info("stationary search diverged (%s) at t=%.3g", kind, t)
            return StationaryResult(
                solution=w, converged=False,
                residual=float("inf"), history=history, divergence=kind,
            )
        t += 1.0
        residual = w.sup_distance(prev)
        history.append((t, residual))
        if residual < tol:
            return StationaryResult(
                solution=w, converged=True, residual=residual, history=history,
            )
    # Ran out of time.  Values past +-1e3 still get the taxonomy label;
    # a merely slow iteration reports divergence=None.
    kind = _divergence_kind(w.values) if w.sup_norm() > 1e3 else None
    return StationaryResult(
        solution=w, converged=False,
        residual=history[-1][1] if history else float("inf"),
        history=history, divergence=kind,
    )


def conjugate_forward(model, scheme: StepScheme, u_minus: GridFunction, *,
                      T_max=10.0, tol=1e-3, grow_patience=2, relax=50.0) -> GridFunction:
    """Forward-stationary companion of u_minus under the conjugate operator.

    Runs the forward operator from u_minus and watches the sup distance
    between unit-spaced snapshots.  The limit object is a repelling fixed
    point of the forward iteration, so discretization noise grows roughly
    like exp(lambda t); the iteration therefore returns as soon as the
    drift falls below tol, and otherwise keeps the snapshot of closest
    approach, accepting it if its drift is within relax * tol once the
    drift has grown for ``grow_patience`` consecutive units (or time runs
    out).  Raises NonConvergence when even the best drift stayed above
    relax * tol.

    The result is checked against the one-sided bound u_+ <= u_- + tol and
    a warning is emitted on violation.
    """
    scheme.validate(model)
    steps_per_unit = max(1, int(round(1.0 / scheme.dt)))
    w = u_minus
    best = (float("inf"), w)
    history = []
    grew = 0
    t = 0.0
    while t < T_max - 1e-9:
        prev = w
        for _ in range(steps_per_unit):
            w = forward_step(model, scheme, w)
            if not np.all(np.isfinite(w.values)) or w.sup_norm() > 1e6:
                raise NonConvergence(
                    "forward iteration blew up before settling", history=history
                )
        t += 1.0
        drift = w.sup_distance(prev)
        history.append((t, drift))
        if drift < best[0]:
            best = (drift, w)
            grew = 0
        else:
            grew += 1
        if drift < tol:
            best = (drift, w)
            break
        if grew >= grow_patience:
            break
    if best[0] > relax * tol:
        raise NonConvergence(
            f"forward drift never fell below {relax * tol:.3g} "
            f"(best {best[0]:.3g})", history=history,
        )
    u_plus = best[1]
    overshoot = float(np.max(u_plus.values - u_minus.values))
    if overshoot > tol:
        warnings.warn(
            f"conjugate profile exceeds the backward solution by {overshoot:.3g}",
            RuntimeWarning,
        )
    return u_plus


def extract_graph(model, u_minus: GridFunction, *, dt=1e-3, graph_tol=None,
                  source="") -> GraphSample:
    """Sample the 1-graph (x, Du, u) of a grid profile away from kinks.

    graph_tol defaults to 10 * (dx + dt); atoms with |H(x, Du, u)| above it
    are discarded and counted.  Raises EmptyGraph if nothing survives.
    """
    dx = u_minus.dx
    if graph_tol is None:
        graph_tol = 10.0 * (dx + dt)
    grad = u_minus.gradient()
    kinks = u_minus.kink_mask()
    x = u_minus.nodes
    h_res = np.abs(np.asarray(model.h(x, grad, u_minus.values), dtype=float))
    keep = (~kinks) & (h_res <= graph_tol)
    dropped = int(u_minus.n - keep.sum())
    if not keep.any():
        raise EmptyGraph(
            f"all {u_minus.n} nodes dropped (kinks or |H| > {graph_tol:.3g})"
        )
    atoms = np.column_stack([x[keep], grad[keep], u_minus.values[keep]])
    return GraphSample(
        atoms=atoms,
        node_index=np.flatnonzero(keep),
        dropped=dropped,
        h_residual=h_res[keep],
        source=source,
    )


def _distance_to_atoms(points, atoms):
    """Distance from each point (x, p, u) to the nearest atom, wrapped in x.

    atoms must be sorted by x.  Only a window of nearby-in-x atoms is
    examined; the graph is a function of x, so the nearest atom in x is
    the right neighborhood.
    """
    ax = atoms[:, 0]
    px = wrap_angle(points[:, 0])
    idx = np.searchsorted(ax, px)
    best = np.full(points.shape[0], np.inf)
    n_atoms = atoms.shape[0]
    for off in (-2, -1, 0, 1):
        j = np.mod(idx + off, n_atoms)
        dxs = angle_delta(px, ax[j])
        d2 = dxs**2 + (points[:, 1] - atoms[j, 1])**2 + (points[:, 2] - atoms[j, 2])**2
        best = np.minimum(best, d2)
    return np.sqrt(best)


def mane_filter(model, graph: GraphSample, *, T=12.0, dt=1e-3, dist_tol=None,
                grid_dx=None, check_every=50, max_relaxations=3) -> GraphSample:
    """Keep the atoms whose forward orbit stays near the sampled graph.

    Each atom is flowed for time T and checked every ``check_every`` steps
    against the full atom set; an atom survives when its orbit never
    strays beyond dist_tol, which defaults to 10 * (dx + dt) * exp(lambda).
    Orbits that escape the integrator cap count as strays.  If nothing
    survives, the tolerance is doubled up to ``max_relaxations`` times
    with a warning; EmptyAfterRelaxation is raised when even that keeps
    nothing.

    T trades discrimination against noise amplification: atoms that do
    not belong to the graph drift away quickly, while atoms ON a
    transversally repelling graph carry their sampling noise away like
    exp(lambda * T), so T should stay small enough that noise * e^(lambda T)
    remains below dist_tol.  The default handles atom noise up to about
    1e-4 at lambda <= 2.
    """
    atoms = graph.atoms
    if grid_dx is None:
        # Infer the sampling pitch from the node index when possible.
        grid_dx = TWO_PI / max(graph.node_index.max() + 1, 64)
    if dist_tol is None:
        dist_tol = 10.0 * (grid_dx + dt) * float(np.exp(model.lambda_bound))

    order = np.argsort(atoms[:, 0])
    sorted_atoms = atoms[order]

    traj, escaped = flow_batch(model, atoms, T=T, dt=dt, record_every=check_every)
    worst = np.zeros(atoms.shape[0])
    for snap in traj:
        d = _distance_to_atoms(snap, sorted_atoms)
        worst = np.maximum(worst, d)
    worst[escaped] = np.inf

    tol = float(dist_tol)
    for attempt in range(max_relaxations + 1):
        keep = worst <= tol
        if keep.any():
            if attempt:
                warnings.warn(
                    f"orbit filter kept atoms only after relaxing the distance "
                    f"tolerance to {tol:.3g}",
                    RuntimeWarning,
                )
            return GraphSample(
                atoms=atoms[keep],
                node_index=graph.node_index[keep],
                dropped=graph.dropped + int((~keep).sum()),
                h_residual=graph.h_residual[keep],
                source=graph.source or "mane_filter",
            )
        tol *= 2.0
    raise EmptyAfterRelaxation(
        f"no atom stayed within {tol / 2:.3g} of the graph over T={T}"
    )
