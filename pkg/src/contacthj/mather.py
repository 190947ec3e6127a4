"""Invariant measures on sampled graphs and the stability tests built on them.

The long-run behavior of a stationary solution is governed by averages of
H_u against flow-invariant probability measures supported on its graph.
``measure_ensemble`` detects those measures numerically (rest points,
periodic orbits, generic time averages), ``classify_stability`` turns the
min/max averages into a verdict, and ``uniqueness_check`` runs the three
sufficient criteria for uniqueness of the stationary solution in order of
increasing sophistication: positivity of H_u on the whole zero level set,
positivity on the rest set of a reversible model, and a Lie-derivative
spanning condition at the degenerate points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .circle import TWO_PI, angle_delta, wrap_angle
from .contact_flow import (
    contact_vector_field,
    flow,
    flow_batch,
    lie_derivative,
    lie_derivative_batch,
)

__all__ = [
    "OccupationMeasure",
    "StabilityReport",
    "CriterionReport",
    "occupation_measure",
    "measure_ensemble",
    "classify_stability",
    "sample_zero_level",
    "uniqueness_check",
]


@dataclass
class OccupationMeasure:
    """A discrete invariant probability measure on (x, p, u) space.

    kind is 'dirac' (rest point), 'periodic' (uniform measure on a closed
    orbit), or 'birkhoff' (binned long-time average of a single orbit).
    points has shape (k, 3) and weights sums to one.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    seed: np.ndarray | None = None
    period: float | None = None
    return_distance: float | None = None
    max_excursion: float | None = None

    def average(self, fn) -> float:
        x, p, u = self.points[:, 0], self.points[:, 1], self.points[:, 2]
        return float(np.sum(self.weights * np.asarray(fn(x, p, u), dtype=float)))

    def hu_average(self, model) -> float:
        return self.average(model.h_u)

    def moments(self) -> np.ndarray:
        """Low-order moment vector used to compare measures for dedup."""
        x, p, u = self.points[:, 0], self.points[:, 1], self.points[:, 2]
        w = self.weights
        return np.array([
            float(np.sum(w * np.cos(x))),
            float(np.sum(w * np.sin(x))),
            float(np.sum(w * p)),
            float(np.sum(w * u)),
        ])


@dataclass
class StabilityReport:
    verdict: str
    a_min: float
    a_max: float
    averages: list
    measures: list
    witness: int | None = None
    crit_tol: float = 1e-2

    @property
    def decay_rate(self):
        return self.a_min if self.verdict == "asymptotically_stable" else None


@dataclass
class CriterionReport:
    """Outcome of the uniqueness criteria for a model.

    route names the first criterion that passed ('hu_positive_on_level_set',
    'reversible_rest_set', 'lie_bracket_span') or 'inconclusive'.
    """

    model_name: str
    route: str
    passed: bool
    crit_tol: float
    min_hu_level: float
    min_hu_rest: float | None = None
    lie_min: float | None = None
    degenerate_points: np.ndarray | None = None
    lie2_at_degenerate: np.ndarray | None = None
    detail: dict = field(default_factory=dict)


def _orbit_distance(points, z0):
    dx = angle_delta(points[..., 0], z0[0])
    return np.sqrt(dx**2 + (points[..., 1] - z0[1])**2 + (points[..., 2] - z0[2])**2)


def occupation_measure(model, z0, *, T=100.0, dt=1e-3, n_bins=128,
                       record_every=10) -> OccupationMeasure:
    """Binned time-average measure of the orbit starting at z0.

    The orbit is sampled every record_every steps, binned in x, and each
    nonempty bin contributes one support point at its mean (x, p, u) with
    weight proportional to its visit count.
    """
    z0 = np.asarray(z0, dtype=float)
    traj, escaped = flow_batch(model, z0[None, :], T=T, dt=dt,
                               record_every=record_every)
    if escaped[0]:
        raise ValueError("orbit escaped while building an occupation measure")
    samples = traj[:, 0, :]
    x = wrap_angle(samples[:, 0])
    bins = np.minimum((x / (TWO_PI / n_bins)).astype(int), n_bins - 1)
    mass = np.bincount(bins, minlength=n_bins).astype(float)
    sx = np.bincount(bins, weights=x, minlength=n_bins)
    sp = np.bincount(bins, weights=samples[:, 1], minlength=n_bins)
    su = np.bincount(bins, weights=samples[:, 2], minlength=n_bins)
    keep = mass > 0
    pts = np.column_stack([sx[keep] / mass[keep],
                           sp[keep] / mass[keep],
                           su[keep] / mass[keep]])
    w = mass[keep] / mass.sum()
    d = _orbit_distance(samples, z0)
    t_grid = np.arange(len(samples)) * dt * record_every
    late = t_grid >= 0.5
    if late.any():
        k = np.argmin(np.where(late, d, np.inf))
        ret, per = float(d[k]), float(t_grid[k])
    else:
        ret, per = float("nan"), float("nan")
    return OccupationMeasure(
        kind="birkhoff", points=pts, weights=w, seed=z0,
        return_distance=ret, period=per, max_excursion=float(d.max()),
    )


def _newton_rest_point(model, z, fp_tol=1e-6, max_iter=25, h=1e-6):
    """Polish a rest-point candidate with least-squares Newton steps.

    lstsq copes with the singular Jacobians of rest-point continua by
    taking the minimal-norm step within the degenerate directions.
    """
    z = np.array(z, dtype=float)
    for _ in range(max_iter):
        F = np.array(contact_vector_field(model, z[0], z[1], z[2]), dtype=float)
        if np.linalg.norm(F) <= fp_tol:
            return z, True
        J = np.empty((3, 3))
        for j in range(3):
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            Fp = np.array(contact_vector_field(model, zp[0], zp[1], zp[2]))
            Fm = np.array(contact_vector_field(model, zm[0], zm[1], zm[2]))
            J[:, j] = (Fp - Fm) / (2 * h)
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        if not np.all(np.isfinite(step)):
            return z, False
        z = z + step
        z[0] = wrap_angle(z[0])
    F = np.array(contact_vector_field(model, z[0], z[1], z[2]), dtype=float)
    return z, bool(np.linalg.norm(F) <= fp_tol)


def _refine_period(t_grid, d, k):
    """Vertex of the parabola through the squared distance at k-1, k, k+1."""
    if k == 0 or k == len(d) - 1:
        return float(t_grid[k])
    y0, y1, y2 = d[k - 1]**2, d[k]**2, d[k + 1]**2
    denom = y0 - 2 * y1 + y2
    if denom <= 0:
        return float(t_grid[k])
    shift = 0.5 * (y0 - y2) / denom
    h = t_grid[1] - t_grid[0]
    return float(t_grid[k] + np.clip(shift, -1.0, 1.0) * h)


def _periodic_measure(model, z0, period, dt, max_points=4000):
    """Uniform measure over one period; a negative period integrates backward."""
    n_steps = max(int(round(abs(period) / dt)), 2)
    orbit = flow(model, z0, T=np.sign(period) * n_steps * dt, dt=dt)
    pts = orbit.data[:-1]
    stride = max(1, int(np.ceil(len(pts) / max_points)))
    pts = pts[::stride]
    w = np.full(len(pts), 1.0 / len(pts))
    return OccupationMeasure(
        kind="periodic", points=pts, weights=w,
        seed=np.asarray(z0, dtype=float), period=float(abs(period)),
    )


def measure_ensemble(model, graph, *, dt=1e-3, T_detect=30.0, T_avg=100.0,
                     rec_tol=1e-3, field_tol=1e-3, fp_tol=1e-6,
                     max_seeds=12) -> list:
    """Detect the invariant measures carried by a sampled graph.

    graph may be a GraphSample or a plain (k, 3) array of atoms.  Atoms
    where the contact field nearly vanishes are polished into rest points
    (Dirac measures, deduplicated by position so continua of rest points
    survive as one Dirac per atom site).  The remaining atoms seed orbits:
    a near-return within T_detect yields a uniform measure over one
    refined period, anything else a binned Birkhoff average over T_avg.
    Duplicates are merged by moment distance, keeping the more structured
    kind.  Raises ValueError when nothing usable remains.
    """
    atoms = np.asarray(getattr(graph, "atoms", graph), dtype=float)
    if atoms.ndim != 2 or atoms.shape[1] != 3:
        raise ValueError("graph must provide atoms of shape (k, 3)")
    fx, fp, fu = contact_vector_field(
        model, atoms[:, 0], atoms[:, 1], atoms[:, 2]
    )
    norms = np.sqrt(np.asarray(fx)**2 + np.asarray(fp)**2 + np.asarray(fu)**2)

    diracs = []
    rest_positions = []
    non_dirac = []
    for i in range(len(atoms)):
        if norms[i] <= field_tol:
            z, ok = _newton_rest_point(model, atoms[i], fp_tol=fp_tol)
            if ok:
                if rest_positions:
                    d = _orbit_distance(np.asarray(rest_positions), z)
                    if d.min() <= 1e-4:
                        continue
                rest_positions.append(z)
                diracs.append(OccupationMeasure(
                    kind="dirac", points=z[None, :], weights=np.array([1.0]),
                    seed=atoms[i].copy(),
                ))
                continue
        non_dirac.append(i)

    periodic = []
    birkhoff = []
    if non_dirac:
        stride = max(1, len(non_dirac) // max_seeds)
        seeds = atoms[non_dirac[::stride]]
        # Each direction of time sees the same invariant measures, but a
        # transversally repelling orbit is only trackable backward, so
        # seeds that neither return nor stay bounded forward get a second
        # chance with the flow reversed.
        for direction in (1.0, -1.0):
            if not len(seeds):
                break
            # Record every step: the return-distance dip of a periodic
            # orbit is only as narrow as the recording grid lets it be,
            # and a coarser grid would push true periods past rec_tol.
            traj, escaped = flow_batch(model, seeds, T=direction * T_detect,
                                       dt=dt, record_every=1)
            t_grid = np.arange(traj.shape[0]) * dt
            late = t_grid >= 0.5
            retry = []
            for s in range(len(seeds)):
                d = _orbit_distance(traj[:, s, :], seeds[s])
                masked = np.where(late, d, np.inf)
                k = int(np.argmin(masked))
                if masked[k] <= rec_tol:
                    # A dip before any escape is a genuine near-return;
                    # after an escape the state is frozen far away and
                    # cannot dip.
                    period = _refine_period(t_grid, d, k)
                    periodic.append(_periodic_measure(
                        model, seeds[s], direction * period, dt
                    ))
                elif escaped[s]:
                    if direction > 0:
                        retry.append(seeds[s])
                    else:
                        warnings.warn(
                            "orbit seed escaped in both time directions; "
                            "dropping it from the ensemble",
                            RuntimeWarning,
                        )
                else:
                    birkhoff.append(occupation_measure(
                        model, seeds[s], T=direction * T_avg, dt=dt
                    ))
            seeds = np.array(retry)

    kept = list(diracs)
    for m in periodic:
        if any(k.kind == "periodic"
               and np.linalg.norm(k.moments() - m.moments()) <= 1e-2
               for k in kept):
            continue
        kept.append(m)
    for m in birkhoff:
        if any(np.linalg.norm(k.moments() - m.moments()) <= 5e-2 for k in kept):
            continue
        kept.append(m)
    if not kept:
        raise ValueError("no invariant measure detected on the graph")
    return kept


def classify_stability(model, measures, crit_tol=1e-2) -> StabilityReport:
    """Verdict from the extreme H_u averages over an ensemble of measures.

    All averages above +crit_tol: asymptotically stable, decaying at the
    minimal average.  Any average below -crit_tol: unstable, with the
    minimizing measure as witness.  Otherwise critical.
    """
    if not measures:
        raise ValueError("need at least one measure to classify")
    averages = [m.hu_average(model) for m in measures]
    a_min = float(min(averages))
    a_max = float(max(averages))
    i_min = int(np.argmin(averages))
    if a_min > crit_tol:
        return StabilityReport("asymptotically_stable", a_min, a_max,
                               averages, measures, crit_tol=crit_tol)
    if a_min < -crit_tol:
        return StabilityReport("unstable", a_min, a_max, averages, measures,
                               witness=i_min, crit_tol=crit_tol)
    return StabilityReport("critical", a_min, a_max, averages, measures,
                           witness=i_min, crit_tol=crit_tol)


def sample_zero_level(model, *, n_x=256, n_p=257, u_span=8.0, n_u=128,
                      p_span=None):
    """Sample the zero level set of H over a circle of x and a band of p.

    For every (x, p) pair on the grid all roots of u -> H(x, p, u) in
    [-u_span, u_span] are located by a sign scan over n_u intervals plus
    vectorized bisection; columns where H is identically zero contribute
    every u sample (rest-point continua run along such lines).  n_p should
    be odd so p = 0 is hit exactly.  Returns (points, hu) with points of
    shape (N, 3).
    """
    if p_span is None:
        p_span = model.p_window
    xs = np.linspace(0.0, TWO_PI, n_x, endpoint=False)
    ps = np.linspace(-p_span, p_span, n_p)
    us = np.linspace(-u_span, u_span, n_u + 1)
    X = xs[:, None, None]
    P = ps[None, :, None]
    U = us[None, None, :]
    H = np.asarray(model.h(X, P, U), dtype=float)
    H = np.broadcast_to(H, (n_x, n_p, n_u + 1))

    pts = []
    # Degenerate columns: H vanishes for every u, so the whole segment
    # consists of roots.
    flat = np.max(np.abs(H), axis=2) < 1e-9
    if flat.any():
        ix, ip = np.nonzero(flat)
        for a, b in zip(ix, ip):
            col = np.column_stack([
                np.full(n_u + 1, xs[a]), np.full(n_u + 1, ps[b]), us
            ])
            pts.append(col)

    sign_change = (H[:, :, :-1] * H[:, :, 1:] < 0) & ~flat[:, :, None]
    ix, ip, iu = np.nonzero(sign_change)
    if len(ix):
        lo = us[iu].copy()
        hi = us[iu + 1].copy()
        xr = xs[ix]
        pr = ps[ip]
        flo = H[ix, ip, iu].copy()
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = np.asarray(model.h(xr, pr, mid), dtype=float)
            left = flo * fm > 0
            lo = np.where(left, mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left, hi, mid)
        roots = 0.5 * (lo + hi)
        pts.append(np.column_stack([xr, pr, roots]))

    exact = (np.abs(H) < 1e-12) & ~flat[:, :, None]
    ix, ip, iu = np.nonzero(exact)
    if len(ix):
        pts.append(np.column_stack([xs[ix], ps[ip], us[iu]]))

    if not pts:
        return np.empty((0, 3)), np.empty(0)
    points = np.vstack(pts)
    hu = np.asarray(model.h_u(points[:, 0], points[:, 1], points[:, 2]),
                    dtype=float)
    hu = hu + 0.0 * points[:, 0]
    return points, hu


def _lie_samples(model, points):
    hu = np.asarray(model.h_u(points[:, 0], points[:, 1], points[:, 2]),
                    dtype=float) + 0.0 * points[:, 0]
    l1 = lie_derivative_batch(model, model.h_u,
                              points[:, 0], points[:, 1], points[:, 2],
                              order=1)
    l2 = lie_derivative_batch(model, model.h_u,
                              points[:, 0], points[:, 1], points[:, 2],
                              order=2)
    return hu, l1, l2


def uniqueness_check(model, *, crit_tol=1e-2, lie_tol=1e-4, n_x=256, n_p=257,
                     u_span=8.0, n_polish=8) -> CriterionReport:
    """Run the sufficient uniqueness criteria in order and report the first hit.

    Route 1: H_u > crit_tol at every sampled point of the zero level set.
    Route 2 (reversible models): H_u > crit_tol on the rest set {p = 0,
    H(x, 0, u) = 0}.
    Route 3: H_u >= -crit_tol everywhere on the level set and the triple
    (H_u, d/dt H_u, d^2/dt^2 H_u) stays bounded away from (0, 0, 0), checked
    on the samples and re-checked at Nelder-Mead-polished worst points.
    """
    points, hu = sample_zero_level(model, n_x=n_x, n_p=n_p, u_span=u_span)
    if len(points) == 0:
        return CriterionReport(model.name, "inconclusive", False, crit_tol,
                               float("nan"),
                               detail={"reason": "empty level set sample"})
    min_hu = float(hu.min())
    if min_hu > crit_tol:
        return CriterionReport(model.name, "hu_positive_on_level_set", True,
                               crit_tol, min_hu)

    min_hu_rest = None
    if model.reversible:
        rest_pts, rest_hu = sample_zero_level(
            model, n_x=n_x, n_p=1, u_span=u_span, p_span=0.0
        )
        if len(rest_pts):
            min_hu_rest = float(rest_hu.min())
            if min_hu_rest > crit_tol:
                return CriterionReport(
                    model.name, "reversible_rest_set", True, crit_tol,
                    min_hu, min_hu_rest=min_hu_rest,
                    detail={"rest_points": rest_pts},
                )

    if min_hu >= -crit_tol:
        hu_s, l1, l2 = _lie_samples(model, points)
        s = hu_s**2 + l1**2 + l2**2
        order = np.argsort(s)

        def objective(z):
            x, p, u = z
            a = float(model.h_u(x, p, u))
            b = lie_derivative(model, model.h_u, (x, p, u), order=1)
            c = float(model.h(x, p, u))
            return a * a + b * b + c * c

        deg_pts = []
        lie2_vals = []
        s_polished = []
        for idx in order[:n_polish]:
            res = minimize(objective, points[idx], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14,
                                    "maxiter": 2000})
            z = res.x
            z[0] = wrap_angle(z[0])
            # Stay on the level set and inside the examined u window; the
            # polish can otherwise slide up an asymptotic valley (u -> inf
            # along a near-singular line) that the sampler never claimed
            # to cover.
            if abs(float(model.h(z[0], z[1], z[2]))) > 1e-4 or abs(z[2]) > u_span:
                continue
            a = float(model.h_u(z[0], z[1], z[2]))
            b = lie_derivative(model, model.h_u, z, order=1)
            c = lie_derivative(model, model.h_u, z, order=2)
            deg_pts.append(z)
            lie2_vals.append(c)
            s_polished.append(a * a + b * b + c * c)
        lie_min = float(min([s.min()] + s_polished))
        if lie_min > lie_tol:
            return CriterionReport(
                model.name, "lie_bracket_span", True, crit_tol, min_hu,
                min_hu_rest=min_hu_rest, lie_min=lie_min,
                degenerate_points=np.array(deg_pts) if deg_pts else None,
                lie2_at_degenerate=np.array(lie2_vals) if lie2_vals else None,
            )
        return CriterionReport(
            model.name, "inconclusive", False, crit_tol, min_hu,
            min_hu_rest=min_hu_rest, lie_min=lie_min,
            degenerate_points=np.array(deg_pts) if deg_pts else None,
            lie2_at_degenerate=np.array(lie2_vals) if lie2_vals else None,
        )

    return CriterionReport(model.name, "inconclusive", False, crit_tol,
                           min_hu, min_hu_rest=min_hu_rest)
