"""Monotone implicit semi-Lagrangian semigroups for u_t + H(x, Du, u) = 0.

The backward solution operator acts on periodic grid functions by

    (T_dt w)(x) = min_v [ w(x - v dt) + dt L(x, v, (T_dt w)(x)) ]

where L is the Legendre transform of H in p.  Because the value being
defined appears inside L, each step runs a short Picard iteration (the map
is a contraction with factor dt * lambda < 1/2), scanning a fixed velocity
grid, and then sharpens the discrete minimizer with a golden-section search
inside the two bracketing velocity cells.  The forward operator mirrors the
construction with a max and a sign flip on the L term:

    (S_dt w)(x) = max_v [ w(x + v dt) - dt L(x, v, (S_dt w)(x)) ].

Both steps use periodic piecewise-linear interpolation, which keeps them
monotone (order preserving); that single structural fact is what the
comparison tests downstream lean on.

Action functions h(x, t) with initial pinning (x0, u0) are produced by
evolving a needle profile: u0 at the node nearest x0 and a large cap M
elsewhere.  An independent cross-check by characteristic shooting is in
``shoot_action``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .circle import TWO_PI, angle_delta, wrap_angle
from .contact_flow import Diverged, _rk4_step
from .hamiltonians import lagrangian_grid

__all__ = [
    "GridFunction",
    "StepScheme",
    "NoShotLandsWarning",
    "backward_step",
    "forward_step",
    "evolve",
    "action_function",
    "shoot_action",
]

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


class NoShotLandsWarning(UserWarning):
    """No characteristic shot landed on the requested point."""


@dataclass
class GridFunction:
    """Periodic grid function on n equispaced nodes, n a power of two >= 64."""

    n: int
    values: np.ndarray
    argmin_velocity: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 64 or (self.n & (self.n - 1)) != 0:
            raise ValueError("node count must be a power of two, at least 64")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n,):
            raise ValueError("values must have shape (n,)")

    @classmethod
    def from_callable(cls, n, fn):
        x = cls.make_nodes(n)
        return cls(n, np.asarray(fn(x), dtype=float) + np.zeros(n))

    @classmethod
    def constant(cls, n, c):
        return cls(n, np.full(n, float(c)))

    @staticmethod
    def make_nodes(n):
        return np.arange(n) * (TWO_PI / n)

    @property
    def nodes(self):
        return GridFunction.make_nodes(self.n)

    @property
    def dx(self):
        return TWO_PI / self.n

    def interp(self, x):
        """Periodic piecewise-linear interpolation at angles x."""
        return np.interp(wrap_angle(x), self.nodes, self.values, period=TWO_PI)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def sup_distance(self, other):
        return float(np.max(np.abs(self.values - np.asarray(
            other.values if isinstance(other, GridFunction) else other))))

    def gradient(self):
        """Centered differences, one-sided at detected kinks."""
        d = self._one_sided()
        grad = 0.5 * (d["plus"] + d["minus"])
        kinks = self.kink_mask()
        if kinks.any():
            # At a kink take the side with the smaller magnitude.
            pick_minus = np.abs(d["minus"]) < np.abs(d["plus"])
            one_sided = np.where(pick_minus, d["minus"], d["plus"])
            grad = np.where(kinks, one_sided, grad)
        return grad

    def _one_sided(self):
        v = self.values
        dx = self.dx
        return {
            "plus": (np.roll(v, -1) - v) / dx,
            "minus": (v - np.roll(v, 1)) / dx,
        }

    def kink_mask(self):
        """Nodes whose slope jump dwarfs the typical (median) slope jump."""
        d = self._one_sided()
        jump = np.abs(d["plus"] - d["minus"])
        scale = max(float(np.median(jump)), 1e-8)
        return jump > 10.0 * scale

    def copy(self):
        return GridFunction(self.n, self.values.copy())


@dataclass
class StepScheme:
    """Discretization parameters for one semigroup step.

    velocities is the candidate grid for the scan (symmetric, odd count, so
    v = 0 is always available); picard_iters is the number of implicit
    update rounds; golden_iters controls the bracketing refinement.
    """

    dt: float
    velocities: np.ndarray
    picard_iters: int = 3
    golden_iters: int = 35

    def __post_init__(self):
        self.velocities = np.asarray(self.velocities, dtype=float)

    @classmethod
    def for_model(cls, model, dt, m=129, v_max=None, picard_iters=3):
        """Build a scheme whose velocity window covers the model's H_p range."""
        if v_max is None:
            v_max = model.velocity_window()
        if m % 2 == 0:
            m += 1
        return cls(dt=float(dt), velocities=np.linspace(-v_max, v_max, m),
                   picard_iters=picard_iters)

    def validate(self, model):
        lam = model.lambda_bound
        if self.dt * lam >= 0.5:
            raise ValueError(
                f"dt * lambda = {self.dt * lam:.3g} >= 1/2; the implicit step "
                "is only a contraction below that threshold"
            )
        if np.max(np.abs(self.velocities)) * self.dt > np.pi:
            raise ValueError("velocity window times dt exceeds half the circle")
        return self


def _implicit_scan(model, scheme, w: GridFunction, sign):
    """Shared core of the backward (sign=+1) and forward (sign=-1) steps.

    Returns (values, refined_velocities).
    """
    dt = scheme.dt
    x = w.nodes
    V = scheme.velocities
    # Interpolated foot values w(x -+ v dt), shape (n, m).
    feet = x[:, None] - sign * V[None, :] * dt
    w_feet = np.interp(np.mod(feet, TWO_PI), w.nodes, w.values, period=TWO_PI)

    u_tilde = w.values.copy()
    best_idx = None
    for _ in range(max(1, scheme.picard_iters)):
        lvals, _ = lagrangian_grid(model, x[:, None], V[None, :], u_tilde[:, None])
        proposals = w_feet + sign * dt * lvals
        best_idx = np.argmin(sign * proposals, axis=1)
        u_tilde = proposals[np.arange(w.n), best_idx]

    # Golden-section sharpening inside the bracketing cells, u_tilde frozen.
    lo = V[np.maximum(best_idx - 1, 0)]
    hi = V[np.minimum(best_idx + 1, len(V) - 1)]

    def objective(v):
        foot = x - sign * v * dt
        wf = np.interp(np.mod(foot, TWO_PI), w.nodes, w.values, period=TWO_PI)
        lv, _ = lagrangian_grid(model, x, v, u_tilde)
        return sign * (wf + sign * dt * lv)

    a, b = lo.copy(), hi.copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = objective(c)
    fd = objective(d)
    for _ in range(scheme.golden_iters):
        take_left = fc < fd
        b = np.where(take_left, d, b)
        a = np.where(take_left, a, c)
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc = objective(c)
        fd = objective(d)
    v_star = 0.5 * (a + b)
    refined = sign * objective(v_star)
    discrete = u_tilde
    take_refined = sign * refined < sign * discrete
    values = np.where(take_refined, refined, discrete)
    v_out = np.where(take_refined, v_star, V[best_idx])
    return values, v_out


def backward_step(model, scheme: StepScheme, w: GridFunction) -> GridFunction:
    """One implicit semi-Lagrangian step of the backward solution operator."""
    values, v_star = _implicit_scan(model, scheme, w, sign=+1)
    return GridFunction(w.n, values, argmin_velocity=v_star)


def forward_step(model, scheme: StepScheme, w: GridFunction) -> GridFunction:
    """One implicit step of the conjugate (forward) solution operator."""
    values, v_star = _implicit_scan(model, scheme, w, sign=-1)
    return GridFunction(w.n, values, argmin_velocity=v_star)


def evolve(model, scheme: StepScheme, phi: GridFunction, T, *, forward=False,
           record_every=None, reference=None, cap=1e6):
    """Iterate the solution operator for time T.

    Returns a list of (t, GridFunction, sup_distance_to_reference) snapshots;
    the reference defaults to the initial profile.  record_every is a step
    stride (default: only the initial and final snapshots are kept).  Raises
    Diverged when the sup norm passes ``cap``.
    """
    scheme.validate(model)
    n_steps = int(round(T / scheme.dt))
    if record_every is None:
        record_every = n_steps if n_steps > 0 else 1
    ref = reference if reference is not None else phi
    step = forward_step if forward else backward_step
    out = [(0.0, phi, phi.sup_distance(ref))]
    w = phi
    for k in range(1, n_steps + 1):
        w = step(model, scheme, w)
        if not np.all(np.isfinite(w.values)) or w.sup_norm() > cap:
            raise Diverged(
                f"grid evolution left sup norm <= {cap:g} at t = {k * scheme.dt:.6g}",
                partial=out,
            )
        if k % record_every == 0 or k == n_steps:
            out.append((k * scheme.dt, w, w.sup_distance(ref)))
    return out


def action_function(model, scheme: StepScheme, x0, u0, t, *, n=256,
                    forward=False, needle_cap=None) -> GridFunction:
    """Action profile h(., t) pinned at (x0, u0), by evolving a needle.

    The needle equals u0 at the node nearest x0 and a cap M elsewhere
    (M = u0 + 8 pi Lip by default, Lip the model momentum window).  The
    backward operator applied to the needle yields the minimal action to
    reach x at time t having started at (x0, u0); the forward variant flips
    the needle to -M and uses the forward operator.  Requires t >= 10 dt so
    the profile has settled away from the initial spike.

    The cap only matters through an O(exp(-distance)) tail; doubling it
    moves the result by less than the grid error (see the test suite).
    """
    if t < 10 * scheme.dt:
        raise ValueError("t must be at least 10 * dt")
    nodes = GridFunction.make_nodes(n)
    i0 = int(np.argmin(np.abs(angle_delta(nodes, x0))))
    lip = model.p_window
    M = abs(u0) + 8.0 * np.pi * lip if needle_cap is None else float(needle_cap)
    fill = -M if forward else M
    vals = np.full(n, fill, dtype=float)
    vals[i0] = u0
    needle = GridFunction(n, vals)
    snaps = evolve(model, scheme, needle, t, forward=forward,
                   cap=max(1e6, 10.0 * M))
    return snaps[-1][1]


def shoot_action(model, x0, u0, x, t, p_grid, dt=1e-3, refine_iters=48,
                 land_tol=None):
    """Cross-check of the backward action by characteristic shooting.

    Integrates contact orbits from (x0, p0, u0) for every p0 in p_grid and
    keeps those landing within one grid cell of x at time t; the candidate
    action is the minimum of u(t) over landing shots.  Landing is then
    sharpened by bisection on the wrapped landing offset p0 -> x(t; p0) - x
    across sign changes (offsets jumping by ~2 pi at the branch cut are not
    brackets and are skipped).  Returns +inf and emits NoShotLandsWarning
    when nothing lands; the grid method stays authoritative either way.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    if land_tol is None:
        land_tol = TWO_PI / 256

    def land(p0_batch):
        Z = np.column_stack([
            np.full(len(p0_batch), float(x0)),
            np.asarray(p0_batch, dtype=float),
            np.full(len(p0_batch), float(u0)),
        ])
        n_steps = int(round(t / dt))
        xx, pp, uu = Z[:, 0].copy(), Z[:, 1].copy(), Z[:, 2].copy()
        ok = np.ones(len(Z), dtype=bool)
        for _ in range(n_steps):
            xx2, pp2, uu2 = _rk4_step(model, xx[ok], pp[ok], uu[ok], dt)
            bad = ~np.isfinite(pp2) | ~np.isfinite(uu2) | (np.maximum(np.abs(pp2), np.abs(uu2)) > 1e6)
            idx = np.flatnonzero(ok)
            xx[idx] = np.where(bad, xx[idx], xx2)
            pp[idx] = np.where(bad, pp[idx], pp2)
            uu[idx] = np.where(bad, uu[idx], uu2)
            ok[idx[bad]] = False
            if not ok.any():
                break
        offset = angle_delta(xx, x)
        return offset, uu, ok

    offsets, u_final, ok = land(p_grid)
    candidates = []
    landed = ok & (np.abs(offsets) <= land_tol)
    if landed.any():
        candidates.extend(u_final[landed].tolist())

    # Bracketed bisection across genuine sign changes of the landing offset.
    for i in range(len(p_grid) - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        oi, oj = offsets[i], offsets[i + 1]
        if oi == 0.0:
            candidates.append(float(u_final[i]))
            continue
        if oi * oj >= 0.0 or abs(oi) + abs(oj) > 0.5 * np.pi:
            continue
        lo_p, hi_p = p_grid[i], p_grid[i + 1]
        lo_off = oi
        for _ in range(refine_iters):
            mid = 0.5 * (lo_p + hi_p)
            off_m, u_m, ok_m = land(np.array([mid]))
            if not ok_m[0]:
                break
            if lo_off * off_m[0] <= 0.0:
                hi_p = mid
            else:
                lo_p, lo_off = mid, off_m[0]
        off_m, u_m, ok_m = land(np.array([0.5 * (lo_p + hi_p)]))
        if ok_m[0] and abs(off_m[0]) <= land_tol:
            candidates.append(float(u_m[0]))

    if not candidates:
        warnings.warn(
            f"no characteristic shot from x0={x0:.4g} landed on x={x:.4g} "
            f"at t={t:.4g}",
            NoShotLandsWarning,
        )
        return float("inf")
    return float(min(candidates))
