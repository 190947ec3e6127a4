"""Contact Hamiltonians H(x, p, u) on T*S^1 x R and their Legendre transforms.

A model bundles the scalar field H together with its partial derivatives
H_x, H_p, H_u, a bound lambda >= sup |H_u|, and window constants used by the
grid schemes.  All built-in models are strictly convex and superlinear in p,
so the Legendre transform

    L(x, v, u) = max_p [ p v - H(x, p, u) ]

has a unique maximizer p*(x, v, u) solving H_p(x, p*, u) = v.  ``legendre``
computes it with a safeguarded Newton iteration; the built-ins also carry the
closed form, which the grid code uses for speed.

Built-in catalog
----------------
quadratic model      H = p^2 - g'(x) p - f(x) (u - g(x)),  f, g trig polynomials
pendulum model       H = p^2/2 + u/2 + sin u
rotating family      H = p^2/2 - a p + (sin x + b) u
discounted model     H = u + p^2/2

The catalog names mirror how the models are used in the experiment drivers:
``example1`` (quadratic), ``example2`` (pendulum), ``example3`` (rotating
family) and ``discounted``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .circle import TWO_PI

__all__ = [
    "TrigPoly",
    "HamiltonianModel",
    "LagrangianValue",
    "BracketExhausted",
    "eval_hamiltonian",
    "legendre",
    "lagrangian_grid",
    "lagrangian_du",
    "example1",
    "example2",
    "example3",
    "discounted",
    "builtin_catalog",
    "model_from_name",
]


class BracketExhausted(RuntimeError):
    """Raised when the Legendre bracket expansion cannot enclose the optimum."""


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial c0 + sum_k (c_k cos kx + s_k sin kx).

    Coefficients are stored flat as [c0, c1, s1, c2, s2, ...], the same layout
    the experiment configs use.
    """

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) % 2 == 0:
            raise ValueError("coefficient list must have odd length [c0, c1, s1, ...]")

    @property
    def degree(self):
        return (len(self.coeffs) - 1) // 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.coeffs[0])
        for k in range(1, self.degree + 1):
            ck = self.coeffs[2 * k - 1]
            sk = self.coeffs[2 * k]
            if ck:
                out = out + ck * np.cos(k * x)
            if sk:
                out = out + sk * np.sin(k * x)
        return out

    def deriv(self) -> "TrigPoly":
        cs = [0.0]
        for k in range(1, self.degree + 1):
            ck = self.coeffs[2 * k - 1]
            sk = self.coeffs[2 * k]
            # d/dx (c cos kx + s sin kx) = k s cos kx - k c sin kx
            cs.extend([k * sk, -k * ck])
        return TrigPoly(tuple(cs))

    def sup_bound(self):
        """Rigorous bound sup |self| <= |c0| + sum |c_k| + |s_k|."""
        return abs(self.coeffs[0]) + sum(abs(c) for c in self.coeffs[1:])


@dataclass(frozen=True)
class LagrangianValue:
    """Result of a pointwise Legendre transform."""

    value: float
    argmax_p: float


@dataclass(frozen=True)
class HamiltonianModel:
    """A contact Hamiltonian with derivative accessors and scheme constants.

    h, h_x, h_p, h_u take (x, p, u) and broadcast over numpy arrays.
    lambda_bound is a rigorous upper bound for sup |H_u| on the region of
    interest.  p_window bounds the momentum range the grid schemes probe;
    u_cap bounds |u| for level-set sampling defaults.  lagrangian, when set,
    returns the pair (L, argmax p) in closed form and is used by the
    vectorized grid path; legendre() always runs the Newton iteration so the
    two can be cross-checked.
    """

    name: str
    h: Callable
    h_x: Callable
    h_p: Callable
    h_u: Callable
    lambda_bound: float
    p_window: float
    reversible: bool = False
    dim: int = 1
    u_cap: float = 2.0
    lagrangian: Callable | None = None
    h_pp: Callable | None = None
    params: dict = field(default_factory=dict)

    def velocity_window(self):
        """Max |H_p| over x in the circle and |p| <= p_window.

        Convexity in p makes H_p monotone in p, so the sup sits on the
        boundary p = +-p_window; x is scanned on a fine grid.
        """
        x = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        lo = np.abs(self.h_p(x, -self.p_window, 0.0))
        hi = np.abs(self.h_p(x, self.p_window, 0.0))
        return float(max(lo.max(), hi.max()))

    def __repr__(self):
        return f"HamiltonianModel({self.name})"


def eval_hamiltonian(model, x, p, u):
    """Evaluate H(x, p, u); broadcasts over array arguments."""
    return model.h(x, p, u)


def _second_p_derivative(model, x, p, u, h=1e-6):
    if model.h_pp is not None:
        return model.h_pp(x, p, u)
    return (model.h_p(x, p + h, u) - model.h_p(x, p - h, u)) / (2.0 * h)


def legendre(model, x, v, u, tol=1e-10, max_newton=50):
    """L(x, v, u) = max_p [p v - H(x, p, u)] by safeguarded Newton.

    Solves the first-order condition H_p(x, p, u) = v starting from p = 0,
    falling back to bisection steps whenever Newton leaves the current
    bracket.  The bracket starts at +-p_window and doubles up to 8 times;
    if the optimum still is not enclosed, BracketExhausted is raised.

    Returns a LagrangianValue whose argmax_p satisfies
    |H_p(x, argmax_p, u) - v| <= tol.
    """
    x = float(x)
    v = float(v)
    u = float(u)

    lo, hi = -model.p_window, model.p_window
    for _ in range(8):
        if model.h_p(x, lo, u) <= v <= model.h_p(x, hi, u):
            break
        lo *= 2.0
        hi *= 2.0
    else:
        raise BracketExhausted(
            f"no bracket for v={v} in model {model.name} after 8 doublings"
        )

    p = 0.0
    if not (lo <= p <= hi):
        p = 0.5 * (lo + hi)
    for _ in range(max_newton):
        r = model.h_p(x, p, u) - v
        if abs(r) <= tol:
            break
        # Maintain the bracket: H_p is increasing in p.
        if r > 0:
            hi = p
        else:
            lo = p
        hpp = _second_p_derivative(model, x, p, u)
        step_ok = hpp > 0 and np.isfinite(hpp)
        p_new = p - r / hpp if step_ok else 0.5 * (lo + hi)
        if not (lo <= p_new <= hi):
            p_new = 0.5 * (lo + hi)
        p = p_new
    else:
        # Newton budget exhausted; finish with plain bisection.
        for _ in range(200):
            p = 0.5 * (lo + hi)
            r = model.h_p(x, p, u) - v
            if abs(r) <= tol:
                break
            if r > 0:
                hi = p
            else:
                lo = p

    value = p * v - model.h(x, p, u)
    return LagrangianValue(value=float(value), argmax_p=float(p))


def _newton_legendre_array(model, x, v, u, tol=1e-10, max_newton=60):
    """Vectorized Newton for models without a closed-form Lagrangian."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    x, v, u = np.broadcast_arrays(x, v, u)
    p = np.zeros_like(v)
    for _ in range(max_newton):
        r = model.h_p(x, p, u) - v
        if np.all(np.abs(r) <= tol):
            break
        hpp = _second_p_derivative(model, x, p, u)
        hpp = np.where((hpp > 1e-12) & np.isfinite(hpp), hpp, 1.0)
        p = p - r / hpp
    value = p * v - model.h(x, p, u)
    return value, p


def lagrangian_grid(model, x, v, u):
    """Vectorized L(x, v, u) together with the maximizing momentum.

    Uses the model's closed form when available, otherwise a vectorized
    Newton solve of the first-order condition.  Shapes broadcast.
    """
    if model.lagrangian is not None:
        return model.lagrangian(x, v, u)
    return _newton_legendre_array(model, x, v, u)


def lagrangian_du(model, x, v, u):
    """dL/du at fixed (x, v): equals -H_u evaluated at the maximizing p."""
    lv = legendre(model, x, v, u)
    return -float(model.h_u(x, lv.argmax_p, u))


# ----------------------------------------------------------------------
# Built-in models
# ----------------------------------------------------------------------

def example1(f_coeffs=(-1.0, 0.5, 0.0), g_coeffs=(0.0, 1.0, 0.0)) -> HamiltonianModel:
    """Quadratic model H = p^2 - g'(x) p - f(x) (u - g(x)).

    f and g are trig polynomials given in the flat coefficient layout of
    TrigPoly.  When f < 0 everywhere, u = g is a smooth stationary solution
    and 1/|f| plays the role of a damping time.  Defaults: g = cos x,
    f = -1 + cos(x)/2 (negative on the whole circle).
    """
    f = TrigPoly(tuple(f_coeffs))
    g = TrigPoly(tuple(g_coeffs))
    gp = g.deriv()
    fp = f.deriv()
    gpp = gp.deriv()

    def h(x, p, u):
        return p * p - gp(x) * p - f(x) * (u - g(x))

    def h_x(x, p, u):
        return -gpp(x) * p - fp(x) * (u - g(x)) + f(x) * gp(x)

    def h_p(x, p, u):
        return 2.0 * p - gp(x)

    def h_u(x, p, u):
        return -f(x) + 0.0 * np.asarray(p) + 0.0 * np.asarray(u)

    def h_pp(x, p, u):
        return 2.0 + 0.0 * np.asarray(p, dtype=float)

    def lagr(x, v, u):
        # max_p [pv - H] at p* = (v + g')/2, value (v + g')^2/4 + f (u - g)
        pstar = 0.5 * (np.asarray(v, dtype=float) + gp(x))
        val = pstar * pstar + f(x) * (np.asarray(u, dtype=float) - g(x))
        return val, pstar

    lam = f.sup_bound()
    gp_bound = gp.sup_bound()
    # Slopes on the zero level set: p^2 - g'p = f(u-g) gives
    # |p| <= |g'|/2 + sqrt(g'^2/4 + |f|(|u|+|g|)); padded.
    pw = 0.5 * gp_bound + float(
        np.sqrt(0.25 * gp_bound**2 + f.sup_bound() * (2.0 + g.sup_bound()))
    ) + 1.0
    return HamiltonianModel(
        name="example1",
        h=h, h_x=h_x, h_p=h_p, h_u=h_u, h_pp=h_pp,
        lambda_bound=float(lam),
        p_window=float(pw),
        reversible=False,
        lagrangian=lagr,
        params={"f_coeffs": tuple(f.coeffs), "g_coeffs": tuple(g.coeffs)},
    )


def example2() -> HamiltonianModel:
    """Pendulum model H = p^2/2 + u/2 + sin u (reversible in p)."""

    def h(x, p, u):
        return 0.5 * p * p + 0.5 * u + np.sin(u)

    def h_x(x, p, u):
        return 0.0 * np.asarray(x, dtype=float) + 0.0 * np.asarray(p) + 0.0 * np.asarray(u)

    def h_p(x, p, u):
        return np.asarray(p, dtype=float) + 0.0 * np.asarray(x)

    def h_u(x, p, u):
        return 0.5 + np.cos(u) + 0.0 * np.asarray(x) + 0.0 * np.asarray(p)

    def h_pp(x, p, u):
        return 1.0 + 0.0 * np.asarray(p, dtype=float)

    def lagr(x, v, u):
        v = np.asarray(v, dtype=float)
        u = np.asarray(u, dtype=float)
        val = 0.5 * v * v - 0.5 * u - np.sin(u)
        return val + 0.0 * np.asarray(x), v + 0.0 * np.asarray(x)

    return HamiltonianModel(
        name="example2",
        h=h, h_x=h_x, h_p=h_p, h_u=h_u, h_pp=h_pp,
        lambda_bound=1.5,
        p_window=3.5,
        reversible=True,
        lagrangian=lagr,
    )


def example3(a=0.0, b=2.0) -> HamiltonianModel:
    """Rotating family H = p^2/2 - a p + (sin x + b) u.

    a tilts the momentum (breaking reversibility for a != 0); b shifts the
    coupling sin x + b whose sign pattern drives stability of the zero
    solution.  sup |H_u| = 1 + |b|.
    """
    a = float(a)
    b = float(b)

    def h(x, p, u):
        return 0.5 * p * p - a * p + (np.sin(x) + b) * u

    def h_x(x, p, u):
        return np.cos(x) * np.asarray(u, dtype=float)

    def h_p(x, p, u):
        return np.asarray(p, dtype=float) - a + 0.0 * np.asarray(x)

    def h_u(x, p, u):
        return np.sin(x) + b + 0.0 * np.asarray(p)

    def h_pp(x, p, u):
        return 1.0 + 0.0 * np.asarray(p, dtype=float)

    def lagr(x, v, u):
        v = np.asarray(v, dtype=float)
        u = np.asarray(u, dtype=float)
        val = 0.5 * (v + a) ** 2 - (np.sin(x) + b) * u
        return val, v + a + 0.0 * np.asarray(x)

    u_cap = 2.0
    pw = abs(a) + float(np.sqrt(2.0 * (1.0 + abs(b)) * (1.0 + u_cap)))
    return HamiltonianModel(
        name=f"example3(a={a:g},b={b:g})",
        h=h, h_x=h_x, h_p=h_p, h_u=h_u, h_pp=h_pp,
        lambda_bound=1.0 + abs(b),
        p_window=pw,
        reversible=(a == 0.0),
        u_cap=u_cap,
        lagrangian=lagr,
        params={"a": a, "b": b},
    )


def discounted() -> HamiltonianModel:
    """Discounted model H = u + p^2/2; the closed-form workhorse for tests."""

    def h(x, p, u):
        return np.asarray(u, dtype=float) + 0.5 * np.asarray(p, dtype=float) ** 2 + 0.0 * np.asarray(x)

    def h_x(x, p, u):
        return 0.0 * np.asarray(x, dtype=float) + 0.0 * np.asarray(p) + 0.0 * np.asarray(u)

    def h_p(x, p, u):
        return np.asarray(p, dtype=float) + 0.0 * np.asarray(x)

    def h_u(x, p, u):
        return 1.0 + 0.0 * np.asarray(u, dtype=float) + 0.0 * np.asarray(x) + 0.0 * np.asarray(p)

    def h_pp(x, p, u):
        return 1.0 + 0.0 * np.asarray(p, dtype=float)

    def lagr(x, v, u):
        v = np.asarray(v, dtype=float)
        val = 0.5 * v * v - np.asarray(u, dtype=float)
        return val + 0.0 * np.asarray(x), v + 0.0 * np.asarray(x)

    return HamiltonianModel(
        name="discounted",
        h=h, h_x=h_x, h_p=h_p, h_u=h_u, h_pp=h_pp,
        lambda_bound=1.0,
        p_window=3.5,
        reversible=True,
        lagrangian=lagr,
    )


def builtin_catalog():
    """The four built-in models with their default parameters."""
    return [example1(), example2(), example3(0.0, 2.0), discounted()]


def model_from_name(name, **params) -> HamiltonianModel:
    """Construct a built-in model by catalog name with keyword parameters."""
    if name == "example1":
        kw = {}
        if "f_coeffs" in params:
            kw["f_coeffs"] = params["f_coeffs"]
        if "g_coeffs" in params:
            kw["g_coeffs"] = params["g_coeffs"]
        return example1(**kw)
    if name == "example2":
        return example2()
    if name == "example3":
        return example3(params.get("a", 0.0), params.get("b", 2.0))
    if name == "discounted":
        return discounted()
    raise KeyError(f"unknown model name: {name!r}")
