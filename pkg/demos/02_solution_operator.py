"""The backward solution operator on grid functions.

The solver discretizes the Lax-Oleinik style representation of the
evolutionary equation u_t + H(x, u_x, u) = 0: each step minimizes the
one-step action over arrival velocities, with the value coupling handled
implicitly.  Fixed points are stationary viscosity solutions.  This demo
verifies the operator against the one model with a closed-form semigroup
and shows the two structural properties everything else leans on.
"""

import numpy as np

from contacthj.hamiltonians import discounted, example3
from contacthj.semigroup import (GridFunction, StepScheme, backward_step,
                                 evolve, forward_step)

print(__doc__)

# For H = u + p^2/2 a constant profile c evolves to c e^{-t} exactly.
model = discounted()
for n, dt in [(128, 2e-3), (256, 1e-3), (512, 5e-4)]:
    scheme = StepScheme.for_model(model, dt=dt)
    w = evolve(model, scheme, GridFunction.constant(n, 1.0), 1.0)[-1][1]
    err = np.max(np.abs(w.values - np.exp(-1.0)))
    print(f"n={n:4d} dt={dt:g}: |T_1(1) - e^-1| = {err:.3e}")
print("the error halves with each simultaneous (n, dt) refinement, "
      "first-order convergence as expected for the scheme")

# Monotonicity: ordered inputs stay ordered under both operators.
model = example3(1.0, 1.0)
scheme = StepScheme.for_model(model, dt=2e-3)
rng = np.random.default_rng(7)
x = GridFunction.make_nodes(128)
phi = GridFunction(128, 0.3 * np.sin(x) + 0.1 * np.cos(3 * x))
psi = GridFunction(128, phi.values + 0.2 + 0.05 * np.sin(2 * x) ** 2)
b_gap = np.min(backward_step(model, scheme, psi).values
               - backward_step(model, scheme, phi).values)
f_gap = np.min(forward_step(model, scheme, psi).values
               - forward_step(model, scheme, phi).values)
print(f"monotonicity: min gap after one backward step {b_gap:.3e}, "
      f"after one forward step {f_gap:.3e} (both must stay >= 0)")

# The conjugate pair brackets the identity: forward-after-backward sits
# below the input, backward-after-forward above, within O(dt^2).
coarse = StepScheme.for_model(model, dt=1e-2)
phi = GridFunction(1024, 0.2 * np.sin(GridFunction.make_nodes(1024)))
down = forward_step(model, coarse, backward_step(model, coarse, phi))
up = backward_step(model, coarse, forward_step(model, coarse, phi))
print(f"comparison pair: max overshoot below {np.max(down.values - phi.values):.2e}, "
      f"above {np.min(up.values - phi.values):.2e} "
      f"(allowance 10 dt^2 = {10 * coarse.dt**2:.1e})")
