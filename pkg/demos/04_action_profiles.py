"""Pinned action profiles and forward/backward duality.

h(x, t) pinned at (x0, u0) is the minimal value at x after time t over all
curves leaving x0 with value u0, where the running cost itself depends on
the transported value.  The solver computes it by evolving a needle profile
with the backward operator; the forward operator gives the maximal dual.
"""

import numpy as np

from contacthj.hamiltonians import example3
from contacthj.semigroup import StepScheme, action_function, shoot_action

print(__doc__)

model = example3(1.0, 1.0)
scheme = StepScheme.for_model(model, dt=1e-3)
x0, u0, t = 1.0, 0.1, 0.5

h_back = action_function(model, scheme, x0, u0, t, n=512)
i_min = int(np.argmin(h_back.values))
print(f"backward action pinned at (x0={x0}, u0={u0}), t={t}:")
print(f"  range [{h_back.values.min():.4f}, {h_back.values.max():.4f}], "
      f"minimum at x={h_back.nodes[i_min]:.3f}")
print("  (the large values sit outside the cone reachable from the pin in "
      "time t, where the needle cap still dominates)")

# Cross-check one value by shooting characteristics from (x0, p0, u0)
# over a fan of initial momenta and keeping shots that land on x1.  The
# value coupling drags momentum along the way, so the fan is generous.
x1 = 1.3
grid_value = float(h_back.interp(x1))
p_fan = np.linspace(-5.0, 7.0, 481)
shot = shoot_action(model, x0, u0, x1, t, p_fan)
print(f"  value at x={x1}: grid {grid_value:.5f}, shooting {shot:.5f}, "
      f"gap {abs(grid_value - shot):.1e}")

# Duality: transporting the backward value forward recovers the pin.
u1 = grid_value
h_fwd = action_function(model, scheme, x1, u1, t, n=512, forward=True)
back_at_pin = float(h_fwd.interp(x0))
print(f"forward action pinned at (x={x1}, u={u1:.5f}) evaluated at x0: "
      f"{back_at_pin:.5f} (started from u0 = {u0}); "
      f"gap {abs(back_at_pin - u0):.1e}")
print("the gap is O((dx + dt) e^(lambda t)), the scheme's transport error")
