"""contacthj: numerics for contact Hamilton-Jacobi equations on the circle.

The package covers the full pipeline from pointwise Hamiltonian models to
stability verdicts: characteristic (contact) flow integration, monotone
implicit semi-Lagrangian semigroups of Lax-Oleinik type, implicitly defined
action functions, stationary solutions and their conjugate pairs, invariant
graph filtering, occupation-measure ensembles, and classification of
stationary solutions as asymptotically stable, unstable, or critical,
together with sufficient uniqueness checks.
"""

__version__ = "0.1.0"

from . import (contact_flow, experiments, hamiltonians, mather,  # noqa: F401
               semigroup, weakkam)
