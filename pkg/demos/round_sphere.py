"""Walk through the round fuzzy sphere one stage at a time.

Run with ``python3 demos/round_sphere.py [n]`` (default n = 6, under a minute).
"""
import sys

import numpy as np

from fuzzyspace import (
    DistanceProblem,
    analytic_spectrum,
    build_deformed_dirac,
    distance_matrix,
    fit_ellipsoid,
    generate_states,
    observable_report,
    smacof_embed,
    su2_generators,
)

n = int(sys.argv[1]) if len(sys.argv) > 1 else 6

# The round Dirac operator has integer eigenvalues 1..n and -1..-n.
spec = analytic_spectrum(n)
print(f"distinct |lambda|: {sorted({int(v) for v in np.abs(spec.values)})}")

# Heat-kernel observables read off a dimension close to 2.
obs = observable_report(spec)
print(f"dimension estimate {obs.dimension_estimate}, volume ratio {obs.volume_ratio:.3f}")

# Spin-coherent states spread over the sphere by a weak repulsion.
L = su2_generators(n)
states = generate_states(L, 16, seed=0)
print(f"{len(states)} states, mean dispersion {states.mean_dispersion:.4f} (l = {(n - 1) / 2})")

# Connes distances, then a 3-D embedding of the distance matrix.
D = distance_matrix(DistanceProblem(build_deformed_dirac(n)), states)
emb = smacof_embed(D, d=3, restarts=4)
print(f"stress {emb.stress:.2e}, mean correlation {emb.correlations.mean():.4f}")

# The embedded points lie on a sphere.
fit = fit_ellipsoid(emb.coords)
print(f"fitted axes {np.round(fit.axes, 3)}, residual/dof {fit.residual_per_dof:.2e}")
