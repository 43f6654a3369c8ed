"""
Moreau-Yosida resolvents on the hyperboloid
===========================================

A single-anchor prox has a closed form along the geodesic to the anchor.
Several anchors need the iterative solver, whose gradient-norm certificate
bounds the evaluation error.
"""

import numpy as np

from proxlab import ConvexProblem, Hyperboloid, SubproblemConfig, moreau_yosida

H2 = Hyperboloid(2)
a = H2.from_spatial([0.3, -0.2])
x = H2.from_spatial([1.0, 0.5])

# closed form against the iterative path
f = ConvexProblem.squared_distance(a)
closed = moreau_yosida(f, 1.3, H2)(x)
it = moreau_yosida(f, 1.3, H2, SubproblemConfig(eps_eval=1e-10, method="geodesic-averaging"))(x)
print("closed vs iterative:", H2.dist(closed, it))
print("step fraction:", H2.dist(x, closed) / H2.dist(x, a), "expected", 1.3 / 2.3)

# a weighted sum of three squared distances
anchors = [H2.from_spatial(c) for c in ([0.5, 0.0], [-0.3, 0.7], [0.1, -0.9])]
g = ConvexProblem("squared-distance-sum", weights=[1.0, 2.0, 0.5], anchors=anchors)
y = x
for n in range(20):
    y = moreau_yosida(g, 1.0, H2, SubproblemConfig(eps_eval=1e-10))(y)
print("minimizer estimate (spatial part):", np.round(y[1:], 8))
