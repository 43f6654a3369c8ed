"""
Rate certificate for the shifted identity
=========================================

The resolvent of A(x) = x with unit steps halves the distance to the zero
each iteration. The explicit rate bound is far more conservative than the
observed geometric decay, which the certificate makes visible.
"""

import numpy as np

from proxlab import Euclidean, MonotoneOperator, StepSchedule, build_family, certify_rate, run_ppa
from proxlab.mappings import Modulus
from proxlab.rates import RateInstance

E2 = Euclidean(2)
fam = build_family("monotone", MonotoneOperator("shifted-identity", p=[0.0, 0.0]), StepSchedule.constant(1.0), E2)

# the trajectory: distance to the zero halves every step
tr = run_ppa(fam, np.array([2.0, 0.0]), 10)
print("dist_to_p:", tr.dist_to_p)

# certify with b = 2 and the modulus phi(t) = t^2
inst = RateInstance(fam, np.array([2.0, 0.0]), np.zeros(2), 2.0, Modulus.power(1.0, 2), "shifted-identity")
cert = certify_rate(inst, 4)
print(cert.to_markdown())
