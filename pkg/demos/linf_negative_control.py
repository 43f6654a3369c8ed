"""
The l-infinity plane is not CAT(0)
==================================

The sup-norm plane is geodesic but not uniquely so, and the CAT(0)
four-point inequality fails. The sampled validator should report a witness.
"""

from proxlab import SampleSpec, validate_cat0
from proxlab.geometry import LInfPlane

for rep in validate_cat0(LInfPlane(2), SampleSpec(count=2000, seed=0)):
    print(rep.summary())
    print("witness:", rep.witness)
