"""Abstract proximal point algorithm on CAT(0) backends, with sampled
inequality checks and explicit rate certification."""

from .geometry import (Euclidean, Hyperboloid, LInfPlane, SampleSpec, Spider, combine, dist, quasilin,
                       space_from_dict, validate_busemann, validate_cat0, validate_geodesic,
                       validate_quasilinearization)
from .mappings import (MappingFamily, MappingHandle, Modulus, check_c1, check_firmly_nonexpansive,
                       check_jointly_fne, check_jointly_p2, check_nonexpansive, check_p2, check_uniform_fne,
                       check_uniform_p2, implication_chain)
from .ppa import IterationTrace, run_ppa, verify_divergence_rate
from .rates import RateCertificate, RateInstance, certify_rate, psi, sigma, unique_fixed_point_check
from .reports import CheckReport
from .resolvents import (ConvexProblem, MonotoneOperator, SubproblemConfig, build_family, monotone_resolvent,
                         moreau_yosida, nonexpansive_resolvent)
from .schedules import StepSchedule

__version__ = "0.1.0"
