"""Frequently hypercyclic translation semigroups indexed by complex sectors."""
from .sector_geometry import Sector
from .density import (Anchored, DensityEstimate, DiscPrimitive, ExactSet, HalfPlanePrimitive,
                      HorizonTooSmallError, PredicateSet, SeparatedFamily, Subsector,
                      build_separated_family, geometric_horizons, integer_density_prefix,
                      return_set_density_bound, sector_lower_density)
from .weights import (CatalogError, WeightFn, catalog_weight, check_admissibility,
                      check_necessary, check_sufficient, integrate_weight, sublevel_set)
from .lp_space import (AlignmentError, GridFunction, LpContext, backshift, growth_bound_check,
                       indicator, lincomb, norm, translate)
from .fhc import (ConstructionFailedError, CriterionInapplicableError, CriterionPlan, FhcVector,
                  VerificationFailedError, construct_vector, orbit_density, plan_criterion,
                  tail_radius, transition_density, verify_return)

__version__ = "0.1.0"
