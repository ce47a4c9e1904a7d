"""Random polytopes in the ball and ellipsoids: hulls, intrinsic volumes,
cap geometry and scaling experiments."""

from .caps import CapCover, SimplexFamily, WetPartProfile, cap_construction, cap_volume, economic_cover, hat_vs, wet_part
from .errors import (
    DegenerateInput,
    IllConditioned,
    NonPositive,
    NumericError,
    OriginOutside,
    OutOfRange,
    TooSmallCone,
)
from .experiments import (
    Trajectory,
    angle_measure_experiment,
    efron_stein_experiment,
    expectation_experiment,
    floating_containment_experiment,
    hatvs_variance_experiment,
    strong_law_trajectory,
    variance_experiment,
)
from .geometry import Cap, Frame, Hyperplane, ball_volume, cap_from_direction, project_points
from .hull import Polytope, convex_hull, enumerate_faces, min_facet_offset, polytope_volume
from .intrinsic import IntrinsicEstimate, exact_intrinsic, kubota_intrinsic, steiner_fit_oracle
from .sampling import BodySpec, RngStream, haar_subspace, uniform_ball, uniform_body, uniform_sphere
from .stats import fit_exponent
from .tables import ExperimentConfig, ExperimentTable

__version__ = "0.1.0"
