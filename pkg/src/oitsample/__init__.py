"""Random sampling from nonuniform densities on the flat 2-torus.

A density-matching diffeomorphism is built once by integrating Poisson
velocity fields along the closed-form Fisher-Rao geodesic from the uniform
density to the target; after that, fresh i.i.d. samples cost one uniform
draw and one map evaluation each.
"""

from .densities import make_density
from .errors import (
    DegenerateInputError,
    FileFormatError,
    GridMismatchError,
    InvalidInputError,
    NumericalBlowupError,
    OrientationLossError,
    PositivityError,
)
from .geodesic import (
    Density,
    GeodesicPath,
    bhattacharyya_angle,
    geodesic_eval,
    geodesic_path,
    log_density_rate,
    normalize,
    quadrature,
    set_dynamic_range,
    uniform_density,
)
from .grid import (
    DiffeoMap,
    PeriodicGrid,
    ScalarField,
    VectorField,
    compose,
    gradient_spectral,
    identity_map,
    interp_scalar,
    interp_vector,
    jacobian_det,
    wrap_angle,
)
from .poisson import PoissonWorkspace, laplacian_spectral, solve_poisson
from .sampler import SampleBatch, draw_uniform, sample_target, transform_samples
from .transport import (
    TransportConfig,
    TransportResult,
    build_transport_map,
    pushforward_residual,
)
from .validate import (
    BinnedHistogram,
    chi_squared_gof,
    chi_squared_survival,
    expected_bin_mass,
    histogram,
    rejection_sample_oracle,
    two_sample_chi_squared,
)

__version__ = "0.1.0"

__all__ = [
    "BinnedHistogram",
    "DegenerateInputError",
    "Density",
    "DiffeoMap",
    "FileFormatError",
    "GeodesicPath",
    "GridMismatchError",
    "InvalidInputError",
    "NumericalBlowupError",
    "OrientationLossError",
    "PeriodicGrid",
    "PoissonWorkspace",
    "PositivityError",
    "SampleBatch",
    "ScalarField",
    "TransportConfig",
    "TransportResult",
    "VectorField",
    "bhattacharyya_angle",
    "build_transport_map",
    "chi_squared_gof",
    "chi_squared_survival",
    "compose",
    "draw_uniform",
    "expected_bin_mass",
    "geodesic_eval",
    "geodesic_path",
    "gradient_spectral",
    "histogram",
    "identity_map",
    "interp_scalar",
    "interp_vector",
    "jacobian_det",
    "laplacian_spectral",
    "log_density_rate",
    "make_density",
    "normalize",
    "pushforward_residual",
    "quadrature",
    "rejection_sample_oracle",
    "sample_target",
    "set_dynamic_range",
    "solve_poisson",
    "transform_samples",
    "two_sample_chi_squared",
    "uniform_density",
    "wrap_angle",
]
