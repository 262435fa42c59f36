"""Energy functionals and their identities on Hermitian metrics of a flat complex 2-torus."""

from .forms import Form, integrate_22, is_positive_11, partial, partial_bar, wedge
from .functionals import (
    ImaginaryLeakError,
    InadmissiblePotentialError,
    PathSpec,
    err,
    evaluate,
    i_ay,
    j_ay,
    mabuchi_closed,
    mabuchi_pair,
    volume,
)
from .grid import Grid, ScalarField, build_grid, normalize_sup, random_band_limited_field
from .metrics import (
    HermitianMetric,
    check_conditions,
    flat_kahler_metric,
    gauduchon_torus_metric,
    generic_hermitian_metric,
    kahler_potential_metric,
    solve_gauduchon_factor,
)

__version__ = "0.1.0"
