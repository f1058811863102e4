"""Stabilized cut finite element solver for the Helmholtz-Beltrami
equation on closed implicit surfaces."""

from .geometry import (
    AmbientScalarField,
    LevelSetSurface,
    PolyIsoline,
    Sphere,
    Spheroid,
    surface_from_json,
)
from .mesh import (
    ActiveMesh,
    BackgroundMesh,
    NodalLevelSet,
    build_background_mesh,
    extract_active_mesh,
    interpolate_level_set,
)
from .cut import (
    SurfaceCell,
    extract_surface_cells,
    intersect_tet,
    quadrature_on_cell,
    surface_area,
)
from .fem import (
    ComplexSparseSystem,
    StabilizationParams,
    assemble_jump,
    assemble_stiffness,
    assemble_surface_mass,
    assemble_system,
)
from .mms import (
    ConvergenceRecord,
    ManufacturedCase,
    error_norms,
    fit_rates,
    surface_laplacian,
)
from .solver import SolveResult, solve
from .pipeline import build_geometry_case, convergence_sweep, solve_case

__version__ = "0.1.0"
