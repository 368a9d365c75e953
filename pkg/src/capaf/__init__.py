"""Mixed volumes, quermassintegral inequalities and spectra for convex caps.

The package works with convex bodies in 3-space that rest on a plane with a
prescribed contact angle, represented through their support functions on a
geodesic polar grid of the model spherical cap.  It provides the discrete
shape calculus (capgrid), admissible fields and random bodies (capfun), mixed
volumes and integral identities (mixedvol), the weighted operator spectrum and
quadratic inequalities (spectral), the embedding back into 3-space
(reconstruct), and a batch verification driver (cli).
"""

from .capgrid import (
    CapGrid,
    a_of,
    build_grid,
    cap_area,
    hessian,
    integrate,
    robin_residual,
    surface_gradient,
)
from .capfun import (
    CapillaryBody,
    CapillaryField,
    CertifyResult,
    certify,
    ell,
    ell_values,
    enforce_contact_angle,
    from_neumann,
    horizontal_linear,
    load_body,
    minkowski_combine,
    random_body,
    random_capillary_field,
    save_body,
    translate_horizontal,
)
from .mixedvol import (
    QuermassReport,
    SteinerReport,
    b_theta,
    h_k_field,
    minkowski_identity_residual,
    mixed_discriminant,
    mixed_discriminant_polarization,
    mixed_volume,
    quermass_report,
    quermassintegral,
    steiner_check,
    symmetry_residual,
)
from .spectral import (
    AFReport,
    ChainReport,
    SpectrumReport,
    WeightedSpace,
    af_chain_check,
    af_check,
    assemble_operator,
    eigen_estimate_residual,
    equality_decompose,
    quermass_chain_check,
    self_adjoint_residual,
    spectrum,
)
from .reconstruct import (
    EmbeddedPatch,
    ParallelCheck,
    boundary_form_quermass,
    contact_angle_residual,
    embed,
    enclosed_volume,
    export_mesh,
    interior_min_height,
    load_mesh,
    parallel_body,
    planarity_residual,
    principal_radii,
)

__version__ = "0.1.0"

__all__ = [
    "CapGrid", "a_of", "build_grid", "cap_area", "hessian", "integrate",
    "robin_residual", "surface_gradient",
    "CapillaryBody", "CapillaryField", "CertifyResult", "certify", "ell",
    "ell_values", "enforce_contact_angle", "from_neumann", "horizontal_linear",
    "load_body",
    "minkowski_combine", "random_body", "random_capillary_field", "save_body",
    "translate_horizontal",
    "QuermassReport", "SteinerReport", "b_theta", "h_k_field",
    "minkowski_identity_residual", "mixed_discriminant",
    "mixed_discriminant_polarization", "mixed_volume", "quermass_report",
    "quermassintegral", "steiner_check", "symmetry_residual",
    "AFReport", "ChainReport", "SpectrumReport", "WeightedSpace",
    "af_chain_check", "af_check", "assemble_operator",
    "eigen_estimate_residual", "equality_decompose", "quermass_chain_check",
    "self_adjoint_residual", "spectrum",
    "EmbeddedPatch", "ParallelCheck", "boundary_form_quermass",
    "contact_angle_residual", "embed", "enclosed_volume", "export_mesh",
    "interior_min_height", "load_mesh", "parallel_body",
    "planarity_residual", "principal_radii",
    "__version__",
]
