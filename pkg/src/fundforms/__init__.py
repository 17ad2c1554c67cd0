"""Reconstruction of immersed bodies from their fundamental forms.

A numpy toolkit for the discrete geometry of immersions: compatibility
residuals of the Gauss-Codazzi-Ricci equations, moving-frame integration
of the Pfaff and Poincare systems, rigid alignment and quotient distances,
geometric-rigidity experiments for sphere-valued maps, and weak-convergence
diagnostics for wrinkled membranes.
"""

__version__ = "0.1.0"

from .chart import Chart
from .errors import (
    DegenerateImmersionError,
    FieldError,
    ShapeMismatchError,
    SPDViolationError,
)
from .fields import (
    ImmersionField,
    MetricField,
    NormalConnectionField,
    SecondFormField,
    TensorField,
    VectorOneFormField,
    grad,
    grad_values,
    lp_norm,
    negative_norm_estimate,
    sine_dictionary,
    sobolev_norm,
)
from .curvature import (
    ChristoffelField,
    ResidualReport,
    RiemannField,
    christoffel,
    codazzi_residual,
    compatibility_threshold,
    gauss_residual,
    gauss_residual_field,
    residual_report,
    ricci_residual,
    riemann,
)
from .cartan import (
    CoframeField,
    ConnectionForm,
    FrameField,
    connection_form,
    first_structural_residual,
    holonomy_defect,
    integrate_pfaff,
    integrate_poincare,
    orthonormal_frame,
    reconstruct,
)
from .immersion import (
    RigidMotion,
    best_rigid_motion,
    induced_metric,
    isometry_defect,
    normal_field,
    quotient_distance,
    second_form,
)
from .rigidity import (
    RigidityReport,
    SphereMap,
    best_sphere_rigid_motion,
    dist_to_SO,
    piola_residual,
    riemannian_cofactor,
    rigidity_experiment,
    rigidity_report,
)
from .asymptotics import (
    MembraneSequence,
    WeakLimitReport,
    error_decomposition,
    pullback_metric,
    pullback_second_form,
    weak_limit_check,
)
