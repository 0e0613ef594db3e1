"""Alpha-geometry of statistical manifolds on the chart and on the frame bundle."""

from .bundle import (BundleTangent, Frame, bundle_connection_form, canonical_form, curvature_form_eval,
                     curvature_via_bundle, fundamental_horizontal, fundamental_vertical, horizontal_lift_curve,
                     horizontal_lift_vector, local_connection_form, parallel_transport, split, torsion_form_eval)
from .expectation import Box, SampleSpace, StatisticalFamily, Strategy, expect, score, score2
from .families import log_scale, make_exponential, make_family_from_expression, make_normal, parse_density, reparameterize
from .manifold import (Trajectory, christoffel_lower, christoffel_mixed, curvature_tensor, fisher_metric, geodesic,
                       sectional_curvature, skewness_tensor)
