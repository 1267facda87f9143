"""Monte Carlo and regression estimators built on the lattice engines."""
from .ensemble import EnsembleSpec, default_workers, replicate_seed, run_tasks
from .regression import RegressionFit, ols
from .shape import (ShapeEstimate, analytic_shape, angular_fan, antidiagonal_fan, constant_shape,
                    estimate_limit_shape, corner_growth_shape, shape_containment)
from .diagnostics import (ConcentrationReport, DeltaFReport, MeanFreeEnergyCurve, OffsetSpec,
                          bridge_excess, concentration_tail, delta_f_variance, mean_excess_curve)
from .exponents import (ExponentEstimate, RelationReport, check_relation, estimate_chi,
                        estimate_kappa, estimate_xi)

__all__ = [
    "EnsembleSpec", "default_workers", "replicate_seed", "run_tasks", "RegressionFit", "ols",
    "ShapeEstimate", "analytic_shape", "angular_fan", "antidiagonal_fan", "constant_shape",
    "estimate_limit_shape", "corner_growth_shape", "shape_containment",
    "ExponentEstimate", "RelationReport", "check_relation", "estimate_chi", "estimate_kappa",
    "estimate_xi", "ConcentrationReport", "DeltaFReport", "MeanFreeEnergyCurve", "OffsetSpec",
    "bridge_excess", "concentration_tail", "delta_f_variance", "mean_excess_curve",
]
