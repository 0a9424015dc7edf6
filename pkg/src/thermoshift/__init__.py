"""Transfer-operator workbench for subshifts of finite type.

Pressure, Gibbs measures and normalized complex transfer operators on
interval-realized subshifts, oscillatory-cancellation (damped-operator)
machinery specialized to one-dimensional realizations, periodic-orbit
counting against the logarithmic integral, and suspension-flow correlation
estimates.
"""

from .symbolic import (
    SymbolicSystem,
    build_system,
    admissible_words,
    cylinder_of,
    subcylinders,
    representative,
    metric_D,
    distortion_ratios,
)
from .fields import ScalarField, ComplexField, constant_field, field_from_callable, indicator_field
from .thermo import (
    Measure,
    ThermoState,
    birkhoff_sum,
    transfer_apply,
    rpf_solve,
    pressure,
    solve_pressure_root,
    gibbs_measure,
    normalized_potential,
)

__version__ = "0.1.0"
