"""Virtual-work dynamics on sampled 1-jet grids.

Kinematical states are sections of a first-order jet space sampled on regular
grids; the dynamical state is a (generally inexact) force/momentum 1-form.
The package derives the equations of motion from the virtual-work functional,
checks the generalized current balance identity (divergence of the induced
current against its force source), and specializes the machinery to point
masses, rigid bodies, and finite strain.
"""

__version__ = "0.1.0"

from .jet import (
    Jet1Point,
    ParameterGrid,
    SampledSection,
    Variation,
    immersion_rank_check,
    integrability_defect,
    prolong_map,
    prolong_variation,
)
from .dynamics import (
    EvaluationError,
    FundamentalOneForm,
    GammaTensor,
    dstar,
    euler_homogeneity_check,
    gamma_tensor,
    kinetic_exactness_check,
    lagrange_bracket,
    lagrangian_exactness_residual,
    pulled_back_form,
    virtual_work,
)
from .noether import (
    BalanceReport,
    GroupActionLinearization,
    balance_check,
    fundamental_vector_field,
    induced_variation,
    kinetic_current,
    lagrangian_current,
    lagrangian_stress_energy_tensor,
    noether_current,
    noether_map_matrix,
    spin_tensor,
    stress_energy_tensor,
)

__all__ = [
    "__version__",
    "Jet1Point",
    "ParameterGrid",
    "SampledSection",
    "Variation",
    "immersion_rank_check",
    "integrability_defect",
    "prolong_map",
    "prolong_variation",
    "EvaluationError",
    "FundamentalOneForm",
    "GammaTensor",
    "dstar",
    "euler_homogeneity_check",
    "gamma_tensor",
    "kinetic_exactness_check",
    "lagrange_bracket",
    "lagrangian_exactness_residual",
    "pulled_back_form",
    "virtual_work",
    "BalanceReport",
    "GroupActionLinearization",
    "balance_check",
    "fundamental_vector_field",
    "induced_variation",
    "kinetic_current",
    "lagrangian_current",
    "lagrangian_stress_energy_tensor",
    "noether_current",
    "noether_map_matrix",
    "spin_tensor",
    "stress_energy_tensor",
]
