"""Matrix-valued transfer operators for multiwavelet filters."""

from .trigmat import (
    DimensionError,
    ELReport,
    Filter,
    MatTrigPoly,
    adjoint,
    dilate,
    evaluate,
    is_hermitian_valued,
    make_filter,
    multiply,
    qmf_residual,
    transpose,
)
from .transfer import (
    EnumerationGuardError,
    InvarianceError,
    TransitionMatrix,
    el_condition,
    fixed_space,
    transfer_apply,
    transfer_apply_pointwise,
    transition_matrix,
)

__version__ = "0.1.0"
