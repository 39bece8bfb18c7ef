"""Petrov-Galerkin discretizations of first-kind operator equations and the
divergence of their Moore-Penrose solutions when the data leave the range.

Typical use::

    import pgdiverge as pg

    op = pg.volterra_operator()
    one = pg.FunctionHandle(lambda x: 1.0 + 0 * x, op.range_interval)
    sweep = pg.run_sweep(op, "trig", "trig", one, [4, 8, 16, 32, 64, 128, 256])
    print(pg.classify_growth(sweep))
"""
from .bases import (
    FAMILY_NAMES,
    BasisFamily,
    BasisSet,
    OrthonormalFrame,
    basis_member,
    basis_set,
    gram_matrix,
    orthonormal_frame,
    project,
    reconstruct,
)
from .diagnostics import (
    SINGULAR,
    GrowthVerdict,
    PicardReport,
    SweepResult,
    classify_growth,
    lemma22_check,
    picard_coefficients,
    picard_report,
    range_projection,
    run_sweep,
)
from .errors import NumericalError, PGError, ValidationError
from .galerkin import (
    AxiomResiduals,
    GalerkinSystem,
    MpSolution,
    Truncation,
    assemble,
    mp_axioms_check,
    mp_solve,
    pseudo_inverse,
)
from .numerics import (
    FunctionHandle,
    Interval,
    QuadratureRule,
    default_rule,
    inner_product,
    l2_norm,
    make_gauss_rule,
    pairing_matrix,
    svd,
)
from .operators import (
    OPERATOR_NAMES,
    OperatorSpec,
    SingularSystem,
    adjoint_from_singular,
    backward_heat_operator,
    sigma_sequence,
    spectral_function,
    symm_circle_operator,
    synthetic_diagonal_operator,
    volterra_operator,
)

__version__ = "0.1.0"
