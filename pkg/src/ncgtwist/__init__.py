"""Numerical workbench for twisted cyclic cochains, heat-kernel characters
and quantum-group twists on finite-dimensional truncations."""

from .linalg import (
    NotSquare,
    NotHermitian,
    NotPositiveDefinite,
    DomainError,
    DimensionMismatch,
    HermitianEigensystem,
    hermitian_eigen,
    matrix_function,
    hermitian_function,
    fractional_power,
    commutator,
    trace,
    operator_norm,
    dump_matrix,
    load_matrix,
)
from .twisted_complex import (
    NotInvariant,
    FiniteAlgebra,
    finite_algebra,
    function_algebra,
    full_matrix_algebra,
    algebra_from_matrices,
    Cochain,
    make_cochain,
    zero_cochain,
    evaluate_cochain,
    dump_cochain,
    load_cochain,
    sigma_invariance_defect,
    cyclic_permute,
    cyclic_permute_inv,
    cyclic_symmetrize,
    unit_evaluate,
    twisted_insert,
    coboundary_B,
    coboundary_b,
    EntireCochainSequence,
    total_boundary,
    cochain_norm_bounds,
    entire_growth_report,
    random_invariant_cochain,
)
from .heat import (
    MethodBudgetExceeded,
    exp_simplex_weight,
    JloContext,
    make_jlo_context,
    jlo_functional,
    jlo_tensor,
    twist_sup_norm,
    jlo_bound_defect,
    jlo_identity_defects,
)
from .peter_weyl import (
    UnknownIrrep,
    InconsistentDecomposition,
    BlockStructureViolation,
    TruncationOverflow,
    IrrepDatum,
    make_irrep,
    IrrepTable,
    irrep_table,
    dump_irrep_table,
    load_irrep_table,
    RepDecomposition,
    make_decomposition,
    block_scalar_operator,
    phi_z,
    phi_matrix,
    build_F_phi,
    canonical_twist,
    haar_pair,
    chi_weighted_trace,
    chi_conjugation_check,
    invariance_defect,
    GrowthProbeReport,
    growth_probe,
)
from .suq2 import (
    GramSingular,
    BlockIdentificationFailed,
    TailTooLarge,
    SpectralGapTooSmall,
    QAlgebraElement,
    qa_element,
    qa_unit,
    generator,
    key_degree,
    qa_degree,
    qa_add,
    qa_scale,
    normal_order,
    qa_adjoint,
    haar,
    counit,
    antipode,
    comultiply,
    haar_invariance_oracle,
    monomial_keys,
    q_integer,
    suq2_irrep_table,
    GnsTruncation,
    element_pair,
    gns_build,
    represent,
    safe_subspace_mask,
    gns_vector,
    build_R,
    build_Rprime,
    build_R1,
    build_dirac,
    equivariance_defect,
    HaarRecovery,
    haar_recovery,
    fixed_point_basis,
    fixed_projection_defect,
    UnitaryWitness,
    u_element,
    product_oracle,
    make_eta,
    eta_tail_bound,
    Suq2Model,
    load_suq2_model,
    dump_suq2_model,
    model_spectral_fn,
)
from .spectral_data import (
    NotIdempotent,
    NotUnitary,
    NotFixed,
    TwistedSpectralData,
    make_spectral_data,
    expand_in_basis,
    ValidationReport,
    validate_spectral_data,
    twist_automorphism,
    ChernCharacter,
    chern_character,
    cocycle_defect,
    dump_character,
    PairingResult,
    pair_even,
    pair_odd,
)

__version__ = "0.1.0"
