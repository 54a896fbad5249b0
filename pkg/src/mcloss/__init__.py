"""Losses, generalized entropies and dissimilarity measures for multi-category classification."""

from .simplex import (
    ConfigurationError,
    CostMatrix,
    InvalidInputError,
    Margin,
    ProbVector,
    TrainingFailure,
    argmax_lowest,
    argmin_lowest,
    as_array,
    box_grid,
    cost_class_weighted,
    cost_zero_one,
    expected_rows,
    expected_value,
    make_prob,
    norm_l1,
    norm_top2,
    sample_simplex,
    simplex_grid,
    uniform_prob,
)
from .entropy import (
    DissimilaritySpec,
    EntropyLoss,
    EntropySpec,
    bregman,
    bregman_many,
    conjugate_cost_weighted,
    conjugate_numeric,
    cost_weighted_entropy,
    dissimilarity_from_entropy,
    entropy_cost_weighted,
    entropy_from_dissimilarity,
    entropy_of_loss,
    entropy_of_loss_many,
    entropy_zero_one,
    loss_from_entropy,
    power_entropy,
    power_entropy_spec,
    shannon_entropy,
    zero_one_entropy,
)
from .scoring import (
    BaseConvex,
    CompositeRule,
    LossFamily,
    ScoringRule,
    beta_base,
    beta_weight,
    calibration_base,
    calibration_symmetric_base,
    canonical_representation_residual,
    canonical_representation_residuals,
    composite_gradient,
    composite_value,
    conjugate_loss_values,
    exponential_base,
    likelihood_base,
    log_loss_rule,
    loss_from_dissimilarity_conjugate,
    loss_from_dissimilarity_ratio,
    loss_from_dissimilarity_simplex,
    paired_risks,
    pairwise_asym_rule,
    pairwise_dissimilarity,
    pairwise_sym_rule,
    power_rule,
    power_score,
    power_score_limit,
    properness_on_mesh,
    risk_matrix,
    rule_from_dissimilarity,
    softmax_link,
    softmax_rows,
    two_class_rule,
    two_class_weight,
)
from .hinge import (
    HingeLoss,
    binary_hinge,
    complete_affine,
    complete_affine_rows,
    complete_clipped,
    complete_clipped_rows,
    cost_hinge,
    cost_linear,
    hinge_loss,
    max_hinge,
    score_by_loss,
    sorted_hinge,
    sorted_hinge_global,
    sorted_hinge_margin,
    sum_hinge,
    sum_hinge_margin,
)
from .bounds import (
    BoundReport,
    CostTransformedLoss,
    PsiProfile,
    calibration_infimum,
    certify_entropy,
    check_cw_bounds,
    check_general_bound,
    check_hinge_bounds,
    check_scoring_bounds,
    check_two_class_cost_bound,
    check_w_set_bound,
    convex_minorant,
    cost_transform,
    cost_weighted_loss,
    cost_weighted_regrets,
    kappa_constant,
    misclass_upper_bounds,
    psi_profile,
    psi_rw_value,
    regret,
    risk_identity_check,
    strong_convexity_modulus,
    transform_shift,
    transformed_weights,
    value_manifold_check,
    zero_one_loss,
    zero_one_regrets,
)
from .training import (
    Dataset,
    LinearModel,
    TrainableFamily,
    class_posteriors,
    composite_family,
    evaluate_zero_one,
    fit,
    hinge_family,
    init_model,
    load_dataset,
    nearest_mean_predictions,
    predict_affine,
    predict_argmax,
    predict_by_score,
    predict_clipped,
    save_dataset,
    simplex_frame,
    synth_gaussians,
    training_objective,
)

__version__ = "0.1.0"
