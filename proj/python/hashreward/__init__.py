"""Python bindings for the hashreward C++ core."""

from ._hashreward import (
    ConfigurationError,
    DomainError,
    FormatError,
    InputError,
    NumericError,
    collect_demos,
    default_config,
    evaluate_expert,
    expert_start_value,
    feature_frobenius,
    generalization_bound,
    hashing_loss_terms,
    imitate,
    pseudo_reward,
    rademacher_bound,
    render,
    spearman,
    spectral_complexity,
    spectral_norm,
    variant_mask,
    variants,
)

__all__ = [name for name in dir() if not name.startswith("_")]
