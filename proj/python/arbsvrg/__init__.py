"""Free-SVRG and L-SVRG-D under arbitrary sampling."""

from ._core import (
    ConvergenceError,
    Dataset,
    DivergenceError,
    LossModel,
    ParseError,
    SamplingScheme,
    SmoothnessProfile,
    ValidationError,
    expected_residual,
    expected_smoothness,
    from_dense,
    generate_synthetic,
    load_libsvm,
    optimal_batch_lsvrgd,
    optimal_batch_m_eq_n,
    optimal_batch_m_eq_n_over_b,
    optimal_loop,
    reference_solution,
    run_experiment,
    run_free_svrg,
    run_lsvrg_d,
    run_reference_svrg,
    sampling_constants,
    smoothness_profile,
    step_size_free,
    step_size_lsvrgd,
    total_complexity_free,
    total_complexity_lsvrgd,
    tuning_table,
    variance_matrix,
    zeta,
)

__all__ = [name for name in dir() if not name.startswith("_")]
