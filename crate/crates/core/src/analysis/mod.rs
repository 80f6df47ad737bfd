//! Analytic criteria, reference solutions and estimators.

mod bias;
mod criteria;
mod delay_ode;
mod indicator;
mod lyapunov;

pub use bias::{
    erf, erfc, eta_from_path, gbm_bias_study, gbm_exact_moments, gbm_truncation_ratio, log_erfc,
    log_gbm_truncation_ratio, truncation_ratio_bounds, truncation_ratio_mean_value, GbmBiasConfig,
    GbmBiasRow, GbmBiasStudy,
};
pub use criteria::{
    critical_delay, default_delta, dgbm_bound, dgbm_condition, lyapunov_params,
    FlockingCriteriaReport, LyapunovParams,
};
pub use delay_ode::{
    classify_delayed_ode, fundamental_solution, l2_criterion, L2Report, L2Verdict, OdeRegime,
    L2_TAIL_FRACTION, L2_TAIL_TOL, REGIME_TOL,
};
pub use indicator::{
    calibrate_threshold, flocking_indicator, indicator_from_windows, model_indicator,
    numerical_flocking, path_indicator, IndicatorValue, DEFAULT_THETA, INDICATOR_WINDOW,
};
pub use lyapunov::{lyapunov_value, micro_macro};
