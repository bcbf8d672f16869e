mod laws;
mod series;

pub use laws::{
    discrete_exact, ito_scale_ode, momentum_params, rescale_momentum, rescale_sgd, scale_momentum, scale_sgd,
    stationary_angular_speed, translation_momentum, translation_sgd, Quadrature,
};
pub use series::{error_summary, predict, relative_errors, ErrorSummary, Method, Prediction};
