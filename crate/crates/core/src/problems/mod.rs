//! Concrete problem families and their homotopy maps.

mod erf;
mod labels;
mod logistic;
mod mlp;
mod quadratic;

pub use erf::{erf, erf_derivative, ErfRegression};
pub use labels::LabelInterpolationMap;
pub use logistic::{CubicLogistic, CUBIC_DIM};
pub use mlp::{MlpLayout, MlpSine, HIDDEN, MLP_DIM};
pub use quadratic::LinearQuadratic;
