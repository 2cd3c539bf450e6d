//! Regularized linear classifier over TF-IDF vectors, its evaluation, and an
//! adapter for scores produced elsewhere.

mod eval;
mod external;
mod link;
mod model;
mod split;
mod train;

pub use eval::{evaluate, render_table5, ClassMetrics, Confusion, EvalReport};
pub use external::{load_external_predictions, read_predictions, write_predictions, ExternalReport};
pub use link::Link;
pub use model::{ClassifierModel, PredictedLabel, Prediction, PredictionSet, PredictionSource};
pub use split::{split, Split};
pub use train::{penalized_gradient, penalized_objective, train, TrainConfig};

/// Default decision threshold on the score.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
