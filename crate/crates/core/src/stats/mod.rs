//! Mixed models, marginal-means contrasts, false-discovery control and the
//! articulatory distance analysis.

pub mod analysis;
pub mod design;
pub mod emm;
pub mod hypotheses;
pub mod lmm;
pub mod msd;
pub mod optim;

pub use analysis::{
    analyze_categorical, analyze_categorical_at, analyze_gradient, correct_means, ellipses,
    write_coefficients, write_contrasts, CategoricalReport, Coefficient, ContrastRow,
    EllipseRecord, GradientReport, COEFFICIENT_HEADER, CONTRAST_HEADER, DEFAULT_ALPHA,
};
pub use design::{Design, Factor, Setting};
pub use emm::{bh_adjust, contrast, emmeans, find, normal_p, Emm, EmmContrast};
pub use hypotheses::{Comparison, Hypothesis, HYPOTHESES};
pub use lmm::{fit_lmm_reml, Grouping, LmmFit};
pub use msd::{
    articulatory_msd, confidence_ellipse, Articulator, ArticulatorMsd, Ellipse, CHI2_95_2DF,
};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("rank-deficient design; aliased columns: {}", .0.join(", "))]
    Rank(Vec<String>),
    #[error("REML search did not converge after {iterations} iterations (recent criterion values {trace:?})")]
    Convergence { iterations: usize, trace: Vec<f64> },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("grouping error: {0}")]
    Grouping(String),
    #[error("not estimable: {0}")]
    Estimability(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("missing phone groups: {}", .0.join(", "))]
    MissingGroup(Vec<String>),
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("empty analysis: {0}")]
    Empty(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StatsError>;
