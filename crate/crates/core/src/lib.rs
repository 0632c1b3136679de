//! Bayesian classification of count vectors over a fixed set of categories.
//!
//! Each class gets a Dirichlet posterior over category probabilities
//! (conjugate to the multinomial). An unlabeled count vector is scored under
//! each class with the closed-form posterior predictive and combined with a
//! class prior.
//!
//! ```
//! use dirimult_core::dataset::fixtures;
//! use dirimult_core::{CountVector, classify};
//!
//! let model = fixtures::published_model();
//! // a single arrowhead of type 7
//! let c = classify(&model, &CountVector::unit(7, 6)).unwrap();
//! assert_eq!(c.argmax, "P3");
//! ```

pub mod classifier;
pub mod conjugate;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod special;

pub use classifier::{
    classify, classify_batch, empirical_class_prior, log_predictive_likelihood, ClassPrior,
    ClassPriorSource, Classification, ClassifyWarning, FittedModel,
};
pub use conjugate::{
    log_dirichlet_pdf, log_multinomial_pmf, marginal_beta, perks_prior, posterior_mean_table,
    posterior_update, BetaMarginal, CountVector, DirichletParams, PriorFamily, Typology,
};
pub use dataset::{Corpus, QueryRecord, QuerySet, TrainingRecord};
pub use error::{Error, Result};
