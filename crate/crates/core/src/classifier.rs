//! Posterior predictive classification.
//!
//! For an unlabeled count vector `y*` with total `n*`, each class `i`
//! contributes the Dirichlet-multinomial (Pólya) likelihood
//!
//! ```text
//! P(y* | i) = n*! / Π y*_j! · Γ(α_i+) / Γ(α_i+ + n*) · Π Γ(α_ij + y*_j) / Γ(α_ij)
//! ```
//!
//! which is multiplied by the class prior and normalized in log space.

use rayon::prelude::*;

use crate::conjugate::{validate_labels, CountVector, DirichletParams, PriorFamily, Typology};
use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma, log_sum_exp};

/// Tolerance on `|Σ probs - 1|` for a class prior.
pub const PRIOR_TOLERANCE: f64 = 1e-12;

/// `P(class)` before looking at the query.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrior {
    probs: Vec<f64>,
}

impl ClassPrior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (index, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability { index, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::PriorNotNormalized(sum));
        }
        Ok(Self { probs })
    }

    pub fn uniform(classes: usize) -> Self {
        Self {
            probs: vec![1.0 / classes as f64; classes],
        }
    }

    /// Normalizes non-negative weights with a positive sum.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        for (index, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidProbability { index, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::AllPriorsZero);
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Proportion of `site_labels` falling in each of `classes`.
pub fn empirical_class_prior<S: AsRef<str>>(
    site_labels: &[S],
    classes: &[String],
) -> Result<ClassPrior> {
    if site_labels.is_empty() {
        return Err(Error::EmptyLabelList);
    }
    let mut tally = vec![0u64; classes.len()];
    for label in site_labels {
        let label = label.as_ref();
        let i = classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))?;
        tally[i] += 1;
    }
    let total = site_labels.len() as f64;
    ClassPrior::new(tally.iter().map(|&t| t as f64 / total).collect())
}

/// Where a fitted model's class prior comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ClassPriorSource {
    Explicit(Vec<f64>),
    /// Proportion of labeled sites per class.
    #[default]
    Empirical,
    Uniform,
}

impl ClassPriorSource {
    /// `site_labels` is only consulted for [`ClassPriorSource::Empirical`].
    pub fn resolve<S: AsRef<str>>(
        &self,
        classes: &[String],
        site_labels: &[S],
    ) -> Result<ClassPrior> {
        match self {
            ClassPriorSource::Explicit(values) => {
                if values.len() != classes.len() {
                    return Err(Error::DimensionMismatch {
                        expected: classes.len(),
                        found: values.len(),
                    });
                }
                ClassPrior::from_weights(values)
            }
            ClassPriorSource::Empirical => empirical_class_prior(site_labels, classes),
            ClassPriorSource::Uniform => Ok(ClassPrior::uniform(classes.len())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassPriorSource::Explicit(_) => "explicit",
            ClassPriorSource::Empirical => "empirical",
            ClassPriorSource::Uniform => "uniform",
        }
    }
}

/// Per-class posteriors plus the class prior.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    typology: Typology,
    class_labels: Vec<String>,
    posteriors: Vec<DirichletParams>,
    prior: ClassPrior,
    prior_family: PriorFamily,
}

impl FittedModel {
    pub fn new(
        typology: Typology,
        class_labels: Vec<String>,
        posteriors: Vec<DirichletParams>,
        prior: ClassPrior,
        prior_family: PriorFamily,
    ) -> Result<Self> {
        if class_labels.is_empty() {
            return Err(Error::EmptyModel);
        }
        if class_labels.len() < 2 {
            return Err(Error::TooFewClasses(class_labels.len()));
        }
        validate_labels(&class_labels)?;
        for (expected, found) in [
            (class_labels.len(), posteriors.len()),
            (class_labels.len(), prior.len()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        for p in &posteriors {
            if p.len() != typology.len() {
                return Err(Error::DimensionMismatch {
                    expected: typology.len(),
                    found: p.len(),
                });
            }
        }
        Ok(Self {
            typology,
            class_labels,
            posteriors,
            prior,
            prior_family,
        })
    }

    /// Fits one posterior per class from pooled class counts.
    pub fn fit(
        typology: Typology,
        class_labels: Vec<String>,
        class_counts: &[CountVector],
        family: PriorFamily,
        prior: ClassPrior,
    ) -> Result<Self> {
        if class_counts.len() != class_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: class_labels.len(),
                found: class_counts.len(),
            });
        }
        let posteriors = class_labels
            .iter()
            .zip(class_counts)
            .map(|(label, counts)| family.posterior(&typology, label, counts))
            .collect::<Result<Vec<_>>>()?;
        Self::new(typology, class_labels, posteriors, prior, family)
    }

    pub fn typology(&self) -> &Typology {
        &self.typology
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn posteriors(&self) -> &[DirichletParams] {
        &self.posteriors
    }

    pub fn prior(&self) -> &ClassPrior {
        &self.prior
    }

    pub fn prior_family(&self) -> PriorFamily {
        self.prior_family
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Same posteriors, different class prior.
    pub fn with_prior(&self, prior: ClassPrior) -> Result<Self> {
        Self::new(
            self.typology.clone(),
            self.class_labels.clone(),
            self.posteriors.clone(),
            prior,
            self.prior_family,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyWarning {
    /// These classes have prior 0 and can never be predicted.
    ZeroPriorClasses(Vec<String>),
}

/// Posterior class distribution for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `ln P(y* | class i, training data)`.
    pub log_likelihoods: Vec<f64>,
    /// `log_likelihoods + ln prior`; `-inf` for zero-prior classes.
    pub log_unnormalized: Vec<f64>,
    pub probs: Vec<f64>,
    pub argmax_index: usize,
    pub argmax: String,
    pub warnings: Vec<ClassifyWarning>,
}

/// Log of the Dirichlet-multinomial probability of `query` under `posterior`.
pub fn log_predictive_likelihood(posterior: &DirichletParams, query: &CountVector) -> Result<f64> {
    if posterior.len() != query.len() {
        return Err(Error::DimensionMismatch {
            expected: posterior.len(),
            found: query.len(),
        });
    }
    if query.is_zero() {
        return Err(Error::NoEvidence);
    }
    let n = query.total();
    let a_plus = posterior.alpha_plus();
    let mut acc = ln_factorial(n) + ln_gamma(a_plus) - ln_gamma(a_plus + n as f64);
    for (&a, &y) in posterior.alpha().iter().zip(query.counts()) {
        if y > 0 {
            acc += ln_gamma(a + y as f64) - ln_gamma(a) - ln_factorial(y);
        }
    }
    Ok(acc)
}

/// Index of the largest value; the first one wins ties.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn classify(model: &FittedModel, query: &CountVector) -> Result<Classification> {
    if query.len() != model.typology.len() {
        return Err(Error::DimensionMismatch {
            expected: model.typology.len(),
            found: query.len(),
        });
    }
    if query.is_zero() {
        return Err(Error::NoEvidence);
    }
    let prior = model.prior.probs();
    if prior.iter().all(|&p| p == 0.0) {
        return Err(Error::AllPriorsZero);
    }
    let log_likelihoods = model
        .posteriors
        .iter()
        .map(|p| log_predictive_likelihood(p, query))
        .collect::<Result<Vec<_>>>()?;
    let log_unnormalized: Vec<f64> = log_likelihoods
        .iter()
        .zip(prior)
        .map(|(&ll, &p)| {
            if p > 0.0 {
                ll + p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let norm = log_sum_exp(&log_unnormalized);
    let probs: Vec<f64> = log_unnormalized.iter().map(|v| (v - norm).exp()).collect();
    let argmax_index = first_argmax(&probs);

    let zero_prior: Vec<String> = model
        .class_labels
        .iter()
        .zip(prior)
        .filter(|(_, &p)| p == 0.0)
        .map(|(l, _)| l.clone())
        .collect();
    let warnings = if zero_prior.is_empty() {
        Vec::new()
    } else {
        vec![ClassifyWarning::ZeroPriorClasses(zero_prior)]
    };

    Ok(Classification {
        log_likelihoods,
        log_unnormalized,
        probs,
        argmax_index,
        argmax: model.class_labels[argmax_index].clone(),
        warnings,
    })
}

/// Classifies every query independently, preserving order. A failing query
/// (for example a zero-total [`Error::NoEvidence`]) yields an `Err` in its
/// slot without affecting the others.
pub fn classify_batch(model: &FittedModel, queries: &[CountVector]) -> Vec<Result<Classification>> {
    queries.par_iter().map(|q| classify(model, q)).collect()
}
