//! Dirichlet-multinomial conjugate machinery.
//!
//! A context is described by a [`CountVector`] over the `J` categories of a
//! [`Typology`]. Class-conditional category probabilities get a Dirichlet
//! prior; observing counts adds them to the concentration parameters:
//!
//! ```text
//! θ ~ Dir(α),  y | θ ~ Mult(n, θ)   =>   θ | y ~ Dir(α + y)
//! ```
//!
//! Marginally each component is `Be(α_j, α_+ - α_j)`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma};

/// Tolerance on `|Σθ - 1|` for simplex membership.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Ordered, unique category identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Typology {
    labels: Vec<String>,
}

impl Typology {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        validate_labels(&labels)?;
        if labels.len() < 2 {
            return Err(Error::TooFewCategories(labels.len()));
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub(crate) fn validate_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for label in labels {
        if label.trim().is_empty() {
            return Err(Error::EmptyLabel);
        }
        if !seen.insert(label.as_str()) {
            return Err(Error::DuplicateLabel(label.clone()));
        }
    }
    Ok(())
}

/// Non-negative integer tallies per category, with their total.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0; len])
    }

    /// A single observation of category `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut counts = vec![0; len];
        counts[index] = 1;
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.total == 0
    }

    pub fn checked_add(&self, other: &CountVector) -> Result<CountVector> {
        check_dim(self.len(), other.len())?;
        Ok(Self::new(
            self.counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn checked_sub(&self, other: &CountVector) -> Result<CountVector> {
        check_dim(self.len(), other.len())?;
        let mut out = Vec::with_capacity(self.len());
        for (index, (&a, &b)) in self.counts.iter().zip(&other.counts).enumerate() {
            out.push(a.checked_sub(b).ok_or(Error::CountUnderflow {
                index,
                available: a,
                removed: b,
            })?);
        }
        Ok(Self::new(out))
    }
}

impl From<Vec<u64>> for CountVector {
    fn from(counts: Vec<u64>) -> Self {
        Self::new(counts)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Dirichlet concentration parameters. `alpha_plus` is carried alongside
/// `alpha` and updated incrementally.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    alpha_plus: f64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let alpha_plus = alpha.iter().sum();
        Self::with_total(alpha, alpha_plus)
    }

    /// Builds params with an explicitly supplied total, which must agree with
    /// the sum of `alpha` to rounding.
    pub fn with_total(alpha: Vec<f64>, alpha_plus: f64) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::TooFewCategories(alpha.len()));
        }
        for (index, &value) in alpha.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveConcentration { index, value });
            }
        }
        let sum: f64 = alpha.iter().sum();
        let slack = 4.0 * f64::EPSILON * alpha.len() as f64 * sum.max(1.0);
        if !alpha_plus.is_finite() || (alpha_plus - sum).abs() > slack {
            return Err(Error::InvalidArgument(format!(
                "alpha_plus {alpha_plus} does not match the sum of alpha {sum}"
            )));
        }
        Ok(Self { alpha, alpha_plus })
    }

    pub fn symmetric(len: usize, value: f64) -> Result<Self> {
        Self::with_total(vec![value; len], value * len as f64)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_plus(&self) -> f64 {
        self.alpha_plus
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Conjugate update: `alpha_j + y_j`, `alpha_plus + n`.
    ///
    /// A zero-total `data` returns an identical copy.
    pub fn posterior_update(&self, data: &CountVector) -> Result<DirichletParams> {
        check_dim(self.len(), data.len())?;
        let alpha = self
            .alpha
            .iter()
            .zip(data.counts())
            .map(|(&a, &y)| a + y as f64)
            .collect();
        Ok(Self {
            alpha,
            alpha_plus: self.alpha_plus + data.total() as f64,
        })
    }

    /// Inverse of [`posterior_update`](Self::posterior_update). Fails if a
    /// component would drop to zero or below.
    pub fn downdate(&self, data: &CountVector) -> Result<DirichletParams> {
        check_dim(self.len(), data.len())?;
        let mut alpha = Vec::with_capacity(self.len());
        for (index, (&a, &y)) in self.alpha.iter().zip(data.counts()).enumerate() {
            let value = a - y as f64;
            if value.is_nan() || value <= 0.0 {
                return Err(Error::NonPositiveConcentration { index, value });
            }
            alpha.push(value);
        }
        Ok(Self {
            alpha,
            alpha_plus: self.alpha_plus - data.total() as f64,
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.alpha_plus).collect()
    }

    pub fn marginal_beta(&self, index: usize) -> Result<BetaMarginal> {
        let a = *self.alpha.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.len(),
        })?;
        Ok(BetaMarginal::new(a, self.alpha_plus - a))
    }

    /// `ln Γ(α+) - Σ ln Γ(α_j) + Σ (α_j - 1) ln θ_j`.
    ///
    /// Boundary points are accepted where the density is finite: a zero
    /// `θ_j` contributes nothing when `α_j = 1` and makes the density zero
    /// when `α_j > 1`.
    pub fn log_pdf(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.len(), theta.len())?;
        check_simplex(theta)?;
        let mut acc = ln_gamma(self.alpha_plus);
        for (index, (&a, &t)) in self.alpha.iter().zip(theta).enumerate() {
            acc -= ln_gamma(a);
            if t == 0.0 {
                if a < 1.0 {
                    return Err(Error::InfiniteDensity { index, alpha: a });
                }
                if a > 1.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                continue;
            }
            acc += (a - 1.0) * t.ln();
        }
        Ok(acc)
    }
}

impl fmt::Display for DirichletParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dir(")?;
        for (i, a) in self.alpha.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", format_concentration(*a, self.len()))?;
        }
        write!(f, ")")
    }
}

/// Renders a concentration exactly as `k`, `k/2` or `k/J` when that
/// fraction reproduces the value bit for bit, otherwise as a
/// 17-significant-digit decimal.
pub fn format_concentration(value: f64, categories: usize) -> String {
    match as_fraction(value, &[1, 2, categories as u64]) {
        Some((k, 1)) => format!("{k}"),
        Some((k, d)) => format!("{k}/{d}"),
        None => format!("{value:.16e}"),
    }
}

/// Finds `(k, d)` with `d` from `denominators` and `k as f64 / d as f64 == value`.
pub fn as_fraction(value: f64, denominators: &[u64]) -> Option<(u64, u64)> {
    if !(value.is_finite() && value >= 0.0) || value > 1e12 {
        return None;
    }
    denominators.iter().filter(|&&d| d > 0).find_map(|&d| {
        let k = (value * d as f64).round();
        (k / d as f64 == value).then_some((k as u64, d))
    })
}

/// `Be(a, b)` with its mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaMarginal {
    pub a: f64,
    pub b: f64,
    pub mean: f64,
    pub variance: f64,
}

impl BetaMarginal {
    pub fn new(a: f64, b: f64) -> Self {
        let s = a + b;
        Self {
            a,
            b,
            mean: a / s,
            variance: a * b / (s * s * (s + 1.0)),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln()
            - crate::special::ln_beta(self.a, self.b)
    }
}

/// Non-informative symmetric Dirichlet priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorFamily {
    /// `α_j = 1/J`.
    #[default]
    Perks,
    /// `α_j = 1/2`.
    Jeffreys,
    /// `α_j = 1` (Bayes-Laplace, flat).
    Laplace,
    /// `α_j = 0`; improper, usable only when every category is observed.
    Haldane,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 4] = [
        PriorFamily::Perks,
        PriorFamily::Jeffreys,
        PriorFamily::Laplace,
        PriorFamily::Haldane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriorFamily::Perks => "perks",
            PriorFamily::Jeffreys => "jeffreys",
            PriorFamily::Laplace => "laplace",
            PriorFamily::Haldane => "haldane",
        }
    }

    /// Per-category concentration for `J` categories.
    pub fn concentration(self, categories: usize) -> f64 {
        match self {
            PriorFamily::Perks => 1.0 / categories as f64,
            PriorFamily::Jeffreys => 0.5,
            PriorFamily::Laplace => 1.0,
            PriorFamily::Haldane => 0.0,
        }
    }

    fn total(self, categories: usize) -> f64 {
        match self {
            PriorFamily::Perks => 1.0,
            PriorFamily::Jeffreys => 0.5 * categories as f64,
            PriorFamily::Laplace => categories as f64,
            PriorFamily::Haldane => 0.0,
        }
    }

    pub fn prior(self, typology: &Typology) -> Result<DirichletParams> {
        if self == PriorFamily::Haldane {
            return Err(Error::ImproperPrior(self.name()));
        }
        let j = typology.len();
        DirichletParams::with_total(vec![self.concentration(j); j], self.total(j))
    }

    /// Posterior for `class` after observing `data`. Works for the improper
    /// Haldane prior as long as every category has a positive count.
    pub fn posterior(
        self,
        typology: &Typology,
        class: &str,
        data: &CountVector,
    ) -> Result<DirichletParams> {
        check_dim(typology.len(), data.len())?;
        if self == PriorFamily::Haldane {
            if let Some(j) = data.counts().iter().position(|&c| c == 0) {
                return Err(Error::ImproperPosterior {
                    family: self.name(),
                    class: class.to_string(),
                    category: typology.labels()[j].clone(),
                });
            }
            let alpha = data.counts().iter().map(|&c| c as f64).collect();
            return DirichletParams::with_total(alpha, data.total() as f64);
        }
        self.prior(typology)?.posterior_update(data)
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perks" => Ok(PriorFamily::Perks),
            "jeffreys" => Ok(PriorFamily::Jeffreys),
            "laplace" | "bayes-laplace" => Ok(PriorFamily::Laplace),
            "haldane" => Ok(PriorFamily::Haldane),
            other => Err(Error::InvalidArgument(format!(
                "unknown prior family `{other}`"
            ))),
        }
    }
}

/// The Perks prior: symmetric Dirichlet with every `α_j = 1/J`, `α_+ = 1`.
pub fn perks_prior(typology: &Typology) -> DirichletParams {
    let j = typology.len();
    DirichletParams {
        alpha: vec![1.0 / j as f64; j],
        alpha_plus: 1.0,
    }
}

pub fn posterior_update(prior: &DirichletParams, data: &CountVector) -> Result<DirichletParams> {
    prior.posterior_update(data)
}

pub fn marginal_beta(params: &DirichletParams, index: usize) -> Result<BetaMarginal> {
    params.marginal_beta(index)
}

pub fn log_dirichlet_pdf(params: &DirichletParams, theta: &[f64]) -> Result<f64> {
    params.log_pdf(theta)
}

fn check_simplex(theta: &[f64]) -> Result<()> {
    for (index, &value) in theta.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NotInSimplex { sum });
    }
    Ok(())
}

/// `ln n! - Σ ln y_j! + Σ y_j ln θ_j`, with `0 · ln 0 = 0`.
pub fn log_multinomial_pmf(theta: &[f64], data: &CountVector) -> Result<f64> {
    check_dim(theta.len(), data.len())?;
    check_simplex(theta)?;
    let mut acc = ln_factorial(data.total());
    for (&t, &y) in theta.iter().zip(data.counts()) {
        if y == 0 {
            continue;
        }
        if t == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += y as f64 * t.ln() - ln_factorial(y);
    }
    Ok(acc)
}

/// Posterior means as a `J × I` table: `table[j][i] = α_ij / α_i+`.
pub fn posterior_mean_table(posteriors: &[DirichletParams]) -> Result<Vec<Vec<f64>>> {
    let first = posteriors.first().ok_or(Error::EmptyModel)?;
    let j = first.len();
    for p in posteriors {
        check_dim(j, p.len())?;
    }
    Ok((0..j)
        .map(|row| {
            posteriors
                .iter()
                .map(|p| p.alpha[row] / p.alpha_plus)
                .collect()
        })
        .collect())
}
