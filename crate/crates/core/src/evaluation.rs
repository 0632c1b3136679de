//! Quantitative checks of the pipeline: a Monte-Carlo oracle for the
//! closed-form predictive and leave-one-out cross-validation.
//!
//! Randomness comes from ChaCha8 streams. Work is split into fixed-size
//! chunks and chunk `k` draws from stream `k` of the master seed, so results
//! are identical whether chunks run serially or in parallel.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::classifier::{classify, log_predictive_likelihood, ClassPriorSource, FittedModel};
use crate::conjugate::{log_multinomial_pmf, CountVector, DirichletParams, PriorFamily};
use crate::dataset::Corpus;
use crate::error::{Error, Result};

pub const MIN_ORACLE_SAMPLES: usize = 10_000;
/// Agreement floor in log space; the effective tolerance is
/// `max(ORACLE_LOG_FLOOR, 3 · stderr)`.
pub const ORACLE_LOG_FLOOR: f64 = 1e-2;
const CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub closed_form_log: f64,
    pub mc_log: f64,
    /// Standard error of `mc_log` (delta method).
    pub mc_stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl OracleComparison {
    pub fn abs_error(&self) -> f64 {
        (self.closed_form_log - self.mc_log).abs()
    }

    pub fn tolerance(&self) -> f64 {
        ORACLE_LOG_FLOOR.max(3.0 * self.mc_stderr)
    }

    pub fn passes(&self) -> bool {
        self.abs_error() <= self.tolerance()
    }
}

/// Derives an independent seed for item `index` of a seeded run.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Draws `θ ~ Dir(α)` by normalizing independent `Gamma(α_j, 1)` variates.
fn sample_dirichlet<R: Rng>(gammas: &[Gamma<f64>], rng: &mut R, out: &mut [f64]) {
    loop {
        let mut sum = 0.0;
        for (slot, g) in out.iter_mut().zip(gammas) {
            *slot = g.sample(rng);
            sum += *slot;
        }
        if sum > 0.0 {
            for slot in out.iter_mut() {
                *slot /= sum;
            }
            return;
        }
    }
}

/// Estimates `P(query | posterior) = E_θ[Mult(query | θ)]` by simple Monte
/// Carlo and reports it next to the closed form.
pub fn mc_predictive_oracle(
    posterior: &DirichletParams,
    query: &CountVector,
    n_samples: usize,
    seed: u64,
) -> Result<OracleComparison> {
    if n_samples < MIN_ORACLE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {n_samples}"
        )));
    }
    let closed_form_log = log_predictive_likelihood(posterior, query)?;
    let gammas = posterior
        .alpha()
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    // Scale weights by the pmf at the posterior mean to keep exp() in range
    // for large queries.
    let shift = log_multinomial_pmf(&posterior.mean(), query)?;
    let shift = if shift.is_finite() { shift } else { 0.0 };

    let chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<(f64, f64)> {
            let mut rng = chunk_rng(seed, chunk);
            let len = CHUNK.min(n_samples - chunk * CHUNK);
            let mut theta = vec![0.0; posterior.len()];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..len {
                sample_dirichlet(&gammas, &mut rng, &mut theta);
                let w = (log_multinomial_pmf(&theta, query)? - shift).exp();
                sum += w;
                sum_sq += w * w;
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));

    let n = n_samples as f64;
    let mean = sum / n;
    let variance = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let mc_stderr = if mean > 0.0 {
        (variance / n).sqrt() / mean
    } else {
        f64::INFINITY
    };
    Ok(OracleComparison {
        closed_form_log,
        mc_log: shift + mean.ln(),
        mc_stderr,
        n_samples,
        seed,
    })
}

/// `count` random queries over `categories` types with totals uniform in
/// `1..=max_total`.
pub fn random_queries(
    categories: usize,
    count: usize,
    max_total: u64,
    seed: u64,
) -> Vec<CountVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=max_total);
            let mut counts = vec![0u64; categories];
            for _ in 0..n {
                counts[rng.random_range(0..categories)] += 1;
            }
            CountVector::new(counts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub query_id: String,
    pub class_label: String,
    pub comparison: OracleComparison,
}

/// Runs the oracle for every (query, class) pair. Zero-total queries are
/// skipped. Pair `k` uses seed `derive_seed(seed, k)`.
pub fn oracle_suite(
    model: &FittedModel,
    queries: &[(String, CountVector)],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    let mut pair = 0u64;
    for (query_id, query) in queries.iter().filter(|(_, q)| !q.is_zero()) {
        for (class_label, posterior) in model.class_labels().iter().zip(model.posteriors()) {
            let comparison =
                mc_predictive_oracle(posterior, query, n_samples, derive_seed(seed, pair))?;
            pair += 1;
            rows.push(OracleRow {
                query_id: query_id.clone(),
                class_label: class_label.clone(),
                comparison,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooRecord {
    pub site_id: String,
    pub true_class: String,
    /// `None` when the record has no counts to classify.
    pub predicted_class: Option<String>,
    pub probs: Vec<f64>,
    /// `ln P(true class | counts)`.
    pub log_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub classes: Vec<String>,
    pub records: Vec<LooRecord>,
    /// Over classified records only.
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub mean_log_score: f64,
    /// Records skipped for having zero counts.
    pub skipped: usize,
}

/// Leave-one-out: each record is removed from its class totals, the model
/// is refit on the rest (including the empirical prior, if that is the
/// source) and the record is classified.
pub fn leave_one_out(
    corpus: &Corpus,
    family: PriorFamily,
    source: &ClassPriorSource,
) -> Result<LooReport> {
    let records = corpus.records();
    if records.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 2 records, got {}",
            records.len()
        )));
    }
    let mut present: Vec<&str> = corpus.site_labels();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::TooFewClasses(present.len()));
    }

    let classes = corpus.classes();
    let totals = corpus.class_totals();
    let labels = corpus.site_labels();

    let folds: Vec<LooRecord> = (0..records.len())
        .into_par_iter()
        .map(|held| -> Result<LooRecord> {
            let record = &records[held];
            let class_index = classes
                .iter()
                .position(|c| *c == record.class_label)
                .expect("validated class label");
            let mut fold_totals = totals.clone();
            fold_totals[class_index] = fold_totals[class_index].checked_sub(&record.counts)?;
            let fold_labels: Vec<&str> = labels
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != held)
                .map(|(_, l)| *l)
                .collect();
            let prior = source.resolve(classes, &fold_labels)?;
            let model = FittedModel::fit(
                corpus.typology().clone(),
                classes.to_vec(),
                &fold_totals,
                family,
                prior,
            )?;
            match classify(&model, &record.counts) {
                Ok(c) => Ok(LooRecord {
                    site_id: record.site_id.clone(),
                    true_class: record.class_label.clone(),
                    predicted_class: Some(c.argmax),
                    log_score: Some(c.probs[class_index].ln()),
                    probs: c.probs,
                }),
                Err(Error::NoEvidence) => Ok(LooRecord {
                    site_id: record.site_id.clone(),
                    true_class: record.class_label.clone(),
                    predicted_class: None,
                    probs: Vec::new(),
                    log_score: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
    let mut score_sum = 0.0;
    let mut evaluated = 0usize;
    for r in &folds {
        let (Some(pred), Some(score)) = (&r.predicted_class, r.log_score) else {
            continue;
        };
        let t = classes
            .iter()
            .position(|c| *c == r.true_class)
            .expect("known class");
        let p = classes.iter().position(|c| c == pred).expect("known class");
        confusion[t][p] += 1;
        score_sum += score;
        evaluated += 1;
    }
    let correct: u64 = (0..classes.len()).map(|i| confusion[i][i]).sum();
    let (accuracy, mean_log_score) = if evaluated == 0 {
        (0.0, f64::NAN)
    } else {
        (
            correct as f64 / evaluated as f64,
            score_sum / evaluated as f64,
        )
    };
    Ok(LooReport {
        classes: classes.to_vec(),
        skipped: folds.len() - evaluated,
        records: folds,
        accuracy,
        confusion,
        mean_log_score,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl LooReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("site_id,true_class,predicted_class");
        for c in &self.classes {
            let _ = write!(out, ",{}", csv_field(&format!("P({c})")));
        }
        out.push_str(",log_score\n");
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{}",
                csv_field(&r.site_id),
                csv_field(&r.true_class),
                csv_field(r.predicted_class.as_deref().unwrap_or("no-evidence"))
            );
            if r.probs.is_empty() {
                out.push_str(&",".repeat(self.classes.len()));
            } else {
                for p in &r.probs {
                    let _ = write!(out, ",{p:.17e}");
                }
            }
            match r.log_score {
                Some(s) => {
                    let _ = writeln!(out, ",{s:.17e}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let evaluated = self.records.len() - self.skipped;
        let _ = writeln!(out, "Leave-one-out cross-validation");
        let _ = writeln!(
            out,
            "  records classified: {evaluated} (skipped, no counts: {})",
            self.skipped
        );
        let _ = writeln!(out, "  accuracy:           {:.4}", self.accuracy);
        let _ = writeln!(out, "  mean log score:     {:.4}", self.mean_log_score);
        let _ = writeln!(out, "  confusion (rows = true, columns = predicted):");
        let width = self
            .classes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(1)
            .max(4);
        let _ = write!(out, "    {:width$}", "");
        for c in &self.classes {
            let _ = write!(out, " {c:>width$}");
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let _ = write!(out, "    {c:width$}");
            for v in row {
                let _ = write!(out, " {v:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(
        "query_id,class,closed_form_log,mc_log,mc_stderr,abs_error,tolerance,n_samples,seed,pass\n",
    );
    for r in rows {
        let c = &r.comparison;
        let _ = writeln!(
            out,
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}",
            csv_field(&r.query_id),
            csv_field(&r.class_label),
            c.closed_form_log,
            c.mc_log,
            c.mc_stderr,
            c.abs_error(),
            c.tolerance(),
            c.n_samples,
            c.seed,
            c.passes()
        );
    }
    out
}

pub fn oracle_text(rows: &[OracleRow]) -> String {
    let mut out = String::new();
    let passed = rows.iter().filter(|r| r.comparison.passes()).count();
    let _ = writeln!(out, "Monte-Carlo oracle vs closed-form predictive");
    let _ = writeln!(out, "  pairs passing: {passed}/{}", rows.len());
    if let Some(worst) = rows.iter().max_by(|a, b| {
        a.comparison
            .abs_error()
            .total_cmp(&b.comparison.abs_error())
    }) {
        let _ = writeln!(
            out,
            "  largest |log error|: {:.3e} ({} / {}, tolerance {:.3e})",
            worst.comparison.abs_error(),
            worst.query_id,
            worst.class_label,
            worst.comparison.tolerance()
        );
    }
    for r in rows.iter().filter(|r| !r.comparison.passes()) {
        let _ = writeln!(
            out,
            "  FAIL {} / {}: closed form {:.6}, MC {:.6} ± {:.2e}",
            r.query_id,
            r.class_label,
            r.comparison.closed_form_log,
            r.comparison.mc_log,
            r.comparison.mc_stderr
        );
    }
    out
}
