//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.
//!
//! Published values are typed in here directly rather than taken from the
//! crate's fixture constants.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dirimult_core::dataset::fixtures::{DEMO_QUERIES_CSV, PERIOD_COUNTS_CSV};
use dirimult_core::dataset::{parse_model, parse_query_csv, parse_training_csv, serialize_model};
use dirimult_core::evaluation::{leave_one_out, oracle_csv, oracle_suite, random_queries};
use dirimult_core::{
    classify, classify_batch, log_predictive_likelihood, ClassPrior, ClassPriorSource, CountVector,
    DirichletParams, FittedModel, PriorFamily,
};

/// Posterior Dirichlet parameters as published, numerators over 7.
const PUBLISHED_ALPHA_SEVENTHS: [[u32; 7]; 5] = [
    [15, 22, 8, 1, 1, 1, 1],
    [29, 36, 15, 8, 1, 1, 1],
    [43, 1, 43, 64, 29, 1, 71],
    [15, 1, 15, 8, 15, 1, 43],
    [1, 1, 1, 15, 1, 8, 36],
];

/// Published posterior means, `[type][period]`.
const PUBLISHED_MEANS: [[f64; 5]; 7] = [
    [0.3061, 0.3187, 0.1706, 0.1531, 0.0159],
    [0.4490, 0.3956, 0.0040, 0.0102, 0.0159],
    [0.1633, 0.1648, 0.1706, 0.1531, 0.0159],
    [0.0204, 0.0879, 0.2540, 0.0816, 0.2380],
    [0.0204, 0.0110, 0.1151, 0.1531, 0.0159],
    [0.0204, 0.0110, 0.0040, 0.0102, 0.1270],
    [0.0204, 0.0110, 0.2817, 0.4387, 0.5714],
];

const PUBLISHED_CLASS_PRIOR: [f64; 5] = [0.15, 0.20, 0.35, 0.15, 0.15];

const EXACT_TOL: f64 = 1e-12;
const TABLE3_TOL: f64 = 5e-5;
const BAYES_TOL: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-10;
const ORACLE_SAMPLES: usize = 1_000_000;
const ORACLE_QUERIES: usize = 10;
const ORACLE_MAX_TOTAL: u64 = 6;
const ORACLE_SEED: u64 = 0x00D1_2019;
const FAST_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(60);

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn train_periods() -> FittedModel {
    let corpus = parse_training_csv(PERIOD_COUNTS_CSV.as_bytes()).expect("period fixture");
    FittedModel::fit(
        corpus.typology().clone(),
        corpus.classes().to_vec(),
        &corpus.class_totals(),
        PriorFamily::Perks,
        ClassPrior::uniform(corpus.classes().len()),
    )
    .expect("fit")
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.detail = format!("{} [{:.2?}]", out.detail, elapsed);
    if let Some(budget) = budget {
        if elapsed > budget {
            out.pass = false;
            out.detail = format!("{} exceeds budget {:?}", out.detail, budget);
        }
    }
    out
}

/// Every composition of `total` into `parts` non-negative parts.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn table2_reproduction() -> Outcome {
    let model = train_periods();
    let mut worst = 0.0f64;
    for (post, row) in model.posteriors().iter().zip(PUBLISHED_ALPHA_SEVENTHS) {
        for (&a, k) in post.alpha().iter().zip(row) {
            worst = worst.max((a - k as f64 / 7.0).abs());
        }
    }
    outcome(
        worst <= EXACT_TOL,
        format!("35 alphas, max |alpha - k/7| = {worst:.1e} (tol {EXACT_TOL:.0e})"),
    )
}

fn table3_reproduction() -> Outcome {
    let model = train_periods();
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    for (j, row) in PUBLISHED_MEANS.iter().enumerate() {
        for (i, &published) in row.iter().enumerate() {
            let mean = model.posteriors()[i].marginal_beta(j).unwrap().mean;
            let err = (mean - published).abs();
            worst = worst.max(err);
            if err > TABLE3_TOL {
                misses.push(format!(
                    "P{} type {}: computed {mean:.6} vs published {published:.4} (|d| = {err:.1e})",
                    i + 1,
                    j + 1
                ));
            }
        }
    }
    let matched = 35 - misses.len();
    let mut detail = format!("{matched}/35 cells within {TABLE3_TOL:.0e}, max |d| = {worst:.1e}");
    if !misses.is_empty() {
        detail.push_str("; mismatches: ");
        detail.push_str(&misses.join("; "));
    }
    outcome(misses.is_empty(), detail)
}

fn published_prior_single_type7() -> Outcome {
    let model = train_periods()
        .with_prior(ClassPrior::from_weights(&PUBLISHED_CLASS_PRIOR).unwrap())
        .unwrap();
    let c = classify(&model, &CountVector::unit(7, 6)).unwrap();
    // Independent route: posterior mean of type 7 per period (k_7 / Σ k),
    // times the prior, normalized.
    let weights: Vec<f64> = PUBLISHED_ALPHA_SEVENTHS
        .iter()
        .zip(PUBLISHED_CLASS_PRIOR)
        .map(|(row, p)| row[6] as f64 / row.iter().sum::<u32>() as f64 * p)
        .collect();
    let total: f64 = weights.iter().sum();
    let worst = c
        .probs
        .iter()
        .zip(&weights)
        .map(|(p, w)| (p - w / total).abs())
        .fold(0.0, f64::max);
    let probs: Vec<String> = c.probs.iter().map(|p| format!("{p:.4}")).collect();
    outcome(
        c.argmax == "P3" && worst <= BAYES_TOL,
        format!(
            "argmax {} probs ({}) max |d| = {worst:.1e} (tol {BAYES_TOL:.0e})",
            c.argmax,
            probs.join(", ")
        ),
    )
}

fn predictive_normalization() -> Outcome {
    let model = train_periods();
    let p3 = &model.posteriors()[2];
    let comps = compositions(3, 7);
    let s7: f64 = comps
        .iter()
        .map(|y| {
            log_predictive_likelihood(p3, &CountVector::new(y.clone()))
                .unwrap()
                .exp()
        })
        .sum();
    let synthetic = DirichletParams::new(vec![0.7, 2.3, 5.1]).unwrap();
    let comps3 = compositions(5, 3);
    let s3: f64 = comps3
        .iter()
        .map(|y| {
            log_predictive_likelihood(&synthetic, &CountVector::new(y.clone()))
                .unwrap()
                .exp()
        })
        .sum();
    let e7 = (s7 - 1.0).abs();
    let e3 = (s3 - 1.0).abs();
    outcome(
        comps.len() == 84 && e7 <= NORMALIZATION_TOL && e3 <= NORMALIZATION_TOL,
        format!(
            "P3, n*=3: {} compositions, |sum - 1| = {e7:.1e}; Dir(0.7,2.3,5.1), n*=5: {} compositions, |sum - 1| = {e3:.1e}",
            comps.len(),
            comps3.len()
        ),
    )
}

fn oracle_agreement() -> Outcome {
    let model = train_periods();
    let queries: Vec<(String, CountVector)> =
        random_queries(7, ORACLE_QUERIES, ORACLE_MAX_TOTAL, ORACLE_SEED)
            .into_iter()
            .enumerate()
            .map(|(i, q)| (format!("q{i}"), q))
            .collect();
    let rows = oracle_suite(&model, &queries, ORACLE_SAMPLES, ORACLE_SEED).unwrap();
    let passed = rows.iter().filter(|r| r.comparison.passes()).count();
    let worst = rows
        .iter()
        .max_by(|a, b| {
            a.comparison
                .abs_error()
                .total_cmp(&b.comparison.abs_error())
        })
        .unwrap();
    outcome(
        passed == rows.len() && rows.len() == 50,
        format!(
            "{passed}/{} pairs within max(1e-2, 3·stderr) at {ORACLE_SAMPLES} samples; largest |d| = {:.2e} ({} / {})",
            rows.len(),
            worst.comparison.abs_error(),
            worst.query_id,
            worst.class_label
        ),
    )
}

fn single_draw_reduction() -> Outcome {
    let model = train_periods();
    let mut worst = 0.0f64;
    for (post, row) in model.posteriors().iter().zip(PUBLISHED_ALPHA_SEVENTHS) {
        let total: u32 = row.iter().sum();
        for (j, &k) in row.iter().enumerate() {
            let p = log_predictive_likelihood(post, &CountVector::unit(7, j))
                .unwrap()
                .exp();
            let mean = post.marginal_beta(j).unwrap().mean;
            let exact = k as f64 / total as f64;
            worst = worst.max((p - mean).abs()).max((p - exact).abs());
        }
    }
    outcome(
        worst <= EXACT_TOL,
        format!(
            "35 (period, type) pairs, max |P(unit) - mean| = {worst:.1e} (tol {EXACT_TOL:.0e})"
        ),
    )
}

fn no_extinction() -> Outcome {
    let corpus = parse_training_csv(PERIOD_COUNTS_CSV.as_bytes()).unwrap();
    let model = train_periods();
    let mut zero_cells = 0;
    let mut ok = true;
    for (totals, post) in corpus.class_totals().iter().zip(model.posteriors()) {
        for (j, &count) in totals.counts().iter().enumerate() {
            let m = post.marginal_beta(j).unwrap();
            ok &= post.alpha()[j] > 0.0 && m.mean > 0.0 && m.mean < 1.0;
            if count == 0 {
                zero_cells += 1;
            }
        }
    }
    outcome(
        ok,
        format!("all 35 alphas > 0 and means in (0, 1); zero-count cells checked: {zero_cells}"),
    )
}

fn round_trip_and_determinism() -> Outcome {
    let model = train_periods()
        .with_prior(ClassPrior::from_weights(&PUBLISHED_CLASS_PRIOR).unwrap())
        .unwrap();
    let text = serialize_model(&model).unwrap();
    let parsed = parse_model(&text).unwrap();
    let exact = parsed == model && parsed.posteriors()[2].alpha()[0] == 43.0 / 7.0;

    let run = || {
        let corpus = parse_training_csv(PERIOD_COUNTS_CSV.as_bytes()).unwrap();
        let loo = leave_one_out(&corpus, PriorFamily::Perks, &ClassPriorSource::Uniform).unwrap();
        let queries: Vec<(String, CountVector)> = random_queries(7, 3, 6, 5)
            .into_iter()
            .enumerate()
            .map(|(i, q)| (format!("q{i}"), q))
            .collect();
        let oracle = oracle_suite(&model, &queries, 20_000, 77).unwrap();
        format!("{}{}{}", loo.to_text(), loo.to_csv(), oracle_csv(&oracle))
    };
    let (a, b) = (run(), run());
    outcome(
        exact && a == b,
        format!(
            "model round-trip identical: {exact}; eval reports byte-identical: {} ({} bytes)",
            a == b,
            a.len()
        ),
    )
}

fn undated_sites_documented() -> Outcome {
    // The undated sites' counts are unpublished; the bundled query corpus is
    // synthetic. This checks it is labeled as such and classifies cleanly.
    let queries = parse_query_csv(DEMO_QUERIES_CSV.as_bytes()).unwrap();
    let labeled = DEMO_QUERIES_CSV.contains("SYNTHETIC");
    let model = train_periods()
        .with_prior(ClassPrior::from_weights(&PUBLISHED_CLASS_PRIOR).unwrap())
        .unwrap();
    let counts: Vec<CountVector> = queries.records.iter().map(|r| r.counts.clone()).collect();
    let results = classify_batch(&model, &counts);
    let normalized = results.iter().all(|r| {
        r.as_ref()
            .map(|c| (c.probs.iter().sum::<f64>() - 1.0).abs() <= EXACT_TOL)
            .unwrap_or(false)
    });
    outcome(
        labeled && normalized && results.len() == 25,
        format!(
            "not reproducible from published data; substituted by 1-8. Synthetic demo corpus labeled: {labeled}, {} records normalized: {normalized}",
            results.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (
            "1 Table 2 reproduction",
            Some(FAST_BUDGET),
            table2_reproduction,
        ),
        (
            "2 Table 3 reproduction",
            Some(FAST_BUDGET),
            table3_reproduction,
        ),
        (
            "3 published class prior, one type-7 arrowhead",
            None,
            published_prior_single_type7,
        ),
        (
            "4 predictive normalization",
            Some(FAST_BUDGET),
            predictive_normalization,
        ),
        (
            "5 Monte-Carlo oracle agreement",
            Some(ORACLE_BUDGET),
            oracle_agreement,
        ),
        ("6 single-arrowhead reduction", None, single_draw_reduction),
        ("7 no extinction", None, no_extinction),
        (
            "8 round-trip and determinism",
            None,
            round_trip_and_determinism,
        ),
        (
            "9 undated-site classifications",
            None,
            undated_sites_documented,
        ),
    ];
    println!("acceptance criteria");
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let out = timed(budget, f);
        println!(
            "[{}] {name}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
        if !out.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
