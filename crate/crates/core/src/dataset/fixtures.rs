//! Bundled datasets from the arrowhead dating study.
//!
//! * [`PERIOD_COUNTS_CSV`]: pooled arrowhead counts per period (7 types,
//!   5 periods). Only the posterior Dirichlet parameters were published, so
//!   the counts are those parameters minus the Perks prior mass 1/7.
//! * [`SITE_ROSTER_CSV`]: dated levels and their period.
//! * [`SYNTHETIC_TRAINING_CSV`]: 25 synthetic labeled sites, 5 per period.
//! * [`DEMO_QUERIES_CSV`]: the 25 undated sites with synthetic counts (the
//!   real counts are unpublished).

use crate::classifier::{ClassPrior, FittedModel};
use crate::conjugate::PriorFamily;
use crate::dataset::{
    parse_query_csv, parse_roster_csv, parse_training_csv, Corpus, QuerySet, RosterEntry,
};

pub const PERIOD_COUNTS_CSV: &str = include_str!("../../fixtures/period_counts.csv");
pub const SITE_ROSTER_CSV: &str = include_str!("../../fixtures/site_roster.csv");
pub const SYNTHETIC_TRAINING_CSV: &str = include_str!("../../fixtures/synthetic_training.csv");
pub const DEMO_QUERIES_CSV: &str = include_str!("../../fixtures/demo_queries.csv");

/// Class prior used for the published classification of undated sites.
pub const PUBLISHED_CLASS_PRIOR: [f64; 5] = [0.15, 0.20, 0.35, 0.15, 0.15];

/// Published posterior Dirichlet parameters, as numerators over 7.
/// `TABLE2_SEVENTHS[period][type]`.
pub const TABLE2_SEVENTHS: [[u32; 7]; 5] = [
    [15, 22, 8, 1, 1, 1, 1],
    [29, 36, 15, 8, 1, 1, 1],
    [43, 1, 43, 64, 29, 1, 71],
    [15, 1, 15, 8, 15, 1, 43],
    [1, 1, 1, 15, 1, 8, 36],
];

/// Published posterior means, `TABLE3_MEANS[type][period]`, 4 decimals.
pub const TABLE3_MEANS: [[f64; 5]; 7] = [
    [0.3061, 0.3187, 0.1706, 0.1531, 0.0159],
    [0.4490, 0.3956, 0.0040, 0.0102, 0.0159],
    [0.1633, 0.1648, 0.1706, 0.1531, 0.0159],
    [0.0204, 0.0879, 0.2540, 0.0816, 0.2380],
    [0.0204, 0.0110, 0.1151, 0.1531, 0.0159],
    [0.0204, 0.0110, 0.0040, 0.0102, 0.1270],
    [0.0204, 0.0110, 0.2817, 0.4387, 0.5714],
];

pub fn period_corpus() -> Corpus {
    parse_training_csv(PERIOD_COUNTS_CSV.as_bytes()).expect("bundled period fixture parses")
}

pub fn site_roster() -> Vec<RosterEntry> {
    parse_roster_csv(SITE_ROSTER_CSV.as_bytes()).expect("bundled roster parses")
}

pub fn synthetic_corpus() -> Corpus {
    parse_training_csv(SYNTHETIC_TRAINING_CSV.as_bytes()).expect("bundled synthetic corpus parses")
}

pub fn demo_queries() -> QuerySet {
    parse_query_csv(DEMO_QUERIES_CSV.as_bytes()).expect("bundled demo queries parse")
}

/// Perks posteriors of the period fixture with the published class prior.
pub fn published_model() -> FittedModel {
    let corpus = period_corpus();
    FittedModel::fit(
        corpus.typology().clone(),
        corpus.classes().to_vec(),
        &corpus.class_totals(),
        PriorFamily::Perks,
        ClassPrior::from_weights(&PUBLISHED_CLASS_PRIOR).expect("valid prior"),
    )
    .expect("bundled model fits")
}
