use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use dirimult_core::dataset::{
    parse_model, parse_query_csv, parse_roster_csv, parse_training_csv, serialize_model,
};
use dirimult_core::evaluation::{
    leave_one_out, oracle_csv, oracle_suite, oracle_text, random_queries,
};
use dirimult_core::{
    classify_batch, empirical_class_prior, posterior_mean_table, ClassPrior, ClassPriorSource,
    ClassifyWarning, Corpus, CountVector, Error as CoreError, FittedModel, PriorFamily,
};

use crate::args::{ClassifyArgs, EvalArgs, PlotArgs, TrainArgs};
use crate::error::{CliError, Result};
use crate::plot;

/// Rows of a probability vector must sum to 1 this closely before printing.
const OUTPUT_SUM_TOLERANCE: f64 = 1e-9;

fn read(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path).with_context(|| format!("cannot read {}", path.display()))?)
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    Ok(fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?)
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    Ok(parse_training_csv(&read(path)?).with_context(|| path.display().to_string())?)
}

fn read_model(path: &Path) -> Result<FittedModel> {
    let bytes = read(path)?;
    let text =
        String::from_utf8(bytes).with_context(|| format!("{}: not UTF-8", path.display()))?;
    Ok(parse_model(&text).with_context(|| path.display().to_string())?)
}

/// The empirical prior counts the roster when one is given, otherwise the
/// training sites.
fn resolve_class_prior(
    source: &ClassPriorSource,
    corpus: &Corpus,
    roster: Option<&Path>,
) -> Result<ClassPrior> {
    match (source, roster) {
        (ClassPriorSource::Empirical, Some(path)) => {
            let entries =
                parse_roster_csv(&read(path)?).with_context(|| path.display().to_string())?;
            let labels: Vec<&str> = entries.iter().map(|e| e.class_label.as_str()).collect();
            Ok(empirical_class_prior(&labels, corpus.classes())
                .with_context(|| path.display().to_string())?)
        }
        _ => Ok(source
            .resolve(corpus.classes(), &corpus.site_labels())
            .context("class prior")?),
    }
}

fn fmt_prob(p: f64, full: bool) -> String {
    if full {
        format!("{p}")
    } else {
        format!("{p:.4}")
    }
}

fn check_normalized(what: &str, probs: &[f64]) -> Result<()> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > OUTPUT_SUM_TOLERANCE || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CliError::internal(format!(
            "{what}: probabilities sum to {sum}"
        )));
    }
    Ok(())
}

fn train_summary(model: &FittedModel, source: &ClassPriorSource, full: bool) -> Result<String> {
    let classes = model.class_labels();
    let types = model.typology().labels();
    let mut out = String::new();
    let _ = writeln!(out, "prior family: {}", model.prior_family());
    let _ = writeln!(out, "class prior: {}", source.name());
    let _ = writeln!(out);
    let _ = writeln!(out, "posterior Dirichlet parameters");
    let cw = classes.iter().map(|c| c.chars().count()).max().unwrap_or(0);
    for (c, post) in classes.iter().zip(model.posteriors()) {
        let _ = writeln!(out, "  {c:<cw$}  {post}");
    }

    let table = posterior_mean_table(model.posteriors())?;
    for (i, c) in classes.iter().enumerate() {
        let column: Vec<f64> = table.iter().map(|row| row[i]).collect();
        check_normalized(&format!("posterior means of class {c}"), &column)?;
    }
    check_normalized("class prior", model.prior().probs())?;

    let tw = types
        .iter()
        .map(|t| t.chars().count())
        .chain(["class prior".len()])
        .max()
        .unwrap_or(0);
    let vw = classes
        .iter()
        .map(|c| c.chars().count())
        .max()
        .unwrap_or(0)
        .max(if full { 22 } else { 6 });
    let _ = writeln!(out);
    let _ = writeln!(out, "posterior means (rows = types, columns = classes)");
    let _ = write!(out, "  {:<tw$}", "type");
    for c in classes {
        let _ = write!(out, "  {c:>vw$}");
    }
    out.push('\n');
    let rows = types
        .iter()
        .map(String::as_str)
        .zip(table.iter().map(Vec::as_slice))
        .chain([("class prior", model.prior().probs())]);
    for (t, row) in rows {
        let _ = write!(out, "  {t:<tw$}");
        for &v in row {
            let _ = write!(out, "  {:>vw$}", fmt_prob(v, full));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let corpus = read_corpus(&a.training)?;
    let family: PriorFamily = a.prior.into();
    let source = a.class_prior.source()?.unwrap_or_default();
    let prior = resolve_class_prior(&source, &corpus, a.roster.as_deref())?;
    let model = FittedModel::fit(
        corpus.typology().clone(),
        corpus.classes().to_vec(),
        &corpus.class_totals(),
        family,
        prior,
    )
    .with_context(|| a.training.display().to_string())?;

    let text = serialize_model(&model)?;
    write(&a.out, text.as_bytes())?;
    if read_model(&a.out)? != model {
        return Err(CliError::internal(
            "model file does not read back identically",
        ));
    }
    let mut text = train_summary(&model, &source, a.full_precision)?;
    let _ = write!(text, "\nmodel written to {}\n", a.out.display());
    emit(None, text.as_bytes())
}

pub fn classify(a: &ClassifyArgs) -> Result<()> {
    let mut model = read_model(&a.model)?;
    match a.class_prior.source()? {
        None => {}
        Some(ClassPriorSource::Empirical) => {
            return Err(anyhow!(
                "the empirical class prior is fixed when the model is trained; use --class-prior uniform or explicit to override it"
            )
            .into());
        }
        Some(source) => {
            let prior = source
                .resolve::<&str>(model.class_labels(), &[])
                .context("class prior")?;
            model = model.with_prior(prior)?;
        }
    }

    let bytes = read(&a.queries)?;
    let queries = parse_query_csv(&bytes).with_context(|| a.queries.display().to_string())?;
    if queries.type_labels.is_empty() && queries.records.is_empty() {
        // empty file, empty output
        return emit(a.out.as_deref(), &[]);
    }
    queries
        .check_typology(model.typology())
        .with_context(|| format!("{} does not match the model", a.queries.display()))?;

    let counts: Vec<CountVector> = queries.records.iter().map(|r| r.counts.clone()).collect();
    let results = classify_batch(&model, &counts);

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["site_id".to_string()];
    header.extend(model.class_labels().iter().map(|c| format!("P({c})")));
    header.push("argmax".into());
    w.write_record(&header)
        .map_err(|e| CliError::internal(e.to_string()))?;

    let mut warned = false;
    for (q, result) in queries.records.iter().zip(results) {
        let mut row = vec![q.site_id.clone()];
        match result {
            Ok(c) => {
                check_normalized(&q.site_id, &c.probs)?;
                row.extend(c.probs.iter().map(|&p| fmt_prob(p, a.full_precision)));
                row.push(c.argmax);
                if !warned {
                    for ClassifyWarning::ZeroPriorClasses(zero) in &c.warnings {
                        eprintln!(
                            "warning: classes with prior 0 can never be predicted: {}",
                            zero.join(", ")
                        );
                        warned = true;
                    }
                }
            }
            Err(CoreError::NoEvidence) => {
                row.extend(model.class_labels().iter().map(|_| String::new()));
                row.push("no-evidence".into());
            }
            Err(e) => return Err(anyhow!(e).context(format!("site {}", q.site_id)).into()),
        }
        w.write_record(&row)
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let out = w
        .into_inner()
        .map_err(|e| CliError::internal(e.to_string()))?;
    emit(a.out.as_deref(), &out)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(bytes).and_then(|()| stdout.flush()) {
                // a closed pipe (`| head`) is the reader's choice, not a failure
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(anyhow!(e).context("writing to stdout").into())
                }
                _ => Ok(()),
            }
        }
    }
}

pub fn plot(a: &PlotArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let means = a.out.join("posterior_means.svg");
    let marginals = a.out.join("marginals.svg");
    write(&means, plot::posterior_means_svg(&model).as_bytes())?;
    write(&marginals, plot::marginals_svg(&model).as_bytes())?;
    emit(
        None,
        format!("wrote {}\nwrote {}\n", means.display(), marginals.display()).as_bytes(),
    )
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let corpus = read_corpus(&a.training)?;
    let family: PriorFamily = a.prior.into();
    let source = a.class_prior.source()?.unwrap_or_default();
    let prior = resolve_class_prior(&source, &corpus, a.roster.as_deref())?;
    // a roster prior does not depend on which training record is held out
    let loo_source = match (&source, &a.roster) {
        (ClassPriorSource::Empirical, Some(_)) => {
            ClassPriorSource::Explicit(prior.probs().to_vec())
        }
        _ => source.clone(),
    };
    let loo = leave_one_out(&corpus, family, &loo_source)?;
    for (i, c) in loo.classes.iter().enumerate() {
        let expected = loo
            .records
            .iter()
            .filter(|r| &r.true_class == c && r.predicted_class.is_some())
            .count() as u64;
        if loo.confusion[i].iter().sum::<u64>() != expected {
            return Err(CliError::internal(format!(
                "confusion row {c} does not match its record count"
            )));
        }
    }

    let model = FittedModel::fit(
        corpus.typology().clone(),
        corpus.classes().to_vec(),
        &corpus.class_totals(),
        family,
        prior,
    )?;
    let queries: Vec<(String, CountVector)> = match &a.queries {
        Some(path) => {
            let q = parse_query_csv(&read(path)?).with_context(|| path.display().to_string())?;
            q.check_typology(model.typology()).with_context(|| {
                format!("{} does not match the training typology", path.display())
            })?;
            q.records
                .into_iter()
                .map(|r| (r.site_id, r.counts))
                .collect()
        }
        None => random_queries(
            model.typology().len(),
            a.oracle_queries,
            a.oracle_max_total,
            a.seed,
        )
        .into_iter()
        .enumerate()
        .map(|(i, q)| (format!("random-{}", i + 1), q))
        .collect(),
    };
    let rows = oracle_suite(&model, &queries, a.oracle_samples, a.seed)?;

    let name = a.training.file_name().map_or_else(
        || a.training.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let mut report = String::new();
    let _ = writeln!(report, "dirimult evaluation");
    let _ = writeln!(
        report,
        "  training: {name} ({} records, {} classes, {} types)",
        corpus.records().len(),
        corpus.classes().len(),
        corpus.typology().len()
    );
    let _ = writeln!(report, "  prior family: {family}");
    let _ = writeln!(
        report,
        "  class prior: {}{}",
        source.name(),
        if a.roster.is_some() { " (roster)" } else { "" }
    );
    let _ = writeln!(report, "  seed: {}", a.seed);
    let _ = writeln!(report, "  oracle samples per pair: {}", a.oracle_samples);
    report.push('\n');
    report.push_str(&loo.to_text());
    report.push('\n');
    report.push_str(&oracle_text(&rows));

    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write(&dir.join("loo.csv"), loo.to_csv().as_bytes())?;
        write(&dir.join("oracle.csv"), oracle_csv(&rows).as_bytes())?;
        write(&dir.join("report.txt"), report.as_bytes())?;
    }
    emit(None, report.as_bytes())
}
