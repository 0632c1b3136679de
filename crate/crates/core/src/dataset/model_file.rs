//! Text model format.
//!
//! ```text
//! format_version: 1
//! prior_family: perks
//! typology: T1,T2,T3
//! classes: P1,P2
//!
//! [class P1]
//! class_prior: 5.0000000000000000e-1
//! alpha: 15/7, 1/7, 8/7
//! alpha_plus: 24/7
//! ```
//!
//! Numbers are written either as an exact fraction `k`, `k/2` or `k/J`, or
//! as a 17-significant-digit decimal, so parsing restores every bit.

use crate::classifier::{ClassPrior, FittedModel};
use crate::conjugate::{as_fraction, DirichletParams, PriorFamily, Typology};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1";

fn encode_number(value: f64, categories: usize) -> String {
    match as_fraction(value, &[1, 2, categories as u64]) {
        Some((k, 1)) => format!("{k}"),
        Some((k, d)) => format!("{k}/{d}"),
        None => format!("{value:.16e}"),
    }
}

fn decode_number(s: &str, line: usize) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::parse(line, format!("invalid number `{s}`"));
    let value = match s.split_once('/') {
        Some((k, d)) => {
            let k: u64 = k.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            k as f64 / d as f64
        }
        None => s.parse::<f64>().map_err(|_| bad())?,
    };
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

fn check_encodable(label: &str) -> Result<()> {
    if label.contains([',', '\n', '\r', ']']) || label.trim() != label {
        return Err(Error::InvalidArgument(format!(
            "label `{label}` cannot be stored in a model file (commas, brackets, line breaks and edge whitespace are not allowed)"
        )));
    }
    Ok(())
}

pub fn serialize_model(model: &FittedModel) -> Result<String> {
    let typology = model.typology();
    let j = typology.len();
    for label in typology.labels().iter().chain(model.class_labels()) {
        check_encodable(label)?;
    }
    let mut out = String::new();
    out.push_str("# dirimult model\n");
    out.push_str(&format!("format_version: {FORMAT_VERSION}\n"));
    out.push_str(&format!("prior_family: {}\n", model.prior_family()));
    out.push_str(&format!("typology: {}\n", typology.labels().join(",")));
    out.push_str(&format!("classes: {}\n", model.class_labels().join(",")));
    for ((label, post), p) in model
        .class_labels()
        .iter()
        .zip(model.posteriors())
        .zip(model.prior().probs())
    {
        out.push_str(&format!("\n[class {label}]\n"));
        out.push_str(&format!("class_prior: {p:.16e}\n"));
        let alpha: Vec<String> = post.alpha().iter().map(|&a| encode_number(a, j)).collect();
        out.push_str(&format!("alpha: {}\n", alpha.join(", ")));
        out.push_str(&format!(
            "alpha_plus: {}\n",
            encode_number(post.alpha_plus(), j)
        ));
    }
    Ok(out)
}

#[derive(Default)]
struct ClassSection {
    label: String,
    line: usize,
    prior: Option<f64>,
    alpha: Option<Vec<f64>>,
    alpha_plus: Option<f64>,
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(|s| s.trim().to_string()).collect()
}

pub fn parse_model(text: &str) -> Result<FittedModel> {
    let mut version: Option<String> = None;
    let mut family: Option<PriorFamily> = None;
    let mut typology: Option<Vec<String>> = None;
    let mut classes: Option<Vec<String>> = None;
    let mut sections: Vec<ClassSection> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let label = inner
                .strip_suffix(']')
                .and_then(|s| s.strip_prefix("class "))
                .ok_or_else(|| {
                    Error::parse(line, format!("malformed section header `{trimmed}`"))
                })?;
            if version.is_none() {
                return Err(Error::parse(
                    line,
                    "missing format_version before class sections",
                ));
            }
            sections.push(ClassSection {
                label: label.trim().to_string(),
                line,
                ..Default::default()
            });
            continue;
        }
        let (key, value) = trimmed.split_once(':').ok_or_else(|| {
            Error::parse(line, format!("expected `key: value`, found `{trimmed}`"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let duplicate = || Error::parse(line, format!("duplicate key `{key}`"));
        match sections.last_mut() {
            None => match key {
                "format_version" => {
                    if version.is_some() {
                        return Err(duplicate());
                    }
                    if value != FORMAT_VERSION {
                        return Err(Error::UnsupportedVersion(value.to_string()));
                    }
                    version = Some(value.to_string());
                }
                _ if version.is_none() => {
                    return Err(Error::parse(line, "format_version must come first"));
                }
                "prior_family" if family.is_none() => {
                    family = Some(
                        value
                            .parse()
                            .map_err(|e: Error| Error::parse(line, e.to_string()))?,
                    );
                }
                "typology" if typology.is_none() => typology = Some(list(value)),
                "classes" if classes.is_none() => classes = Some(list(value)),
                "prior_family" | "typology" | "classes" => return Err(duplicate()),
                _ => return Err(Error::parse(line, format!("unknown key `{key}`"))),
            },
            Some(section) => {
                let j = typology.as_ref().map_or(0, Vec::len);
                match key {
                    "class_prior" if section.prior.is_none() => {
                        section.prior = Some(decode_number(value, line)?);
                    }
                    "alpha" if section.alpha.is_none() => {
                        let alpha = value
                            .split(',')
                            .map(|v| decode_number(v, line))
                            .collect::<Result<Vec<_>>>()?;
                        if alpha.len() != j {
                            return Err(Error::parse(
                                line,
                                format!("expected {j} alpha values, found {}", alpha.len()),
                            ));
                        }
                        section.alpha = Some(alpha);
                    }
                    "alpha_plus" if section.alpha_plus.is_none() => {
                        section.alpha_plus = Some(decode_number(value, line)?);
                    }
                    "class_prior" | "alpha" | "alpha_plus" => return Err(duplicate()),
                    _ => return Err(Error::parse(line, format!("unknown key `{key}`"))),
                }
            }
        }
    }

    if version.is_none() {
        return Err(Error::parse(1, "missing format_version"));
    }
    let family = family.ok_or_else(|| Error::parse(1, "missing prior_family"))?;
    let typology = Typology::new(typology.ok_or_else(|| Error::parse(1, "missing typology"))?)?;
    let classes = classes.ok_or_else(|| Error::parse(1, "missing classes"))?;
    if classes.iter().all(|c| c.is_empty()) || sections.is_empty() {
        return Err(Error::EmptyModel);
    }
    let section_labels: Vec<&str> = sections.iter().map(|s| s.label.as_str()).collect();
    if section_labels != classes.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::parse(
            1,
            format!(
                "class sections [{}] do not match classes [{}]",
                section_labels.join(","),
                classes.join(",")
            ),
        ));
    }

    let mut posteriors = Vec::with_capacity(sections.len());
    let mut priors = Vec::with_capacity(sections.len());
    for s in sections {
        let missing =
            |what: &str| Error::parse(s.line, format!("class `{}` is missing `{what}`", s.label));
        let alpha = s.alpha.ok_or_else(|| missing("alpha"))?;
        let alpha_plus = s.alpha_plus.ok_or_else(|| missing("alpha_plus"))?;
        posteriors.push(
            DirichletParams::with_total(alpha, alpha_plus)
                .map_err(|e| Error::parse(s.line, format!("class `{}`: {e}", s.label)))?,
        );
        priors.push(s.prior.ok_or_else(|| missing("class_prior"))?);
    }
    FittedModel::new(
        typology,
        classes,
        posteriors,
        ClassPrior::new(priors)?,
        family,
    )
}
