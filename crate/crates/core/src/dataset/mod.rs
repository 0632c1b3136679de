//! Training/query CSV ingestion, the model file format and bundled fixtures.
//!
//! Training CSV:
//!
//! ```text
//! # classes: P1,P2,P3        (optional, pins class order)
//! # typology: T1,T2,T3       (optional, must match the header)
//! site_id,class,T1,T2,T3
//! Jovades 1,P1,1,2,0
//! ```
//!
//! Query CSV drops the `class` column. Files are UTF-8; site names are kept
//! verbatim.

pub mod fixtures;
mod model_file;

pub use model_file::{parse_model, serialize_model, FORMAT_VERSION};

use std::collections::HashSet;

use crate::conjugate::{CountVector, Typology};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingRecord {
    pub site_id: String,
    pub class_label: String,
    pub counts: CountVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub site_id: String,
    pub counts: CountVector,
}

/// A validated training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    typology: Typology,
    classes: Vec<String>,
    records: Vec<TrainingRecord>,
}

impl Corpus {
    pub fn new(
        typology: Typology,
        classes: Vec<String>,
        records: Vec<TrainingRecord>,
    ) -> Result<Self> {
        crate::conjugate::validate_labels(&classes)?;
        let mut seen = HashSet::new();
        for r in &records {
            if r.site_id.trim().is_empty() {
                return Err(Error::EmptyLabel);
            }
            if !seen.insert(r.site_id.as_str()) {
                return Err(Error::DuplicateLabel(r.site_id.clone()));
            }
            if !classes.contains(&r.class_label) {
                return Err(Error::UnknownClass(r.class_label.clone()));
            }
            if r.counts.len() != typology.len() {
                return Err(Error::DimensionMismatch {
                    expected: typology.len(),
                    found: r.counts.len(),
                });
            }
        }
        Ok(Self {
            typology,
            classes,
            records,
        })
    }

    pub fn typology(&self) -> &Typology {
        &self.typology
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn records(&self) -> &[TrainingRecord] {
        &self.records
    }

    /// Record labels in file order, for the empirical class prior.
    pub fn site_labels(&self) -> Vec<&str> {
        self.records
            .iter()
            .map(|r| r.class_label.as_str())
            .collect()
    }

    /// Pooled counts per class, in class order.
    pub fn class_totals(&self) -> Vec<CountVector> {
        let j = self.typology.len();
        let mut totals = vec![vec![0u64; j]; self.classes.len()];
        for r in &self.records {
            let i = self
                .classes
                .iter()
                .position(|c| *c == r.class_label)
                .expect("validated class label");
            for (t, &c) in totals[i].iter_mut().zip(r.counts.counts()) {
                *t += c;
            }
        }
        totals.into_iter().map(CountVector::new).collect()
    }
}

/// Parsed query file. `type_labels` is whatever the header declared and is
/// checked against a model's typology only at classification time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuerySet {
    pub type_labels: Vec<String>,
    pub records: Vec<QueryRecord>,
}

impl QuerySet {
    pub fn check_typology(&self, typology: &Typology) -> Result<()> {
        if self.records.is_empty() {
            return Ok(());
        }
        if self.type_labels.len() != typology.len() {
            return Err(Error::DimensionMismatch {
                expected: typology.len(),
                found: self.type_labels.len(),
            });
        }
        if self.type_labels != typology.labels() {
            return Err(Error::InvalidArgument(format!(
                "query columns [{}] do not match model typology [{}]",
                self.type_labels.join(","),
                typology.labels().join(",")
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub site_id: String,
    pub class_label: String,
}

#[derive(Debug, Default)]
struct Directives {
    classes: Option<Vec<String>>,
    typology: Option<Vec<String>>,
}

/// Splits leading comment/blank lines off `text`, collecting directives.
/// Returns the directives, the number of lines consumed and the remainder.
fn split_preamble(text: &str) -> Result<(Directives, usize, &str)> {
    let mut directives = Directives::default();
    let mut offset = 0;
    let mut line_no = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !(trimmed.is_empty() || trimmed.starts_with('#')) {
            break;
        }
        line_no += 1;
        offset += line.len();
        let body = trimmed.trim_start_matches('#').trim();
        if let Some(rest) = strip_key(body, "classes") {
            if directives.classes.is_some() {
                return Err(Error::parse(line_no, "repeated `# classes:` directive"));
            }
            directives.classes = Some(split_list(rest));
        } else if let Some(rest) = strip_key(body, "typology") {
            if directives.typology.is_some() {
                return Err(Error::parse(line_no, "repeated `# typology:` directive"));
            }
            directives.typology = Some(split_list(rest));
        }
    }
    Ok((directives, line_no, &text[offset..]))
}

fn strip_key<'a>(body: &'a str, key: &str) -> Option<&'a str> {
    let rest = body.strip_prefix(key)?.trim_start();
    rest.strip_prefix(':')
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

fn decode(bytes: &[u8]) -> Result<&str> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        Error::parse(line, "input is not valid UTF-8")
    })?;
    Ok(text.strip_prefix('\u{feff}').unwrap_or(text))
}

struct Table {
    header: Vec<String>,
    header_line: usize,
    rows: Vec<(usize, Vec<String>)>,
}

/// Reads the header and data rows with absolute (1-based) line numbers.
fn read_table(body: &str, line_offset: usize) -> Result<Option<Table>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + line_offset;
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + line_offset;
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        match header {
            None => header = Some((line, fields)),
            Some(_) => rows.push((line, fields)),
        }
    }
    Ok(header.map(|(header_line, header)| Table {
        header,
        header_line,
        rows,
    }))
}

fn parse_count(field: &str, line: usize, column: &str) -> Result<u64> {
    if let Ok(v) = field.parse::<u64>() {
        return Ok(v);
    }
    let message = match field.parse::<f64>() {
        Ok(v) if v < 0.0 => format!("column `{column}`: negative count `{field}`"),
        Ok(_) => format!("column `{column}`: count `{field}` is not an integer"),
        Err(_) if field.is_empty() => format!("column `{column}`: missing count"),
        Err(_) => format!("column `{column}`: invalid count `{field}`"),
    };
    Err(Error::parse(line, message))
}

fn check_header_prefix(table: &Table, expected: &[&str]) -> Result<()> {
    for (k, want) in expected.iter().enumerate() {
        match table.header.get(k) {
            Some(got) if got.eq_ignore_ascii_case(want) => {}
            got => {
                return Err(Error::parse(
                    table.header_line,
                    format!("header column {} must be `{want}`, found {:?}", k + 1, got),
                ));
            }
        }
    }
    Ok(())
}

fn header_typology(table: &Table, skip: usize, pinned: Option<&Vec<String>>) -> Result<Typology> {
    let labels = table.header[skip..].to_vec();
    if let Some(pinned) = pinned {
        if *pinned != labels {
            return Err(Error::parse(
                table.header_line,
                format!(
                    "`# typology:` directive [{}] does not match header columns [{}]",
                    pinned.join(","),
                    labels.join(",")
                ),
            ));
        }
    }
    Typology::new(labels).map_err(|e| Error::parse(table.header_line, e.to_string()))
}

fn check_width(fields: &[String], width: usize, line: usize) -> Result<()> {
    if fields.len() != width {
        return Err(Error::parse(
            line,
            format!("expected {width} fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn parse_counts(fields: &[String], typology: &Typology, line: usize) -> Result<CountVector> {
    fields
        .iter()
        .zip(typology.labels())
        .map(|(f, col)| parse_count(f, line, col))
        .collect::<Result<Vec<_>>>()
        .map(CountVector::new)
}

fn check_site(site: &str, seen: &mut HashSet<String>, line: usize) -> Result<()> {
    if site.is_empty() {
        return Err(Error::parse(line, "column `site_id`: empty site id"));
    }
    if !seen.insert(site.to_string()) {
        return Err(Error::parse(line, format!("duplicate site_id `{site}`")));
    }
    Ok(())
}

/// Parses `site_id,class,<type_1>,...,<type_J>`.
pub fn parse_training_csv(bytes: &[u8]) -> Result<Corpus> {
    let text = decode(bytes)?;
    let (directives, skipped, body) = split_preamble(text)?;
    let table = read_table(body, skipped)?.ok_or_else(|| Error::parse(1, "empty training file"))?;
    check_header_prefix(&table, &["site_id", "class"])?;
    let typology = header_typology(&table, 2, directives.typology.as_ref())?;
    let width = typology.len() + 2;

    let mut classes = match directives.classes {
        Some(pinned) => {
            crate::conjugate::validate_labels(&pinned)
                .map_err(|e| Error::parse(skipped, format!("`# classes:` directive: {e}")))?;
            Some(pinned)
        }
        None => None,
    };
    let pinned = classes.is_some();
    let mut discovered: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let line = *line;
        check_width(fields, width, line)?;
        check_site(&fields[0], &mut seen, line)?;
        let class_label = fields[1].clone();
        if class_label.is_empty() {
            return Err(Error::parse(line, "column `class`: empty class label"));
        }
        match &classes {
            Some(list) if !list.contains(&class_label) => {
                return Err(Error::parse(
                    line,
                    format!("class `{class_label}` is not listed in the `# classes:` directive"),
                ));
            }
            _ => {}
        }
        if !pinned && !discovered.contains(&class_label) {
            discovered.push(class_label.clone());
        }
        records.push(TrainingRecord {
            site_id: fields[0].clone(),
            class_label,
            counts: parse_counts(&fields[2..], &typology, line)?,
        });
    }
    if records.is_empty() {
        return Err(Error::parse(table.header_line, "no training records"));
    }
    let classes = classes.take().unwrap_or(discovered);
    Corpus::new(typology, classes, records)
}

/// Parses `site_id,<type_1>,...,<type_J>`. An empty input is an empty set.
pub fn parse_query_csv(bytes: &[u8]) -> Result<QuerySet> {
    let text = decode(bytes)?;
    let (_, skipped, body) = split_preamble(text)?;
    let Some(table) = read_table(body, skipped)? else {
        return Ok(QuerySet::default());
    };
    check_header_prefix(&table, &["site_id"])?;
    let typology = header_typology(&table, 1, None)?;
    let width = typology.len() + 1;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        check_width(fields, width, *line)?;
        check_site(&fields[0], &mut seen, *line)?;
        records.push(QueryRecord {
            site_id: fields[0].clone(),
            counts: parse_counts(&fields[1..], &typology, *line)?,
        });
    }
    Ok(QuerySet {
        type_labels: typology.labels().to_vec(),
        records,
    })
}

/// Parses `site_id,class`. Repeated site ids are allowed: a roster lists
/// dated levels, and the same level may be attributed to several classes.
pub fn parse_roster_csv(bytes: &[u8]) -> Result<Vec<RosterEntry>> {
    let text = decode(bytes)?;
    let (_, skipped, body) = split_preamble(text)?;
    let table = read_table(body, skipped)?.ok_or_else(|| Error::parse(1, "empty roster file"))?;
    check_header_prefix(&table, &["site_id", "class"])?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        check_width(fields, 2, *line)?;
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::parse(*line, "empty site id or class"));
        }
        out.push(RosterEntry {
            site_id: fields[0].clone(),
            class_label: fields[1].clone(),
        });
    }
    Ok(out)
}

/// Renders a corpus back to training CSV, with a `# classes:` directive.
pub fn write_training_csv(corpus: &Corpus) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["site_id".to_string(), "class".to_string()];
    header.extend(corpus.typology.labels().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for r in &corpus.records {
        let mut row = vec![r.site_id.clone(), r.class_label.clone()];
        row.extend(r.counts.counts().iter().map(u64::to_string));
        w.write_record(&row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!("# classes: {}\n{body}", corpus.classes.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "site_id,class,T1,T2,T3,T4,T5,T6,T7\n";

    #[test]
    fn single_row() {
        let corpus =
            parse_training_csv(format!("{HEADER}Jovades 1,P1,1,2,0,0,0,0,0\n").as_bytes()).unwrap();
        assert_eq!(corpus.records().len(), 1);
        assert_eq!(corpus.records()[0].counts.total(), 3);
        assert_eq!(corpus.classes(), &["P1".to_string()]);
        assert_eq!(corpus.typology().len(), 7);
    }

    #[test]
    fn negative_count_names_row_and_column() {
        let src = format!("{HEADER}A,P1,1,2,0,0,0,0,0\nB,P1,0,0,-1,0,0,0,0\n");
        let err = parse_training_csv(src.as_bytes()).unwrap_err();
        let Error::Parse { line, message } = &err else {
            panic!("{err:?}")
        };
        assert_eq!(*line, 3);
        assert!(
            message.contains("T3") && message.contains("negative"),
            "{message}"
        );
    }

    #[test]
    fn rejects_malformed_input() {
        let cases = [
            ("", "empty"),
            ("# classes: P1\n", "empty"),
            (HEADER, "no training records"),
            (&format!("{HEADER}A,P1,1,2,0,0,0,0\n"), "expected 9 fields"),
            (
                &format!("{HEADER}A,P1,1,2,0,0,0,0,0\nA,P1,1,2,0,0,0,0,0\n"),
                "duplicate",
            ),
            (&format!("{HEADER}A,P1,1.5,2,0,0,0,0,0\n"), "not an integer"),
            (&format!("{HEADER}A,P1,x,2,0,0,0,0,0\n"), "invalid count"),
            (&format!("{HEADER}A,,1,2,0,0,0,0,0\n"), "empty class"),
            (
                &format!("# classes: P2\n{HEADER}A,P1,1,2,0,0,0,0,0\n"),
                "not listed",
            ),
            (
                &format!("# typology: a,b\n{HEADER}A,P1,1,2,0,0,0,0,0\n"),
                "does not match",
            ),
            ("site,class,T1,T2\nA,P1,1,2\n", "must be `site_id`"),
            ("site_id,class,T1\nA,P1,1\n", "at least 2"),
            ("site_id,class,T1,T1\nA,P1,1,1\n", "duplicate label"),
        ];
        for (src, needle) in cases {
            let err = parse_training_csv(src.as_bytes()).unwrap_err().to_string();
            assert!(err.contains(needle), "{src:?}: {err}");
        }
        assert!(parse_training_csv(&[0xff, 0xfe, b'\n']).is_err());
    }

    #[test]
    fn class_order_directive_and_first_appearance() {
        let body = "A,P3,1,0\nB,P1,0,1\nC,P3,2,2\n";
        let c = parse_training_csv(format!("site_id,class,x,y\n{body}").as_bytes()).unwrap();
        assert_eq!(c.classes(), &["P3".to_string(), "P1".to_string()]);
        let c = parse_training_csv(
            format!("# some note\n# classes: P1, P2, P3\nsite_id,class,x,y\n{body}").as_bytes(),
        )
        .unwrap();
        assert_eq!(c.classes().len(), 3);
        assert_eq!(c.class_totals()[2].counts(), &[3, 2]);
        assert!(c.class_totals()[1].is_zero());
    }

    #[test]
    fn quoted_names_and_diacritics_survive() {
        let src = "site_id,class,x,y\n\"Barranc, Parra 3\",P1,1,0\nCasa Colorà,P2,0,1\n";
        let c = parse_training_csv(src.as_bytes()).unwrap();
        assert_eq!(c.records()[0].site_id, "Barranc, Parra 3");
        assert_eq!(c.records()[1].site_id, "Casa Colorà");
        let again = parse_training_csv(write_training_csv(&c).as_bytes()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn query_rows() {
        let q = parse_query_csv(
            b"site_id,T1,T2,T3,T4,T5,T6,T7\nEreta I,0,0,1,2,0,0,3\nEmpty,0,0,0,0,0,0,0\n",
        )
        .unwrap();
        assert_eq!(q.records.len(), 2);
        assert_eq!(q.records[0].counts.total(), 6);
        assert!(q.records[1].counts.is_zero());
        assert_eq!(parse_query_csv(b"").unwrap(), QuerySet::default());
        assert!(parse_query_csv(b"site_id,T1,T2\nA,1\n").is_err());
        assert!(parse_query_csv(b"site_id,T1,T2\nA,1,1\nA,0,1\n").is_err());
    }

    #[test]
    fn query_typology_checked_against_model() {
        let q = parse_query_csv(b"site_id,a,b,c\nA,1,0,0\n").unwrap();
        let t = Typology::new(["a", "b"]).unwrap();
        assert!(matches!(
            q.check_typology(&t),
            Err(Error::DimensionMismatch { .. })
        ));
        let t = Typology::new(["a", "b", "d"]).unwrap();
        assert!(q.check_typology(&t).is_err());
        let t = Typology::new(["a", "b", "c"]).unwrap();
        assert!(q.check_typology(&t).is_ok());
    }

    #[test]
    fn roster_allows_repeats() {
        let r = parse_roster_csv(b"site_id,class\nLa Vital 3,P4\nLa Vital 3,P5\n").unwrap();
        assert_eq!(r.len(), 2);
        assert!(parse_roster_csv(b"site_id,class\nA,\n").is_err());
    }
}
