use dirimult_core::dataset::{
    fixtures, parse_model, parse_query_csv, parse_training_csv, serialize_model, write_training_csv,
};
use dirimult_core::{ClassPrior, CountVector, FittedModel, PriorFamily, Typology};
use proptest::prelude::*;

fn assert_valid_corpus(c: &dirimult_core::Corpus) {
    let j = c.typology().len();
    assert!(j >= 2);
    assert!(!c.classes().is_empty());
    let mut ids: Vec<&str> = c.records().iter().map(|r| r.site_id.as_str()).collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), n, "duplicate site ids");
    for r in c.records() {
        assert!(!r.site_id.trim().is_empty());
        assert!(!r.class_label.trim().is_empty());
        assert!(c.classes().contains(&r.class_label));
        assert_eq!(r.counts.len(), j);
    }
}

#[test]
fn site_names_keep_spaces_and_diacritics() {
    let csv = "site_id,class,a,b\nCova del Petrolí,P1,1,0\nSant Antoni de la Vespa,P2,0,2\n";
    let c = parse_training_csv(csv.as_bytes()).unwrap();
    assert_eq!(c.records()[0].site_id, "Cova del Petrolí");
    let q = parse_query_csv("site_id,a,b\nL'Alqueria d'Ador,1,1\n".as_bytes()).unwrap();
    assert_eq!(q.records[0].site_id, "L'Alqueria d'Ador");
}

#[test]
fn bundled_period_model_round_trips() {
    let model = fixtures::published_model();
    let text = serialize_model(&model).unwrap();
    assert!(text.contains("alpha: 43/7, 1/7, 43/7, 64/7, 29/7, 1/7, 71/7"));
    let parsed = parse_model(&text).unwrap();
    assert_eq!(parsed, model);
    assert_eq!(parsed.posteriors()[2].alpha()[0], 43.0 / 7.0);
    assert_eq!(serialize_model(&parsed).unwrap(), text);
}

#[test]
fn bundled_training_fixtures_round_trip() {
    for corpus in [fixtures::period_corpus(), fixtures::synthetic_corpus()] {
        let text = write_training_csv(&corpus);
        assert_eq!(parse_training_csv(text.as_bytes()).unwrap(), corpus);
    }
}

#[test]
fn malformed_inputs_name_the_problem() {
    let cases: [(&str, &str); 6] = [
        ("site_id,class,a,b\ns1,P1,1\n", "line 2"),
        ("site_id,class,a,b\ns1,P1,1,-2\n", "`b`"),
        ("site_id,class,a,b\ns1,P1,1,1.5\n", "`b`"),
        ("site_id,class,a,b\ns1,P1,1,1\ns1,P2,0,1\n", "s1"),
        ("# classes: P1\nsite_id,class,a,b\ns1,P9,1,1\n", "P9"),
        ("site_id,class,a,b\ns1,,1,1\n", "class"),
    ];
    for (csv, needle) in cases {
        let err = parse_training_csv(csv.as_bytes()).unwrap_err().to_string();
        assert!(err.contains(needle), "{csv:?} -> {err}");
    }
    assert!(parse_training_csv(b"").is_err());
    assert!(parse_training_csv(b"site_id,class,a,b\n").is_err());
}

#[test]
fn query_typology_mismatch_is_reported() {
    let q = parse_query_csv("site_id,x,y\ns,1,1\n".as_bytes()).unwrap();
    let t = Typology::new(["a", "b"]).unwrap();
    assert!(q.check_typology(&t).is_err());
    let empty = parse_query_csv(b"").unwrap();
    assert!(empty.records.is_empty());
    assert!(empty.check_typology(&t).is_ok());
}

fn label() -> impl Strategy<Value = String> {
    "[A-Za-zÀ-ÿ][A-Za-z0-9À-ÿ ]{0,6}[A-Za-z0-9]".prop_map(|s| s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parser_never_emits_an_invalid_corpus(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Ok(c) = parse_training_csv(&bytes) {
            assert_valid_corpus(&c);
        }
    }

    #[test]
    fn parser_never_emits_an_invalid_corpus_from_csv_like_text(
        cells in prop::collection::vec(
            prop::collection::vec(prop_oneof!["[0-9]{1,3}", "-1", "", "x", "P[12]", "s[0-3]", "# classes: P1"], 1..6),
            0..6,
        )
    ) {
        let mut text = String::from("site_id,class,a,b,c\n");
        for row in cells {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        if let Ok(c) = parse_training_csv(text.as_bytes()) {
            assert_valid_corpus(&c);
        }
    }

    #[test]
    fn training_csv_round_trip(
        types in prop::collection::hash_set(label(), 2..5),
        classes in prop::collection::hash_set(label(), 1..4),
        rows in prop::collection::vec((0usize..4, prop::collection::vec(0u64..100, 5)), 1..8),
    ) {
        let types: Vec<String> = types.into_iter().collect();
        let classes: Vec<String> = classes.into_iter().collect();
        let mut text = format!("# classes: {}\nsite_id,class,{}\n", classes.join(","), types.join(","));
        for (i, (c, counts)) in rows.iter().enumerate() {
            let counts: Vec<String> = counts[..types.len()].iter().map(u64::to_string).collect();
            text.push_str(&format!("site {i},{},{}\n", classes[c % classes.len()], counts.join(",")));
        }
        let corpus = parse_training_csv(text.as_bytes()).unwrap();
        assert_valid_corpus(&corpus);
        prop_assert_eq!(corpus.classes(), &classes[..]);
        let again = parse_training_csv(write_training_csv(&corpus).as_bytes()).unwrap();
        prop_assert_eq!(again, corpus);
    }

    #[test]
    fn model_round_trip(
        j in 2usize..8,
        counts in prop::collection::vec(prop::collection::vec(0u64..1000, 8), 2..5),
        weights in prop::collection::vec(0.0f64..1.0, 5),
        family in prop::sample::select(vec![PriorFamily::Perks, PriorFamily::Jeffreys, PriorFamily::Laplace]),
    ) {
        let i = counts.len();
        let w = &weights[..i];
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let typology = Typology::new((0..j).map(|k| format!("t{k}"))).unwrap();
        let totals: Vec<CountVector> = counts.iter().map(|c| CountVector::new(c[..j].to_vec())).collect();
        let model = FittedModel::fit(
            typology,
            (0..i).map(|k| format!("class {k}")).collect(),
            &totals,
            family,
            ClassPrior::from_weights(w).unwrap(),
        )
        .unwrap();
        let text = serialize_model(&model).unwrap();
        let parsed = parse_model(&text).unwrap();
        prop_assert_eq!(&parsed, &model);
        prop_assert_eq!(serialize_model(&parsed).unwrap(), text);
    }

    #[test]
    fn model_parser_survives_garbage(text in "[a-z_:\\[\\] /0-9.,\n-]{0,200}") {
        if let Ok(m) = parse_model(&text) {
            prop_assert!(m.num_classes() >= 1);
            let p: f64 = m.prior().probs().iter().sum();
            prop_assert!((p - 1.0).abs() <= 1e-12);
        }
    }
}
