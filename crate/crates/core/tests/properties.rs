mod oracles;

use std::collections::BTreeSet;

use annoteval_core::corpus::{
    normalize_surface, read_predictions, validate_document, write_document, write_predictions_tsv,
    DocumentFile, ErrorRecord,
};
use annoteval_core::matching::match_spans;
use annoteval_core::metrics::{score_counts, summarize};
use annoteval_core::typology::{NodeDocument, TypologyDocument};
use annoteval_core::{
    anchor_predictions, bca_interval, corpus_stats, match_document, overlaps, split_sentences,
    AnnotatedDocument, MtSystem, PredictedAnnotation, Rational, Span, Typology,
};
use proptest::prelude::*;

const WORDS: &[&str] = &[
    "le",
    "corpus",
    "annoté",
    "l’extraction",
    "l'analyse",
    "contes",
    "fées",
    "focusse",
    "« texte »",
    "très",
    "e.g.",
    "TAL",
    "naïve",
    "œuvre",
    "—",
    "quinze",
    "etc.",
    "cf.",
    "ressources",
];

fn sentence() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(prop::sample::select(WORDS), 1..8),
        prop::sample::select(&[".", "!", "?", "…"][..]),
    )
        .prop_map(|(words, end)| {
            let mut s = words.join(" ");
            let mut cs = s.chars();
            if let Some(first) = cs.next() {
                s = first.to_uppercase().chain(cs).collect();
            }
            s.push_str(end);
            s
        })
}

fn target_text() -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(), 1..5).prop_map(|v| v.join(" "))
}

fn codes() -> Vec<String> {
    Typology::bundled()
        .selectable()
        .map(|n| n.code.clone().unwrap())
        .collect()
}

/// A valid document file: spans on word boundaries, labels from the bundled
/// typology.
fn document_file() -> impl Strategy<Value = DocumentFile> {
    (
        target_text(),
        prop::collection::vec(
            (
                any::<prop::sample::Index>(),
                1usize..4,
                prop::collection::vec(any::<prop::sample::Index>(), 1..4),
            ),
            0..6,
        ),
        "[a-z ]{0,30}",
    )
        .prop_map(|(target, picks, source)| {
            let chars: Vec<char> = target.chars().collect();
            let starts: Vec<usize> = (0..chars.len())
                .filter(|&i| !chars[i].is_whitespace() && (i == 0 || chars[i - 1].is_whitespace()))
                .collect();
            let all_codes = codes();
            let mut seen = BTreeSet::new();
            let mut errors = Vec::new();
            for (start, words, labels) in picks {
                let k = start.index(starts.len());
                let s = starts[k];
                let end_word = (k + words).min(starts.len());
                let mut e = if end_word < starts.len() {
                    starts[end_word]
                } else {
                    chars.len()
                };
                while e > s + 1 && chars[e - 1].is_whitespace() {
                    e -= 1;
                }
                if !seen.insert((s, e)) {
                    continue;
                }
                let labels = labels
                    .iter()
                    .map(|i| all_codes[i.index(all_codes.len())].clone())
                    .collect();
                errors.push(ErrorRecord {
                    start: s,
                    end: e,
                    labels,
                });
            }
            DocumentFile {
                doc_id: format!("doc-{}", target.len()),
                mt_system: MtSystem::DeepL,
                source_text: source,
                target_text: target,
                sentences: None,
                source_sentences: None,
                errors,
            }
        })
}

fn document() -> impl Strategy<Value = AnnotatedDocument> {
    document_file()
        .prop_map(|f| validate_document(f, &Typology::bundled()).expect("generated file is valid"))
}

fn span() -> impl Strategy<Value = Span> {
    (0usize..60, 1usize..15).prop_map(|(s, l)| Span::new(s, s + l))
}

fn spans() -> impl Strategy<Value = (Vec<Span>, Vec<Option<Span>>)> {
    (
        prop::collection::btree_set(span(), 0..8).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
        prop::collection::vec(prop::option::weighted(0.9, span()), 0..8),
    )
}

fn span_pairs(refs: &[Span], preds: &[Option<Span>]) -> BTreeSet<(Span, Span)> {
    match_spans(refs, preds)
        .pairs
        .iter()
        .map(|&(r, p, _)| (refs[r], preds[p].unwrap()))
        .collect()
}

fn typology_tree() -> impl Strategy<Value = TypologyDocument> {
    let leaf = (any::<bool>(), "[A-Za-z][a-z]{0,8}").prop_map(|(coded, name)| NodeDocument {
        name,
        code: coded.then(String::new),
        ..NodeDocument::default()
    });
    let tree = leaf.prop_recursive(3, 24, 4, |inner| {
        (
            any::<bool>(),
            "[A-Za-z][a-z]{0,8}",
            prop::collection::vec(inner, 1..4),
        )
            .prop_map(|(coded, name, children)| NodeDocument {
                name,
                code: coded.then(String::new),
                children,
                ..NodeDocument::default()
            })
    });
    prop::collection::vec(tree, 1..4).prop_map(|mut nodes| {
        // Give every coded node a distinct code.
        fn number(n: &mut NodeDocument, next: &mut usize) {
            if n.code.is_some() {
                n.code = Some(format!("QX-{next}"));
                n.definition = Some(format!("définition {next}"));
                *next += 1;
            }
            for c in &mut n.children {
                number(c, next);
            }
        }
        let mut next = 0;
        for n in &mut nodes {
            // Top-level categories are never coded.
            n.code = None;
            for c in &mut n.children {
                number(c, &mut next);
            }
        }
        TypologyDocument {
            name: "t".into(),
            nodes,
        }
    })
}

/// True iff `small` is a subsequence of `big`.
fn is_subsequence<T: PartialEq>(small: &[T], big: &[T]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn typology_round_trip(doc in typology_tree()) {
        let t = Typology::from_document(doc).unwrap();
        let again = Typology::from_json(&t.to_json()).unwrap();
        prop_assert_eq!(&again, &t);
        prop_assert_eq!(again.render_prompt_block(true), t.render_prompt_block(true));
    }

    #[test]
    fn short_prompt_is_subsequence_of_long(doc in typology_tree()) {
        let t = Typology::from_document(doc).unwrap();
        let long = t.render_prompt_block(true);
        let short = t.render_prompt_block(false);
        let long: Vec<&str> = long.lines().collect();
        let short: Vec<&str> = short.lines().collect();
        prop_assert!(is_subsequence(&short, &long));
        prop_assert!(short.len() < long.len() || t.selectable().next().is_none());
    }

    #[test]
    fn resolve_is_idempotent(pick in any::<prop::sample::Index>(), pad in "[ \t]{0,3}", lower in any::<bool>()) {
        let t = Typology::bundled();
        let mut raw: Vec<String> = codes();
        raw.push("TR-TI-TF".into());
        let mut x = raw[pick.index(raw.len())].clone();
        if lower {
            x = x.to_lowercase();
        }
        let x = format!("{pad}{x}{pad}");
        let first = t.resolve_label(&x).unwrap();
        let again = t.resolve_label(first.code.as_deref().unwrap()).unwrap();
        prop_assert_eq!(first.id, again.id);
    }

    #[test]
    fn document_round_trip(doc in document()) {
        let text = write_document(&doc);
        let file: DocumentFile = serde_json::from_str(&text).unwrap();
        let again = validate_document(file, &Typology::bundled()).unwrap();
        prop_assert_eq!(again, doc);
    }

    #[test]
    fn reference_errors_sorted_and_distinct(doc in document()) {
        let spans: Vec<Span> = doc.reference_errors.iter().map(|e| e.span).collect();
        prop_assert!(spans.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(doc.reference_errors.iter().all(|e| !doc.surface(e).is_empty() && !e.labels.is_empty()));
    }

    #[test]
    fn stats_are_additive(a in prop::collection::vec(document(), 1..4), b in prop::collection::vec(document(), 1..4)) {
        let both: Vec<AnnotatedDocument> = a.iter().chain(b.iter()).cloned().collect();
        let (sa, sb, s) = (corpus_stats(&a).unwrap(), corpus_stats(&b).unwrap(), corpus_stats(&both).unwrap());
        prop_assert_eq!(s.n_errors, sa.n_errors + sb.n_errors);
        prop_assert_eq!(s.n_words, sa.n_words + sb.n_words);
        prop_assert_eq!(s.n_docs, sa.n_docs + sb.n_docs);
        if let (Some(lo), Some(hi), Some(m)) = (s.span_len_min, s.span_len_max, s.span_len_mean) {
            prop_assert!(lo as f64 <= m && m <= hi as f64);
        }
    }

    #[test]
    fn sentences_reconstruct_text(text in "([A-Za-zé’' ]{0,12}[.!?…]{0,2}[ \n]{0,2}){0,8}") {
        let spans = split_sentences(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut rebuilt = String::new();
        let mut prev = 0;
        for s in &spans {
            prop_assert!(prev <= s.start && s.start < s.end && s.end <= chars.len());
            let gap: String = chars[prev..s.start].iter().collect();
            prop_assert!(gap.chars().all(char::is_whitespace), "gap {:?}", gap);
            rebuilt.push_str(&gap);
            rebuilt.extend(&chars[s.start..s.end]);
            prev = s.end;
        }
        let tail: String = chars[prev..].iter().collect();
        prop_assert!(tail.chars().all(char::is_whitespace));
        rebuilt.push_str(&tail);
        prop_assert_eq!(rebuilt, text);
    }

    #[test]
    fn anchors_agree_with_surfaces(doc in document(), picks in prop::collection::vec((any::<prop::sample::Index>(), 1usize..4, 0u8..4), 1..8)) {
        let words: Vec<&str> = doc.target_text.split_whitespace().collect();
        let preds: Vec<PredictedAnnotation> = picks
            .iter()
            .map(|(i, n, variant)| {
                let k = i.index(words.len());
                let mut surface = words[k..(k + n).min(words.len())].join(" ");
                match variant {
                    1 => surface = surface.to_uppercase(),
                    2 => surface = surface.replace('’', "'"),
                    3 => surface.push('.'),
                    _ => {}
                }
                PredictedAnnotation::new(&doc.doc_id, None, &surface, "TR-OM")
            })
            .collect();
        let anchored = anchor_predictions(&doc, &preds).unwrap();
        for p in &anchored {
            if let Some(span) = p.anchor {
                prop_assert_eq!(normalize_surface(doc.target_slice(span)), normalize_surface(&p.surface));
            }
        }
    }

    #[test]
    fn overlap_is_symmetric(a in span(), b in span()) {
        prop_assert_eq!(overlaps(a, b), overlaps(b, a));
        prop_assert_eq!(a.overlap_len(&b), b.overlap_len(&a));
    }

    #[test]
    fn matching_is_one_to_one_and_optimal((refs, preds) in spans()) {
        let m = match_spans(&refs, &preds);
        let rs: BTreeSet<usize> = m.pairs.iter().map(|p| p.0).collect();
        let ps: BTreeSet<usize> = m.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(rs.len(), m.pairs.len());
        prop_assert_eq!(ps.len(), m.pairs.len());
        prop_assert!(m.pairs.iter().all(|&(_, _, o)| o >= 1));
        prop_assert_eq!((m.cardinality, m.total_overlap), oracles::best_matching_value(&refs, &preds));
    }

    #[test]
    fn matching_ignores_input_order((refs, preds) in spans(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = refs.clone();
        let mut p2 = preds.clone();
        r2.shuffle(&mut rng);
        p2.shuffle(&mut rng);
        prop_assert_eq!(span_pairs(&refs, &preds), span_pairs(&r2, &p2));
    }

    #[test]
    fn adding_a_prediction_never_loses_pairs((refs, preds) in spans(), extra in span()) {
        let before = match_spans(&refs, &preds).cardinality;
        let mut more = preds.clone();
        more.push(Some(extra));
        prop_assert!(match_spans(&refs, &more).cardinality >= before);
    }

    #[test]
    fn harmonic_mean_bounds(gold in 0usize..12, pred in 0usize..12, m in 0usize..12, l in 0usize..12) {
        let m = m.min(gold).min(pred);
        let l = l.min(m);
        let s = score_counts::<Rational>("d", gold, pred, m, l);
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        for v in [s.precision, s.recall, s.f1] {
            prop_assert!(zero <= v && v <= one);
        }
        if s.precision > zero && s.recall > zero {
            prop_assert!(s.f1 <= s.precision.max(s.recall) && s.f1 >= s.precision.min(s.recall));
        }
    }

    #[test]
    fn macro_values_ignore_document_order(
        counts in prop::collection::vec((0usize..8, 0usize..8, 0usize..8, 0usize..8), 1..10),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let scores: Vec<_> = counts
            .iter()
            .enumerate()
            .map(|(i, &(g, p, m, l))| {
                let m = m.min(g).min(p);
                score_counts::<Rational>(&format!("d{i}"), g, p, m, l.min(m))
            })
            .collect();
        let mut shuffled = scores.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (summarize(&scores).unwrap(), summarize(&shuffled).unwrap());
        prop_assert_eq!(a.macro_precision, b.macro_precision);
        prop_assert_eq!(a.macro_recall, b.macro_recall);
        prop_assert_eq!(a.macro_f1, b.macro_f1);
        prop_assert_eq!(a.pct_correctly_labeled, b.pct_correctly_labeled);
        prop_assert_eq!(a.false_error_pct_of_pred, b.false_error_pct_of_pred);
    }

    #[test]
    fn pooled_label_accuracy_survives_splitting(
        counts in prop::collection::vec((1usize..8, 0usize..8), 2..10),
        cut in any::<prop::sample::Index>(),
    ) {
        let scores: Vec<_> = counts
            .iter()
            .enumerate()
            .map(|(i, &(m, l))| score_counts::<Rational>(&format!("d{i}"), m, m, m, l.min(m)))
            .collect();
        let k = 1 + cut.index(scores.len() - 1);
        let whole = summarize(&scores).unwrap();
        let (a, b) = (summarize(&scores[..k]).unwrap(), summarize(&scores[k..]).unwrap());
        let repooled = Rational::new(
            (a.total_label_correct + b.total_label_correct) as i64,
            (a.total_matched + b.total_matched) as i64,
        );
        prop_assert_eq!(whole.pct_correctly_labeled, Some(repooled));
    }

    #[test]
    fn exact_predictions_score_one(doc in document()) {
        let t = Typology::bundled();
        let preds: Vec<PredictedAnnotation> = doc
            .reference_errors
            .iter()
            .map(|e| {
                let mut p = PredictedAnnotation::new(&doc.doc_id, None, doc.surface(e), &e.labels[0]);
                p.anchor = Some(e.span);
                p
            })
            .collect();
        let m = match_document(&doc.reference_errors, &preds, &t);
        let s = score_counts::<Rational>(&doc.doc_id, m.n_gold(), m.n_pred(), m.n_matched(), m.n_label_correct);
        let one = Rational::from_integer(1);
        prop_assert_eq!((s.precision, s.recall, s.f1), (one, one, one));
        prop_assert_eq!(m.n_label_correct, m.n_matched());
    }

    #[test]
    fn predictions_tsv_round_trip(rows in prop::collection::vec(
        ("[a-z0-9-]{1,8}", prop::option::of(0usize..40), "[^\t\n\r\"]{1,20}", "[A-Z]{2}-[A-Z]{2}", prop::option::of("[^\t\n\r\"]{1,30}")),
        0..12,
    )) {
        let preds: Vec<PredictedAnnotation> = rows
            .into_iter()
            .map(|(d, s, surface, label, explanation)| {
                let mut p = PredictedAnnotation::new(&d, s, &surface, &label);
                p.explanation = explanation;
                p
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        write_predictions_tsv(std::fs::File::create(&path).unwrap(), &preds).unwrap();
        prop_assert_eq!(read_predictions(&path).unwrap(), preds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bootstrap_is_deterministic(values in prop::collection::vec(0.0f64..1.0, 2..40), seed in any::<u64>()) {
        let a = bca_interval(&values, 1000, seed, 0.95).unwrap();
        let b = bca_interval(&values, 1000, seed, 0.95).unwrap();
        prop_assert_eq!(a.lower.to_bits(), b.lower.to_bits());
        prop_assert_eq!(a.upper.to_bits(), b.upper.to_bits());
        prop_assert!(a.lower <= a.upper);
    }

    #[test]
    fn bootstrap_shift_equivariance(values in prop::collection::vec(0.0f64..1.0, 3..30), seed in any::<u64>(), c in -0.5f64..0.5) {
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let a = bca_interval(&values, 1000, seed, 0.95).unwrap();
        let b = bca_interval(&shifted, 1000, seed, 0.95).unwrap();
        // Rounding can reorder near-equal resample means, moving a bound to a
        // neighbouring order statistic.
        prop_assert!((a.lower + c - b.lower).abs() < 1e-6, "{:?} {:?}", a, b);
        prop_assert!((a.upper + c - b.upper).abs() < 1e-6, "{:?} {:?}", a, b);
    }
}
