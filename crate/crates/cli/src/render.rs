//! Human-readable renderings of reports and statistics.

use std::fmt::Write as _;

use annoteval_core::metrics::RunComparison;
use annoteval_core::{ConfidenceInterval, CorpusStats, EvaluationReport};

/// Score with three decimals.
pub fn score(x: f64) -> String {
    format!("{x:.3}")
}

/// `x` rounded to three significant digits, never in exponent notation.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.3}");
    }
    let decimals = |v: f64| (2 - v.abs().log10().floor() as i32).max(0) as usize;
    let d = decimals(x);
    let rounded: f64 = format!("{x:.d$}").parse().expect("formatted float parses");
    // Rounding may carry into the next power of ten (0.09996 -> 0.1000).
    let d = decimals(rounded).min(d);
    format!("{rounded:.d$}")
}

/// Percentage of a fraction, one decimal.
pub fn pct(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

fn with_ci(value: f64, ci: Option<&ConfidenceInterval<f64>>) -> String {
    match ci {
        Some(ci) => format!("{} ± {}", score(value), sig3(ci.half_width())),
        None => score(value),
    }
}

const TABLE_HEAD: &str =
    "| Run | # pred errors | Precision | Recall | F1 | % correctly labeled |\n|---|---:|---:|---:|---:|---:|\n";

fn table_row(name: &str, r: &EvaluationReport<f64>) -> String {
    let s = &r.summary;
    format!(
        "| {name} | {} | {} | {} | {} | {} |\n",
        s.total_pred,
        with_ci(s.macro_precision, r.ci_precision.as_ref()),
        with_ci(s.macro_recall, r.ci_recall.as_ref()),
        with_ci(s.macro_f1, r.ci_f1.as_ref()),
        s.pct_correctly_labeled
            .map(pct)
            .unwrap_or_else(|| "n/a".into()),
    )
}

/// The results table for one or more runs.
pub fn results_table(runs: &[(&str, &EvaluationReport<f64>)]) -> String {
    let mut out = TABLE_HEAD.to_string();
    for (name, r) in runs {
        out.push_str(&table_row(name, r));
    }
    out
}

pub fn report_markdown(name: &str, r: &EvaluationReport<f64>) -> String {
    let s = &r.summary;
    let mut out = format!("# Evaluation: {name}\n\n");
    out.push_str(&results_table(&[(name, r)]));
    let level = r
        .ci_precision
        .as_ref()
        .map(|c| c.level)
        .unwrap_or(r.config.level);
    let _ = writeln!(
        out,
        "\nScores are macro averages over {} documents; ± is the half-width of the {}% BCa interval ({} resamples, seed {}).",
        s.n_docs,
        level * 100.0,
        r.config.resamples,
        r.config.seed
    );
    let _ = writeln!(out, "\n## Predictions\n");
    let _ = writeln!(out, "- reference errors: {}", s.total_gold);
    let _ = writeln!(out, "- predicted errors: {}", s.total_pred);
    let _ = writeln!(out, "- matched: {}", s.total_matched);
    let _ = writeln!(
        out,
        "- correctly labeled among matched: {}",
        s.total_label_correct
    );
    let _ = writeln!(out, "- unanchored predictions: {}", s.total_unanchored);
    let _ = writeln!(
        out,
        "- false errors: {} in total, {} per document (min {}, max {}), {} of predictions",
        s.false_error_total,
        score(s.false_error_mean_per_doc),
        s.false_error_min,
        s.false_error_max,
        s.false_error_pct_of_pred
            .map(pct)
            .unwrap_or_else(|| "n/a".into()),
    );
    let fallbacks: Vec<&str> = [
        ("precision", &r.ci_precision),
        ("recall", &r.ci_recall),
        ("F1", &r.ci_f1),
    ]
    .into_iter()
    .filter(|(_, ci)| {
        ci.as_ref()
            .is_some_and(|c| c.method != annoteval_core::CiMethod::Bca)
    })
    .map(|(n, _)| n)
    .collect();
    if !fallbacks.is_empty() {
        let _ = writeln!(
            out,
            "- percentile intervals used for: {}",
            fallbacks.join(", ")
        );
    }
    if r.ci_precision.is_none() {
        let _ = writeln!(out, "- no confidence intervals: fewer than two documents");
    }
    if !s.degenerate_docs.is_empty() {
        let _ = writeln!(
            out,
            "- degenerate conventions applied in: {}",
            s.degenerate_docs.join(", ")
        );
    }
    out
}

pub fn per_document_csv(r: &EvaluationReport<f64>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "doc_id",
        "n_gold",
        "n_pred",
        "n_matched",
        "n_label_correct",
        "n_false",
        "n_unanchored",
        "precision",
        "recall",
        "f1",
        "vacuous_precision",
        "vacuous_recall",
        "zero_f1",
    ])?;
    for s in &r.scores {
        w.write_record([
            s.doc_id.clone(),
            s.n_gold.to_string(),
            s.n_pred.to_string(),
            s.n_matched.to_string(),
            s.n_label_correct.to_string(),
            s.n_false.to_string(),
            s.n_unanchored.to_string(),
            s.precision.to_string(),
            s.recall.to_string(),
            s.f1.to_string(),
            s.degenerate.vacuous_precision.to_string(),
            s.degenerate.vacuous_recall.to_string(),
            s.degenerate.zero_f1.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map(f).unwrap_or_else(|| "n/a".into())
}

fn signed(x: f64, f: fn(f64) -> String) -> String {
    if x > 0.0 {
        format!("+{}", f(x))
    } else {
        f(x)
    }
}

/// Delta table of a comparison, or `no differences`.
pub fn comparison_markdown(names: (&str, &str), c: &RunComparison) -> String {
    if c.is_identical() {
        return "no differences\n".into();
    }
    let mut out = format!(
        "| Metric | {} | {} | Δ |\n|---|---:|---:|---:|\n",
        names.0, names.1
    );
    for m in &c.metrics {
        let f: fn(f64) -> String = match m.metric.as_str() {
            "n_pred" => |x| format!("{x:.0}"),
            "pct_correctly_labeled" | "false_error_pct_of_pred" => pct,
            _ => score,
        };
        let points = matches!(
            m.metric.as_str(),
            "pct_correctly_labeled" | "false_error_pct_of_pred"
        );
        let delta = match m.delta {
            Some(d) if points => format!("{:+.1} pp", d * 100.0),
            Some(d) => signed(d, f),
            None if m.a.is_some() != m.b.is_some() => "n/a".into(),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            m.metric,
            opt(m.a, f),
            opt(m.b, f),
            delta
        );
    }
    let changed: Vec<_> = c
        .documents
        .iter()
        .filter(|d| {
            d.precision != 0.0
                || d.recall != 0.0
                || d.f1 != 0.0
                || d.n_pred != 0
                || d.n_label_correct != 0
        })
        .collect();
    if !changed.is_empty() {
        out.push_str("\n| Document | Δ precision | Δ recall | Δ F1 | Δ # pred | Δ correctly labeled |\n|---|---:|---:|---:|---:|---:|\n");
        for d in changed {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:+} | {:+} |",
                d.doc_id,
                signed(d.precision, score),
                signed(d.recall, score),
                signed(d.f1, score),
                d.n_pred,
                d.n_label_correct
            );
        }
    }
    out
}

fn range(min: Option<usize>, max: Option<usize>) -> String {
    match (min, max) {
        (Some(a), Some(b)) => format!("{a}-{b}"),
        _ => "n/a".into(),
    }
}

pub fn stats_block(title: &str, s: &CorpusStats) -> String {
    let mean = |m: Option<f64>| m.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into());
    let mut out = format!("[{title}]\n");
    let _ = writeln!(out, "documents            {}", s.n_docs);
    let _ = writeln!(out, "errors               {}", s.n_errors);
    let _ = writeln!(out, "errors per document  {:.2}", s.mean_errors_per_doc);
    let _ = writeln!(
        out,
        "span length          {} (mean {})",
        range(s.span_len_min, s.span_len_max),
        mean(s.span_len_mean)
    );
    let _ = writeln!(
        out,
        "labels per error     {} (mean {})",
        range(s.labels_per_error_min, s.labels_per_error_max),
        mean(s.labels_per_error_mean)
    );
    let _ = writeln!(out, "target words         {}", s.n_words);
    let _ = writeln!(out, "source words         {}", s.n_source_words);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rules() {
        assert_eq!(score(0.7222222), "0.722");
        assert_eq!(sig3(0.0472345), "0.0472");
        assert_eq!(sig3(0.123456), "0.123");
        assert_eq!(sig3(0.099996), "0.100");
        assert_eq!(sig3(1.5), "1.50");
        assert_eq!(sig3(123.4), "123");
        assert_eq!(sig3(0.0), "0.000");
        assert_eq!(pct(0.6), "60.0%");
        assert_eq!(pct(6.0 / 11.0), "54.5%");
    }

    proptest::proptest! {
        #[test]
        fn sig3_keeps_three_significant_digits(x in 1e-6f64..1e4) {
            let text = sig3(x);
            let back: f64 = text.parse().unwrap();
            proptest::prop_assert!((back - x).abs() <= 0.005 * x + f64::EPSILON, "{x} -> {text}");
            let digits: String = text.chars().filter(|c| c.is_ascii_digit()).collect();
            let significant = digits.trim_start_matches('0');
            proptest::prop_assert!(significant.len() == 3 || (x >= 999.5 && significant.len() >= 3), "{x} -> {text}");
        }
    }
}
