//! Reading the annotation table a model returns, and writing one.
//!
//! The parser accepts pipe-delimited (Markdown) or tab-delimited tables,
//! recognises common French and English column names and falls back to
//! column position when no header is recognised. Sentence numbers in tables
//! are 1-based.

use std::sync::LazyLock;

use annoteval_core::PredictedAnnotation;
use regex::Regex;

use crate::error::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Sentence,
    Surface,
    Label,
    Explanation,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedTable {
    pub predictions: Vec<PredictedAnnotation>,
    /// Rows that were skipped, with the reason.
    pub diagnostics: Vec<String>,
}

static CODE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[^A-Za-z0-9])([A-Z]{2}(?:-[A-Z]{2,4})+)(?:$|[^A-Za-z0-9-])").unwrap()
});
static BARE_CODE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i)[a-z]{2}(?:-[a-z]{2,4})+$").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());
static SEPARATOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^:?-{2,}:?$").unwrap());

/// Lowercase with French accents stripped, for header and keyword matching.
fn fold(s: &str) -> String {
    s.trim()
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| match c {
            'à' | 'â' | 'ä' => 'a',
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'î' | 'ï' => 'i',
            'ô' | 'ö' => 'o',
            'ù' | 'û' | 'ü' => 'u',
            'ç' => 'c',
            '’' => '\'',
            _ => c,
        })
        .collect()
}

fn header_role(cell: &str) -> Option<Column> {
    let f = fold(cell).replace(['*', '_', '`'], "");
    let has = |words: &[&str]| words.iter().any(|w| f.contains(w));
    if has(&["code", "label", "etiquette", "categor", "type"]) {
        Some(Column::Label)
    } else if has(&[
        "explication",
        "explanation",
        "comment",
        "justification",
        "remarque",
    ]) {
        Some(Column::Explanation)
    } else if has(&["phrase", "sentence", "numero", "number", "n°", "no."])
        || f == "#"
        || f == "n"
        || f == "no"
    {
        Some(Column::Sentence)
    } else if has(&[
        "erreur", "error", "span", "segment", "extrait", "passage", "texte",
    ]) {
        Some(Column::Surface)
    } else {
        None
    }
}

fn split_pipe_row(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = if t.ends_with('|') && !t.ends_with("\\|") {
        &t[..t.len() - 1]
    } else {
        t
    };
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = t.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                cur.push('|');
                chars.next();
            }
            '|' => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    cells.push(cur);
    cells.into_iter().map(|c| c.trim().to_string()).collect()
}

fn rows(raw: &str) -> Vec<Vec<Vec<String>>> {
    // Consecutive table lines form a block.
    let mut blocks: Vec<Vec<Vec<String>>> = Vec::new();
    let mut current: Vec<Vec<String>> = Vec::new();
    for line in raw.lines() {
        let cells = if line.contains('|') {
            Some(split_pipe_row(line))
        } else if line.contains('\t') {
            Some(line.split('\t').map(|c| c.trim().to_string()).collect())
        } else {
            None
        };
        match cells {
            Some(c) if c.len() >= 2 => current.push(c),
            _ => {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    blocks
}

fn is_separator(row: &[String]) -> bool {
    row.iter()
        .all(|c| c.is_empty() || SEPARATOR.is_match(c.trim()))
        && row.iter().any(|c| !c.is_empty())
}

fn is_no_error(cell: &str) -> bool {
    let f = fold(cell)
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string();
    matches!(
        f.as_str(),
        "aucune erreur"
            | "aucune"
            | "pas d'erreur"
            | "sans erreur"
            | "neant"
            | "no error"
            | "no errors"
            | "none"
    )
}

/// Strips emphasis and one pair of surrounding quotes.
fn clean_surface(cell: &str) -> String {
    let mut s = cell.trim();
    for (open, close) in [("**", "**"), ("`", "`")] {
        if s.len() >= open.len() + close.len() && s.starts_with(open) && s.ends_with(close) {
            s = s[open.len()..s.len() - close.len()].trim();
        }
    }
    for (open, close) in [('«', '»'), ('"', '"'), ('“', '”')] {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
            break;
        }
    }
    s.to_string()
}

fn extract_code(cell: &str) -> Option<String> {
    let s = cell.replace(['*', '`'], "");
    if let Some(m) = CODE.captures(&s) {
        return Some(m[1].to_string());
    }
    let t = s.trim();
    BARE_CODE.is_match(t).then(|| t.to_uppercase())
}

/// Assigns a role to each column, by header if one is recognised, else by
/// position. Returns the roles and whether the first row was a header.
fn layout(block: &[Vec<String>]) -> (Vec<Option<Column>>, bool) {
    let first = &block[0];
    let roles: Vec<Option<Column>> = first.iter().map(|c| header_role(c)).collect();
    let looks_like_data = first.iter().any(|c| extract_code(c).is_some());
    if !looks_like_data
        && roles.iter().any(|r| *r == Some(Column::Surface))
        && roles.iter().any(|r| *r == Some(Column::Label))
    {
        // Several label-like columns (category and code): keep the one that
        // actually holds codes.
        let label_cols: Vec<usize> = (0..roles.len())
            .filter(|&i| roles[i] == Some(Column::Label))
            .collect();
        let mut roles = roles;
        if label_cols.len() > 1 {
            let score = |i: usize| {
                block[1..]
                    .iter()
                    .filter(|r| r.get(i).is_some_and(|c| extract_code(c).is_some()))
                    .count()
            };
            let best = *label_cols
                .iter()
                .max_by_key(|&&i| (score(i), std::cmp::Reverse(i)))
                .unwrap();
            for i in label_cols {
                if i != best {
                    roles[i] = None;
                }
            }
        }
        return (roles, true);
    }
    let width = block.iter().map(Vec::len).max().unwrap_or(0);
    let numeric_first = block.iter().filter(|r| !is_separator(r)).all(|r| {
        r.first()
            .is_some_and(|c| c.is_empty() || NUMBER.is_match(c))
    });
    let mut roles = vec![None; width];
    let order: &[Column] = if numeric_first {
        &[
            Column::Sentence,
            Column::Surface,
            Column::Label,
            Column::Explanation,
        ]
    } else {
        &[Column::Surface, Column::Label, Column::Explanation]
    };
    for (slot, role) in roles.iter_mut().zip(order) {
        *slot = Some(*role);
    }
    (roles, false)
}

/// Parses the model's table into predictions for `doc_id`.
pub fn parse_annotation_table(raw: &str, doc_id: &str) -> Result<ParsedTable, LlmError> {
    let failure = |reason: &str| LlmError::ParseFailure {
        doc: doc_id.to_string(),
        reason: reason.to_string(),
        raw: raw.to_string(),
    };
    let blocks = rows(raw);
    // The first block with a recognised header wins, else the largest block.
    let block = blocks
        .iter()
        .find(|b| layout(b).1)
        .or_else(|| blocks.iter().max_by_key(|b| b.len()))
        .ok_or_else(|| failure("no table found"))?;
    let (roles, has_header) = layout(block);
    let col = |c: Column| roles.iter().position(|r| *r == Some(c));
    let (sentence_col, surface_col, label_col, explanation_col) = (
        col(Column::Sentence),
        col(Column::Surface),
        col(Column::Label),
        col(Column::Explanation),
    );
    if surface_col.is_none() && label_col.is_none() {
        return Err(failure(
            "table has neither an error column nor a label column",
        ));
    }
    let mut out = ParsedTable::default();
    let body = if has_header { &block[1..] } else { &block[..] };
    let mut last_sentence: Option<usize> = None;
    for (n, row) in body.iter().enumerate() {
        if is_separator(row) {
            continue;
        }
        let get = |c: Option<usize>| c.and_then(|i| row.get(i)).map(String::as_str).unwrap_or("");
        let row_no = n + 1 + usize::from(has_header);
        let sentence_cell = get(sentence_col);
        let sentence = match NUMBER.find(sentence_cell) {
            Some(m) => match m.as_str().parse::<usize>() {
                Ok(0) | Err(_) => {
                    out.diagnostics.push(format!(
                        "row {row_no}: sentence number {sentence_cell:?} is not 1-based"
                    ));
                    None
                }
                Ok(k) => Some(k - 1),
            },
            // Merged cells: an empty sentence cell continues the previous row.
            None if sentence_cell.trim().is_empty() => last_sentence,
            None => None,
        };
        last_sentence = sentence;
        if row.iter().any(|c| is_no_error(c)) && extract_code(get(label_col)).is_none() {
            continue;
        }
        let surface = clean_surface(get(surface_col));
        let label_cell = get(label_col);
        let label = extract_code(label_cell).unwrap_or_else(|| label_cell.trim().to_string());
        if label.is_empty() || label == "-" {
            out.diagnostics
                .push(format!("row {row_no}: no label, row dropped"));
            continue;
        }
        let explanation = get(explanation_col).trim();
        let mut p = PredictedAnnotation::new(doc_id, sentence, &surface, &label);
        p.explanation = (!explanation.is_empty()).then(|| explanation.to_string());
        out.predictions.push(p);
    }
    Ok(out)
}

fn escape(cell: &str) -> String {
    cell.replace('|', "\\|").replace(['\n', '\r'], " ")
}

/// Renders predictions as a Markdown table that [`parse_annotation_table`]
/// reads back.
pub fn render_annotation_table(preds: &[PredictedAnnotation]) -> String {
    let mut out = String::from("| Phrase | Erreur | Code | Explication |\n|---|---|---|---|\n");
    for p in preds {
        let sentence = p
            .sentence_index
            .map_or_else(|| "-".to_string(), |i| (i + 1).to_string());
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            sentence,
            escape(&p.surface),
            escape(&p.label),
            escape(p.explanation.as_deref().unwrap_or(""))
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headerless_row() {
        let t = parse_annotation_table("| 2 | focusse | TR-SI-TL | anglicisme |", "d").unwrap();
        assert_eq!(t.predictions.len(), 1);
        let p = &t.predictions[0];
        assert_eq!(
            (p.sentence_index, p.surface.as_str(), p.label.as_str()),
            (Some(1), "focusse", "TR-SI-TL")
        );
        assert_eq!(p.explanation.as_deref(), Some("anglicisme"));
    }

    #[test]
    fn no_error_rows_yield_nothing() {
        let raw = "| Phrase | Erreur | Code | Explication |\n|---|---|---|---|\n| 1 | aucune erreur | | |\n| 2 | la lacune | LA-UR | registre |\n";
        let t = parse_annotation_table(raw, "d").unwrap();
        assert_eq!(t.predictions.len(), 1);
        assert_eq!(t.predictions[0].sentence_index, Some(1));
        assert!(t.diagnostics.is_empty());
    }

    #[test]
    fn prose_is_a_failure() {
        let err = parse_annotation_table("Voici mes annotations : tout va bien.", "d").unwrap_err();
        assert!(
            matches!(err, LlmError::ParseFailure { ref raw, .. } if raw.contains("tout va bien"))
        );
    }

    #[test]
    fn header_synonyms_and_category_column() {
        let raw = "Voici le tableau :\n\n| N° | Segment | Catégorie | Code d’erreur | Commentaire |\n| :-- | --- | --- | --- | --- |\n| 3 | « Elle » | Langue | LA-IA-GE | genre |\n| 3 | se focusse | Transfert | Omission_TR-OM | |\n";
        let t = parse_annotation_table(raw, "d").unwrap();
        let got: Vec<(Option<usize>, &str, &str)> = t
            .predictions
            .iter()
            .map(|p| (p.sentence_index, p.surface.as_str(), p.label.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                (Some(2), "Elle", "LA-IA-GE"),
                (Some(2), "se focusse", "TR-OM")
            ]
        );
        assert_eq!(t.predictions[1].explanation, None);
    }

    #[test]
    fn tab_delimited_and_missing_label() {
        let raw = "phrase\terreur\tlabel\n1\tcontes du peuple\tLA-TL-INS\n1\thistoires\t\n";
        let t = parse_annotation_table(raw, "d").unwrap();
        assert_eq!(t.predictions.len(), 1);
        assert_eq!(t.diagnostics.len(), 1);
    }

    #[test]
    fn lowercase_bare_code() {
        let t = parse_annotation_table("| 1 | x | tr-si-tl |", "d").unwrap();
        assert_eq!(t.predictions[0].label, "TR-SI-TL");
    }

    #[test]
    fn render_then_parse() {
        let mut p = PredictedAnnotation::new("d", Some(0), "a | b", "TR-OM");
        p.explanation = Some("why".into());
        let q = PredictedAnnotation::new("d", None, "l’extraction", "LA-TL-INS");
        let back =
            parse_annotation_table(&render_annotation_table(&[p.clone(), q.clone()]), "d").unwrap();
        assert_eq!(back.predictions, vec![p, q]);
    }
}
