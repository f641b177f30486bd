//! One-to-one matching of predicted error spans to reference error spans.
//!
//! A reference and a prediction can be paired when their spans share at least
//! one code point. The chosen pairing has maximum cardinality; among those,
//! maximum total overlap; remaining ties go to the lexicographically smallest
//! sorted list of `(ref_span, pred_span)` pairs, with indices deciding only
//! between identical spans. Reference errors are stored sorted by span, so for
//! them this is the same as comparing indices, and the chosen set of span
//! pairs does not depend on the input order of either side.

use serde::{Deserialize, Serialize};

use crate::corpus::{PredictedAnnotation, ReferenceError, Span};
use crate::typology::Typology;

/// True iff the half-open spans share at least one position.
pub fn overlaps(a: Span, b: Span) -> bool {
    a.start.max(b.start) < a.end.min(b.end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub ref_index: usize,
    pub pred_index: usize,
    pub overlap_len: usize,
    pub label_correct: bool,
}

/// Matching outcome for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Sorted by `(ref_index, pred_index)`.
    pub pairs: Vec<MatchPair>,
    /// Missed reference errors.
    pub unmatched_refs: Vec<usize>,
    /// False errors, including unanchored predictions.
    pub unmatched_preds: Vec<usize>,
    pub n_label_correct: usize,
    /// Predictions that never received an anchor.
    pub n_unanchored: usize,
}

impl MatchResult {
    pub fn n_matched(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_gold(&self) -> usize {
        self.pairs.len() + self.unmatched_refs.len()
    }

    pub fn n_pred(&self) -> usize {
        self.pairs.len() + self.unmatched_preds.len()
    }

    pub fn total_overlap(&self) -> usize {
        self.pairs.iter().map(|p| p.overlap_len).sum()
    }
}

/// One candidate edge considered by the tie-break pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieBreakStep {
    pub ref_index: usize,
    pub pred_index: usize,
    pub accepted: bool,
}

/// Debug view of a span matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanMatching {
    /// `(ref_index, pred_index, overlap_len)`, sorted.
    pub pairs: Vec<(usize, usize, usize)>,
    pub cardinality: usize,
    pub total_overlap: usize,
    /// Overlapping `(ref_index, pred_index, overlap_len)` candidates.
    pub candidates: Vec<(usize, usize, usize)>,
    pub tie_break_path: Vec<TieBreakStep>,
}

/// Maximum-weight assignment on a dense `rows x cols` weight matrix
/// (`rows <= cols`), zero meaning "no edge". Returns the column assigned to
/// each row and the total weight. Hungarian method with potentials.
fn max_weight_assignment(weights: &[Vec<i64>], cols: usize) -> (Vec<Option<usize>>, i64) {
    let rows = weights.len();
    if rows == 0 || cols == 0 {
        return (vec![None; rows], 0);
    }
    debug_assert!(rows <= cols);
    let cost = |i: usize, j: usize| -weights[i][j];
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; index 0 is the virtual column/row.
    let mut u = vec![0i64; rows + 1];
    let mut v = vec![0i64; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    let mut total = 0;
    for j in 1..=cols {
        if p[j] != 0 {
            let i = p[j] - 1;
            let w = weights[i][j - 1];
            if w > 0 {
                assignment[i] = Some(j - 1);
                total += w;
            }
        }
    }
    (assignment, total)
}

struct Problem {
    n_refs: usize,
    n_preds: usize,
    /// `overlap[r][p]`, zero when the spans are disjoint.
    overlap: Vec<Vec<usize>>,
    /// Edge weight offset making cardinality dominate total overlap.
    big: i64,
}

impl Problem {
    fn new(refs: &[Span], preds: &[Option<Span>]) -> Problem {
        let overlap: Vec<Vec<usize>> = refs
            .iter()
            .map(|r| {
                preds
                    .iter()
                    .map(|p| match p {
                        Some(p) if overlaps(*r, *p) => r.overlap_len(p),
                        _ => 0,
                    })
                    .collect()
            })
            .collect();
        let total: usize = overlap.iter().flatten().sum();
        Problem {
            n_refs: refs.len(),
            n_preds: preds.len(),
            overlap,
            big: total as i64 + 1,
        }
    }

    fn weight(&self, r: usize, p: usize) -> i64 {
        match self.overlap[r][p] {
            0 => 0,
            o => self.big + o as i64,
        }
    }

    /// Best total weight using only refs/preds not in the excluded sets.
    fn best(&self, ref_free: &[bool], pred_free: &[bool]) -> i64 {
        let rs: Vec<usize> = (0..self.n_refs).filter(|&r| ref_free[r]).collect();
        let ps: Vec<usize> = (0..self.n_preds).filter(|&p| pred_free[p]).collect();
        let (rows, cols, transpose) = if rs.len() <= ps.len() {
            (&rs, &ps, false)
        } else {
            (&ps, &rs, true)
        };
        let weights: Vec<Vec<i64>> = rows
            .iter()
            .map(|&a| {
                cols.iter()
                    .map(|&b| {
                        if transpose {
                            self.weight(b, a)
                        } else {
                            self.weight(a, b)
                        }
                    })
                    .collect()
            })
            .collect();
        max_weight_assignment(&weights, cols.len()).1
    }
}

/// Matches reference spans against (optionally anchored) predicted spans.
pub fn match_spans(refs: &[Span], preds: &[Option<Span>]) -> SpanMatching {
    let problem = Problem::new(refs, preds);
    let mut candidates = Vec::new();
    for r in 0..refs.len() {
        for p in 0..preds.len() {
            if problem.overlap[r][p] > 0 {
                candidates.push((r, p, problem.overlap[r][p]));
            }
        }
    }
    let mut ref_free = vec![true; refs.len()];
    let mut pred_free = vec![true; preds.len()];
    let optimum = problem.best(&ref_free, &pred_free);

    let key = |&(r, p, _): &(usize, usize, usize)| (refs[r], preds[p], r, p);
    let mut order = candidates.clone();
    order.sort_by_key(key);

    // Greedy over candidates in lexicographic order: keep an edge iff some
    // optimal matching contains it together with every edge kept so far.
    let mut fixed_weight = 0i64;
    let mut pairs = Vec::new();
    let mut path = Vec::new();
    for &(r, p, o) in &order {
        if !ref_free[r] || !pred_free[p] {
            continue;
        }
        if fixed_weight == optimum {
            break;
        }
        let w = problem.weight(r, p);
        ref_free[r] = false;
        pred_free[p] = false;
        let accepted = fixed_weight + w + problem.best(&ref_free, &pred_free) == optimum;
        if accepted {
            fixed_weight += w;
            pairs.push((r, p, o));
        } else {
            ref_free[r] = true;
            pred_free[p] = true;
        }
        path.push(TieBreakStep {
            ref_index: r,
            pred_index: p,
            accepted,
        });
    }
    pairs.sort_unstable();
    let total_overlap = pairs.iter().map(|&(_, _, o)| o).sum();
    SpanMatching {
        cardinality: pairs.len(),
        total_overlap,
        pairs,
        candidates,
        tie_break_path: path,
    }
}

/// True iff the predicted label resolves to one of the reference labels.
/// Unresolvable predicted labels are never correct.
pub fn label_correct(
    reference: &ReferenceError,
    pred: &PredictedAnnotation,
    typology: &Typology,
) -> bool {
    match typology.canonical_code(&pred.label) {
        Ok(code) => reference.labels.iter().any(|l| {
            typology
                .canonical_code(l)
                .map(|c| c == code)
                .unwrap_or(false)
        }),
        Err(_) => false,
    }
}

/// Matches one document's anchored predictions against its reference errors.
pub fn match_document(
    refs: &[ReferenceError],
    preds: &[PredictedAnnotation],
    typology: &Typology,
) -> MatchResult {
    match_document_traced(refs, preds, typology).0
}

/// [`match_document`] plus the debug trace.
pub fn match_document_traced(
    refs: &[ReferenceError],
    preds: &[PredictedAnnotation],
    typology: &Typology,
) -> (MatchResult, SpanMatching) {
    let ref_spans: Vec<Span> = refs.iter().map(|r| r.span).collect();
    let pred_spans: Vec<Option<Span>> = preds.iter().map(|p| p.anchor).collect();
    let m = match_spans(&ref_spans, &pred_spans);
    let pairs: Vec<MatchPair> = m
        .pairs
        .iter()
        .map(|&(r, p, o)| MatchPair {
            ref_index: r,
            pred_index: p,
            overlap_len: o,
            label_correct: label_correct(&refs[r], &preds[p], typology),
        })
        .collect();
    let mut ref_used = vec![false; refs.len()];
    let mut pred_used = vec![false; preds.len()];
    for pair in &pairs {
        ref_used[pair.ref_index] = true;
        pred_used[pair.pred_index] = true;
    }
    let result = MatchResult {
        n_label_correct: pairs.iter().filter(|p| p.label_correct).count(),
        pairs,
        unmatched_refs: (0..refs.len()).filter(|&r| !ref_used[r]).collect(),
        unmatched_preds: (0..preds.len()).filter(|&p| !pred_used[p]).collect(),
        n_unanchored: preds.iter().filter(|p| p.anchor.is_none()).count(),
    };
    (result, m)
}
