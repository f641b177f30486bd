//! Code-point spans, sentence splitting and surface normalization.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open interval of Unicode code point offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Number of shared code points.
    pub fn overlap_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Span {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> [usize; 2] {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Byte offsets of every code point of a string, for slicing by code point.
#[derive(Debug, Clone)]
pub struct CharIndex {
    offsets: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> CharIndex {
        let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        offsets.push(text.len());
        CharIndex { offsets }
    }

    /// Number of code points.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte(&self, cp: usize) -> usize {
        self.offsets[cp]
    }

    /// Code point offset of a byte offset that lies on a char boundary.
    pub fn code_point(&self, byte: usize) -> usize {
        self.offsets
            .binary_search(&byte)
            .expect("byte offset on a char boundary")
    }

    pub fn slice<'a>(&self, text: &'a str, span: Span) -> &'a str {
        &text[self.byte(span.start)..self.byte(span.end)]
    }
}

/// Length of a string in code points.
pub fn cp_len(text: &str) -> usize {
    text.chars().count()
}

const TERMINALS: [char; 4] = ['.', '!', '?', '…'];
const CLOSERS: [char; 7] = [')', ']', '"', '»', '”', '’', '\''];
const ABBREVIATIONS: [&str; 4] = ["e.g.", "i.e.", "cf.", "etc."];

/// Splits text into sentence spans.
///
/// A sentence ends after a run of `.`, `!`, `?` or `…` (plus any closing
/// brackets or quotes) that is followed by whitespace and an uppercase letter,
/// or by the end of the text. `e.g.`, `i.e.`, `cf.` and `etc.` never end a
/// sentence. Spans exclude surrounding whitespace.
pub fn split_sentences(text: &str) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut i = 0;
    let mut start: Option<usize> = None;
    while i < n {
        let c = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(i);
        }
        if TERMINALS.contains(&c) {
            let mut end = i + 1;
            while end < n && TERMINALS.contains(&chars[end]) {
                end += 1;
            }
            // Closing quotes/brackets, possibly after a French thin space.
            loop {
                let mut k = end;
                while k < n && matches!(chars[k], ' ' | '\u{00A0}' | '\u{202F}') {
                    k += 1;
                }
                if k < n && CLOSERS.contains(&chars[k]) {
                    end = k + 1;
                } else {
                    break;
                }
            }
            let mut next = end;
            while next < n && chars[next].is_whitespace() {
                next += 1;
            }
            let at_end = next == n;
            let boundary = at_end || (next > end && chars[next].is_uppercase());
            if boundary && !ends_with_abbreviation(&chars, start.unwrap(), i) {
                spans.push(Span::new(start.take().unwrap(), end));
                i = next;
                continue;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let mut end = n;
        while end > s && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        if end > s {
            spans.push(Span::new(s, end));
        }
    }
    spans
}

fn ends_with_abbreviation(chars: &[char], sentence_start: usize, dot: usize) -> bool {
    if chars[dot] != '.' {
        return false;
    }
    let mut begin = dot;
    while begin > sentence_start && !chars[begin - 1].is_whitespace() {
        begin -= 1;
    }
    let token: String = chars[begin..=dot]
        .iter()
        .skip_while(|c| matches!(c, '(' | '[' | '"' | '«' | '“'))
        .flat_map(|c| c.to_lowercase())
        .collect();
    ABBREVIATIONS.contains(&token.as_str())
}

/// How aggressively surfaces are normalized before matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationLevel {
    Exact,
    Normalized,
}

fn fold_char(c: char) -> Option<char> {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '\u{02BC}' | '`' | '´' => {
            Some('\'')
        }
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' | '«' | '»' => Some('"'),
        '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}'
        | '\u{2212}' => Some('-'),
        '\u{2026}' => Some('.'),
        c if c.is_whitespace() => None,
        c => Some(c),
    }
}

/// Normalized text with a map from each normalized char back to the code
/// point it came from.
#[derive(Debug, Clone)]
pub struct NormalizedText {
    pub text: Vec<char>,
    pub origin: Vec<usize>,
}

/// Case-folds, collapses whitespace runs to one space and maps typographic
/// apostrophes, quotes, dashes and ellipses to ASCII.
pub fn normalize_with_map(text: &str) -> NormalizedText {
    let mut out = Vec::new();
    let mut origin = Vec::new();
    let mut pending_space: Option<usize> = None;
    for (i, c) in text.chars().enumerate() {
        match fold_char(c) {
            None => {
                if pending_space.is_none() {
                    pending_space = Some(i);
                }
            }
            Some(f) => {
                if let Some(sp) = pending_space.take() {
                    if !out.is_empty() {
                        out.push(' ');
                        origin.push(sp);
                    }
                }
                for lc in f.to_lowercase() {
                    out.push(lc);
                    origin.push(i);
                }
            }
        }
    }
    NormalizedText { text: out, origin }
}

const TRAILING_PUNCT: [char; 8] = ['.', ',', ';', ':', '!', '?', '…', ' '];

/// Normalizes a predicted surface: [`normalize_with_map`] plus trailing
/// sentence punctuation stripped.
pub fn normalize_surface(surface: &str) -> String {
    let mut chars = normalize_with_map(surface).text;
    while chars.last().is_some_and(|c| TRAILING_PUNCT.contains(c)) {
        chars.pop();
    }
    chars.into_iter().collect()
}
