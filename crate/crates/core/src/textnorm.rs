//! Word normalization, edit distance, relaxed word equality and a rule-based
//! sentence-boundary detector.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub levenshtein_threshold: usize,
    pub strip_punctuation: bool,
    pub lowercase: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            levenshtein_threshold: 2,
            strip_punctuation: true,
            lowercase: true,
        }
    }
}

impl MatchConfig {
    /// Exact string equality: no normalization, threshold 0.
    pub fn exact() -> Self {
        MatchConfig {
            levenshtein_threshold: 0,
            strip_punctuation: false,
            lowercase: false,
        }
    }
}

/// True for every character in a Unicode `P*` general category.
pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

pub fn normalize_word(word: &str, cfg: &MatchConfig) -> String {
    let mut out = String::with_capacity(word.len());
    for c in word.chars() {
        if cfg.strip_punctuation && is_punctuation(c) {
            continue;
        }
        if cfg.lowercase {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// Unit-cost edit distance between two sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

/// Relaxed equality used by the ASR agreement policy: normalized forms within
/// the configured edit distance.
pub fn words_match(a: &str, b: &str, cfg: &MatchConfig) -> bool {
    let a = normalize_word(a, cfg);
    let b = normalize_word(b, cfg);
    if a == b {
        return true;
    }
    let (la, lb) = (a.chars().count(), b.chars().count());
    if la.abs_diff(lb) > cfg.levenshtein_threshold {
        return false;
    }
    levenshtein(&a, &b) <= cfg.levenshtein_threshold
}

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "e.g", "i.e", "etc", "vs", "fig", "eq",
];

const TERMINALS: &[char] = &['.', '!', '?', '…'];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'')
        || matches!(
            get_general_category(c),
            GeneralCategory::ClosePunctuation | GeneralCategory::FinalPunctuation
        )
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'')
        || matches!(
            get_general_category(c),
            GeneralCategory::OpenPunctuation | GeneralCategory::InitialPunctuation
        )
}

/// Rule-based sentence boundary detector.
///
/// A word closes a sentence when it ends in `.`, `!`, `?` or `…`, optionally
/// followed by closing quotes or brackets. Period-terminated abbreviations
/// (configurable list, plus single letters) do not close a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
    single_letters: bool,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter {
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
            single_letters: true,
        }
    }
}

impl SentenceSplitter {
    pub fn with_abbreviations<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SentenceSplitter {
            abbreviations: entries.into_iter().map(Into::into).collect(),
            single_letters: true,
        }
    }

    pub fn single_letters(mut self, on: bool) -> Self {
        self.single_letters = on;
        self
    }

    pub fn abbreviations(&self) -> impl Iterator<Item = &str> {
        self.abbreviations.iter().map(String::as_str)
    }

    /// Parses an abbreviation list: one lowercase entry per line. Blank lines
    /// are skipped.
    pub fn parse_abbreviations(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let entry = raw.trim();
            if entry.is_empty() {
                continue;
            }
            let bad = if entry.chars().any(char::is_whitespace) {
                Some("entry contains whitespace")
            } else if entry.to_lowercase() != entry {
                Some("entry must be lowercase")
            } else {
                None
            };
            if let Some(message) = bad {
                return Err(Error::Parse {
                    source_name: "abbreviations".into(),
                    line: idx + 1,
                    field: None,
                    message: message.into(),
                });
            }
            entries.push(entry.to_string());
        }
        Ok(Self::with_abbreviations(entries))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_abbreviations(&text).map_err(|e| match e {
            Error::Parse {
                line,
                field,
                message,
                ..
            } => Error::Parse {
                source_name: path.display().to_string(),
                line,
                field,
                message,
            },
            other => other,
        })
    }

    pub fn is_sentence_final(&self, word: &str) -> bool {
        let body = word.trim_end_matches(is_closer);
        let Some(last) = body.chars().last() else {
            return false;
        };
        if !TERMINALS.contains(&last) {
            return false;
        }
        if last != '.' {
            return true;
        }
        // Only the final period is removed so that "e.g." keys as "e.g".
        let stem = body[..body.len() - '.'.len_utf8()]
            .trim_start_matches(is_opener)
            .to_lowercase();
        if stem.is_empty() || stem.ends_with('.') {
            // "..." style ellipsis
            return true;
        }
        if self.abbreviations.contains(&stem) {
            return false;
        }
        let mut chars = stem.chars();
        let single = matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic());
        !(self.single_letters && single)
    }

    /// Index of the first sentence-final word at or after `from_index`.
    pub fn detect_sentence_end<S: AsRef<str>>(
        &self,
        words: &[S],
        from_index: usize,
    ) -> Option<usize> {
        words
            .iter()
            .enumerate()
            .skip(from_index)
            .find(|(_, w)| self.is_sentence_final(w.as_ref()))
            .map(|(i, _)| i)
    }
}

/// [`SentenceSplitter::detect_sentence_end`] with the default abbreviations.
pub fn detect_sentence_end<S: AsRef<str>>(words: &[S], from_index: usize) -> Option<usize> {
    SentenceSplitter::default().detect_sentence_end(words, from_index)
}
