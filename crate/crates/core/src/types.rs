//! Value types shared by the controllers, backends and metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved sentence-boundary token. Never accepted as an input word.
pub const SEP: &str = "[SEP]";

pub fn is_sep(token: &str) -> bool {
    token == SEP
}

/// Rejects words that cannot be carried through the stream: empty strings,
/// strings with whitespace, and the reserved sentinel.
pub fn check_word(text: &str) -> Result<()> {
    if text.is_empty() {
        return Err(Error::invalid("word is empty"));
    }
    if text.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("word {text:?} contains whitespace")));
    }
    if is_sep(text) {
        return Err(Error::invalid(format!(
            "word {SEP} is reserved as the sentence sentinel"
        )));
    }
    Ok(())
}

/// A recognised word with absolute timestamps in source-audio seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start_s: f64, end_s: f64) -> Result<Self> {
        let word = TimedWord {
            text: text.into(),
            start_s,
            end_s,
        };
        word.validate()?;
        Ok(word)
    }

    pub fn validate(&self) -> Result<()> {
        check_word(&self.text)?;
        if !(self.start_s.is_finite() && self.end_s.is_finite()) {
            return Err(Error::invalid(format!(
                "word {:?} has non-finite timestamps",
                self.text
            )));
        }
        if self.start_s < 0.0 || self.start_s > self.end_s {
            return Err(Error::invalid(format!(
                "word {:?} has invalid span [{}, {}]",
                self.text, self.start_s, self.end_s
            )));
        }
        Ok(())
    }
}

/// One decode of the current audio window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrHypothesis {
    pub words: Vec<TimedWord>,
    pub window_offset_s: f64,
}

impl AsrHypothesis {
    pub fn texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }
}

/// A beam-search candidate. `tokens` is the full target sequence for the
/// active segment, including any already committed prefix; `attention` holds
/// one row per token over the active source positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    pub tokens: Vec<String>,
    pub score: f64,
    pub attention: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSet {
    pub beams: Vec<BeamHypothesis>,
    pub requested_size: usize,
}

impl BeamSet {
    pub fn empty(requested_size: usize) -> Self {
        BeamSet {
            beams: Vec::new(),
            requested_size,
        }
    }
}

/// Paired history segments plus the active (not yet segmented) stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamHistory {
    pub source_sentences: Vec<Vec<String>>,
    pub target_sentences: Vec<Vec<String>>,
    pub active_source: Vec<String>,
    pub active_target_committed: Vec<String>,
}

impl StreamHistory {
    pub fn history_source_words(&self) -> usize {
        self.source_sentences.iter().map(Vec::len).sum()
    }

    pub fn history_target_words(&self) -> usize {
        self.target_sentences.iter().map(Vec::len).sum()
    }

    /// Source words held in memory: history plus active stream.
    pub fn buffered_source_words(&self) -> usize {
        self.history_source_words() + self.active_source.len()
    }
}

/// A committed target token and when it was committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub token: String,
    pub segment_ordinal: usize,
    pub nca_time_s: f64,
    pub ca_time_s: f64,
}

impl EmissionRecord {
    pub fn is_sep(&self) -> bool {
        is_sep(&self.token)
    }
}

/// Checks the log-level invariants: non-decreasing NCA time and
/// `nca_time_s <= ca_time_s` everywhere.
pub fn check_emission_log(log: &[EmissionRecord]) -> Result<()> {
    for (i, rec) in log.iter().enumerate() {
        if !(rec.nca_time_s.is_finite() && rec.ca_time_s.is_finite()) {
            return Err(Error::invalid(format!("record {i}: non-finite time")));
        }
        if rec.token.is_empty() || rec.token.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("record {i}: malformed token {:?}", rec.token)));
        }
        if rec.nca_time_s > rec.ca_time_s {
            return Err(Error::invalid(format!(
                "record {i}: nca time {} exceeds ca time {}",
                rec.nca_time_s, rec.ca_time_s
            )));
        }
        if i > 0 && log[i - 1].nca_time_s > rec.nca_time_s {
            return Err(Error::invalid(format!(
                "record {i}: nca time decreases ({} -> {})",
                log[i - 1].nca_time_s,
                rec.nca_time_s
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timed_word_rejects_bad_input() {
        assert!(TimedWord::new("ok", 0.0, 1.0).is_ok());
        assert!(TimedWord::new("", 0.0, 1.0).is_err());
        assert!(TimedWord::new("two words", 0.0, 1.0).is_err());
        assert!(TimedWord::new("late", 2.0, 1.0).is_err());
        assert!(TimedWord::new("neg", -0.5, 1.0).is_err());
        assert!(TimedWord::new(SEP, 0.0, 1.0).is_err());
        assert!(TimedWord::new("nan", f64::NAN, 1.0).is_err());
    }

    #[test]
    fn emission_log_checks() {
        let rec = |nca: f64, ca: f64| EmissionRecord {
            token: "x".into(),
            segment_ordinal: 0,
            nca_time_s: nca,
            ca_time_s: ca,
        };
        assert!(check_emission_log(&[rec(1.0, 1.0), rec(1.0, 2.0), rec(2.0, 2.5)]).is_ok());
        assert!(check_emission_log(&[rec(2.0, 1.0)]).is_err());
        assert!(check_emission_log(&[rec(2.0, 3.0), rec(1.0, 3.0)]).is_err());
    }
}
