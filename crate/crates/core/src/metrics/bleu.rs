//! Corpus BLEU with exponential smoothing over a whitespace-and-punctuation
//! tokenizer.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::textnorm::is_punctuation;

const MAX_ORDER: usize = 4;

/// Splits on whitespace, then peels leading and trailing punctuation
/// characters off each word as separate tokens.
pub fn tokenize<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    let mut out = Vec::new();
    for piece in words.iter().flat_map(|w| w.as_ref().split_whitespace()) {
        let chars: Vec<char> = piece.chars().collect();
        let lead = chars.iter().take_while(|c| is_punctuation(**c)).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(char::to_string));
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| is_punctuation(**c)).count();
        out.extend(chars[..lead].iter().map(char::to_string));
        out.push(chars[lead..chars.len() - trail].iter().collect());
        out.extend(chars[chars.len() - trail..].iter().map(char::to_string));
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Pooled n-gram statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub sys_len: usize,
    pub ref_len: usize,
    pub correct: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
}

pub fn bleu_stats<H: AsRef<str>, R: AsRef<str>>(hyps: &[Vec<H>], refs: &[Vec<R>]) -> Result<BleuStats> {
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} hypothesis segments for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let mut st = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize(h);
        let r = tokenize(r);
        st.sys_len += h.len();
        st.ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            st.total[n - 1] += h.len().saturating_sub(n - 1);
            st.correct[n - 1] += hc
                .iter()
                .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    Ok(st)
}

impl BleuStats {
    /// Score in [0, 100]. Orders without any hypothesis n-gram are left out
    /// of the geometric mean; orders with n-grams but no match get
    /// `1 / (2^k * total)` for the k-th such order.
    pub fn score(&self) -> f64 {
        if self.sys_len == 0 || self.correct[0] == 0 {
            return 0.0;
        }
        let mut smooth = 1.0;
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            if self.total[n] == 0 {
                break;
            }
            let p = if self.correct[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * self.total[n] as f64)
            } else {
                self.correct[n] as f64 / self.total[n] as f64
            };
            log_sum += p.ln();
            orders += 1;
        }
        let bp = if self.sys_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.sys_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hyps: &[Vec<H>], refs: &[Vec<R>]) -> Result<f64> {
    Ok(bleu_stats(hyps, refs)?.score())
}
