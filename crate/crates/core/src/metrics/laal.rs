//! Per-segment length-adaptive average lagging over a resegmented stream.

use serde::{Deserialize, Serialize};

use super::stats::{latency_stats, LatencyStats};
use super::ReferenceSegment;
use crate::error::{Error, Result};
use crate::types::EmissionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyMode {
    /// Delays measured in source audio consumed.
    Nca,
    /// Delays including compute time.
    Ca,
}

impl LatencyMode {
    pub fn time_of(self, rec: &EmissionRecord) -> f64 {
        match self {
            LatencyMode::Nca => rec.nca_time_s,
            LatencyMode::Ca => rec.ca_time_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    #[serde(flatten)]
    pub stats: LatencyStats,
    /// (segment index, LAAL seconds)
    pub per_segment: Vec<(usize, f64)>,
}

/// LAAL of one segment. `delays[i]` is the emission time of hypothesis token
/// `i` relative to the segment's source start; an empty hypothesis lags by
/// the full duration.
pub fn segment_laal(delays: &[f64], duration_s: f64, ref_len: usize) -> f64 {
    if delays.is_empty() {
        return duration_s;
    }
    let rate = duration_s / delays.len().max(ref_len) as f64;
    let tau = delays
        .iter()
        .position(|d| *d >= duration_s)
        .map_or(delays.len(), |i| i + 1);
    let sum: f64 = delays[..tau]
        .iter()
        .enumerate()
        .map(|(i, d)| d - i as f64 * rate)
        .sum();
    sum / tau as f64
}

/// Scores a log against references given the resegmented hypothesis. The
/// log's non-sentinel tokens must equal the concatenated segments.
pub fn stream_laal(
    log: &[EmissionRecord],
    refs: &[ReferenceSegment],
    hyp_segments: &[Vec<String>],
    mode: LatencyMode,
) -> Result<LatencyReport> {
    if hyp_segments.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} hypothesis segments for {} references",
            hyp_segments.len(),
            refs.len()
        )));
    }
    let words: Vec<&EmissionRecord> = log.iter().filter(|r| !r.is_sep()).collect();
    let hyp_len: usize = hyp_segments.iter().map(Vec::len).sum();
    if words.len() != hyp_len {
        return Err(Error::invalid(format!(
            "log has {} tokens but the segments hold {hyp_len}",
            words.len()
        )));
    }
    let mut per_segment = Vec::with_capacity(refs.len());
    let mut at = 0;
    for (idx, (seg, r)) in hyp_segments.iter().zip(refs).enumerate() {
        let recs = &words[at..at + seg.len()];
        if let Some((k, (rec, tok))) = recs
            .iter()
            .zip(seg)
            .enumerate()
            .find(|(_, (rec, tok))| rec.token != **tok)
        {
            return Err(Error::invalid(format!(
                "log token {} is {:?} but segment {idx} expects {tok:?}",
                at + k,
                rec.token
            )));
        }
        let delays: Vec<f64> = recs
            .iter()
            .map(|rec| mode.time_of(rec) - r.source_start_s)
            .collect();
        per_segment.push((idx, segment_laal(&delays, r.duration_s(), r.tokens.len())));
        at += seg.len();
    }
    let values: Vec<f64> = per_segment.iter().map(|(_, v)| *v).collect();
    Ok(LatencyReport {
        stats: latency_stats(&values)?,
        per_segment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rate_example() {
        assert_eq!(segment_laal(&[1.0, 2.0, 3.0, 4.0], 4.0, 4), 1.0);
    }

    #[test]
    fn instant_emission_lags_negatively() {
        // -(T/|y|) * (tau - 1) / 2 with tau = |y| = 4, T = 4
        assert_eq!(segment_laal(&[0.0; 4], 4.0, 4), -1.5);
    }

    #[test]
    fn empty_segment_scores_duration() {
        assert_eq!(segment_laal(&[], 3.5, 7), 3.5);
    }

    #[test]
    fn cut_at_first_delay_past_duration() {
        // tau = 2: (1 + (5 - 1)) / 2 with rate 4/4
        assert_eq!(segment_laal(&[1.0, 5.0, 6.0, 7.0], 4.0, 4), 2.5);
    }

    fn rec(token: &str, t: f64, ca: f64) -> EmissionRecord {
        EmissionRecord {
            token: token.into(),
            segment_ordinal: 0,
            nca_time_s: t,
            ca_time_s: ca,
        }
    }

    #[test]
    fn report_and_mode() {
        let refs = vec![ReferenceSegment {
            tokens: vec!["a".into(), "b".into()],
            source_start_s: 1.0,
            source_end_s: 3.0,
        }];
        let log = vec![rec("a", 2.0, 2.5), rec("b", 3.0, 3.5), rec("[SEP]", 3.0, 3.5)];
        let segs = vec![vec!["a".to_string(), "b".to_string()]];
        let nca = stream_laal(&log, &refs, &segs, LatencyMode::Nca).unwrap();
        let ca = stream_laal(&log, &refs, &segs, LatencyMode::Ca).unwrap();
        assert_eq!(nca.stats.mean_s, 1.0);
        assert_eq!(ca.stats.mean_s, 1.5);
        let bad = vec![vec!["a".to_string(), "c".to_string()]];
        assert!(stream_laal(&log, &refs, &bad, LatencyMode::Nca).is_err());
    }
}
