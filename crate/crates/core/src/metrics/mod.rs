//! Quality and latency evaluation of an emission log against timed
//! references: resegmentation, corpus BLEU and stream LAAL.

pub mod bleu;
pub mod laal;
pub mod reseg;
pub mod stats;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bleu::{corpus_bleu, tokenize};
pub use laal::{segment_laal, stream_laal, LatencyMode, LatencyReport};
pub use reseg::{resegment, Resegmentation};
pub use stats::{latency_stats, LatencyStats};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::types::{check_emission_log, EmissionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSegment {
    pub tokens: Vec<String>,
    pub source_start_s: f64,
    pub source_end_s: f64,
}

impl ReferenceSegment {
    pub fn duration_s(&self) -> f64 {
        self.source_end_s - self.source_start_s
    }
}

/// Segments must have positive finite spans, in order, without overlap.
pub fn validate_references(refs: &[ReferenceSegment]) -> Result<()> {
    if refs.is_empty() {
        return Err(Error::invalid("no reference segments"));
    }
    let mut prev_end = f64::NEG_INFINITY;
    for (i, r) in refs.iter().enumerate() {
        let finite = r.source_start_s.is_finite() && r.source_end_s.is_finite();
        if !finite || r.source_start_s >= r.source_end_s {
            return Err(Error::invalid(format!(
                "reference {i} has invalid span [{}, {}]",
                r.source_start_s, r.source_end_s
            )));
        }
        if r.source_start_s < prev_end {
            return Err(Error::invalid(format!(
                "reference {i} starts at {} before the previous segment ends at {prev_end}",
                r.source_start_s
            )));
        }
        prev_end = r.source_end_s;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bleu: f64,
    pub segments: usize,
    /// Segments whose resegmented hypothesis is empty.
    pub empty_segments: usize,
    pub resegmentation_cost: usize,
    pub nca: LatencyReport,
    pub ca: LatencyReport,
}

pub fn evaluate(log: &[EmissionRecord], refs: &[ReferenceSegment]) -> Result<MetricsReport> {
    validate_references(refs)?;
    check_emission_log(log)?;
    let hyp: Vec<&str> = log
        .iter()
        .filter(|r| !r.is_sep())
        .map(|r| r.token.as_str())
        .collect();
    let ref_tokens: Vec<&Vec<String>> = refs.iter().map(|r| &r.tokens).collect();
    let ref_tokens: Vec<Vec<&str>> = ref_tokens
        .iter()
        .map(|t| t.iter().map(String::as_str).collect())
        .collect();
    let reseg = resegment(&hyp, &ref_tokens);
    let bleu = corpus_bleu(&reseg.segments, &ref_tokens)?;
    Ok(MetricsReport {
        bleu,
        segments: refs.len(),
        empty_segments: reseg.segments.iter().filter(|s| s.is_empty()).count(),
        resegmentation_cost: reseg.cost,
        nca: stream_laal(log, refs, &reseg.segments, LatencyMode::Nca)?,
        ca: stream_laal(log, refs, &reseg.segments, LatencyMode::Ca)?,
    })
}

pub fn read_emission_log(path: &Path) -> Result<Vec<EmissionRecord>> {
    jsonl::read(path)
}

pub fn read_references(path: &Path) -> Result<Vec<ReferenceSegment>> {
    jsonl::read(path)
}
